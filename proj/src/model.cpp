#include "gsc/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>

#include "gsc/errors.hpp"

namespace gsc {

static_assert(std::endian::native == std::endian::little, "interchange I/O assumes a little-endian host");

namespace {

constexpr double kOpacityClamp = 1e-7;
constexpr int kPropertyCount = 62;

std::vector<std::string> property_names() {
  std::vector<std::string> names = {"x", "y", "z", "nx", "ny", "nz", "f_dc_0", "f_dc_1", "f_dc_2"};
  for (int i = 0; i < kShRestCount; ++i) names.push_back("f_rest_" + std::to_string(i));
  names.insert(names.end(), {"opacity", "scale_0", "scale_1", "scale_2", "rot_0", "rot_1", "rot_2", "rot_3"});
  return names;
}

// Reads one '\n'-terminated header line starting at pos.
std::optional<std::string_view> next_line(std::span<const std::uint8_t> bytes, std::size_t& pos) {
  const auto* begin = reinterpret_cast<const char*>(bytes.data());
  const auto* nl = static_cast<const char*>(std::memchr(begin + pos, '\n', bytes.size() - pos));
  if (nl == nullptr) return std::nullopt;
  std::string_view line(begin + pos, static_cast<std::size_t>(nl - (begin + pos)));
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  pos = static_cast<std::size_t>(nl - begin) + 1;
  return line;
}

std::vector<std::string> split_ws(std::string_view line) {
  std::istringstream in{std::string(line)};
  std::vector<std::string> out;
  for (std::string tok; in >> tok;) out.push_back(tok);
  return out;
}

}  // namespace

void GaussianCloud::resize(std::size_t n) {
  positions.resize(n);
  rotations.resize(n);
  scales.resize(n, Vec3{1, 1, 1});
  sh_dc.resize(n);
  sh_ac.resize(n, ShRest{});
  opacities.resize(n);
}

void GaussianCloud::reserve(std::size_t n) {
  positions.reserve(n);
  rotations.reserve(n);
  scales.reserve(n);
  sh_dc.reserve(n);
  sh_ac.reserve(n);
  opacities.reserve(n);
}

void GaussianCloud::push_from(const GaussianCloud& other, std::size_t i) {
  positions.push_back(other.positions[i]);
  rotations.push_back(other.rotations[i]);
  scales.push_back(other.scales[i]);
  sh_dc.push_back(other.sh_dc[i]);
  sh_ac.push_back(other.sh_ac[i]);
  opacities.push_back(other.opacities[i]);
}

void GaussianCloud::validate() const {
  const std::size_t n = positions.size();
  if (rotations.size() != n || scales.size() != n || sh_dc.size() != n || sh_ac.size() != n ||
      opacities.size() != n)
    throw InvalidInput("GaussianCloud: attribute arrays have different lengths");
  for (std::size_t i = 0; i < n; ++i) {
    const Quat& q = rotations[i];
    if (std::abs(q.norm() - 1) > 1e-6 || q.w < 0)
      throw InvalidInput("GaussianCloud: rotation " + std::to_string(i) + " is not a canonical unit quaternion");
    for (double s : scales[i])
      if (!(s > 0)) throw InvalidInput("GaussianCloud: scale " + std::to_string(i) + " is not positive");
    if (!(opacities[i] >= 0 && opacities[i] <= 1))
      throw InvalidInput("GaussianCloud: opacity " + std::to_string(i) + " outside [0, 1]");
  }
}

Mat3 covariance_from(const Quat& q, const Vec3& s) {
  if (std::abs(q.norm() - 1) > 1e-6) throw InvalidInput("covariance_from: quaternion is not unit norm");
  for (double v : s)
    if (!(v > 0)) throw InvalidInput("covariance_from: scale must be positive");
  const Mat3 r = rotation_matrix(q);
  const Mat3 d = Mat3::diag({s[0] * s[0], s[1] * s[1], s[2] * s[2]});
  return symmetrized(r * d * r.transposed());
}

double logistic(double x) { return 1 / (1 + std::exp(-x)); }

double logit(double p) {
  p = std::clamp(p, kOpacityClamp, 1 - kOpacityClamp);
  return std::log(p / (1 - p));
}

GaussianCloud read_model(std::span<const std::uint8_t> bytes) {
  std::size_t pos = 0;
  auto line = next_line(bytes, pos);
  if (!line || *line != "ply") throw ParseError("missing 'ply' magic", 0);

  std::optional<std::size_t> count;
  bool in_vertex = false;
  std::vector<std::string> props;
  bool format_seen = false;

  for (;;) {
    const std::size_t line_start = pos;
    line = next_line(bytes, pos);
    if (!line) throw ParseError("header not terminated by end_header", line_start);
    const auto tok = split_ws(*line);
    if (tok.empty() || tok[0] == "comment" || tok[0] == "obj_info") continue;
    if (tok[0] == "end_header") break;
    if (tok[0] == "format") {
      if (tok.size() < 2 || tok[1] != "binary_little_endian")
        throw ParseError("unsupported format variant '" + std::string(*line) + "'", line_start);
      format_seen = true;
    } else if (tok[0] == "element") {
      if (tok.size() != 3) throw ParseError("malformed element line", line_start);
      if (tok[1] == "vertex") {
        if (count) throw ParseError("duplicate vertex element", line_start);
        try {
          count = std::stoull(tok[2]);
        } catch (const std::exception&) {
          throw ParseError("bad vertex count '" + tok[2] + "'", line_start);
        }
        in_vertex = true;
      } else {
        if (tok[2] != "0") throw ParseError("unsupported element '" + tok[1] + "'", line_start);
        in_vertex = false;
      }
    } else if (tok[0] == "property") {
      if (!in_vertex) continue;
      if (tok.size() != 3 || (tok[1] != "float" && tok[1] != "float32"))
        throw ParseError("unsupported vertex property '" + std::string(*line) + "'", line_start);
      props.push_back(tok[2]);
    } else {
      throw ParseError("unexpected header line '" + std::string(*line) + "'", line_start);
    }
  }
  if (!format_seen) throw ParseError("missing format line", pos);
  if (!count) throw ParseError("missing vertex element", pos);

  std::unordered_map<std::string, std::size_t> column;
  for (std::size_t i = 0; i < props.size(); ++i) column.emplace(props[i], i);
  std::vector<std::size_t> col(kPropertyCount);
  const auto names = property_names();
  for (int i = 0; i < kPropertyCount; ++i) {
    auto it = column.find(names[i]);
    if (it == column.end()) throw ParseError("missing property '" + names[i] + "'", pos);
    col[i] = it->second;
  }

  const std::size_t stride = props.size() * sizeof(float);
  const std::size_t n = *count;
  if (n > 0 && (bytes.size() - pos) / stride < n)
    throw ParseError("truncated payload: expected " + std::to_string(n) + " records", bytes.size());

  GaussianCloud cloud;
  cloud.resize(n);
  std::vector<float> rec(props.size());
  for (std::size_t i = 0; i < n; ++i) {
    std::memcpy(rec.data(), bytes.data() + pos + i * stride, stride);
    auto f = [&](int idx) { return static_cast<double>(rec[col[idx]]); };
    cloud.positions[i] = {f(0), f(1), f(2)};
    cloud.sh_dc[i] = {f(6), f(7), f(8)};
    // File order is channel-major (all R, then G, then B).
    for (int ch = 0; ch < 3; ++ch)
      for (int b = 0; b < 15; ++b) cloud.sh_ac[i][b * 3 + ch] = f(9 + ch * 15 + b);
    cloud.opacities[i] = logistic(f(54));
    cloud.scales[i] = {std::exp(f(55)), std::exp(f(56)), std::exp(f(57))};
    Quat q{f(58), f(59), f(60), f(61)};
    if (!(q.norm() > 0) || !std::isfinite(q.norm()))
      throw ParseError("degenerate rotation in record " + std::to_string(i), pos + i * stride);
    // Quaternions that are already unit within float precision keep their
    // stored values so that a second write/read pass reproduces the bytes.
    if (std::abs(q.norm() - 1) <= 1e-6) {
      if (q.w < 0) q = {-q.w, -q.x, -q.y, -q.z};
      cloud.rotations[i] = q;
    } else {
      cloud.rotations[i] = q.canonical();
    }
  }
  return cloud;
}

std::vector<std::uint8_t> write_model(const GaussianCloud& cloud) {
  const std::size_t n = cloud.size();
  std::string header = "ply\nformat binary_little_endian 1.0\nelement vertex " + std::to_string(n) + "\n";
  for (const auto& name : property_names()) header += "property float " + name + "\n";
  header += "end_header\n";

  std::vector<std::uint8_t> out(header.begin(), header.end());
  const std::size_t base = out.size();
  out.resize(base + n * kPropertyCount * sizeof(float));
  std::array<float, kPropertyCount> rec{};
  for (std::size_t i = 0; i < n; ++i) {
    rec.fill(0.0f);
    for (int k = 0; k < 3; ++k) {
      rec[k] = static_cast<float>(cloud.positions[i][k]);
      rec[6 + k] = static_cast<float>(cloud.sh_dc[i][k]);
      rec[55 + k] = static_cast<float>(std::log(cloud.scales[i][k]));
    }
    for (int ch = 0; ch < 3; ++ch)
      for (int b = 0; b < 15; ++b) rec[9 + ch * 15 + b] = static_cast<float>(cloud.sh_ac[i][b * 3 + ch]);
    rec[54] = static_cast<float>(logit(cloud.opacities[i]));
    const Quat& q = cloud.rotations[i];
    rec[58] = static_cast<float>(q.w);
    rec[59] = static_cast<float>(q.x);
    rec[60] = static_cast<float>(q.y);
    rec[61] = static_cast<float>(q.z);
    std::memcpy(out.data() + base + i * sizeof(rec), rec.data(), sizeof(rec));
  }
  return out;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
      out.close();
      std::filesystem::remove(tmp);
      throw Error("short write to " + tmp.string());
    }
  }
  std::filesystem::rename(tmp, path);
}

GaussianCloud read_model_file(const std::filesystem::path& path) { return read_model(read_file_bytes(path)); }

void write_model_file(const GaussianCloud& cloud, const std::filesystem::path& path) {
  write_file_atomic(path, write_model(cloud));
}

}  // namespace gsc
