#include "gsc/render.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "gsc/bytes.hpp"
#include "gsc/errors.hpp"

namespace gsc {

void Camera::validate() const {
  if (!(fx > 0) || !(fy > 0)) throw InvalidInput("camera focal lengths must be positive");
  if (width < 1 || height < 1) throw InvalidInput("camera resolution must be at least 1x1");
  const Mat3 rrt = rotation * rotation.transposed();
  if (frobenius(rrt - Mat3::identity()) > 1e-5) throw InvalidInput("camera rotation is not orthonormal");
  for (double v : {translation[0], translation[1], translation[2], cx, cy})
    if (!std::isfinite(v)) throw InvalidInput("camera parameters must be finite");
}

Vec3 Camera::center() const { return -1.0 * (rotation.transposed() * translation); }

namespace {
Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}
Vec3 normalized(const Vec3& v) { return (1.0 / norm(v)) * v; }
}  // namespace

Camera look_at(const Vec3& eye, const Vec3& target, double fov_x_deg, int width, int height) {
  const Vec3 f = normalized(target - eye);
  Vec3 up{0, 0, 1};
  if (std::abs(dot(f, up)) > 0.999) up = {0, 1, 0};
  const Vec3 r = normalized(cross(f, up));
  const Vec3 d = cross(f, r);
  Camera cam;
  for (int c = 0; c < 3; ++c) {
    cam.rotation(0, c) = r[c];
    cam.rotation(1, c) = d[c];
    cam.rotation(2, c) = f[c];
  }
  cam.translation = -1.0 * (cam.rotation * eye);
  cam.width = width;
  cam.height = height;
  cam.fx = cam.fy = 0.5 * width / std::tan(0.5 * fov_x_deg * M_PI / 180.0);
  cam.cx = 0.5 * (width - 1);
  cam.cy = 0.5 * (height - 1);
  return cam;
}

std::vector<Camera> ring_cameras(const Vec3& center, double radius, double height_offset, int count,
                                 double fov_x_deg, int width, int height) {
  std::vector<Camera> cams;
  for (int i = 0; i < count; ++i) {
    const double a = 2 * M_PI * i / count;
    const Vec3 eye = center + Vec3{radius * std::cos(a), radius * std::sin(a), height_offset};
    cams.push_back(look_at(eye, center, fov_x_deg, width, height));
  }
  return cams;
}

Image::Image(int w, int h, const Vec3& fill) : width(w), height(h), rgb(static_cast<std::size_t>(w) * h * 3) {
  for (std::size_t i = 0; i < rgb.size(); ++i) rgb[i] = static_cast<float>(fill[i % 3]);
}

Vec3 eval_sh(const Vec3& dir, const Vec3& dc, const ShRest& ac) {
  constexpr double C0 = 0.28209479177387814;
  constexpr double C1 = 0.4886025119029199;
  constexpr double C2[] = {1.0925484305920792, -1.0925484305920792, 0.31539156525252005, -1.0925484305920792,
                           0.5462742152960396};
  constexpr double C3[] = {-0.5900435899266435, 2.890611442640554, -0.4570457994644658, 0.3731763325901154,
                           -0.4570457994644658, 1.445305721320277, -0.5900435899266435};
  const double x = dir[0], y = dir[1], z = dir[2];
  const double xx = x * x, yy = y * y, zz = z * z;
  const double basis[15] = {-C1 * y,
                            C1 * z,
                            -C1 * x,
                            C2[0] * x * y,
                            C2[1] * y * z,
                            C2[2] * (2 * zz - xx - yy),
                            C2[3] * x * z,
                            C2[4] * (xx - yy),
                            C3[0] * y * (3 * xx - yy),
                            C3[1] * x * y * z,
                            C3[2] * y * (4 * zz - xx - yy),
                            C3[3] * z * (2 * zz - 3 * xx - 3 * yy),
                            C3[4] * x * (4 * zz - xx - yy),
                            C3[5] * z * (xx - yy),
                            C3[6] * x * (xx - 3 * yy)};
  Vec3 out;
  for (int c = 0; c < 3; ++c) {
    double v = C0 * dc[c];
    for (int k = 0; k < 15; ++k) v += basis[k] * ac[k * 3 + c];
    out[c] = v + 0.5;
  }
  return out;
}

std::optional<Splat2D> project_gaussian(const Camera& cam, const Vec3& mean, const Mat3& cov) {
  const Vec3 t = cam.rotation * mean + cam.translation;
  if (!(t[2] > kNearPlane)) return std::nullopt;
  const double iz = 1.0 / t[2];
  Splat2D s;
  s.u = cam.fx * t[0] * iz + cam.cx;
  s.v = cam.fy * t[1] * iz + cam.cy;
  s.depth = t[2];
  // Rows of J * W, with J the Jacobian of the pinhole projection at t.
  double jw[2][3];
  for (int c = 0; c < 3; ++c) {
    jw[0][c] = cam.fx * iz * cam.rotation(0, c) - cam.fx * t[0] * iz * iz * cam.rotation(2, c);
    jw[1][c] = cam.fy * iz * cam.rotation(1, c) - cam.fy * t[1] * iz * iz * cam.rotation(2, c);
  }
  double m[2][3] = {};
  for (int r = 0; r < 2; ++r)
    for (int c = 0; c < 3; ++c)
      for (int k = 0; k < 3; ++k) m[r][c] += jw[r][k] * cov(k, c);
  double out[2][2] = {};
  for (int r = 0; r < 2; ++r)
    for (int c = 0; c < 2; ++c)
      for (int k = 0; k < 3; ++k) out[r][c] += m[r][k] * jw[c][k];
  s.cov = {out[0][0] + kCovarianceFloor, 0.5 * (out[0][1] + out[1][0]), out[1][1] + kCovarianceFloor};
  return s;
}

namespace {

constexpr int kTile = 16;
constexpr double kCutoff = 4.5;  // half the squared Mahalanobis radius 3
constexpr double kMaxAlpha = 0.99;
constexpr double kMinTransmittance = 1e-4;

struct Prepared {
  double u, v;
  double ca, cb, cc;  // inverse 2D covariance
  double opacity;
  Vec3 color;
  double depth;
  std::uint32_t index;
  int x0, x1, y0, y1;  // inclusive pixel bounds
};

std::optional<Prepared> prepare_one(const GaussianCloud& cloud, std::size_t i, const Camera& cam, const Vec3& eye) {
  const double op = cloud.opacities[i];
  if (!(op > 0)) return std::nullopt;
  const Mat3 cov = covariance_from(cloud.rotations[i].canonical(), cloud.scales[i]);
  const auto s = project_gaussian(cam, cloud.positions[i], cov);
  if (!s) return std::nullopt;
  const double a = s->cov[0], b = s->cov[1], c = s->cov[2];
  const double det = a * c - b * b;
  if (!(det > 0)) return std::nullopt;
  const double mid = 0.5 * (a + c);
  const double lambda = mid + std::sqrt(std::max(0.0, mid * mid - det));
  const double r = 3.0 * std::sqrt(lambda);
  Prepared p;
  p.x0 = static_cast<int>(std::max(0.0, std::ceil(s->u - r)));
  p.x1 = static_cast<int>(std::min<double>(cam.width - 1, std::floor(s->u + r)));
  p.y0 = static_cast<int>(std::max(0.0, std::ceil(s->v - r)));
  p.y1 = static_cast<int>(std::min<double>(cam.height - 1, std::floor(s->v + r)));
  if (p.x0 > p.x1 || p.y0 > p.y1) return std::nullopt;
  p.u = s->u;
  p.v = s->v;
  p.ca = c / det;
  p.cb = -b / det;
  p.cc = a / det;
  p.opacity = op;
  p.depth = s->depth;
  p.index = static_cast<std::uint32_t>(i);
  p.color = eval_sh(normalized(cloud.positions[i] - eye), cloud.sh_dc[i], cloud.sh_ac[i]);
  return p;
}

struct Frame {
  std::vector<Prepared> splats;                  // sorted front to back
  std::vector<std::vector<std::uint32_t>> tiles;  // per tile, indices into splats
  int tiles_x = 0, tiles_y = 0;
};

Frame prepare(const GaussianCloud& cloud, const Camera& cam, bool parallel) {
  cam.validate();
  const Vec3 eye = cam.center();
  const std::size_t n = cloud.size();
  std::vector<std::optional<Prepared>> slots(n);
#pragma omp parallel for schedule(dynamic, 256) if (parallel)
  for (std::size_t i = 0; i < n; ++i) slots[i] = prepare_one(cloud, i, cam, eye);

  Frame f;
  for (auto& s : slots)
    if (s) f.splats.push_back(*s);
  std::sort(f.splats.begin(), f.splats.end(), [](const Prepared& a, const Prepared& b) {
    return a.depth != b.depth ? a.depth < b.depth : a.index < b.index;
  });
  f.tiles_x = (cam.width + kTile - 1) / kTile;
  f.tiles_y = (cam.height + kTile - 1) / kTile;
  f.tiles.resize(static_cast<std::size_t>(f.tiles_x) * f.tiles_y);
  for (std::uint32_t k = 0; k < f.splats.size(); ++k) {
    const Prepared& p = f.splats[k];
    for (int ty = p.y0 / kTile; ty <= p.y1 / kTile; ++ty)
      for (int tx = p.x0 / kTile; tx <= p.x1 / kTile; ++tx) f.tiles[ty * f.tiles_x + tx].push_back(k);
  }
  return f;
}

void shade_tile(const Frame& f, int tile, const Vec3& bg, Image& img) {
  const int tx = tile % f.tiles_x, ty = tile / f.tiles_x;
  const auto& list = f.tiles[tile];
  for (int y = ty * kTile; y < std::min(img.height, (ty + 1) * kTile); ++y)
    for (int x = tx * kTile; x < std::min(img.width, (tx + 1) * kTile); ++x) {
      double acc[3] = {0, 0, 0};
      double T = 1;
      for (std::uint32_t k : list) {
        const Prepared& p = f.splats[k];
        const double dx = x - p.u, dy = y - p.v;
        const double power = 0.5 * (p.ca * dx * dx + 2 * p.cb * dx * dy + p.cc * dy * dy);
        if (power > kCutoff) continue;
        const double alpha = std::min(kMaxAlpha, p.opacity * std::exp(-power));
        for (int c = 0; c < 3; ++c) acc[c] += p.color[c] * alpha * T;
        T *= 1 - alpha;
        if (T < kMinTransmittance) break;
      }
      for (int c = 0; c < 3; ++c) img.at(x, y, c) = static_cast<float>(std::clamp(acc[c] + T * bg[c], 0.0, 1.0));
    }
}

Image render_impl(const GaussianCloud& cloud, const Camera& cam, const Vec3& bg, bool parallel) {
  const Frame f = prepare(cloud, cam, parallel);
  Image img(cam.width, cam.height);
  const int tiles = f.tiles_x * f.tiles_y;
#pragma omp parallel for schedule(dynamic) if (parallel)
  for (int t = 0; t < tiles; ++t) shade_tile(f, t, bg, img);
  return img;
}

}  // namespace

Image render(const GaussianCloud& cloud, const Camera& cam, const Vec3& background) {
  return render_impl(cloud, cam, background, true);
}

Image render_serial(const GaussianCloud& cloud, const Camera& cam, const Vec3& background) {
  return render_impl(cloud, cam, background, false);
}

// ---------------------------------------------------------------------------
// Image files

void write_ppm(const Image& img, const std::filesystem::path& path) {
  std::string header = "P6\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
  std::vector<std::uint8_t> bytes(header.begin(), header.end());
  for (float v : img.rgb)
    bytes.push_back(static_cast<std::uint8_t>(std::lround(std::clamp(static_cast<double>(v), 0.0, 1.0) * 255)));
  write_file_atomic(path, bytes);
}

Image read_ppm(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  std::size_t pos = 0;
  auto token = [&]() {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#')
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      else if (std::isspace(bytes[pos]))
        ++pos;
      else
        break;
    }
    std::string t;
    while (pos < bytes.size() && !std::isspace(bytes[pos])) t += static_cast<char>(bytes[pos++]);
    return t;
  };
  if (token() != "P6") throw ParseError("not a binary PPM (P6) file", 0);
  int w = 0, h = 0, maxval = 0;
  try {
    w = std::stoi(token());
    h = std::stoi(token());
    maxval = std::stoi(token());
  } catch (const std::exception&) {
    throw ParseError("malformed PPM header", pos);
  }
  if (w < 1 || h < 1 || maxval != 255) throw ParseError("unsupported PPM dimensions or depth", pos);
  ++pos;  // single whitespace before the raster
  const std::size_t need = static_cast<std::size_t>(w) * h * 3;
  if (bytes.size() < pos + need) throw ParseError("PPM raster truncated", bytes.size());
  Image img(w, h);
  for (std::size_t i = 0; i < need; ++i) img.rgb[i] = static_cast<float>(bytes[pos + i] / 255.0);
  return img;
}

void write_image_raw(const Image& img, const std::filesystem::path& path) {
  ByteWriter w;
  w.u32(static_cast<std::uint32_t>(img.width));
  w.u32(static_cast<std::uint32_t>(img.height));
  for (float v : img.rgb) w.f32(v);
  write_file_atomic(path, w.buffer());
}

Image read_image_raw(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  try {
    ByteReader r(bytes);
    const std::uint32_t w = r.u32(), h = r.u32();
    if (w == 0 || h == 0 || std::uint64_t{w} * h * 12 != r.remaining())
      throw ParseError("raw image size does not match its header", 8);
    Image img(static_cast<int>(w), static_cast<int>(h));
    for (float& v : img.rgb) v = r.f32();
    return img;
  } catch (const DecodeError& e) {
    throw ParseError(e.what(), 0);
  }
}

Image read_image(const std::filesystem::path& path) {
  return path.extension() == ".ppm" ? read_ppm(path) : read_image_raw(path);
}

// ---------------------------------------------------------------------------
// Camera files

std::vector<Camera> parse_cameras(const std::string& text) {
  std::vector<Camera> cams;
  std::istringstream in(text);
  std::string line;
  std::size_t offset = 0;
  while (std::getline(in, line)) {
    const std::size_t line_offset = offset;
    offset += line.size() + 1;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream ls(line);
    double v[18];
    int k = 0;
    while (k < 18 && ls >> v[k]) ++k;
    std::string extra;
    if (k != 18 || (ls >> extra)) throw ParseError("camera line must hold exactly 18 numbers", line_offset);
    Camera c;
    for (int r = 0; r < 3; ++r) {
      for (int col = 0; col < 3; ++col) c.rotation(r, col) = v[r * 4 + col];
      c.translation[r] = v[r * 4 + 3];
    }
    c.fx = v[12];
    c.fy = v[13];
    c.cx = v[14];
    c.cy = v[15];
    if (v[16] != std::floor(v[16]) || v[17] != std::floor(v[17]) || v[16] > 1 << 16 || v[17] > 1 << 16)
      throw ParseError("camera resolution must be a pair of integers", line_offset);
    c.width = static_cast<int>(v[16]);
    c.height = static_cast<int>(v[17]);
    try {
      c.validate();
    } catch (const InvalidInput& e) {
      throw ParseError(e.what(), line_offset);
    }
    cams.push_back(c);
  }
  return cams;
}

std::string format_cameras(std::span<const Camera> cams) {
  std::ostringstream out;
  out << std::setprecision(17);
  out << "# r00 r01 r02 t0 r10 r11 r12 t1 r20 r21 r22 t2 fx fy cx cy width height\n";
  for (const Camera& c : cams) {
    for (int r = 0; r < 3; ++r) {
      for (int col = 0; col < 3; ++col) out << c.rotation(r, col) << ' ';
      out << c.translation[r] << ' ';
    }
    out << c.fx << ' ' << c.fy << ' ' << c.cx << ' ' << c.cy << ' ' << c.width << ' ' << c.height << '\n';
  }
  return out.str();
}

std::vector<Camera> read_cameras(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  return parse_cameras(std::string(bytes.begin(), bytes.end()));
}

void write_cameras(std::span<const Camera> cams, const std::filesystem::path& path) {
  const std::string text = format_cameras(cams);
  write_file_atomic(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

}  // namespace gsc
