#include "gsc/metrics.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

#include "gsc/errors.hpp"

namespace gsc {

double mse(const Image& a, const Image& b) {
  if (a.width != b.width || a.height != b.height || a.rgb.size() != b.rgb.size())
    throw InvalidInput("image sizes differ: " + std::to_string(a.width) + "x" + std::to_string(a.height) + " vs " +
                       std::to_string(b.width) + "x" + std::to_string(b.height));
  if (a.rgb.empty()) throw InvalidInput("empty image");
  double sum = 0;
  for (std::size_t i = 0; i < a.rgb.size(); ++i) {
    const double d = static_cast<double>(a.rgb[i]) - static_cast<double>(b.rgb[i]);
    sum += d * d;
  }
  return sum / static_cast<double>(a.rgb.size());
}

namespace {
double psnr_of(double m) { return m > 0 ? std::min(kPsnrCap, -10.0 * std::log10(m)) : kPsnrCap; }
}  // namespace

double psnr(const Image& a, const Image& b) { return psnr_of(mse(a, b)); }

TestLoss test_loss(std::span<const Image> rendered, std::span<const Image> reference) {
  if (rendered.size() != reference.size() || rendered.empty())
    throw InvalidInput("test loss needs one reference image per view");
  TestLoss out;
  for (std::size_t v = 0; v < rendered.size(); ++v) {
    const double m = mse(rendered[v], reference[v]);
    out.mse += m;
    out.psnr += psnr_of(m);
  }
  out.mse /= static_cast<double>(rendered.size());
  out.psnr /= static_cast<double>(rendered.size());
  return out;
}

TestLoss test_loss(const GaussianCloud& cloud, std::span<const Camera> cameras, std::span<const Image> reference,
                   const Vec3& background) {
  std::vector<Image> rendered;
  rendered.reserve(cameras.size());
  for (const Camera& c : cameras) rendered.push_back(render(cloud, c, background));
  return test_loss(rendered, reference);
}

void RDCurve::validate() const {
  if (points.size() < 4) throw InvalidInput("an R-D curve needs at least 4 points");
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!(points[i].bits > 0) || !std::isfinite(points[i].bits)) throw InvalidInput("R-D rates must be positive");
    if (!std::isfinite(points[i].psnr)) throw InvalidInput("R-D PSNR values must be finite");
    if (i > 0 && !(points[i].bits > points[i - 1].bits))
      throw InvalidInput("R-D rates must be strictly increasing");
  }
}

namespace {

// Cubic in the normalized variable t = (x - shift) / scale.
struct Cubic {
  Eigen::Vector4d c;
  double shift, scale;

  double integral(double x0, double x1) const {
    auto prim = [&](double x) {
      const double t = (x - shift) / scale;
      return scale * (c[0] * t + c[1] * t * t / 2 + c[2] * t * t * t / 3 + c[3] * t * t * t * t / 4);
    };
    return prim(x1) - prim(x0);
  }
};

Cubic fit_cubic(const std::vector<double>& x, const std::vector<double>& y) {
  const auto [lo, hi] = std::minmax_element(x.begin(), x.end());
  Cubic f;
  f.shift = (*lo + *hi) / 2;
  f.scale = (*hi - *lo) / 2;
  if (!(f.scale > 0)) throw InvalidInput("R-D curve has no spread to fit");
  Eigen::MatrixXd a(x.size(), 4);
  Eigen::VectorXd b(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double t = (x[i] - f.shift) / f.scale;
    a.row(static_cast<Eigen::Index>(i)) << 1, t, t * t, t * t * t;
    b[static_cast<Eigen::Index>(i)] = y[i];
  }
  f.c = a.colPivHouseholderQr().solve(b);
  return f;
}

double average_gap(const std::vector<double>& x_ref, const std::vector<double>& y_ref,
                   const std::vector<double>& x_test, const std::vector<double>& y_test, const char* axis) {
  const double lo = std::max(*std::min_element(x_ref.begin(), x_ref.end()),
                             *std::min_element(x_test.begin(), x_test.end()));
  const double hi = std::min(*std::max_element(x_ref.begin(), x_ref.end()),
                             *std::max_element(x_test.begin(), x_test.end()));
  if (!(hi > lo)) {
    std::ostringstream msg;
    msg << "R-D curves do not overlap in " << axis << ": gap from " << hi << " to " << lo;
    throw InvalidInput(msg.str());
  }
  const Cubic fr = fit_cubic(x_ref, y_ref), ft = fit_cubic(x_test, y_test);
  return (ft.integral(lo, hi) - fr.integral(lo, hi)) / (hi - lo);
}

}  // namespace

BdResult bd_metrics(const RDCurve& reference, const RDCurve& test) {
  reference.validate();
  test.validate();
  std::vector<double> lr_ref, ps_ref, lr_test, ps_test;
  for (const auto& p : reference.points) {
    lr_ref.push_back(std::log10(p.bits));
    ps_ref.push_back(p.psnr);
  }
  for (const auto& p : test.points) {
    lr_test.push_back(std::log10(p.bits));
    ps_test.push_back(p.psnr);
  }
  BdResult r;
  r.bd_psnr = average_gap(lr_ref, ps_ref, lr_test, ps_test, "log10 rate");
  r.bd_rate = (std::pow(10.0, average_gap(ps_ref, lr_ref, ps_test, lr_test, "PSNR")) - 1) * 100;
  return r;
}

std::string format_rd_csv(std::span<const RDRow> rows) {
  std::ostringstream out;
  out << "label,bits,psnr\n" << std::setprecision(17);
  for (const auto& r : rows) {
    if (r.label.find_first_of(",\n\"") != std::string::npos)
      throw InvalidInput("R-D label must not contain commas, quotes or newlines");
    out << r.label << ',' << r.bits << ',' << r.psnr << '\n';
  }
  return out.str();
}

std::vector<RDRow> parse_rd_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::size_t offset = 0;
  if (!std::getline(in, line)) throw ParseError("empty R-D CSV", 0);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "label,bits,psnr") throw ParseError("R-D CSV header must be 'label,bits,psnr'", 0);
  offset += line.size() + 1;
  std::vector<RDRow> rows;
  while (std::getline(in, line)) {
    const std::size_t at = offset;
    offset += line.size() + 1;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto c1 = line.find(','), c2 = line.find(',', c1 == std::string::npos ? c1 : c1 + 1);
    if (c1 == std::string::npos || c2 == std::string::npos || line.find(',', c2 + 1) != std::string::npos)
      throw ParseError("R-D CSV row must have three fields", at);
    RDRow r;
    r.label = line.substr(0, c1);
    try {
      std::size_t used = 0;
      const std::string b = line.substr(c1 + 1, c2 - c1 - 1), p = line.substr(c2 + 1);
      r.bits = std::stod(b, &used);
      if (used != b.size()) throw std::invalid_argument("bits");
      r.psnr = std::stod(p, &used);
      if (used != p.size()) throw std::invalid_argument("psnr");
    } catch (const std::exception&) {
      throw ParseError("R-D CSV row has a malformed number", at);
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

RDCurve curve_for(std::span<const RDRow> rows, const std::string& label) {
  RDCurve c;
  for (const auto& r : rows)
    if (r.label == label) c.points.push_back({r.bits, r.psnr});
  std::sort(c.points.begin(), c.points.end(), [](const RDPoint& a, const RDPoint& b) { return a.bits < b.bits; });
  return c;
}

}  // namespace gsc
