#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "gsc/errors.hpp"
#include "gsc/metrics.hpp"
#include "helpers.hpp"

using namespace gsc;
using namespace testing;

namespace {

Image random_image(std::mt19937_64& rng, int w, int h) {
  Image img(w, h);
  for (float& v : img.rgb) v = static_cast<float>(uniform(rng));
  return img;
}

RDCurve curve(std::vector<RDPoint> p) { return RDCurve{std::move(p)}; }

const RDCurve kRef = curve({{1000, 30}, {2000, 33}, {4000, 35.5}, {8000, 37.2}, {16000, 38.4}});

// Classical procedure on the raw variable: Vandermonde least squares, then
// composite Simpson integration of the polynomial difference.
double oracle_gap(const std::vector<double>& xr, const std::vector<double>& yr, const std::vector<double>& xt,
                  const std::vector<double>& yt) {
  auto fit = [](const std::vector<double>& x, const std::vector<double>& y) {
    Eigen::MatrixXd a(x.size(), 4);
    Eigen::VectorXd b(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
      a.row(static_cast<Eigen::Index>(i)) << 1, x[i], x[i] * x[i], x[i] * x[i] * x[i];
      b[static_cast<Eigen::Index>(i)] = y[i];
    }
    return Eigen::Vector4d(a.householderQr().solve(b));
  };
  const Eigen::Vector4d pr = fit(xr, yr), pt = fit(xt, yt);
  const double lo = std::max(*std::min_element(xr.begin(), xr.end()), *std::min_element(xt.begin(), xt.end()));
  const double hi = std::min(*std::max_element(xr.begin(), xr.end()), *std::max_element(xt.begin(), xt.end()));
  auto f = [&](double x) {
    const Eigen::Vector4d d = pt - pr;
    return d[0] + d[1] * x + d[2] * x * x + d[3] * x * x * x;
  };
  const int n = 2000;
  const double h = (hi - lo) / n;
  double s = f(lo) + f(hi);
  for (int i = 1; i < n; ++i) s += (i % 2 ? 4 : 2) * f(lo + i * h);
  return s * h / 3 / (hi - lo);
}

}  // namespace

TEST_CASE("psnr examples") {
  std::mt19937_64 rng(61);
  const Image a = random_image(rng, 16, 9);
  CHECK(psnr(a, a) == kPsnrCap);
  Image b(16, 9, {0.5, 0.5, 0.5}), c(16, 9, {0.51, 0.51, 0.51});
  CHECK(psnr(b, c) == doctest::Approx(40).epsilon(1e-5));
  CHECK(mse(b, c) == doctest::Approx(1e-4).epsilon(1e-5));
  CHECK_THROWS_AS(psnr(a, Image(9, 16)), InvalidInput);
  CHECK_THROWS_AS(psnr(Image(), Image()), InvalidInput);
}

TEST_CASE("psnr matches a direct computation") {
  std::mt19937_64 rng(62);
  for (int i = 0; i < 20; ++i) {
    const Image a = random_image(rng, 31, 17), b = random_image(rng, 31, 17);
    long double sum = 0;
    for (std::size_t k = 0; k < a.rgb.size(); ++k) sum += std::pow(static_cast<long double>(a.rgb[k]) - b.rgb[k], 2);
    const double direct = -10 * std::log10(static_cast<double>(sum / a.rgb.size()));
    CHECK(std::abs(psnr(a, b) - direct) < 1e-9);
    CHECK(psnr(a, b) == psnr(b, a));
  }
}

TEST_CASE("psnr falls as an offset grows") {
  const Image base(8, 8, {0.4, 0.4, 0.4});
  double prev = kPsnrCap + 1;
  for (double d : {0.001, 0.01, 0.05, 0.2}) {
    const double p = psnr(base, Image(8, 8, {0.4 + d, 0.4 + d, 0.4 + d}));
    CHECK(p < prev);
    prev = p;
  }
}

TEST_CASE("test loss") {
  std::mt19937_64 rng(63);
  GaussianCloud cloud = random_cloud(rng, 400, 0.8, 0.01, 0.1);
  const auto cams = ring_cameras({0, 0, 0}, 3, 0.5, 3, 60, 40, 30);
  std::vector<Image> refs;
  for (const auto& c : cams) refs.push_back(render(cloud, c));
  const TestLoss same = test_loss(cloud, cams, refs);
  CHECK(same.mse == 0);
  CHECK(same.psnr == kPsnrCap);

  const std::vector<Image> one{Image(4, 4, {0.2, 0.2, 0.2})}, off{Image(4, 4, {0.21, 0.21, 0.21})};
  CHECK(test_loss(one, off).mse == doctest::Approx(1e-4).epsilon(1e-5));

  // Direct per-pixel accumulation over views.
  std::vector<Image> noisy = refs;
  for (auto& img : noisy)
    for (float& v : img.rgb) v = static_cast<float>(std::clamp(v + 0.05 * uniform(rng, -1, 1), 0.0, 1.0));
  double total = 0, psnr_sum = 0;
  for (std::size_t v = 0; v < refs.size(); ++v) {
    double s = 0;
    for (std::size_t k = 0; k < refs[v].rgb.size(); ++k) s += std::pow(double(noisy[v].rgb[k]) - refs[v].rgb[k], 2);
    s /= static_cast<double>(refs[v].rgb.size());
    total += s;
    psnr_sum += -10 * std::log10(s);
  }
  const TestLoss l = test_loss(cloud, cams, noisy);
  CHECK(l.mse == doctest::Approx(total / 3).epsilon(1e-12));
  CHECK(l.psnr == doctest::Approx(psnr_sum / 3).epsilon(1e-12));

  CHECK_THROWS_AS(test_loss(cloud, cams, std::vector<Image>(2)), InvalidInput);
}

TEST_CASE("bjontegaard closed forms") {
  const BdResult same = bd_metrics(kRef, kRef);
  CHECK(std::abs(same.bd_rate) < 1e-9);
  CHECK(std::abs(same.bd_psnr) < 1e-9);

  RDCurve up = kRef;
  for (auto& p : up.points) p.psnr += 1;
  CHECK(std::abs(bd_metrics(kRef, up).bd_psnr - 1) <= 1e-6);

  RDCurve twice = kRef;
  for (auto& p : twice.points) p.bits *= 2;
  CHECK(std::abs(bd_metrics(kRef, twice).bd_rate - 100) <= 1e-4);
}

TEST_CASE("bjontegaard agrees with the classical computation") {
  std::mt19937_64 rng(64);
  for (int trial = 0; trial < 50; ++trial) {
    RDCurve a, b;
    double ra = uniform(rng, 1e4, 2e4), rb = uniform(rng, 1e4, 2e4);
    double pa = uniform(rng, 25, 30), pb = uniform(rng, 25, 30);
    const int n = 4 + static_cast<int>(rng() % 3);
    for (int i = 0; i < n; ++i) {
      a.points.push_back({ra, pa});
      b.points.push_back({rb, pb});
      ra *= uniform(rng, 1.4, 2.2);
      rb *= uniform(rng, 1.4, 2.2);
      pa += uniform(rng, 1, 3);
      pb += uniform(rng, 1, 3);
    }
    std::vector<double> lra, psa, lrb, psb;
    for (auto& p : a.points) {
      lra.push_back(std::log10(p.bits));
      psa.push_back(p.psnr);
    }
    for (auto& p : b.points) {
      lrb.push_back(std::log10(p.bits));
      psb.push_back(p.psnr);
    }
    const BdResult r = bd_metrics(a, b);
    CHECK(r.bd_psnr == doctest::Approx(oracle_gap(lra, psa, lrb, psb)).epsilon(1e-6));
    const double rate = (std::pow(10.0, oracle_gap(psa, lra, psb, lrb)) - 1) * 100;
    CHECK(r.bd_rate == doctest::Approx(rate).epsilon(1e-6));

    const BdResult s = bd_metrics(b, a);
    CHECK(s.bd_psnr == doctest::Approx(-r.bd_psnr).epsilon(1e-12));
    CHECK(std::abs(s.bd_rate - (-r.bd_rate / (1 + r.bd_rate / 100))) < 1e-6);
  }
}

TEST_CASE("bjontegaard input checks") {
  CHECK_THROWS_AS(bd_metrics(curve({{1, 1}, {2, 2}, {3, 3}}), kRef), InvalidInput);
  CHECK_THROWS_AS(bd_metrics(curve({{1, 1}, {3, 2}, {2, 3}, {4, 4}}), kRef), InvalidInput);
  CHECK_THROWS_AS(bd_metrics(curve({{0, 1}, {3, 2}, {4, 3}, {5, 4}}), kRef), InvalidInput);
  const RDCurve far = curve({{1e9, 30}, {2e9, 33}, {4e9, 35.5}, {8e9, 37.2}});
  try {
    bd_metrics(kRef, far);
    FAIL("expected an overlap error");
  } catch (const InvalidInput& e) {
    CHECK(std::string(e.what()).find("do not overlap") != std::string::npos);
  }
}

TEST_CASE("rd csv") {
  const std::vector<RDRow> rows{{"uniform", 1e5, 30.5}, {"adaptive", 8e4, 30.25}, {"uniform", 5e4, 28}};
  const std::string text = format_rd_csv(rows);
  CHECK(text.rfind("label,bits,psnr\n", 0) == 0);
  const auto back = parse_rd_csv(text);
  REQUIRE(back.size() == 3);
  CHECK(back[1].label == "adaptive");
  CHECK(back[1].bits == 8e4);
  CHECK(back[2].psnr == 28);
  const RDCurve u = curve_for(back, "uniform");
  REQUIRE(u.points.size() == 2);
  CHECK(u.points[0].bits == 5e4);

  CHECK_THROWS_AS(parse_rd_csv(""), ParseError);
  CHECK_THROWS_AS(parse_rd_csv("a,b,c\n"), ParseError);
  CHECK_THROWS_AS(parse_rd_csv("label,bits,psnr\nx,1\n"), ParseError);
  CHECK_THROWS_AS(parse_rd_csv("label,bits,psnr\nx,1,2,3\n"), ParseError);
  CHECK_THROWS_AS(parse_rd_csv("label,bits,psnr\nx,1q,2\n"), ParseError);
  CHECK_THROWS_AS(format_rd_csv(std::vector<RDRow>{{"a,b", 1, 2}}), InvalidInput);
  CHECK(parse_rd_csv("label,bits,psnr\r\nx,1,2\r\n").size() == 1);
}
