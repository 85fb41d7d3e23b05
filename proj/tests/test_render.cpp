#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <omp.h>
#include <random>

#include "gsc/errors.hpp"
#include "gsc/render.hpp"
#include "helpers.hpp"

using namespace gsc;
using namespace testing;

namespace {

constexpr double kC0 = 0.28209479177387814;

Camera axis_camera(int size, double f) {
  Camera c;
  c.fx = c.fy = f;
  c.cx = c.cy = (size - 1) / 2.0;
  c.width = c.height = size;
  return c;
}

GaussianCloud single(const Vec3& pos, double scale, double opacity, const Vec3& rgb) {
  GaussianCloud c;
  c.resize(1);
  c.positions[0] = pos;
  c.scales[0] = {scale, scale, scale};
  c.opacities[0] = opacity;
  for (int k = 0; k < 3; ++k) c.sh_dc[0][k] = (rgb[k] - 0.5) / kC0;
  return c;
}

void append(GaussianCloud& dst, const GaussianCloud& src) {
  for (std::size_t i = 0; i < src.size(); ++i) {
    dst.positions.push_back(src.positions[i]);
    dst.rotations.push_back(src.rotations[i]);
    dst.scales.push_back(src.scales[i]);
    dst.sh_dc.push_back(src.sh_dc[i]);
    dst.sh_ac.push_back(src.sh_ac[i]);
    dst.opacities.push_back(src.opacities[i]);
  }
}

bool uniform_image(const Image& img, const Vec3& bg) {
  for (std::size_t i = 0; i < img.rgb.size(); ++i)
    if (img.rgb[i] != static_cast<float>(bg[i % 3])) return false;
  return true;
}

std::array<double, 2> pinhole(const Camera& c, const Vec3& x) {
  const Vec3 t = c.rotation * x + c.translation;
  return {c.fx * t[0] / t[2] + c.cx, c.fy * t[1] / t[2] + c.cy};
}

}  // namespace

TEST_CASE("sh evaluation") {
  const ShRest zero{};
  const Vec3 g = eval_sh({0, 0, 1}, {0, 0, 0}, zero);
  for (double v : g) CHECK(v == 0.5);
  const Vec3 r = eval_sh({1, 0, 0}, {1 / kC0, 0, 0}, zero);
  CHECK(r[0] == doctest::Approx(1.5).epsilon(1e-15));
  CHECK(r[1] == 0.5);

  std::mt19937_64 rng(51);
  const Vec3 dc{0.3, -0.7, 1.1};
  const Vec3 ref = eval_sh({0, 1, 0}, dc, zero);
  for (int i = 0; i < 20; ++i) {
    const Quat q = random_quat(rng);
    const Vec3 dir = rotation_matrix(q) * Vec3{1, 0, 0};
    CHECK(eval_sh(dir, dc, zero) == ref);
  }

  // Each degree-1 basis function is odd in the direction.
  ShRest ac{};
  for (double& v : ac) v = uniform(rng, -1, 1);
  for (int k = 9; k < 45; ++k) ac[k] = 0;
  const Vec3 d{0.48, -0.6, 0.64};
  const Vec3 a = eval_sh(d, {0, 0, 0}, ac), b = eval_sh(-1.0 * d, {0, 0, 0}, ac);
  for (int c = 0; c < 3; ++c) CHECK(a[c] - 0.5 == doctest::Approx(-(b[c] - 0.5)).epsilon(1e-12));
}

TEST_CASE("projection on the optical axis") {
  const Camera cam = axis_camera(64, 100);
  const double sigma = 0.05, z = 4;
  const auto s = project_gaussian(cam, {0, 0, z}, Mat3::diag({sigma * sigma, sigma * sigma, sigma * sigma}));
  REQUIRE(s);
  const double e = std::pow(100 * sigma / z, 2);
  CHECK(s->cov[0] == doctest::Approx(e + 0.3).epsilon(1e-12));
  CHECK(s->cov[2] == doctest::Approx(e + 0.3).epsilon(1e-12));
  CHECK(std::abs(s->cov[1]) < 1e-15);
  CHECK(s->u == doctest::Approx(cam.cx));
  CHECK(s->depth == z);

  const auto far = project_gaussian(cam, {0, 0, 2 * z}, Mat3::diag({sigma * sigma, sigma * sigma, sigma * sigma}));
  CHECK(std::sqrt(far->cov[0] - 0.3) == doctest::Approx(0.5 * std::sqrt(s->cov[0] - 0.3)).epsilon(1e-12));

  CHECK(!project_gaussian(cam, {0, 0, 0.005}, Mat3::identity()));
  CHECK(!project_gaussian(cam, {0, 0, -1}, Mat3::identity()));
}

TEST_CASE("projection matches a finite-difference Jacobian") {
  std::mt19937_64 rng(52);
  for (int trial = 0; trial < 200; ++trial) {
    const Vec3 eye{uniform(rng, -5, 5), uniform(rng, -5, 5), uniform(rng, -5, 5)};
    const Vec3 target{uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -1, 1)};
    const Camera cam = look_at(eye, target, uniform(rng, 30, 90), 200, 150);
    const Vec3 mean = target + Vec3{uniform(rng, -0.5, 0.5), uniform(rng, -0.5, 0.5), uniform(rng, -0.5, 0.5)};
    const Mat3 cov = random_spd(rng, 0.001, 0.05);
    const auto s = project_gaussian(cam, mean, cov);
    if (!s) continue;

    double jac[2][3];
    const double h = 1e-6;
    for (int a = 0; a < 3; ++a) {
      Vec3 p = mean, m = mean;
      p[a] += h;
      m[a] -= h;
      const auto fp = pinhole(cam, p), fm = pinhole(cam, m);
      for (int r = 0; r < 2; ++r) jac[r][a] = (fp[r] - fm[r]) / (2 * h);
    }
    double o[2][2] = {};
    for (int r = 0; r < 2; ++r)
      for (int c = 0; c < 2; ++c)
        for (int i = 0; i < 3; ++i)
          for (int j = 0; j < 3; ++j) o[r][c] += jac[r][i] * cov(i, j) * jac[c][j];
    const double scale = std::max({std::abs(o[0][0]), std::abs(o[1][1]), 1e-9});
    CHECK(std::abs(s->cov[0] - 0.3 - o[0][0]) <= 1e-3 * scale);
    CHECK(std::abs(s->cov[1] - o[0][1]) <= 1e-3 * scale);
    CHECK(std::abs(s->cov[2] - 0.3 - o[1][1]) <= 1e-3 * scale);
    const auto uv = pinhole(cam, mean);
    CHECK(s->u == doctest::Approx(uv[0]).epsilon(1e-12));
    CHECK(s->v == doctest::Approx(uv[1]).epsilon(1e-12));
    CHECK(s->cov[0] * s->cov[2] - s->cov[1] * s->cov[1] > 0);
  }
}

TEST_CASE("empty and transparent scenes show the background") {
  const Camera cam = axis_camera(40, 50);
  const Vec3 bg{0.2, 0.4, 0.6};
  CHECK(uniform_image(render(GaussianCloud{}, cam, bg), bg));
  std::mt19937_64 rng(53);
  GaussianCloud c = random_cloud(rng, 200, 1);
  for (auto& p : c.positions) p[2] += 4;
  for (double& o : c.opacities) o = 0;
  CHECK(uniform_image(render(c, cam, bg), bg));
}

TEST_CASE("single gaussian profile") {
  const int size = 33;
  const Camera cam = axis_camera(size, 200);
  const Vec3 color{0.9, 0.3, 0.6};
  const GaussianCloud c = single({0, 0, 5}, 0.08, 0.95, color);
  const Image img = render(c, cam);
  const int mid = size / 2;
  double best = 1e9;
  int bx = -1, by = -1;
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      double d = 0;
      for (int k = 0; k < 3; ++k) d += std::pow(img.at(x, y, k) - color[k], 2);
      if (d < best) {
        best = d;
        bx = x;
        by = y;
      }
    }
  CHECK(bx == mid);
  CHECK(by == mid);
  CHECK(img.at(mid, mid, 0) == doctest::Approx(0.95 * 0.9).epsilon(1e-6));
  for (int k = 1; mid + k < size; ++k) {
    CHECK(img.at(mid + k, mid, 0) <= img.at(mid + k - 1, mid, 0));
    CHECK(img.at(mid, mid - k, 0) <= img.at(mid, mid - k + 1, 0));
  }
  CHECK(img.at(mid + 1, mid, 0) < img.at(mid, mid, 0));
}

TEST_CASE("occlusion") {
  const int size = 21;
  const Camera cam = axis_camera(size, 100);
  const int mid = size / 2;
  const GaussianCloud far = single({0, 0, 10}, 0.2, 1.0, {1, 1, 1});
  GaussianCloud scene = single({0, 0, 3}, 0.3, 1.0, {0, 0, 0});
  append(scene, far);
  const double with_far = render(scene, cam).at(mid, mid, 0);
  // The near splat caps alpha at 0.99, so the far one keeps at most 1% of its weight.
  CHECK(with_far <= 0.01 * 0.99 + 1e-7);
  CHECK(with_far > 0);

  // Two stacked opaque occluders leave less than 1e-3.
  GaussianCloud stacked = single({0, 0, 3}, 0.3, 1.0, {0, 0, 0});
  append(stacked, single({0, 0, 3.5}, 0.3, 1.0, {0, 0, 0}));
  append(stacked, far);
  CHECK(render(stacked, cam).at(mid, mid, 0) < 1e-3);

  // Order comes from depth, not from the input index.
  GaussianCloud reversed = far;
  append(reversed, single({0, 0, 3}, 0.3, 1.0, {0, 0, 0}));
  CHECK(render(reversed, cam).at(mid, mid, 0) == static_cast<float>(with_far));
}

TEST_CASE("low opacity response is linear") {
  const int size = 21;
  const Camera cam = axis_camera(size, 100);
  const int mid = size / 2;
  const Vec3 bg{0.1, 0.1, 0.1};
  std::vector<double> slope;
  for (double a : {1e-4, 1e-3, 5e-3, 1e-2}) {
    const Image img = render(single({0, 0, 4}, 0.1, a, {0.9, 0.9, 0.9}), cam, bg);
    slope.push_back((img.at(mid, mid, 1) - 0.1f) / a);
  }
  for (double s : slope) CHECK(s == doctest::Approx(slope.back()).epsilon(0.01));
}

TEST_CASE("parallel and serial renders are bit identical") {
  std::mt19937_64 rng(54);
  const auto cams = ring_cameras({0, 0, 0}, 3, 0.8, 3, 60, 97, 61);
  for (int scene = 0; scene < 3; ++scene) {
    GaussianCloud c = random_cloud(rng, 3000, 1, 0.005, 0.08);
    for (const auto& cam : cams) {
      omp_set_num_threads(1);
      const Image one = render(c, cam, {0.1, 0.2, 0.3});
      omp_set_num_threads(4);
      const Image four = render(c, cam, {0.1, 0.2, 0.3});
      const Image ref = render_serial(c, cam, {0.1, 0.2, 0.3});
      CHECK(one == four);
      CHECK(four == ref);
    }
  }
  omp_set_num_threads(omp_get_num_procs());
}

TEST_CASE("output stays in range") {
  std::mt19937_64 rng(55);
  GaussianCloud c = random_cloud(rng, 500, 1, 0.02, 0.2);
  for (auto& dc : c.sh_dc) dc = {5, -5, 2};
  const Image img = render(c, ring_cameras({0, 0, 0}, 3, 0, 1, 60, 50, 50)[0]);
  for (float v : img.rgb) {
    CHECK(v >= 0);
    CHECK(v <= 1);
  }
}

TEST_CASE("camera construction and validation") {
  const Camera c = look_at({3, 0, 0}, {0, 0, 0}, 90, 100, 80);
  CHECK_NOTHROW(c.validate());
  const Vec3 eye = c.center();
  for (int k = 0; k < 3; ++k) CHECK(eye[k] == doctest::Approx(Vec3{3, 0, 0}[k]).epsilon(1e-12));
  // The target sits on the optical axis in front of the camera.
  const auto s = project_gaussian(c, {0, 0, 0}, Mat3::identity());
  REQUIRE(s);
  CHECK(s->u == doctest::Approx(c.cx));
  CHECK(s->v == doctest::Approx(c.cy));
  CHECK(s->depth == doctest::Approx(3));
  // World +z projects upwards (smaller row index).
  CHECK(project_gaussian(c, {0, 0, 0.5}, Mat3::identity())->v < c.cy);
  CHECK(c.fx == doctest::Approx(50));

  Camera bad = c;
  bad.fx = 0;
  CHECK_THROWS_AS(bad.validate(), InvalidInput);
  bad = c;
  bad.rotation(0, 0) = 2;
  CHECK_THROWS_AS(bad.validate(), InvalidInput);
  bad = c;
  bad.width = 0;
  CHECK_THROWS_AS(bad.validate(), InvalidInput);

  const auto ring = ring_cameras({1, 2, 3}, 2, 0.5, 8, 50, 64, 64);
  CHECK(ring.size() == 8);
  for (const auto& r : ring) {
    const Vec3 e = r.center();
    CHECK(std::hypot(e[0] - 1, e[1] - 2) == doctest::Approx(2));
    CHECK(e[2] == doctest::Approx(3.5));
  }
}

TEST_CASE("camera file round trip and errors") {
  const auto cams = ring_cameras({0, 0, 0}, 3, 1, 4, 50, 128, 96);
  const auto back = parse_cameras(format_cameras(cams));
  REQUIRE(back.size() == cams.size());
  for (std::size_t i = 0; i < cams.size(); ++i) {
    CHECK(back[i].rotation.m == cams[i].rotation.m);
    CHECK(back[i].translation == cams[i].translation);
    CHECK(back[i].fx == cams[i].fx);
    CHECK(back[i].width == 128);
  }
  CHECK(parse_cameras("# nothing\n\n").empty());
  CHECK_THROWS_AS(parse_cameras("1 0 0 0 0 1 0 0 0 0 1 0 10 10 5 5 16\n"), ParseError);
  CHECK_THROWS_AS(parse_cameras("1 0 0 0 0 1 0 0 0 0 1 0 10 10 5 5 16 16 3\n"), ParseError);
  CHECK_THROWS_AS(parse_cameras("1 0 0 0 0 1 0 0 0 0 1 0 -10 10 5 5 16 16\n"), ParseError);
  CHECK_THROWS_AS(parse_cameras("2 0 0 0 0 1 0 0 0 0 1 0 10 10 5 5 16 16\n"), ParseError);
  CHECK_THROWS_AS(parse_cameras("1 0 0 0 0 1 0 0 0 0 1 0 10 10 5 5 16.5 16\n"), ParseError);
  try {
    parse_cameras("# header\n1 0 0 0 0 1 0 0 0 0 1 0 10 10 5 5 16\n");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.offset() == 9);
  }
}

TEST_CASE("image files") {
  const auto dir = std::filesystem::temp_directory_path() / "gsc_render_test";
  std::filesystem::create_directories(dir);
  Image img(5, 3);
  for (std::size_t i = 0; i < img.rgb.size(); ++i) img.rgb[i] = static_cast<float>(i) / 45.0f;

  write_image_raw(img, dir / "a.raw");
  CHECK(read_image(dir / "a.raw") == img);
  write_ppm(img, dir / "a.ppm");
  const Image p = read_image(dir / "a.ppm");
  REQUIRE(p.width == 5);
  REQUIRE(p.height == 3);
  for (std::size_t i = 0; i < img.rgb.size(); ++i) CHECK(std::abs(p.rgb[i] - img.rgb[i]) <= 0.5 / 255 + 1e-7);
  CHECK(std::filesystem::file_size(dir / "a.ppm") == std::string("P6\n5 3\n255\n").size() + 45);

  {
    std::ofstream(dir / "bad.ppm") << "P3\n1 1\n255\n0 0 0\n";
  }
  CHECK_THROWS_AS(read_ppm(dir / "bad.ppm"), ParseError);
  {
    std::ofstream(dir / "short.ppm", std::ios::binary) << "P6\n4 4\n255\nabc";
  }
  CHECK_THROWS_AS(read_ppm(dir / "short.ppm"), ParseError);
  {
    std::ofstream(dir / "short.raw", std::ios::binary) << "abcdefghij";
  }
  CHECK_THROWS_AS(read_image_raw(dir / "short.raw"), ParseError);
  std::filesystem::remove_all(dir);
}
