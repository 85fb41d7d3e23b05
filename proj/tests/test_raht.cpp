#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>

#include "gsc/errors.hpp"
#include "gsc/raht.hpp"
#include "helpers.hpp"

using namespace gsc;
using namespace testing;

namespace {

struct OracleNode {
  double value;
  double weight;
};

// Straightforward RAHT on explicit coordinates: at each level halve x, then y,
// then z, merging nodes that collide. Returns DC and the (coefficient, merged
// weight) pairs in no particular order.
std::pair<double, std::vector<std::pair<double, double>>> oracle_raht(std::vector<GridCoord> coords,
                                                                     const std::vector<double>& values, int depth) {
  std::map<GridCoord, OracleNode> nodes;
  for (std::size_t i = 0; i < coords.size(); ++i) nodes[coords[i]] = {values[i], 1};
  std::vector<std::pair<double, double>> ac;
  for (int level = 0; level < depth; ++level)
    for (int axis = 0; axis < 3; ++axis) {
      std::map<GridCoord, std::vector<std::pair<std::uint32_t, OracleNode>>> groups;
      for (const auto& [c, n] : nodes) {
        GridCoord p = c;
        p[axis] >>= 1;
        groups[p].push_back({c[axis] & 1u, n});
      }
      std::map<GridCoord, OracleNode> next;
      for (auto& [p, g] : groups) {
        if (g.size() == 1) {
          next[p] = g[0].second;
          continue;
        }
        std::sort(g.begin(), g.end(), [](auto& a, auto& b) { return a.first < b.first; });
        const OracleNode n1 = g[0].second, n2 = g[1].second;
        const double w = n1.weight + n2.weight;
        const double dc = (std::sqrt(n1.weight) * n1.value + std::sqrt(n2.weight) * n2.value) / std::sqrt(w);
        const double acv = (-std::sqrt(n2.weight) * n1.value + std::sqrt(n1.weight) * n2.value) / std::sqrt(w);
        ac.push_back({acv, w});
        next[p] = {dc, w};
      }
      nodes.swap(next);
    }
  return {nodes.begin()->second.value, ac};
}

std::vector<GridCoord> random_coords(std::mt19937_64& rng, std::size_t n, int depth) {
  std::set<GridCoord> s;
  const std::uint32_t side = 1u << depth;
  while (s.size() < n) s.insert({static_cast<std::uint32_t>(rng() % side), static_cast<std::uint32_t>(rng() % side),
                                 static_cast<std::uint32_t>(rng() % side)});
  std::vector<GridCoord> v(s.begin(), s.end());
  std::shuffle(v.begin(), v.end(), rng);
  return v;
}

double energy(std::span<const double> v) {
  double e = 0;
  for (double x : v) e += x * x;
  return e;
}

}  // namespace

TEST_CASE("raht small examples") {
  const std::vector<GridCoord> one{{3, 1, 2}};
  const std::vector<double> seven{7};
  const auto r1 = raht_forward(one, 2, seven);
  CHECK(r1.coeffs == std::vector<double>{7});
  CHECK(r1.weights == std::vector<std::uint32_t>{1});

  const std::vector<GridCoord> pair{{0, 0, 0}, {1, 0, 0}};
  const std::vector<double> ones{1, 1};
  const auto r2 = raht_forward(pair, 1, ones);
  CHECK(r2.coeffs[0] == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));
  CHECK(std::abs(r2.coeffs[1]) < 1e-15);

  const std::vector<double> v31{3, 1};
  const auto r3 = raht_forward(pair, 1, v31);
  CHECK(r3.coeffs[0] == doctest::Approx(2 * std::sqrt(2.0)).epsilon(1e-15));
  CHECK(r3.coeffs[1] == doctest::Approx(-std::sqrt(2.0)).epsilon(1e-15));
  CHECK(energy(r3.coeffs) == doctest::Approx(10).epsilon(1e-15));
  CHECK(r3.weights == std::vector<std::uint32_t>{2, 2});
}

TEST_CASE("raht matches the explicit-coordinate oracle") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    const int depth = 1 + static_cast<int>(rng() % 8);
    const std::size_t maxn = std::min<std::size_t>(500, std::size_t{1} << (3 * depth));
    const auto coords = random_coords(rng, 1 + rng() % maxn, depth);
    std::vector<double> values(coords.size());
    for (double& v : values) v = uniform(rng, -5, 5);

    const auto got = raht_forward(coords, depth, values);
    auto [dc, ac] = oracle_raht(coords, values, depth);
    CHECK(got.coeffs[0] == doctest::Approx(dc).epsilon(1e-12));
    std::vector<std::pair<double, double>> mine;
    for (std::size_t i = 1; i < got.coeffs.size(); ++i) mine.push_back({got.coeffs[i], got.weights[i]});
    std::sort(mine.begin(), mine.end());
    std::sort(ac.begin(), ac.end());
    REQUIRE(mine.size() == ac.size());
    for (std::size_t i = 0; i < ac.size(); ++i) {
      CHECK(std::abs(mine[i].first - ac[i].first) < 1e-10);
      CHECK(mine[i].second == ac[i].second);
    }
  }
}

TEST_CASE("raht is orthonormal and invertible") {
  std::mt19937_64 rng(22);
  for (std::size_t n : {std::size_t{1}, std::size_t{2}, std::size_t{100}, std::size_t{20000}}) {
    const auto coords = random_coords(rng, n, 10);
    std::vector<double> values(n);
    for (double& v : values) v = uniform(rng, -10, 10);
    const auto c = raht_forward(coords, 10, values);
    CHECK(std::abs(energy(c.coeffs) - energy(values)) <= 1e-9 * energy(values));
    const auto back = raht_inverse(c, coords, 10);
    double err = 0;
    for (std::size_t i = 0; i < n; ++i) err = std::max(err, std::abs(back[i] - values[i]));
    CHECK(err < 1e-9);
  }
}

TEST_CASE("constant signals have a single nonzero coefficient") {
  std::mt19937_64 rng(23);
  const auto coords = random_coords(rng, 777, 6);
  const std::vector<double> values(coords.size(), 2.5);
  const auto c = raht_forward(coords, 6, values);
  CHECK(c.coeffs[0] == doctest::Approx(2.5 * std::sqrt(777.0)).epsilon(1e-12));
  CHECK(c.weights[0] == 777);
  for (std::size_t i = 1; i < c.coeffs.size(); ++i) CHECK(std::abs(c.coeffs[i]) < 1e-12);
}

TEST_CASE("transform structure depends only on geometry") {
  std::mt19937_64 rng(24);
  const auto coords = random_coords(rng, 300, 5);
  const RahtPlan plan(coords, 5);
  std::vector<double> a(300), b(300), ca(300), cb(300);
  for (std::size_t i = 0; i < 300; ++i) {
    a[i] = uniform(rng);
    b[i] = uniform(rng);
  }
  CHECK(raht_forward(coords, 5, a).weights == raht_forward(coords, 5, b).weights);
  CHECK(plan.weights() == raht_forward(coords, 5, a).weights);
  for (auto w : plan.weights()) CHECK(w >= 1);
  // Linearity: transform of a + 2b equals transform(a) + 2 transform(b).
  std::vector<double> s(300), cs(300);
  for (std::size_t i = 0; i < 300; ++i) s[i] = a[i] + 2 * b[i];
  plan.forward(a, ca);
  plan.forward(b, cb);
  plan.forward(s, cs);
  for (std::size_t i = 0; i < 300; ++i) CHECK(std::abs(cs[i] - ca[i] - 2 * cb[i]) < 1e-12);
}

TEST_CASE("raht input checks") {
  const std::vector<GridCoord> dup{{1, 1, 1}, {1, 1, 1}};
  const std::vector<double> v{1, 2};
  CHECK_THROWS_AS(raht_forward(dup, 2, v), InvalidInput);
  const std::vector<GridCoord> ok{{1, 1, 1}, {0, 1, 1}};
  const std::vector<double> short_values{1};
  CHECK_THROWS_AS(raht_forward(ok, 2, short_values), InvalidInput);
  const std::vector<GridCoord> big{{4, 0, 0}};
  const std::vector<double> one{1};
  CHECK_THROWS_AS(raht_forward(big, 2, one), InvalidInput);
  CHECK(raht_forward(std::span<const GridCoord>{}, 3, std::span<const double>{}).coeffs.empty());
}

TEST_CASE("uniform scalar quantization") {
  CHECK(quantize_one(3.7, 1) == 4);
  CHECK(quantize_one(3.7, 2) == 2);
  CHECK(dequantize_one(2, 2) == 4.0);
  CHECK(quantize_one(2.5, 1) == 3);
  CHECK(quantize_one(-2.5, 1) == -3);
  CHECK(quantize_one(0.49, 1) == 0);
  CHECK_THROWS_AS(quantize_one(1, 0), InvalidInput);
  CHECK_THROWS_AS(quantize_one(1, -1), InvalidInput);
  CHECK_THROWS_AS(quantize_one(1e12, 1), InvalidInput);

  std::mt19937_64 rng(25);
  std::vector<double> c(10000);
  for (double& x : c) x = uniform(rng, -100, 100);
  for (double step : {1e-6, 0.01, 3.0}) {
    const auto d = dequantize(quantize(c, step), step);
    double err = 0;
    for (std::size_t i = 0; i < c.size(); ++i) err = std::max(err, std::abs(d[i] - c[i]));
    CHECK(err <= step / 2 * (1 + 1e-9));
  }
  const std::vector<double> small{0.3, -1.7, 0.0001};
  const auto d = dequantize(quantize(small, 1e-6), 1e-6);
  for (std::size_t i = 0; i < 3; ++i) CHECK(std::abs(d[i] - small[i]) <= 5e-7);
}
