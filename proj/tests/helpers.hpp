#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <random>

#include <algorithm>
#include <functional>
#include <vector>

#include "gsc/model.hpp"
#include "gsc/octree.hpp"

namespace testing {

using gsc::Mat3;
using gsc::Quat;
using gsc::Vec3;

inline double uniform(std::mt19937_64& rng, double lo = 0, double hi = 1) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline Quat random_quat(std::mt19937_64& rng) {
  std::normal_distribution<double> n;
  return Quat{n(rng), n(rng), n(rng), n(rng)}.canonical();
}

inline Eigen::Matrix3d to_eigen(const Mat3& m) {
  Eigen::Matrix3d e;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) e(r, c) = m(r, c);
  return e;
}

inline Mat3 from_eigen(const Eigen::Matrix3d& e) {
  Mat3 m;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) m(r, c) = e(r, c);
  return m;
}

/// Random SPD matrix with eigenvalues in [lo, hi].
inline Mat3 random_spd(std::mt19937_64& rng, double lo = 0.05, double hi = 4) {
  const Eigen::Matrix3d q = to_eigen(gsc::rotation_matrix(random_quat(rng)));
  const Eigen::Vector3d d(uniform(rng, lo, hi), uniform(rng, lo, hi), uniform(rng, lo, hi));
  Eigen::Matrix3d s = q * d.asDiagonal() * q.transpose();
  s = 0.5 * (s + s.transpose()).eval();
  return from_eigen(s);
}

inline gsc::GaussianCloud random_cloud(std::mt19937_64& rng, std::size_t n, double extent = 1,
                                       double scale_lo = 0.001, double scale_hi = 0.05) {
  gsc::GaussianCloud c;
  c.resize(n);
  std::normal_distribution<double> nd;
  for (std::size_t i = 0; i < n; ++i) {
    c.positions[i] = {uniform(rng, -extent, extent), uniform(rng, -extent, extent), uniform(rng, -extent, extent)};
    c.rotations[i] = random_quat(rng);
    c.scales[i] = {uniform(rng, scale_lo, scale_hi), uniform(rng, scale_lo, scale_hi), uniform(rng, scale_lo, scale_hi)};
    c.sh_dc[i] = {nd(rng), nd(rng), nd(rng)};
    for (double& v : c.sh_ac[i]) v = 0.1 * nd(rng);
    c.opacities[i] = uniform(rng);
  }
  return c;
}

/// Random non-overlapping leaf set: up to n occupied j_high cells (drawn around
/// a few centers so the tree has structure), then every node at depths
/// [j_low, j_high) becomes a leaf with probability p_leaf.
inline std::vector<gsc::OctreeLeaf> random_leaves(std::mt19937_64& rng, std::size_t n, int j_low, int j_high,
                                                 double p_leaf) {
  const std::uint32_t side = 1u << j_high;
  std::vector<std::uint64_t> keys;
  std::normal_distribution<double> nd;
  std::vector<Vec3> centers(4);
  for (auto& c : centers) c = {uniform(rng, 0, side), uniform(rng, 0, side), uniform(rng, 0, side)};
  const double spread = std::max(1.0, side / 8.0);
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3& c = centers[i % centers.size()];
    gsc::GridCoord g;
    for (int a = 0; a < 3; ++a)
      g[a] = static_cast<std::uint32_t>(std::clamp(c[a] + spread * nd(rng), 0.0, side - 1.0));
    keys.push_back(gsc::morton_encode(g));
  }
  std::sort(keys.begin(), keys.end());
  keys.erase(std::unique(keys.begin(), keys.end()), keys.end());

  std::vector<gsc::OctreeLeaf> out;
  std::bernoulli_distribution coarsen(p_leaf);
  std::function<void(std::size_t, std::size_t, int)> walk = [&](std::size_t b, std::size_t e, int d) {
    const int shift = 3 * (j_high - d);
    if (d == j_high || (d >= j_low && coarsen(rng))) {
      const std::uint64_t prefix = shift >= 64 ? 0 : keys[b] >> shift;
      const gsc::GridCoord cell = gsc::morton_decode(prefix);
      out.push_back({gsc::leaf_coord(cell, d, j_high), d});
      return;
    }
    const int child_shift = shift - 3;
    std::size_t i = b;
    while (i < e) {
      const std::uint64_t c = keys[i] >> child_shift;
      std::size_t j = i;
      while (j < e && keys[j] >> child_shift == c) ++j;
      walk(i, j, d + 1);
      i = j;
    }
  };
  if (!keys.empty()) walk(0, keys.size(), 0);
  std::shuffle(out.begin(), out.end(), rng);
  return out;
}

}  // namespace testing
