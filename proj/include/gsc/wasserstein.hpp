#pragma once

#include <span>

#include "gsc/linalg.hpp"

namespace gsc {

struct GaussianStat {
  Vec3 mean{};
  Mat3 cov{};
};

/// Squared 2-Wasserstein distance between two Gaussians:
/// |m1 - m2|^2 + Tr(S1 + S2 - 2 (S1^1/2 S2 S1^1/2)^1/2).
/// Throws InvalidInput if either covariance has an eigenvalue below -1e-12.
double w2_distance(const GaussianStat& a, const GaussianStat& b);

struct Barycenter {
  GaussianStat gaussian;
  int iterations = 0;
  bool converged = true;
};

/// W2 barycenter. The mean is the plain average; the covariance is the
/// fixed point of S <- S^-1/2 ((1/k) sum (S^1/2 Si S^1/2)^1/2)^2 S^-1/2,
/// started at the arithmetic mean of the Si and stopped when the Frobenius
/// change drops below 1e-8 or after 100 iterations.
Barycenter w2_barycenter(std::span<const GaussianStat> gaussians);

/// Sum of w2_distance(g, center) over g.
double voxel_cost(std::span<const GaussianStat> gaussians, const GaussianStat& center);

}  // namespace gsc
