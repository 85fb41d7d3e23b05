#include "gsc/wasserstein.hpp"

#include <algorithm>
#include <cmath>

#include "gsc/errors.hpp"

namespace gsc {

namespace {

constexpr double kPsdTolerance = 1e-12;
constexpr double kBarycenterTolerance = 1e-8;
constexpr int kBarycenterMaxIterations = 100;

SymEigen checked_eigen(const Mat3& a) {
  SymEigen e = sym_eigen(a);
  for (double& l : e.values) {
    if (l < -kPsdTolerance) throw InvalidInput("covariance is not positive semidefinite");
    l = std::max(l, 0.0);
  }
  return e;
}

}  // namespace

double w2_distance(const GaussianStat& a, const GaussianStat& b) {
  const Mat3 root_a = sym_apply(checked_eigen(a.cov), [](double l) { return std::sqrt(l); });
  checked_eigen(b.cov);
  const Mat3 cross = sqrtm_psd(root_a * b.cov * root_a);
  const Vec3 dm = a.mean - b.mean;
  const double d = dot(dm, dm) + a.cov.trace() + b.cov.trace() - 2 * cross.trace();
  return std::max(d, 0.0);
}

Barycenter w2_barycenter(std::span<const GaussianStat> gaussians) {
  if (gaussians.empty()) throw InvalidInput("w2_barycenter: no Gaussians");
  const double k = static_cast<double>(gaussians.size());

  Barycenter out;
  Mat3 s;
  for (const auto& g : gaussians) {
    checked_eigen(g.cov);
    out.gaussian.mean = out.gaussian.mean + g.mean;
    s = s + g.cov;
  }
  out.gaussian.mean = (1 / k) * out.gaussian.mean;
  s = (1 / k) * s;

  out.converged = false;
  for (int it = 1; it <= kBarycenterMaxIterations; ++it) {
    const SymEigen e = sym_eigen(s);
    const double floor = 1e-14 * std::max({e.values[0], e.values[1], e.values[2], 0.0});
    const Mat3 root = sym_apply(e, [](double l) { return std::sqrt(std::max(l, 0.0)); });
    // Pseudo-inverse root: directions with no mass stay empty.
    const Mat3 inv_root = sym_apply(e, [floor](double l) { return l > floor ? 1 / std::sqrt(l) : 0.0; });

    Mat3 t;
    for (const auto& g : gaussians) t = t + sqrtm_psd(root * g.cov * root);
    t = (1 / k) * t;
    const Mat3 next = symmetrized(inv_root * t * t * inv_root);

    const double change = frobenius(next - s);
    s = next;
    out.iterations = it;
    if (change < kBarycenterTolerance) {
      out.converged = true;
      break;
    }
  }
  out.gaussian.cov = s;
  return out;
}

double voxel_cost(std::span<const GaussianStat> gaussians, const GaussianStat& center) {
  double d = 0;
  for (const auto& g : gaussians) d += w2_distance(g, center);
  return d;
}

}  // namespace gsc
