#include "gsc/synth.hpp"

#include <cmath>
#include <random>

#include "gsc/errors.hpp"

namespace gsc {

namespace {

// Explicit transforms keep the scene identical across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double log_uniform(double lo, double hi) { return std::exp(uniform(std::log(lo), std::log(hi))); }
  double normal() {
    const double u1 = 1.0 - uniform(), u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2 * M_PI * u2);
  }
  Quat rotation() {
    Quat q{normal(), normal(), normal(), normal()};
    return q.norm() > 1e-12 ? q.canonical() : Quat{};
  }
  Vec3 in_ball(double r) {
    for (;;) {
      const Vec3 p{uniform(-1, 1), uniform(-1, 1), uniform(-1, 1)};
      if (dot(p, p) <= 1) return r * p;
    }
  }

 private:
  std::mt19937_64 gen_;
};

void push(GaussianCloud& c, Rng& rng, const Vec3& pos, double scale_lo, double scale_hi, double op_lo,
          double op_hi, double ac_sigma) {
  c.positions.push_back(pos);
  c.rotations.push_back(rng.rotation());
  c.scales.push_back({rng.log_uniform(scale_lo, scale_hi), rng.log_uniform(scale_lo, scale_hi),
                      rng.log_uniform(scale_lo, scale_hi)});
  c.sh_dc.push_back({rng.normal() * 0.6, rng.normal() * 0.6, rng.normal() * 0.6});
  ShRest ac;
  for (double& v : ac) v = rng.normal() * ac_sigma;
  c.sh_ac.push_back(ac);
  c.opacities.push_back(rng.uniform(op_lo, op_hi));
}

}  // namespace

GaussianCloud synthetic_scene(const SynthParams& p) {
  if (p.blobs < 1 || p.cluster_size < 1) throw InvalidInput("synthetic scene needs at least one blob and cluster");
  Rng rng(p.seed);
  GaussianCloud c;
  c.reserve(p.clustered + p.dispersed);

  std::vector<Vec3> blob_centers;
  for (int b = 0; b < p.blobs; ++b) blob_centers.push_back(rng.in_ball(1.0 - p.blob_radius));

  std::size_t made = 0;
  while (made < p.clustered) {
    const Vec3 center = blob_centers[static_cast<std::size_t>(rng.uniform() * p.blobs) % p.blobs] +
                        rng.in_ball(p.blob_radius);
    for (int k = 0; k < p.cluster_size && made < p.clustered; ++k, ++made) {
      const Vec3 offset{rng.normal() * p.cluster_spread, rng.normal() * p.cluster_spread,
                        rng.normal() * p.cluster_spread};
      push(c, rng, center + offset, p.small_scale_min, p.small_scale_max, p.small_opacity_min, p.small_opacity_max,
           p.sh_ac_sigma);
    }
  }
  for (std::size_t i = 0; i < p.dispersed; ++i) {
    const Vec3 pos{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
    push(c, rng, pos, p.large_scale_min, p.large_scale_max, p.large_opacity_min, p.large_opacity_max,
         p.sh_ac_sigma);
  }
  c.validate();
  return c;
}

std::vector<Camera> synthetic_cameras(int count, int width, int height) {
  return ring_cameras({0, 0, 0}, 3.5, 1.0, count, 50.0, width, height);
}

}  // namespace gsc
