#pragma once

#include <cstdint>
#include <vector>

#include "gsc/model.hpp"
#include "gsc/render.hpp"

namespace gsc {

/// Seeded desk-scale test scene: tight micro-clusters of small, faint
/// Gaussians packed into a few dense blobs, plus large Gaussians scattered
/// through the whole volume.
struct SynthParams {
  std::size_t clustered = 9500;
  std::size_t dispersed = 500;
  std::uint64_t seed = 2024;

  int blobs = 6;                  // dense regions holding the micro-clusters
  double blob_radius = 0.35;      // in scene units; the scene spans roughly [-1, 1]^3
  int cluster_size = 4;           // Gaussians per micro-cluster
  double cluster_spread = 0.0012; // std dev of member offsets
  double small_scale_min = 0.0004, small_scale_max = 0.0012;
  double small_opacity_min = 0.02, small_opacity_max = 0.08;
  double large_scale_min = 0.04, large_scale_max = 0.12;
  double large_opacity_min = 0.3, large_opacity_max = 0.8;
  double sh_ac_sigma = 0.05;
};

GaussianCloud synthetic_scene(const SynthParams& params = {});

/// Ring of cameras looking at the scene center.
std::vector<Camera> synthetic_cameras(int count = 8, int width = 128, int height = 128);

}  // namespace gsc
