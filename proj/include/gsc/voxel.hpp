#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "gsc/model.hpp"
#include "gsc/morton.hpp"

namespace gsc {

/// Axis-aligned cube [origin, origin + side)^3.
struct BoundingCube {
  Vec3 origin{};
  double side = 1;

  double voxel_size(int depth) const { return side / static_cast<double>(std::uint64_t{1} << depth); }
  /// Center of the depth-d cell with integer index `cell`.
  Vec3 cell_center(const GridCoord& cell, int depth) const;
};

/// Tight box of the positions grown to a cube of side max_extent * (1 + 1e-6).
BoundingCube bounding_cube(const GaussianCloud& cloud);

struct VoxelLeaf {
  GridCoord coord{};  // j_high-resolution representative, see leaf_coord()
  int depth = 0;
  std::vector<std::uint32_t> members;  // ascending source indices
};

/// Deduplicated voxel centers with merged attributes. Leaves are stored in
/// Morton order and attributes.positions holds each leaf's center.
struct VoxelizedCloud {
  BoundingCube cube;
  int j_low = 1;
  int j_high = 1;
  std::vector<VoxelLeaf> leaves;
  GaussianCloud attributes;

  std::size_t size() const { return leaves.size(); }
  bool is_uniform() const { return j_low == j_high; }
  /// Checks canonical coordinates, non-overlap and (if source_count is given) that
  /// provenance partitions [0, source_count). Throws InvalidInput.
  void validate(std::optional<std::size_t> source_count = std::nullopt) const;
};

enum class SplitRule : std::uint8_t {
  Fast,         // volume pinning, occupancy count and center distance
  Wasserstein,  // volume pinning and summed W2 cost to the voxel barycenter
};

struct AdaptiveParams {
  int j_low = 6;
  int j_high = 10;
  double v_percent = 1;
  std::uint64_t tau1 = 4;
  SplitRule rule = SplitRule::Fast;

  void validate() const;
};

/// V = sx * sy * sz. Throws InvalidInput on a nonpositive component.
double gaussian_volume(const Vec3& s);

VoxelizedCloud uniform_voxelize(const GaussianCloud& cloud, int depth);
VoxelizedCloud uniform_voxelize(const GaussianCloud& cloud, int depth, const BoundingCube& cube);

VoxelizedCloud adaptive_voxelize(const GaussianCloud& cloud, const AdaptiveParams& params);
VoxelizedCloud adaptive_voxelize(const GaussianCloud& cloud, const AdaptiveParams& params,
                                 const BoundingCube& cube);

struct MergedAttributes {
  Quat rotation;
  Vec3 scale{};
  Vec3 sh_dc{};
  ShRest sh_ac{};
  double opacity = 0;
};

/// Averaged SH and opacity; rotation and scale of the largest-volume member
/// (lowest index on ties). Throws InvalidInput for an empty member list.
MergedAttributes recolor_init(const GaussianCloud& cloud, std::span<const std::uint32_t> members);

}  // namespace gsc
