#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "gsc/morton.hpp"
#include "gsc/voxel.hpp"

namespace gsc {

/// A leaf voxel: j_high-resolution representative coordinate plus its depth.
struct OctreeLeaf {
  GridCoord coord{};
  int depth = 0;

  bool operator==(const OctreeLeaf&) const = default;
};

/// Pruned occupancy octree. Internal nodes (occupied cells at depths
/// 0..j_high-1 that are not leaves) contribute one occupancy byte each, in
/// breadth-first order with children visited by ascending child index.
/// In adaptive mode every occupied node at depths [j_low, j_high) also
/// carries a flag telling whether it is a leaf; depth-j_high cells are
/// always leaves and carry no flag.
struct Octree {
  int j_low = 0;
  int j_high = 0;
  std::uint32_t leaf_count = 0;
  std::vector<std::uint8_t> occupancy;
  std::vector<std::uint8_t> leaf_flags;

  bool adaptive() const { return j_low < j_high; }
  std::size_t node_count() const { return occupancy.size(); }
  bool operator==(const Octree&) const = default;
};

/// Throws InvalidInput on overlapping or duplicate leaves or depths outside [j_low, j_high].
Octree build_octree(std::span<const OctreeLeaf> leaves, int j_low, int j_high);
Octree build_octree(const VoxelizedCloud& vox);

/// Leaves of the tree in canonical Morton order. Throws DecodeError if the
/// node and flag lists are inconsistent.
std::vector<OctreeLeaf> octree_leaves(const Octree& tree);

/// [u8 mode][u8 j_low][u8 j_high][u32 leaf count][u32 occupancy stream length]
/// [occupancy stream][flag stream]; both streams use the adaptive arithmetic coder.
std::vector<std::uint8_t> encode_geometry(const Octree& tree);
Octree decode_geometry(std::span<const std::uint8_t> bytes);

/// Stable permutation sorting leaves into depth-first (Morton) order.
std::vector<std::uint32_t> morton_order(std::span<const OctreeLeaf> leaves, int j_high);

}  // namespace gsc
