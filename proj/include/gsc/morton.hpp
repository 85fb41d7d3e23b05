#pragma once

#include <array>
#include <cstdint>

namespace gsc {

using GridCoord = std::array<std::uint32_t, 3>;

/// Deepest octree supported: 3 * 21 interleaved bits fit a 64-bit key.
inline constexpr int kMaxDepth = 21;

/// Interleave bits so that each level contributes (x << 2) | (y << 1) | z.
inline std::uint64_t morton_encode(const GridCoord& c) {
  auto spread = [](std::uint64_t v) {
    v &= 0x1fffff;
    v = (v | v << 32) & 0x1f00000000ffffULL;
    v = (v | v << 16) & 0x1f0000ff0000ffULL;
    v = (v | v << 8) & 0x100f00f00f00f00fULL;
    v = (v | v << 4) & 0x10c30c30c30c30c3ULL;
    v = (v | v << 2) & 0x1249249249249249ULL;
    return v;
  };
  return spread(c[0]) << 2 | spread(c[1]) << 1 | spread(c[2]);
}

inline GridCoord morton_decode(std::uint64_t key) {
  auto compact = [](std::uint64_t v) {
    v &= 0x1249249249249249ULL;
    v = (v ^ (v >> 2)) & 0x10c30c30c30c30c3ULL;
    v = (v ^ (v >> 4)) & 0x100f00f00f00f00fULL;
    v = (v ^ (v >> 8)) & 0x1f0000ff0000ffULL;
    v = (v ^ (v >> 16)) & 0x1f00000000ffffULL;
    v = (v ^ (v >> 32)) & 0x1fffff;
    return static_cast<std::uint32_t>(v);
  };
  return {compact(key >> 2), compact(key >> 1), compact(key)};
}

/// Grid coordinate (at j_high resolution) stored for a depth-d cell:
/// the cell's center sample, or the cell itself at d = j_high.
inline GridCoord leaf_coord(const GridCoord& cell, int depth, int j_high) {
  const int shift = j_high - depth;
  GridCoord r;
  for (int a = 0; a < 3; ++a)
    r[a] = shift == 0 ? cell[a] : (cell[a] << shift) + (1u << (shift - 1));
  return r;
}

/// Inverse of leaf_coord.
inline GridCoord leaf_cell(const GridCoord& coord, int depth, int j_high) {
  const int shift = j_high - depth;
  return {coord[0] >> shift, coord[1] >> shift, coord[2] >> shift};
}

/// Depth-first (Morton) sort key of a leaf: its lower corner at j_high.
inline std::uint64_t leaf_order_key(const GridCoord& coord, int depth, int j_high) {
  const int shift = j_high - depth;
  const GridCoord c = leaf_cell(coord, depth, j_high);
  return morton_encode({c[0] << shift, c[1] << shift, c[2] << shift});
}

}  // namespace gsc
