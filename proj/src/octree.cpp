#include "gsc/octree.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "gsc/bytes.hpp"
#include "gsc/entropy.hpp"
#include "gsc/errors.hpp"

namespace gsc {

namespace {

// Child index of a depth-`depth` cell inside its depth-`parent` ancestor's child level.
std::uint8_t child_index(const GridCoord& cell, int cell_depth, int parent) {
  const int shift = cell_depth - parent - 1;
  return static_cast<std::uint8_t>(((cell[0] >> shift) & 1u) << 2 | ((cell[1] >> shift) & 1u) << 1 |
                                   ((cell[2] >> shift) & 1u));
}

struct Span {
  std::size_t begin, end;
};

}  // namespace

std::vector<std::uint32_t> morton_order(std::span<const OctreeLeaf> leaves, int j_high) {
  std::vector<std::uint64_t> keys(leaves.size());
  for (std::size_t i = 0; i < leaves.size(); ++i) keys[i] = leaf_order_key(leaves[i].coord, leaves[i].depth, j_high);
  std::vector<std::uint32_t> perm(leaves.size());
  std::iota(perm.begin(), perm.end(), 0u);
  std::stable_sort(perm.begin(), perm.end(), [&](std::uint32_t a, std::uint32_t b) { return keys[a] < keys[b]; });
  return perm;
}

Octree build_octree(std::span<const OctreeLeaf> leaves, int j_low, int j_high) {
  if (j_high < 0 || j_high > kMaxDepth || j_low < 0 || j_low > j_high)
    throw InvalidInput("octree depths must satisfy 0 <= j_low <= j_high <= " + std::to_string(kMaxDepth));
  if (leaves.size() > 0xffffffffu) throw InvalidInput("too many leaves");
  Octree tree;
  tree.j_low = j_low;
  tree.j_high = j_high;
  tree.leaf_count = static_cast<std::uint32_t>(leaves.size());
  if (leaves.empty()) return tree;

  std::vector<OctreeLeaf> sorted;
  sorted.reserve(leaves.size());
  for (std::uint32_t i : morton_order(leaves, j_high)) {
    const OctreeLeaf& l = leaves[i];
    if (l.depth < j_low || l.depth > j_high)
      throw InvalidInput("leaf depth " + std::to_string(l.depth) + " outside [" + std::to_string(j_low) + ", " +
                         std::to_string(j_high) + "]");
    if (leaf_coord(leaf_cell(l.coord, l.depth, j_high), l.depth, j_high) != l.coord ||
        (j_high < 32 && (l.coord[0] >> j_high || l.coord[1] >> j_high || l.coord[2] >> j_high)))
      throw InvalidInput("leaf coordinate is not a canonical cell representative");
    sorted.push_back(l);
  }

  std::vector<Span> level{{0, sorted.size()}};
  for (int d = 0; d < j_high; ++d) {
    std::vector<Span> next;
    for (const Span& node : level) {
      const OctreeLeaf& first = sorted[node.begin];
      if (first.depth == d) {
        if (node.end - node.begin != 1) throw InvalidInput("overlapping leaves in octree input");
        if (d >= j_low) tree.leaf_flags.push_back(1);
        continue;
      }
      if (d >= j_low && tree.adaptive()) tree.leaf_flags.push_back(0);
      std::uint8_t occ = 0;
      std::size_t i = node.begin;
      while (i < node.end) {
        const OctreeLeaf& li = sorted[i];
        if (li.depth == d) throw InvalidInput("overlapping leaves in octree input");
        const std::uint8_t c = child_index(leaf_cell(li.coord, li.depth, j_high), li.depth, d);
        std::size_t j = i + 1;
        while (j < node.end) {
          const OctreeLeaf& lj = sorted[j];
          if (lj.depth == d) throw InvalidInput("overlapping leaves in octree input");
          if (child_index(leaf_cell(lj.coord, lj.depth, j_high), lj.depth, d) != c) break;
          ++j;
        }
        occ |= static_cast<std::uint8_t>(1u << c);
        next.push_back({i, j});
        i = j;
      }
      tree.occupancy.push_back(occ);
    }
    level = std::move(next);
  }
  for (const Span& node : level)
    if (node.end - node.begin != 1) throw InvalidInput("duplicate leaves in octree input");
  return tree;
}

Octree build_octree(const VoxelizedCloud& vox) {
  std::vector<OctreeLeaf> leaves(vox.leaves.size());
  for (std::size_t i = 0; i < leaves.size(); ++i) leaves[i] = {vox.leaves[i].coord, vox.leaves[i].depth};
  return build_octree(leaves, vox.j_low, vox.j_high);
}

std::vector<OctreeLeaf> octree_leaves(const Octree& tree) {
  if (tree.j_high < 0 || tree.j_high > kMaxDepth || tree.j_low < 0 || tree.j_low > tree.j_high)
    throw DecodeError("octree depths out of range");
  std::vector<OctreeLeaf> out;
  if (tree.leaf_count == 0) {
    if (!tree.occupancy.empty() || !tree.leaf_flags.empty()) throw DecodeError("empty octree carries nodes");
    return out;
  }
  std::size_t occ_pos = 0, flag_pos = 0;
  std::vector<GridCoord> level{{0, 0, 0}};
  for (int d = 0; d < tree.j_high; ++d) {
    std::vector<GridCoord> next;
    for (const GridCoord& cell : level) {
      if (d >= tree.j_low && tree.adaptive()) {
        if (flag_pos >= tree.leaf_flags.size()) throw DecodeError("leaf flag stream exhausted");
        if (tree.leaf_flags[flag_pos++]) {
          out.push_back({leaf_coord(cell, d, tree.j_high), d});
          continue;
        }
      }
      if (occ_pos >= tree.occupancy.size()) throw DecodeError("occupancy stream exhausted");
      const std::uint8_t occ = tree.occupancy[occ_pos++];
      if (occ == 0) throw DecodeError("internal node with empty occupancy");
      for (std::uint32_t c = 0; c < 8; ++c)
        if (occ & (1u << c))
          next.push_back({cell[0] << 1 | (c >> 2), cell[1] << 1 | ((c >> 1) & 1u), cell[2] << 1 | (c & 1u)});
    }
    level = std::move(next);
    if (out.size() + level.size() > tree.leaf_count) throw DecodeError("octree has more leaves than declared");
  }
  for (const GridCoord& cell : level) out.push_back({cell, tree.j_high});
  if (occ_pos != tree.occupancy.size() || flag_pos != tree.leaf_flags.size())
    throw DecodeError("trailing octree nodes");
  if (out.size() != tree.leaf_count) throw DecodeError("octree leaf count mismatch");

  const auto perm = morton_order(out, tree.j_high);
  std::vector<OctreeLeaf> sorted(out.size());
  for (std::size_t i = 0; i < perm.size(); ++i) sorted[i] = out[perm[i]];
  return sorted;
}

std::vector<std::uint8_t> encode_geometry(const Octree& tree) {
  ByteWriter w;
  w.u8(tree.adaptive() ? 1 : 0);
  w.u8(static_cast<std::uint8_t>(tree.j_low));
  w.u8(static_cast<std::uint8_t>(tree.j_high));
  w.u32(tree.leaf_count);
  std::vector<std::uint32_t> occ(tree.occupancy.size());
  for (std::size_t i = 0; i < occ.size(); ++i) occ[i] = tree.occupancy[i] - 1u;
  w.blob(ac_encode_symbols(occ, 255));
  const std::vector<std::uint32_t> flags(tree.leaf_flags.begin(), tree.leaf_flags.end());
  w.bytes(ac_encode_symbols(flags, 2));
  return w.take();
}

Octree decode_geometry(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  Octree tree;
  const std::uint8_t mode = r.u8();
  tree.j_low = r.u8();
  tree.j_high = r.u8();
  tree.leaf_count = r.u32();
  if (mode > 1) throw DecodeError("unknown geometry mode " + std::to_string(mode));
  if (tree.j_high > kMaxDepth || tree.j_low > tree.j_high || (mode == 1) != tree.adaptive())
    throw DecodeError("inconsistent geometry depths");
  for (std::uint32_t s : ac_decode_symbols(r.blob(), 255)) tree.occupancy.push_back(static_cast<std::uint8_t>(s + 1));
  for (std::uint32_t s : ac_decode_symbols(r.bytes(r.remaining()), 2)) tree.leaf_flags.push_back(static_cast<std::uint8_t>(s));
  octree_leaves(tree);  // structural validation
  return tree;
}

}  // namespace gsc
