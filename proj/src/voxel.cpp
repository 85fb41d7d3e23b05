#include "gsc/voxel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "gsc/errors.hpp"
#include "gsc/wasserstein.hpp"

namespace gsc {

namespace {

struct Keyed {
  std::uint64_t key;  // Morton key of the j_high cell
  std::uint32_t index;
};

struct LeafSpec {
  std::uint64_t prefix;  // Morton key of the cell at `depth`
  int depth;
  std::size_t begin, end;  // range into the sorted Keyed array
};

void check_depth(int depth, const char* what) {
  if (depth < 1 || depth > kMaxDepth)
    throw InvalidInput(std::string(what) + " must lie in [1, " + std::to_string(kMaxDepth) + "]");
}

GridCoord cell_of(const BoundingCube& cube, const Vec3& p, int depth) {
  const double inv = static_cast<double>(std::uint64_t{1} << depth) / cube.side;
  const auto top = static_cast<double>((std::uint64_t{1} << depth) - 1);
  GridCoord c;
  for (int a = 0; a < 3; ++a) {
    const double f = std::floor((p[a] - cube.origin[a]) * inv);
    c[a] = static_cast<std::uint32_t>(std::clamp(f, 0.0, top));
  }
  return c;
}

std::vector<Keyed> sorted_keys(const GaussianCloud& cloud, const BoundingCube& cube, int j_high) {
  std::vector<Keyed> keyed(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i)
    keyed[i] = {morton_encode(cell_of(cube, cloud.positions[i], j_high)), static_cast<std::uint32_t>(i)};
  std::sort(keyed.begin(), keyed.end(),
            [](const Keyed& a, const Keyed& b) { return a.key != b.key ? a.key < b.key : a.index < b.index; });
  return keyed;
}

// Contiguous runs of `keyed[begin, end)` that share a depth-d cell.
template <typename F>
void for_each_cell(const std::vector<Keyed>& keyed, std::size_t begin, std::size_t end, int depth, int j_high,
                   F&& f) {
  const int shift = 3 * (j_high - depth);
  std::size_t i = begin;
  while (i < end) {
    const std::uint64_t prefix = keyed[i].key >> shift;
    std::size_t j = i + 1;
    while (j < end && (keyed[j].key >> shift) == prefix) ++j;
    f(prefix, i, j);
    i = j;
  }
}

VoxelizedCloud assemble(const GaussianCloud& cloud, const BoundingCube& cube, int j_low, int j_high,
                        const std::vector<Keyed>& keyed, const std::vector<LeafSpec>& specs) {
  VoxelizedCloud out;
  out.cube = cube;
  out.j_low = j_low;
  out.j_high = j_high;
  out.leaves.resize(specs.size());
  out.attributes.resize(specs.size());

#pragma omp parallel for schedule(static)
  for (std::size_t l = 0; l < specs.size(); ++l) {
    const LeafSpec& s = specs[l];
    VoxelLeaf& leaf = out.leaves[l];
    const GridCoord cell = morton_decode(s.prefix);
    leaf.depth = s.depth;
    leaf.coord = leaf_coord(cell, s.depth, j_high);
    leaf.members.reserve(s.end - s.begin);
    for (std::size_t i = s.begin; i < s.end; ++i) leaf.members.push_back(keyed[i].index);
    std::sort(leaf.members.begin(), leaf.members.end());

    const MergedAttributes m = recolor_init(cloud, leaf.members);
    out.attributes.positions[l] = cube.cell_center(cell, s.depth);
    out.attributes.rotations[l] = m.rotation;
    out.attributes.scales[l] = m.scale;
    out.attributes.sh_dc[l] = m.sh_dc;
    out.attributes.sh_ac[l] = m.sh_ac;
    out.attributes.opacities[l] = m.opacity;
  }
  return out;
}

// Indices of the ceil(v% * N) largest-volume Gaussians, plus everything tied
// with the smallest of them.
std::vector<char> pinned_by_volume(const GaussianCloud& cloud, double v_percent) {
  const std::size_t n = cloud.size();
  std::vector<char> pinned(n, 0);
  const auto count = static_cast<std::size_t>(std::ceil(v_percent / 100.0 * static_cast<double>(n) - 1e-9));
  if (count == 0 || n == 0) return pinned;
  std::vector<double> volume(n);
  for (std::size_t i = 0; i < n; ++i) volume[i] = gaussian_volume(cloud.scales[i]);
  std::vector<double> sorted = volume;
  const std::size_t nth = std::min(count, n) - 1;
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(nth), sorted.end(),
                   std::greater<>());
  const double threshold = sorted[nth];
  for (std::size_t i = 0; i < n; ++i) pinned[i] = volume[i] >= threshold;
  return pinned;
}

class AdaptiveSplitter {
 public:
  AdaptiveSplitter(const GaussianCloud& cloud, const BoundingCube& cube, const AdaptiveParams& params,
                   const std::vector<Keyed>& keyed, const std::vector<char>& pinned)
      : cloud_(cloud), cube_(cube), params_(params), keyed_(keyed), pinned_(pinned) {}

  void descend(std::uint64_t prefix, int depth, std::size_t begin, std::size_t end, std::vector<LeafSpec>& out) const {
    if (depth == params_.j_high || !should_split(prefix, depth, begin, end)) {
      out.push_back({prefix, depth, begin, end});
      return;
    }
    for_each_cell(keyed_, begin, end, depth + 1, params_.j_high,
                  [&](std::uint64_t p, std::size_t b, std::size_t e) { descend(p, depth + 1, b, e, out); });
  }

 private:
  bool should_split(std::uint64_t prefix, int depth, std::size_t begin, std::size_t end) const {
    for (std::size_t i = begin; i < end; ++i)
      if (pinned_[keyed_[i].index]) return true;

    const double half = cube_.voxel_size(depth) / 2;  // tau_2 = W / 2^(J+1)
    if (params_.rule == SplitRule::Wasserstein) {
      std::vector<GaussianStat> g;
      g.reserve(end - begin);
      for (std::size_t i = begin; i < end; ++i) {
        const auto idx = keyed_[i].index;
        g.push_back({cloud_.positions[idx], covariance_from(cloud_.rotations[idx], cloud_.scales[idx])});
      }
      const Barycenter bary = w2_barycenter(g);
      return voxel_cost(g, bary.gaussian) > static_cast<double>(params_.tau1) * half * half;
    }

    if (end - begin > params_.tau1) return true;
    const Vec3 center = cube_.cell_center(morton_decode(prefix), depth);
    for (std::size_t i = begin; i < end; ++i)
      if (norm(cloud_.positions[keyed_[i].index] - center) > half) return true;
    return false;
  }

  const GaussianCloud& cloud_;
  const BoundingCube& cube_;
  const AdaptiveParams& params_;
  const std::vector<Keyed>& keyed_;
  const std::vector<char>& pinned_;
};

}  // namespace

Vec3 BoundingCube::cell_center(const GridCoord& cell, int depth) const {
  const double size = voxel_size(depth);
  return {origin[0] + (cell[0] + 0.5) * size, origin[1] + (cell[1] + 0.5) * size,
          origin[2] + (cell[2] + 0.5) * size};
}

BoundingCube bounding_cube(const GaussianCloud& cloud) {
  if (cloud.empty()) throw InvalidInput("bounding_cube: empty cloud");
  Vec3 lo = cloud.positions[0], hi = lo;
  for (const auto& p : cloud.positions)
    for (int a = 0; a < 3; ++a) {
      lo[a] = std::min(lo[a], p[a]);
      hi[a] = std::max(hi[a], p[a]);
    }
  double extent = std::max({hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2]});
  if (!(extent > 0)) {
    const double mag = std::max({std::abs(lo[0]), std::abs(lo[1]), std::abs(lo[2]), 1.0});
    extent = mag * 1e-6;
  }
  return {lo, extent * (1 + 1e-6)};
}

void AdaptiveParams::validate() const {
  check_depth(j_low, "j_low");
  check_depth(j_high, "j_high");
  if (j_low > j_high) throw InvalidInput("j_low must not exceed j_high");
  if (!(v_percent >= 0 && v_percent <= 100)) throw InvalidInput("v_percent must lie in [0, 100]");
}

double gaussian_volume(const Vec3& s) {
  if (!(s[0] > 0 && s[1] > 0 && s[2] > 0)) throw InvalidInput("gaussian_volume: scale must be positive");
  return s[0] * s[1] * s[2];
}

MergedAttributes recolor_init(const GaussianCloud& cloud, std::span<const std::uint32_t> members) {
  if (members.empty()) throw InvalidInput("recolor_init: empty member list");
  MergedAttributes m;
  std::uint32_t largest = members[0];
  double largest_volume = -1;
  for (std::uint32_t i : members) {
    const double v = gaussian_volume(cloud.scales[i]);
    if (v > largest_volume || (v == largest_volume && i < largest)) {
      largest_volume = v;
      largest = i;
    }
    m.sh_dc = m.sh_dc + cloud.sh_dc[i];
    for (int k = 0; k < kShRestCount; ++k) m.sh_ac[k] += cloud.sh_ac[i][k];
    m.opacity += cloud.opacities[i];
  }
  const double inv = 1.0 / static_cast<double>(members.size());
  m.sh_dc = inv * m.sh_dc;
  for (double& v : m.sh_ac) v *= inv;
  m.opacity *= inv;
  m.rotation = cloud.rotations[largest];
  m.scale = cloud.scales[largest];
  return m;
}

VoxelizedCloud uniform_voxelize(const GaussianCloud& cloud, int depth) {
  return uniform_voxelize(cloud, depth, bounding_cube(cloud));
}

VoxelizedCloud uniform_voxelize(const GaussianCloud& cloud, int depth, const BoundingCube& cube) {
  check_depth(depth, "voxelization depth");
  const auto keyed = sorted_keys(cloud, cube, depth);
  std::vector<LeafSpec> specs;
  for_each_cell(keyed, 0, keyed.size(), depth, depth,
                [&](std::uint64_t p, std::size_t b, std::size_t e) { specs.push_back({p, depth, b, e}); });
  return assemble(cloud, cube, depth, depth, keyed, specs);
}

VoxelizedCloud adaptive_voxelize(const GaussianCloud& cloud, const AdaptiveParams& params) {
  return adaptive_voxelize(cloud, params, bounding_cube(cloud));
}

VoxelizedCloud adaptive_voxelize(const GaussianCloud& cloud, const AdaptiveParams& params,
                                 const BoundingCube& cube) {
  params.validate();
  const auto keyed = sorted_keys(cloud, cube, params.j_high);
  const auto pinned = pinned_by_volume(cloud, params.v_percent);

  std::vector<LeafSpec> roots;
  for_each_cell(keyed, 0, keyed.size(), params.j_low, params.j_high,
                [&](std::uint64_t p, std::size_t b, std::size_t e) { roots.push_back({p, params.j_low, b, e}); });

  const AdaptiveSplitter splitter(cloud, cube, params, keyed, pinned);
  std::vector<std::vector<LeafSpec>> per_root(roots.size());
#pragma omp parallel for schedule(dynamic)
  for (std::size_t r = 0; r < roots.size(); ++r)
    splitter.descend(roots[r].prefix, roots[r].depth, roots[r].begin, roots[r].end, per_root[r]);

  std::vector<LeafSpec> specs;
  for (auto& v : per_root) specs.insert(specs.end(), v.begin(), v.end());
  return assemble(cloud, cube, params.j_low, params.j_high, keyed, specs);
}

void VoxelizedCloud::validate(std::optional<std::size_t> source_count) const {
  if (attributes.size() != leaves.size()) throw InvalidInput("voxelized cloud: attribute count mismatch");
  std::uint64_t prev_end = 0;
  bool first = true;
  for (const auto& leaf : leaves) {
    if (leaf.depth < j_low || leaf.depth > j_high) throw InvalidInput("voxelized cloud: leaf depth out of range");
    const GridCoord cell = leaf_cell(leaf.coord, leaf.depth, j_high);
    if (leaf_coord(cell, leaf.depth, j_high) != leaf.coord)
      throw InvalidInput("voxelized cloud: non-canonical leaf coordinate");
    const std::uint64_t begin = leaf_order_key(leaf.coord, leaf.depth, j_high);
    if (!first && begin < prev_end) throw InvalidInput("voxelized cloud: overlapping or unordered leaves");
    prev_end = begin + (std::uint64_t{1} << (3 * (j_high - leaf.depth)));
    first = false;
  }
  if (source_count) {
    std::vector<char> seen(*source_count, 0);
    std::size_t total = 0;
    for (const auto& leaf : leaves)
      for (std::uint32_t m : leaf.members) {
        if (m >= *source_count || seen[m]) throw InvalidInput("voxelized cloud: provenance is not a partition");
        seen[m] = 1;
        ++total;
      }
    if (total != *source_count) throw InvalidInput("voxelized cloud: provenance is not a partition");
  }
}

}  // namespace gsc
