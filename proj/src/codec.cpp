#include "gsc/codec.hpp"

#include <chrono>
#include <cmath>
#include <map>
#include <sstream>

#include "gsc/bytes.hpp"
#include "gsc/errors.hpp"

namespace gsc {

const char* to_string(VoxelMode m) {
  switch (m) {
    case VoxelMode::Uniform: return "uniform";
    case VoxelMode::Adaptive: return "adaptive";
    case VoxelMode::AdaptiveW2: return "adaptive-w2";
  }
  return "?";
}

const char* to_string(CovarianceMode m) { return m == CovarianceMode::Lossless ? "lossless" : "vq"; }

VoxelMode parse_voxel_mode(const std::string& s) {
  if (s == "uniform") return VoxelMode::Uniform;
  if (s == "adaptive") return VoxelMode::Adaptive;
  if (s == "adaptive-w2" || s == "w2") return VoxelMode::AdaptiveW2;
  throw InvalidInput("unknown voxelization mode '" + s + "' (uniform, adaptive, adaptive-w2)");
}

CovarianceMode parse_covariance_mode(const std::string& s) {
  if (s == "lossless") return CovarianceMode::Lossless;
  if (s == "vq") return CovarianceMode::Vq;
  throw InvalidInput("unknown covariance mode '" + s + "' (lossless, vq)");
}

void EncodeConfig::validate() const {
  if (mode == VoxelMode::Uniform) {
    if (j_uni < 1 || j_uni > kMaxDepth) throw InvalidInput("j_uni must lie in [1, " + std::to_string(kMaxDepth) + "]");
  } else {
    adaptive.validate();
  }
  quant.validate();
  if (covariance == CovarianceMode::Vq &&
      (vq.k_rot < 1 || vq.k_rot > 4096 || vq.k_scale < 1 || vq.k_scale > 4096 || vq.iterations < 0))
    throw InvalidInput("VQ codebook sizes must lie in [1, 4096]");
}

namespace {

template <typename E, typename F>
auto staged(const char* stage, F&& f) {
  try {
    return f();
  } catch (const ParseError& e) {
    throw ParseError(std::string(stage) + ": " + e.what(), e.offset());
  } catch (const E& e) {
    throw E(std::string(stage) + ": " + e.what());
  }
}

std::vector<GridCoord> leaf_coords(const VoxelizedCloud& vox) {
  std::vector<GridCoord> c(vox.leaves.size());
  for (std::size_t i = 0; i < c.size(); ++i) c[i] = vox.leaves[i].coord;
  return c;
}

}  // namespace

PreparedGeometry prepare_geometry(const GaussianCloud& cloud, const EncodeConfig& config) {
  config.validate();
  cloud.validate();
  if (cloud.size() > 0xffffffffu) throw InvalidInput("too many Gaussians for the container");
  PreparedGeometry g;
  g.mode = config.mode;
  g.source_count = cloud.size();
  g.vox = staged<InvalidInput>("voxelize", [&] {
    if (cloud.empty()) {
      VoxelizedCloud v;
      v.j_low = config.j_low();
      v.j_high = config.j_high();
      return v;
    }
    if (config.mode == VoxelMode::Uniform) return uniform_voxelize(cloud, config.j_uni);
    AdaptiveParams p = config.adaptive;
    p.rule = config.mode == VoxelMode::AdaptiveW2 ? SplitRule::Wasserstein : SplitRule::Fast;
    return adaptive_voxelize(cloud, p);
  });
  g.geometry = staged<InvalidInput>("geometry", [&] { return encode_geometry(build_octree(g.vox)); });
  const auto coords = leaf_coords(g.vox);
  g.plan = std::make_unique<RahtPlan>(coords, g.vox.j_high);
  return g;
}

EncodeResult encode_with(const PreparedGeometry& g, const EncodeConfig& config) {
  config.validate();
  const auto start = std::chrono::steady_clock::now();
  const GaussianCloud& a = g.vox.attributes;

  std::vector<std::pair<SectionKind, std::vector<std::uint8_t>>> payloads;
  payloads.emplace_back(SectionKind::Geometry, g.geometry);
  staged<InvalidInput>("attributes", [&] {
    payloads.emplace_back(SectionKind::Sh, encode_sh(*g.plan, a.sh_dc, a.sh_ac, config.quant));
    payloads.emplace_back(SectionKind::Opacity, encode_opacity(*g.plan, a.opacities, config.quant.q_op));
    if (config.covariance == CovarianceMode::Lossless)
      payloads.emplace_back(SectionKind::CovarianceLossless, encode_covariance_lossless(a.rotations, a.scales));
    else
      payloads.emplace_back(SectionKind::CovarianceVq,
                            encode_covariance_vq(a.rotations, a.scales, a.opacities, config.vq));
    return 0;
  });

  EncodeResult r;
  ContainerHeader& h = r.header;
  h.cube = g.vox.cube;
  h.j_low = g.vox.j_low;
  h.j_high = g.vox.j_high;
  h.flags = static_cast<std::uint8_t>((g.mode != VoxelMode::Uniform ? 1 : 0) |
                                      (g.mode == VoxelMode::AdaptiveW2 ? 2 : 0));
  h.quant = config.quant;
  h.covariance = config.covariance;
  h.source_count = static_cast<std::uint32_t>(g.source_count);
  h.point_count = static_cast<std::uint32_t>(g.vox.size());

  constexpr std::size_t kFixed = 4 + 1 + 32 + 3 + 24 + 1 + 8 + 1;
  std::size_t offset = kFixed + payloads.size() * 9;
  for (const auto& [kind, bytes] : payloads) {
    if (offset + bytes.size() > 0xffffffffu) throw InvalidInput("container exceeds 4 GiB");
    h.sections.push_back({kind, static_cast<std::uint32_t>(offset), static_cast<std::uint32_t>(bytes.size())});
    offset += bytes.size();
  }

  ByteWriter w;
  w.bytes(std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>("GSC1"), 4));
  w.u8(ContainerHeader::kVersion);
  for (int c = 0; c < 3; ++c) w.f64(h.cube.origin[c]);
  w.f64(h.cube.side);
  w.u8(static_cast<std::uint8_t>(h.j_low));
  w.u8(static_cast<std::uint8_t>(h.j_high));
  w.u8(h.flags);
  w.f64(h.quant.q_dc);
  w.f64(h.quant.q_ac);
  w.f64(h.quant.q_op);
  w.u8(static_cast<std::uint8_t>(h.covariance));
  w.u32(h.source_count);
  w.u32(h.point_count);
  w.u8(static_cast<std::uint8_t>(h.sections.size()));
  for (const auto& s : h.sections) {
    w.u8(static_cast<std::uint8_t>(s.kind));
    w.u32(s.offset);
    w.u32(s.length);
  }
  for (const auto& [kind, bytes] : payloads) w.bytes(bytes);
  r.bytes = w.take();
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

EncodeResult encode(const GaussianCloud& cloud, const EncodeConfig& config) {
  const auto start = std::chrono::steady_clock::now();
  const PreparedGeometry g = prepare_geometry(cloud, config);
  EncodeResult r = encode_with(g, config);
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

ContainerHeader read_header(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  const auto magic = r.bytes(4);
  if (!std::equal(magic.begin(), magic.end(), "GSC1")) throw DecodeError("not a GSC1 container");
  if (const auto v = r.u8(); v != ContainerHeader::kVersion)
    throw DecodeError("unsupported container version " + std::to_string(v));
  ContainerHeader h;
  for (int c = 0; c < 3; ++c) h.cube.origin[c] = r.f64();
  h.cube.side = r.f64();
  h.j_low = r.u8();
  h.j_high = r.u8();
  h.flags = r.u8();
  h.quant.q_dc = r.f64();
  h.quant.q_ac = r.f64();
  h.quant.q_op = r.f64();
  const std::uint8_t cov = r.u8();
  h.source_count = r.u32();
  h.point_count = r.u32();
  const std::uint8_t n = r.u8();

  if (!(h.cube.side > 0) || !std::isfinite(h.cube.side)) throw DecodeError("invalid bounding cube");
  if (h.j_high < 1 || h.j_high > kMaxDepth || h.j_low < 1 || h.j_low > h.j_high)
    throw DecodeError("invalid voxelization depths");
  if (cov > 1) throw DecodeError("unknown covariance mode " + std::to_string(cov));
  h.covariance = static_cast<CovarianceMode>(cov);
  if (h.point_count > h.source_count) throw DecodeError("more voxels than source Gaussians");

  std::size_t end = r.position() + std::size_t{n} * 9;
  for (int i = 0; i < n; ++i) {
    SectionEntry s;
    s.kind = static_cast<SectionKind>(r.u8());
    s.offset = r.u32();
    s.length = r.u32();
    if (s.offset < end || std::size_t{s.offset} + s.length > bytes.size())
      throw DecodeError("section " + std::to_string(i) + " overlaps or lies outside the container");
    end = std::size_t{s.offset} + s.length;
    h.sections.push_back(s);
  }
  return h;
}

GaussianCloud decode(std::span<const std::uint8_t> bytes) {
  const ContainerHeader h = read_header(bytes);
  auto section = [&](SectionKind kind) {
    for (const auto& s : h.sections)
      if (s.kind == kind) return bytes.subspan(s.offset, s.length);
    throw DecodeError("container lacks section kind " + std::to_string(static_cast<int>(kind)));
  };

  const Octree tree = staged<DecodeError>("geometry", [&] { return decode_geometry(section(SectionKind::Geometry)); });
  if (tree.j_low != h.j_low || tree.j_high != h.j_high || tree.leaf_count != h.point_count)
    throw DecodeError("geometry: payload disagrees with container header");
  const auto leaves = octree_leaves(tree);

  GaussianCloud out;
  out.resize(leaves.size());
  std::vector<GridCoord> coords(leaves.size());
  for (std::size_t i = 0; i < leaves.size(); ++i) {
    coords[i] = leaves[i].coord;
    out.positions[i] = h.cube.cell_center(leaf_cell(leaves[i].coord, leaves[i].depth, h.j_high), leaves[i].depth);
  }
  const RahtPlan plan(coords, h.j_high);

  const ShAttributes sh = staged<DecodeError>("sh", [&] { return decode_sh(plan, section(SectionKind::Sh)); });
  out.sh_dc = sh.dc;
  out.sh_ac = sh.ac;
  out.opacities = staged<DecodeError>("opacity", [&] { return decode_opacity(plan, section(SectionKind::Opacity)); });
  staged<DecodeError>("covariance", [&] {
    if (h.covariance == CovarianceMode::Lossless) {
      dequantize_covariance(decode_covariance_lossless(section(SectionKind::CovarianceLossless)), out.rotations,
                            out.scales);
    } else {
      VqDecoded vq = decode_covariance_vq(section(SectionKind::CovarianceVq));
      out.rotations = std::move(vq.rotations);
      out.scales = std::move(vq.scales);
    }
    if (out.rotations.size() != leaves.size()) throw DecodeError("point count mismatch");
    return 0;
  });
  return out;
}

std::string describe(const ContainerHeader& h, std::size_t total_bytes) {
  static const char* names[] = {"geometry", "sh", "opacity", "covariance-lossless", "covariance-vq"};
  std::ostringstream out;
  out.precision(10);
  out << "container: " << total_bytes << " bytes (" << total_bytes * 8 << " bits)\n"
      << "cube: origin (" << h.cube.origin[0] << ", " << h.cube.origin[1] << ", " << h.cube.origin[2]
      << ") side " << h.cube.side << "\n"
      << "voxelization: " << ((h.flags & 2) ? "adaptive-w2" : (h.flags & 1) ? "adaptive" : "uniform") << " j_low "
      << h.j_low << " j_high " << h.j_high << "\n"
      << "quantization: q_dc " << h.quant.q_dc << " q_ac " << h.quant.q_ac << " q_op " << h.quant.q_op << "\n"
      << "covariance: " << to_string(h.covariance) << "\n"
      << "gaussians: N " << h.source_count << " M " << h.point_count << "\n"
      << "sections:\n";
  for (const auto& s : h.sections) {
    const auto k = static_cast<std::size_t>(s.kind);
    out << "  " << (k < 5 ? names[k] : "unknown") << " offset " << s.offset << " length " << s.length << "\n";
  }
  return out.str();
}

std::vector<SweepResult> rd_sweep(const GaussianCloud& cloud, std::span<const Camera> cameras,
                                  std::span<const Image> reference, std::span<const SweepPoint> grid,
                                  const Vec3& background) {
  if (cameras.size() != reference.size() || cameras.empty())
    throw InvalidInput("rd_sweep needs one reference image per camera");

  auto geometry_key = [](const EncodeConfig& c) {
    std::ostringstream k;
    k.precision(17);
    k << static_cast<int>(c.mode) << ':';
    if (c.mode == VoxelMode::Uniform)
      k << c.j_uni;
    else
      k << c.adaptive.j_low << ',' << c.adaptive.j_high << ',' << c.adaptive.v_percent << ',' << c.adaptive.tau1;
    return k.str();
  };
  std::map<std::string, PreparedGeometry> prepared;
  std::vector<const PreparedGeometry*> for_point(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const std::string key = geometry_key(grid[i].config);
    auto it = prepared.find(key);
    if (it == prepared.end()) it = prepared.emplace(key, prepare_geometry(cloud, grid[i].config)).first;
    for_point[i] = &it->second;
  }

  std::vector<SweepResult> results(grid.size());
  std::vector<std::string> errors(grid.size());
#pragma omp parallel for schedule(dynamic)
  for (std::size_t i = 0; i < grid.size(); ++i) {
    try {
      const EncodeResult enc = encode_with(*for_point[i], grid[i].config);
      const GaussianCloud dec = decode(enc.bytes);
      const TestLoss loss = test_loss(dec, cameras, reference, background);
      results[i] = {grid[i].label, static_cast<double>(enc.bytes.size()) * 8, loss.psnr, loss.mse,
                    enc.header.point_count};
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  }
  for (std::size_t i = 0; i < grid.size(); ++i)
    if (!errors[i].empty()) throw InvalidInput("sweep point " + std::to_string(i) + ": " + errors[i]);
  return results;
}

}  // namespace gsc
