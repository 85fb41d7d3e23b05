#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "gsc/attrcodec.hpp"
#include "gsc/metrics.hpp"
#include "gsc/octree.hpp"
#include "gsc/voxel.hpp"

namespace gsc {

enum class VoxelMode : std::uint8_t { Uniform, Adaptive, AdaptiveW2 };
enum class CovarianceMode : std::uint8_t { Lossless, Vq };

const char* to_string(VoxelMode m);
const char* to_string(CovarianceMode m);
VoxelMode parse_voxel_mode(const std::string& s);
CovarianceMode parse_covariance_mode(const std::string& s);

struct EncodeConfig {
  VoxelMode mode = VoxelMode::Adaptive;
  int j_uni = 10;           // uniform mode only
  AdaptiveParams adaptive;  // adaptive modes only; rule follows mode
  QuantParams quant;
  CovarianceMode covariance = CovarianceMode::Lossless;
  VqConfig vq;

  void validate() const;
  int j_low() const { return mode == VoxelMode::Uniform ? j_uni : adaptive.j_low; }
  int j_high() const { return mode == VoxelMode::Uniform ? j_uni : adaptive.j_high; }
};

/// Voxelization, recoloring and the coded geometry: everything that depends
/// only on the voxelization settings, so an R-D sweep can reuse it across
/// attribute quantizers.
struct PreparedGeometry {
  VoxelMode mode = VoxelMode::Uniform;
  std::size_t source_count = 0;
  VoxelizedCloud vox;
  std::vector<std::uint8_t> geometry;
  std::unique_ptr<RahtPlan> plan;
};

PreparedGeometry prepare_geometry(const GaussianCloud& cloud, const EncodeConfig& config);

struct SectionEntry {
  SectionKind kind{};
  std::uint32_t offset = 0;
  std::uint32_t length = 0;
};

/// Self-describing container header.
struct ContainerHeader {
  static constexpr std::uint8_t kVersion = 1;

  BoundingCube cube;
  int j_low = 0, j_high = 0;
  std::uint8_t flags = 0;  // bit 0: adaptive, bit 1: W2 split rule
  QuantParams quant;
  CovarianceMode covariance = CovarianceMode::Lossless;
  std::uint32_t source_count = 0;  // N
  std::uint32_t point_count = 0;   // M
  std::vector<SectionEntry> sections;
};

struct EncodeResult {
  std::vector<std::uint8_t> bytes;
  ContainerHeader header;
  double seconds = 0;
};

/// Attribute coding and container assembly on prepared geometry.
EncodeResult encode_with(const PreparedGeometry& geometry, const EncodeConfig& config);
EncodeResult encode(const GaussianCloud& cloud, const EncodeConfig& config);

ContainerHeader read_header(std::span<const std::uint8_t> bytes);
GaussianCloud decode(std::span<const std::uint8_t> bytes);

/// Human-readable header and section summary.
std::string describe(const ContainerHeader& header, std::size_t total_bytes);

struct SweepPoint {
  std::string label;
  EncodeConfig config;
};

struct SweepResult {
  std::string label;
  double bits = 0;
  double psnr = 0;
  double mse = 0;
  std::uint32_t points = 0;
};

/// Encodes, decodes, renders and scores every grid point. Geometry is
/// prepared once per distinct voxelization setting; grid points run
/// concurrently. Results keep the input order.
std::vector<SweepResult> rd_sweep(const GaussianCloud& cloud, std::span<const Camera> cameras,
                                  std::span<const Image> reference, std::span<const SweepPoint> grid,
                                  const Vec3& background = {0, 0, 0});

}  // namespace gsc
