#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "gsc/model.hpp"
#include "gsc/raht.hpp"

namespace gsc {

/// Quantization steps for SH DC, SH AC and opacity transform coefficients.
struct QuantParams {
  double q_dc = 0.0025;
  double q_ac = 0.01;
  double q_op = 0.0025;

  /// q_dc = q_op = q_ac / 4.
  static QuantParams from_ac(double q_ac) { return {q_ac / 4, q_ac, q_ac / 4}; }
  void validate() const;
};

enum class SectionKind : std::uint8_t {
  Geometry = 0,
  Sh = 1,
  Opacity = 2,
  CovarianceLossless = 3,
  CovarianceVq = 4,
};

/// Full-range BT.709 analog: Y = .2126R + .7152G + .0722B, U = (B - Y) / 1.8556,
/// V = (R - Y) / 1.5748.
Vec3 rgb_to_yuv(const Vec3& rgb);
Vec3 yuv_to_rgb(const Vec3& yuv);
std::vector<Vec3> sh_to_yuv(std::span<const Vec3> rgb);
std::vector<Vec3> yuv_to_sh(std::span<const Vec3> yuv);

/// Generic attribute section: [u8 kind][u8 params length][params][u32 count][count x (u32 length, bytes)].
struct Section {
  SectionKind kind{};
  std::vector<std::uint8_t> params;
  std::vector<std::vector<std::uint8_t>> streams;

  std::vector<std::uint8_t> serialize() const;
  static Section parse(std::span<const std::uint8_t> bytes);
};

struct ShAttributes {
  std::vector<Vec3> dc;
  std::vector<ShRest> ac;
};

/// 48 sub-streams (16 bands x Y, U, V), each RAHT -> quantize -> RLGR.
/// The first (DC) transform coefficient of every band uses q_dc; the other
/// coefficients use q_dc for band 0 and q_ac for bands 1-15.
std::vector<std::uint8_t> encode_sh(const RahtPlan& plan, std::span<const Vec3> sh_dc, std::span<const ShRest> sh_ac,
                                    const QuantParams& q);
ShAttributes decode_sh(const RahtPlan& plan, std::span<const std::uint8_t> section);

std::vector<std::uint8_t> encode_opacity(const RahtPlan& plan, std::span<const double> opacities, double q_op);
/// Reconstruction is clamped to [0, 1].
std::vector<double> decode_opacity(const RahtPlan& plan, std::span<const std::uint8_t> section);

/// Fixed-point covariance: quaternion components in steps of 2^-12, natural
/// log scales in steps of 2^-8.
struct CovarianceFixedPoint {
  static constexpr int kRotationBits = 12;
  static constexpr int kLogScaleBits = 8;

  std::vector<std::array<std::int32_t, 4>> rotation;
  std::vector<std::array<std::int32_t, 3>> log_scale;

  bool operator==(const CovarianceFixedPoint&) const = default;
};

CovarianceFixedPoint quantize_covariance(std::span<const Quat> rotations, std::span<const Vec3> scales);
void dequantize_covariance(const CovarianceFixedPoint& fp, std::vector<Quat>& rotations, std::vector<Vec3>& scales);

/// Seven channels, each predicted from the previous point (Morton order) and RLGR coded.
std::vector<std::uint8_t> encode_covariance_lossless(std::span<const Quat> rotations, std::span<const Vec3> scales);
CovarianceFixedPoint decode_covariance_lossless(std::span<const std::uint8_t> section);

enum class VqSpace : std::uint8_t {
  Euclidean,
  Rotation,  // sign-canonical quaternions, entries renormalized after training
};

struct Codebook {
  std::size_t dim = 0;
  std::vector<double> entries;  // size() x dim, row-major
  std::vector<std::uint32_t> indices;
  /// Weighted distortion after each Lloyd iteration (before renormalization).
  std::vector<double> distortion;
  /// Set when K exceeded the number of distinct vectors and entries repeat.
  bool padded = false;

  std::size_t size() const { return dim == 0 ? 0 : entries.size() / dim; }
  std::span<const double> entry(std::size_t k) const { return {entries.data() + k * dim, dim}; }
};

/// Weighted k-means (k-means++ seeding, Lloyd iterations). vectors is n x dim row-major.
Codebook vq_train(std::span<const double> vectors, std::size_t dim, std::span<const double> weights, std::size_t k,
                  int iterations, std::uint64_t seed, VqSpace space = VqSpace::Euclidean);

/// Sum_i w_i |x_i - c_{idx_i}|^2 / Sum_i w_i.
double weighted_distortion(std::span<const double> vectors, std::size_t dim, std::span<const double> weights,
                           const Codebook& book);

struct VqConfig {
  std::uint32_t k_rot = 256;
  std::uint32_t k_scale = 256;
  int iterations = 12;
  std::uint64_t seed = 1;
};

/// Importance weights alpha_i * V_i normalized to sum 1 (uniform if all vanish).
std::vector<double> vq_importance(std::span<const double> opacities, std::span<const Vec3> scales);

std::vector<std::uint8_t> encode_covariance_vq(std::span<const Quat> rotations, std::span<const Vec3> scales,
                                               std::span<const double> opacities, const VqConfig& config);

struct VqDecoded {
  std::vector<Quat> rotations;
  std::vector<Vec3> scales;
  std::vector<std::uint32_t> rotation_index;
  std::vector<std::uint32_t> scale_index;
};
VqDecoded decode_covariance_vq(std::span<const std::uint8_t> section);

}  // namespace gsc
