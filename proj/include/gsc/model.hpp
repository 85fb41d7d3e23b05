#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "gsc/linalg.hpp"

namespace gsc {

inline constexpr int kShBands = 16;
inline constexpr int kShRestCount = 45;

/// Higher-order SH coefficients of one Gaussian, indexed [basis * 3 + channel]
/// for basis 0..14 and channel R, G, B.
using ShRest = std::array<double, kShRestCount>;

/// In-memory 3DGS model. Opacity is post-activation, scales are linear.
struct GaussianCloud {
  std::vector<Vec3> positions;
  std::vector<Quat> rotations;
  std::vector<Vec3> scales;
  std::vector<Vec3> sh_dc;
  std::vector<ShRest> sh_ac;
  std::vector<double> opacities;

  std::size_t size() const { return positions.size(); }
  bool empty() const { return positions.empty(); }

  void resize(std::size_t n);
  void reserve(std::size_t n);
  /// Append Gaussian i of other.
  void push_from(const GaussianCloud& other, std::size_t i);

  /// Throws InvalidInput when array lengths disagree or a per-Gaussian invariant fails.
  void validate() const;
};

/// R(q) diag(s^2) R(q)^T. Throws InvalidInput for a non-unit quaternion.
Mat3 covariance_from(const Quat& q, const Vec3& s);

double logistic(double x);
double logit(double p);

/// Parse the binary little-endian interchange format (62 float properties per vertex).
GaussianCloud read_model(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> write_model(const GaussianCloud& cloud);

GaussianCloud read_model_file(const std::filesystem::path& path);
void write_model_file(const GaussianCloud& cloud, const std::filesystem::path& path);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
/// Write via a temporary sibling and rename, so readers never see a partial file.
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace gsc
