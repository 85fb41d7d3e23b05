#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "gsc/morton.hpp"

namespace gsc {

/// Geometry-only description of a RAHT: which nodes merge at every
/// sub-level and with what weights. Built once per point set and shared by
/// every channel and by the forward and inverse transforms.
class RahtPlan {
 public:
  /// coords are distinct j_high-grid coordinates; depth is j_high.
  RahtPlan(std::span<const GridCoord> coords, int depth);

  std::size_t size() const { return n_; }
  /// Accumulated point count behind each serialized coefficient (DC first).
  const std::vector<std::uint32_t>& weights() const { return weights_; }

  void forward(std::span<const double> values, std::span<double> coeffs) const;
  void inverse(std::span<const double> coeffs, std::span<double> values) const;

 private:
  struct Butterfly {
    std::uint32_t low;   // slot receiving the low-pass value
    std::uint32_t high;  // slot of the second child
    std::uint32_t out;   // serialized index of the high-pass coefficient
    double a, b;         // sqrt(w1 / (w1 + w2)), sqrt(w2 / (w1 + w2))
  };

  std::size_t n_ = 0;
  std::uint32_t root_ = 0;
  std::vector<std::vector<Butterfly>> steps_;  // bottom-up
  std::vector<std::uint32_t> weights_;
};

struct RahtCoefficients {
  std::vector<double> coeffs;
  std::vector<std::uint32_t> weights;
};

/// Throws InvalidInput on duplicate coordinates or a size mismatch.
RahtCoefficients raht_forward(std::span<const GridCoord> coords, int depth, std::span<const double> values);
std::vector<double> raht_inverse(const RahtCoefficients& coeffs, std::span<const GridCoord> coords, int depth);

/// round(c / step), ties away from zero. An infinite step maps everything to 0.
std::vector<std::int32_t> quantize(std::span<const double> coeffs, double step);
std::vector<double> dequantize(std::span<const std::int32_t> q, double step);
std::int32_t quantize_one(double c, double step);
double dequantize_one(std::int32_t q, double step);

}  // namespace gsc
