#pragma once

#include <span>
#include <string>
#include <vector>

#include "gsc/render.hpp"

namespace gsc {

inline constexpr double kPsnrCap = 99.0;

double mse(const Image& a, const Image& b);
/// 10 log10(1 / MSE) with unit peak, capped at kPsnrCap. Throws InvalidInput on a size mismatch.
double psnr(const Image& a, const Image& b);

struct TestLoss {
  double mse = 0;   // mean over views of the per-sample squared error
  double psnr = 0;  // mean over views of the per-view PSNR
};

TestLoss test_loss(std::span<const Image> rendered, std::span<const Image> reference);
TestLoss test_loss(const GaussianCloud& cloud, std::span<const Camera> cameras, std::span<const Image> reference,
                   const Vec3& background = {0, 0, 0});

struct RDPoint {
  double bits = 0;
  double psnr = 0;
};

/// At least four points with positive, strictly increasing rates and finite PSNR.
struct RDCurve {
  std::vector<RDPoint> points;
  void validate() const;
};

struct BdResult {
  double bd_rate = 0;  // percent; negative means the test curve needs fewer bits
  double bd_psnr = 0;  // dB
};

/// Cubic least-squares fits in log10(rate), integrated over the overlap of
/// both curves. Throws InvalidInput naming the gap when the ranges do not overlap.
BdResult bd_metrics(const RDCurve& reference, const RDCurve& test);

struct RDRow {
  std::string label;
  double bits = 0;
  double psnr = 0;
};

std::string format_rd_csv(std::span<const RDRow> rows);
std::vector<RDRow> parse_rd_csv(const std::string& text);
/// Rows with the given label, sorted by rate.
RDCurve curve_for(std::span<const RDRow> rows, const std::string& label);

}  // namespace gsc
