#include "gsc/raht.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "gsc/errors.hpp"

namespace gsc {

namespace {

struct Node {
  std::uint64_t key;
  std::uint32_t slot;
  std::uint32_t weight;
};

}  // namespace

RahtPlan::RahtPlan(std::span<const GridCoord> coords, int depth) : n_(coords.size()) {
  if (depth < 0 || depth > kMaxDepth) throw InvalidInput("RAHT depth out of range");
  if (n_ == 0) return;

  std::vector<Node> nodes(n_);
  for (std::size_t i = 0; i < n_; ++i) {
    for (auto v : coords[i])
      if (v >> depth) throw InvalidInput("RAHT: coordinate outside the depth-" + std::to_string(depth) + " grid");
    nodes[i] = {morton_encode(coords[i]), static_cast<std::uint32_t>(i), 1};
  }
  std::sort(nodes.begin(), nodes.end(), [](const Node& a, const Node& b) { return a.key < b.key; });
  for (std::size_t i = 1; i < n_; ++i)
    if (nodes[i].key == nodes[i - 1].key) throw InvalidInput("RAHT: duplicate point coordinates");

  // Per level: merge along x, then y, then z (Morton bits 2, 1, 0 of the level).
  for (int level = 0; level < depth; ++level) {
    for (int axis = 0; axis < 3; ++axis) {
      const std::uint64_t bit = std::uint64_t{1} << (3 * level + 2 - axis);
      std::sort(nodes.begin(), nodes.end(), [bit](const Node& a, const Node& b) {
        const std::uint64_t ga = a.key & ~bit, gb = b.key & ~bit;
        return ga != gb ? ga < gb : a.key < b.key;
      });
      std::vector<Butterfly> step;
      std::vector<Node> next;
      next.reserve(nodes.size());
      for (std::size_t i = 0; i < nodes.size();) {
        const std::uint64_t g = nodes[i].key & ~bit;
        if (i + 1 < nodes.size() && (nodes[i + 1].key & ~bit) == g) {
          const Node& lo = nodes[i];
          const Node& hi = nodes[i + 1];
          const double w = static_cast<double>(lo.weight) + hi.weight;
          step.push_back({lo.slot, hi.slot, lo.weight + hi.weight, std::sqrt(lo.weight / w),
                          std::sqrt(hi.weight / w)});
          next.push_back({g, lo.slot, lo.weight + hi.weight});
          i += 2;
        } else {
          next.push_back({g, nodes[i].slot, nodes[i].weight});
          i += 1;
        }
      }
      nodes.swap(next);
      steps_.push_back(std::move(step));
    }
  }
  root_ = nodes[0].slot;

  // Serialize DC, then high-pass coefficients from the coarsest step down.
  weights_.assign(n_, 0);
  weights_[0] = static_cast<std::uint32_t>(n_);
  std::uint32_t pos = 1;
  for (auto it = steps_.rbegin(); it != steps_.rend(); ++it)
    for (Butterfly& b : *it) {
      weights_[pos] = b.out;  // temporarily holds the merged weight
      b.out = pos++;
    }
}

void RahtPlan::forward(std::span<const double> values, std::span<double> coeffs) const {
  if (values.size() != n_ || coeffs.size() != n_) throw InvalidInput("RAHT: value count mismatch");
  if (n_ == 0) return;
  std::vector<double> v(values.begin(), values.end());
  for (const auto& step : steps_)
    for (const Butterfly& b : step) {
      const double x0 = v[b.low], x1 = v[b.high];
      v[b.low] = b.a * x0 + b.b * x1;
      coeffs[b.out] = -b.b * x0 + b.a * x1;
    }
  coeffs[0] = v[root_];
}

void RahtPlan::inverse(std::span<const double> coeffs, std::span<double> values) const {
  if (values.size() != n_ || coeffs.size() != n_) throw InvalidInput("RAHT: coefficient count mismatch");
  if (n_ == 0) return;
  values[root_] = coeffs[0];
  for (auto it = steps_.rbegin(); it != steps_.rend(); ++it)
    for (const Butterfly& b : *it) {
      const double low = values[b.low], high = coeffs[b.out];
      values[b.low] = b.a * low - b.b * high;
      values[b.high] = b.b * low + b.a * high;
    }
}

RahtCoefficients raht_forward(std::span<const GridCoord> coords, int depth, std::span<const double> values) {
  const RahtPlan plan(coords, depth);
  RahtCoefficients out;
  out.coeffs.resize(plan.size());
  plan.forward(values, out.coeffs);
  out.weights = plan.weights();
  return out;
}

std::vector<double> raht_inverse(const RahtCoefficients& coeffs, std::span<const GridCoord> coords, int depth) {
  const RahtPlan plan(coords, depth);
  std::vector<double> values(plan.size());
  plan.inverse(coeffs.coeffs, values);
  return values;
}

std::int32_t quantize_one(double c, double step) {
  if (!(step > 0)) throw InvalidInput("quantization step must be positive");
  const double q = std::round(c / step);
  constexpr double lim = std::numeric_limits<std::int32_t>::max();
  if (!(std::abs(q) <= lim)) throw InvalidInput("quantized value overflows 32 bits");
  return static_cast<std::int32_t>(q);
}

double dequantize_one(std::int32_t q, double step) { return q == 0 ? 0.0 : q * step; }

std::vector<std::int32_t> quantize(std::span<const double> coeffs, double step) {
  std::vector<std::int32_t> q(coeffs.size());
  for (std::size_t i = 0; i < coeffs.size(); ++i) q[i] = quantize_one(coeffs[i], step);
  return q;
}

std::vector<double> dequantize(std::span<const std::int32_t> q, double step) {
  std::vector<double> c(q.size());
  for (std::size_t i = 0; i < q.size(); ++i) c[i] = dequantize_one(q[i], step);
  return c;
}

}  // namespace gsc
