#include "gsc/attrcodec.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>

#include "gsc/bytes.hpp"
#include "gsc/entropy.hpp"
#include "gsc/errors.hpp"

namespace gsc {

void QuantParams::validate() const {
  if (!(q_dc > 0) || !(q_ac > 0) || !(q_op > 0)) throw InvalidInput("quantization steps must be positive");
}

// ---------------------------------------------------------------------------
// Color transform

namespace {
constexpr double kR = 0.2126, kG = 0.7152, kB = 0.0722;
constexpr double kU = 1.8556, kV = 1.5748;
}  // namespace

Vec3 rgb_to_yuv(const Vec3& c) {
  const double y = kR * c[0] + kG * c[1] + kB * c[2];
  return {y, (c[2] - y) / kU, (c[0] - y) / kV};
}

Vec3 yuv_to_rgb(const Vec3& c) {
  const double r = c[0] + kV * c[2];
  const double b = c[0] + kU * c[1];
  const double g = (c[0] - kR * r - kB * b) / kG;
  return {r, g, b};
}

std::vector<Vec3> sh_to_yuv(std::span<const Vec3> rgb) {
  std::vector<Vec3> out(rgb.size());
  std::transform(rgb.begin(), rgb.end(), out.begin(), rgb_to_yuv);
  return out;
}

std::vector<Vec3> yuv_to_sh(std::span<const Vec3> yuv) {
  std::vector<Vec3> out(yuv.size());
  std::transform(yuv.begin(), yuv.end(), out.begin(), yuv_to_rgb);
  return out;
}

// ---------------------------------------------------------------------------
// Section framing

std::vector<std::uint8_t> Section::serialize() const {
  if (params.size() > 255) throw InvalidInput("section params block too long");
  ByteWriter w;
  w.u8(static_cast<std::uint8_t>(kind));
  w.u8(static_cast<std::uint8_t>(params.size()));
  w.bytes(params);
  w.u32(static_cast<std::uint32_t>(streams.size()));
  for (const auto& s : streams) w.blob(s);
  return w.take();
}

Section Section::parse(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  Section s;
  s.kind = static_cast<SectionKind>(r.u8());
  const auto p = r.bytes(r.u8());
  s.params.assign(p.begin(), p.end());
  const std::uint32_t count = r.u32();
  if (count > r.remaining() / 4) throw DecodeError("section sub-stream count exceeds payload");
  s.streams.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto b = r.blob();
    s.streams.emplace_back(b.begin(), b.end());
  }
  return s;
}

namespace {

Section expect_section(std::span<const std::uint8_t> bytes, SectionKind kind, std::size_t streams) {
  Section s = Section::parse(bytes);
  if (s.kind != kind) throw DecodeError("unexpected section kind " + std::to_string(static_cast<int>(s.kind)));
  if (s.streams.size() != streams)
    throw DecodeError("section has " + std::to_string(s.streams.size()) + " sub-streams, expected " +
                      std::to_string(streams));
  return s;
}

// One RAHT channel: transform, quantize (first coefficient with dc_step), RLGR.
std::vector<std::uint8_t> code_channel(const RahtPlan& plan, std::span<const double> values, double dc_step,
                                       double step) {
  std::vector<double> coeffs(plan.size());
  plan.forward(values, coeffs);
  std::vector<std::int32_t> q(coeffs.size());
  for (std::size_t i = 0; i < coeffs.size(); ++i) q[i] = quantize_one(coeffs[i], i == 0 ? dc_step : step);
  return rlgr_encode(q);
}

std::vector<double> decode_channel(const RahtPlan& plan, std::span<const std::uint8_t> stream, double dc_step,
                                   double step) {
  const std::vector<std::int32_t> q = rlgr_decode(stream);
  if (q.size() != plan.size()) throw DecodeError("attribute stream length does not match geometry");
  std::vector<double> coeffs(q.size());
  for (std::size_t i = 0; i < q.size(); ++i) coeffs[i] = dequantize_one(q[i], i == 0 ? dc_step : step);
  std::vector<double> values(q.size());
  plan.inverse(coeffs, values);
  return values;
}

// Channel c (0..2) of SH band b (0 = DC) in YUV.
std::vector<double> band_channel(std::span<const Vec3> sh_dc, std::span<const ShRest> sh_ac, int band, int c) {
  std::vector<double> v(sh_dc.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    const Vec3 rgb = band == 0 ? sh_dc[i]
                               : Vec3{sh_ac[i][(band - 1) * 3 + 0], sh_ac[i][(band - 1) * 3 + 1],
                                      sh_ac[i][(band - 1) * 3 + 2]};
    v[i] = rgb_to_yuv(rgb)[c];
  }
  return v;
}

}  // namespace

// ---------------------------------------------------------------------------
// SH and opacity

std::vector<std::uint8_t> encode_sh(const RahtPlan& plan, std::span<const Vec3> sh_dc, std::span<const ShRest> sh_ac,
                                    const QuantParams& q) {
  q.validate();
  if (sh_dc.size() != plan.size() || sh_ac.size() != plan.size())
    throw InvalidInput("encode_sh: attribute count does not match geometry");

  Section s;
  s.kind = SectionKind::Sh;
  ByteWriter p;
  p.f64(q.q_dc);
  p.f64(q.q_ac);
  s.params = p.take();
  s.streams.resize(kShBands * 3);

#pragma omp parallel for schedule(dynamic)
  for (int idx = 0; idx < kShBands * 3; ++idx) {
    const int band = idx / 3, c = idx % 3;
    const auto values = band_channel(sh_dc, sh_ac, band, c);
    s.streams[idx] = code_channel(plan, values, q.q_dc, band == 0 ? q.q_dc : q.q_ac);
  }
  return s.serialize();
}

ShAttributes decode_sh(const RahtPlan& plan, std::span<const std::uint8_t> section) {
  const Section s = expect_section(section, SectionKind::Sh, kShBands * 3);
  ByteReader p(s.params);
  const double q_dc = p.f64(), q_ac = p.f64();

  std::vector<std::vector<double>> yuv(kShBands * 3);
  DecodeError failure("");
  bool failed = false;
#pragma omp parallel for schedule(dynamic)
  for (int idx = 0; idx < kShBands * 3; ++idx) {
    try {
      yuv[idx] = decode_channel(plan, s.streams[idx], q_dc, idx / 3 == 0 ? q_dc : q_ac);
    } catch (const DecodeError& e) {
#pragma omp critical
      {
        failed = true;
        failure = e;
      }
    }
  }
  if (failed) throw failure;

  ShAttributes out;
  out.dc.resize(plan.size());
  out.ac.resize(plan.size());
  for (std::size_t i = 0; i < plan.size(); ++i)
    for (int band = 0; band < kShBands; ++band) {
      const Vec3 rgb = yuv_to_rgb({yuv[band * 3][i], yuv[band * 3 + 1][i], yuv[band * 3 + 2][i]});
      if (band == 0)
        out.dc[i] = rgb;
      else
        for (int c = 0; c < 3; ++c) out.ac[i][(band - 1) * 3 + c] = rgb[c];
    }
  return out;
}

std::vector<std::uint8_t> encode_opacity(const RahtPlan& plan, std::span<const double> opacities, double q_op) {
  if (!(q_op > 0)) throw InvalidInput("encode_opacity: step must be positive");
  if (opacities.size() != plan.size()) throw InvalidInput("encode_opacity: count does not match geometry");
  Section s;
  s.kind = SectionKind::Opacity;
  ByteWriter p;
  p.f64(q_op);
  s.params = p.take();
  s.streams.push_back(code_channel(plan, opacities, q_op, q_op));
  return s.serialize();
}

std::vector<double> decode_opacity(const RahtPlan& plan, std::span<const std::uint8_t> section) {
  const Section s = expect_section(section, SectionKind::Opacity, 1);
  ByteReader p(s.params);
  const double q_op = p.f64();
  auto v = decode_channel(plan, s.streams[0], q_op, q_op);
  for (double& x : v) x = std::clamp(x, 0.0, 1.0);
  return v;
}

// ---------------------------------------------------------------------------
// Lossless covariance

CovarianceFixedPoint quantize_covariance(std::span<const Quat> rotations, std::span<const Vec3> scales) {
  if (rotations.size() != scales.size()) throw InvalidInput("covariance: rotation/scale count mismatch");
  constexpr double rot_scale = 1 << CovarianceFixedPoint::kRotationBits;
  constexpr double scale_scale = 1 << CovarianceFixedPoint::kLogScaleBits;
  CovarianceFixedPoint fp;
  fp.rotation.resize(rotations.size());
  fp.log_scale.resize(scales.size());
  for (std::size_t i = 0; i < rotations.size(); ++i) {
    const Quat q = rotations[i].canonical();
    fp.rotation[i] = {quantize_one(q.w, 1 / rot_scale), quantize_one(q.x, 1 / rot_scale),
                      quantize_one(q.y, 1 / rot_scale), quantize_one(q.z, 1 / rot_scale)};
    for (int a = 0; a < 3; ++a) {
      if (!(scales[i][a] > 0)) throw InvalidInput("covariance: scale must be positive");
      fp.log_scale[i][a] = quantize_one(std::log(scales[i][a]), 1 / scale_scale);
    }
  }
  return fp;
}

void dequantize_covariance(const CovarianceFixedPoint& fp, std::vector<Quat>& rotations, std::vector<Vec3>& scales) {
  constexpr double rot_step = 1.0 / (1 << CovarianceFixedPoint::kRotationBits);
  constexpr double scale_step = 1.0 / (1 << CovarianceFixedPoint::kLogScaleBits);
  rotations.resize(fp.rotation.size());
  scales.resize(fp.log_scale.size());
  for (std::size_t i = 0; i < fp.rotation.size(); ++i) {
    const auto& r = fp.rotation[i];
    Quat q{r[0] * rot_step, r[1] * rot_step, r[2] * rot_step, r[3] * rot_step};
    rotations[i] = q.norm() > 0 ? q.canonical() : Quat{};
    for (int a = 0; a < 3; ++a) scales[i][a] = std::exp(fp.log_scale[i][a] * scale_step);
  }
}

std::vector<std::uint8_t> encode_covariance_lossless(std::span<const Quat> rotations, std::span<const Vec3> scales) {
  const CovarianceFixedPoint fp = quantize_covariance(rotations, scales);
  const std::size_t n = fp.rotation.size();
  Section s;
  s.kind = SectionKind::CovarianceLossless;
  s.params = {CovarianceFixedPoint::kRotationBits, CovarianceFixedPoint::kLogScaleBits};
  s.streams.resize(7);
#pragma omp parallel for schedule(static)
  for (int ch = 0; ch < 7; ++ch) {
    std::vector<std::int32_t> residual(n);
    std::int32_t prev = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const std::int32_t v = ch < 4 ? fp.rotation[i][ch] : fp.log_scale[i][ch - 4];
      residual[i] = v - prev;
      prev = v;
    }
    s.streams[ch] = rlgr_encode(residual);
  }
  return s.serialize();
}

CovarianceFixedPoint decode_covariance_lossless(std::span<const std::uint8_t> section) {
  const Section s = expect_section(section, SectionKind::CovarianceLossless, 7);
  if (s.params.size() != 2 || s.params[0] != CovarianceFixedPoint::kRotationBits ||
      s.params[1] != CovarianceFixedPoint::kLogScaleBits)
    throw DecodeError("unsupported covariance fixed-point precision");
  CovarianceFixedPoint fp;
  for (int ch = 0; ch < 7; ++ch) {
    const auto residual = rlgr_decode(s.streams[ch]);
    if (ch == 0) {
      fp.rotation.resize(residual.size());
      fp.log_scale.resize(residual.size());
    } else if (residual.size() != fp.rotation.size()) {
      throw DecodeError("covariance channels disagree on point count");
    }
    std::int32_t prev = 0;
    for (std::size_t i = 0; i < residual.size(); ++i) {
      // Wrapping add: corrupt residuals must not overflow a signed int.
      prev = static_cast<std::int32_t>(static_cast<std::uint32_t>(prev) + static_cast<std::uint32_t>(residual[i]));
      if (ch < 4)
        fp.rotation[i][ch] = prev;
      else
        fp.log_scale[i][ch - 4] = prev;
    }
  }
  return fp;
}

// ---------------------------------------------------------------------------
// Vector quantization

namespace {

double sq_dist(const double* a, const double* b, std::size_t dim) {
  double d = 0;
  for (std::size_t k = 0; k < dim; ++k) d += (a[k] - b[k]) * (a[k] - b[k]);
  return d;
}

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

std::size_t sample(std::span<const double> mass, double total, std::mt19937_64& rng) {
  const double target = uniform01(rng) * total;
  double acc = 0;
  std::size_t last = 0;
  for (std::size_t i = 0; i < mass.size(); ++i) {
    if (mass[i] <= 0) continue;
    acc += mass[i];
    last = i;
    if (target < acc) return i;
  }
  return last;
}

void assign(std::span<const double> x, std::size_t dim, Codebook& book) {
  const std::size_t n = x.size() / dim, k = book.size();
  book.indices.resize(n);
#pragma omp parallel for schedule(static)
  for (std::size_t i = 0; i < n; ++i) {
    std::uint32_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < k; ++c) {
      const double d = sq_dist(&x[i * dim], &book.entries[c * dim], dim);
      if (d < best_d) {
        best_d = d;
        best = static_cast<std::uint32_t>(c);
      }
    }
    book.indices[i] = best;
  }
}

}  // namespace

double weighted_distortion(std::span<const double> vectors, std::size_t dim, std::span<const double> weights,
                           const Codebook& book) {
  const std::size_t n = vectors.size() / dim;
  double num = 0, den = 0;
  for (std::size_t i = 0; i < n; ++i) {
    num += weights[i] * sq_dist(&vectors[i * dim], &book.entries[book.indices[i] * dim], dim);
    den += weights[i];
  }
  return den > 0 ? num / den : 0;
}

Codebook vq_train(std::span<const double> vectors, std::size_t dim, std::span<const double> weights, std::size_t k,
                  int iterations, std::uint64_t seed, VqSpace space) {
  if (dim == 0 || vectors.size() % dim != 0) throw InvalidInput("vq_train: bad vector dimension");
  const std::size_t n = vectors.size() / dim;
  if (n == 0) throw InvalidInput("vq_train: no vectors");
  if (k == 0) throw InvalidInput("vq_train: K must be at least 1");
  if (weights.size() != n) throw InvalidInput("vq_train: weight count mismatch");
  double total_weight = 0;
  for (double w : weights) {
    if (!(w >= 0)) throw InvalidInput("vq_train: negative weight");
    total_weight += w;
  }
  if (!(total_weight > 0)) throw InvalidInput("vq_train: all weights are zero");

  std::vector<double> x(vectors.begin(), vectors.end());
  if (space == VqSpace::Rotation) {
    if (dim != 4) throw InvalidInput("vq_train: rotation space needs 4-vectors");
    for (std::size_t i = 0; i < n; ++i)
      if (x[i * 4] < 0)
        for (int c = 0; c < 4; ++c) x[i * 4 + c] = -x[i * 4 + c];
  }

  Codebook book;
  book.dim = dim;
  std::mt19937_64 rng(seed);

  // Weighted k-means++ seeding.
  std::vector<std::size_t> chosen{sample(weights, total_weight, rng)};
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  std::vector<double> mass(n);
  while (chosen.size() < k) {
    const double* c = &x[chosen.back() * dim];
    double total = 0;
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], sq_dist(&x[i * dim], c, dim));
      mass[i] = weights[i] * d2[i];
      total += mass[i];
    }
    if (!(total > 0)) break;
    chosen.push_back(sample(mass, total, rng));
  }
  if (chosen.size() < k) {
    book.padded = true;
    const std::size_t distinct = chosen.size();
    for (std::size_t i = distinct; i < k; ++i) chosen.push_back(chosen[i % distinct]);
  }
  book.entries.resize(k * dim);
  for (std::size_t c = 0; c < k; ++c)
    std::copy_n(&x[chosen[c] * dim], dim, &book.entries[c * dim]);

  // Lloyd iterations; empty (or zero-weight) clusters keep their entry.
  for (int it = 0; it < iterations; ++it) {
    assign(x, dim, book);
    book.distortion.push_back(weighted_distortion(x, dim, weights, book));
    std::vector<double> sum(k * dim, 0.0), wsum(k, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t c = book.indices[i];
      wsum[c] += weights[i];
      for (std::size_t d = 0; d < dim; ++d) sum[c * dim + d] += weights[i] * x[i * dim + d];
    }
    for (std::size_t c = 0; c < k; ++c)
      if (wsum[c] > 0)
        for (std::size_t d = 0; d < dim; ++d) book.entries[c * dim + d] = sum[c * dim + d] / wsum[c];
  }
  assign(x, dim, book);
  book.distortion.push_back(weighted_distortion(x, dim, weights, book));

  if (space == VqSpace::Rotation) {
    for (std::size_t c = 0; c < k; ++c) {
      double* e = &book.entries[c * 4];
      const Quat q{e[0], e[1], e[2], e[3]};
      const Quat r = q.norm() > 0 ? q.canonical() : Quat{};
      e[0] = r.w;
      e[1] = r.x;
      e[2] = r.y;
      e[3] = r.z;
    }
    assign(x, dim, book);
  }
  return book;
}

std::vector<double> vq_importance(std::span<const double> opacities, std::span<const Vec3> scales) {
  std::vector<double> w(opacities.size());
  double total = 0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    w[i] = opacities[i] * (scales[i][0] * scales[i][1] * scales[i][2]);
    total += w[i];
  }
  if (total > 0 && std::isfinite(total))
    for (double& v : w) v /= total;
  else
    std::fill(w.begin(), w.end(), w.empty() ? 0.0 : 1.0 / static_cast<double>(w.size()));
  return w;
}

std::vector<std::uint8_t> encode_covariance_vq(std::span<const Quat> rotations, std::span<const Vec3> scales,
                                               std::span<const double> opacities, const VqConfig& config) {
  const std::size_t n = rotations.size();
  if (scales.size() != n || opacities.size() != n) throw InvalidInput("encode_covariance_vq: count mismatch");
  if (config.k_rot < 1 || config.k_scale < 1 || config.k_rot > 4096 || config.k_scale > 4096)
    throw InvalidInput("encode_covariance_vq: codebook sizes must lie in [1, 4096]");

  Section s;
  s.kind = SectionKind::CovarianceVq;
  s.streams.resize(4);
  std::uint32_t k_rot = 0, k_scale = 0;
  if (n > 0) {
    std::vector<double> rot(n * 4), log_scale(n * 3);
    for (std::size_t i = 0; i < n; ++i) {
      const Quat q = rotations[i].canonical();
      rot[i * 4] = q.w;
      rot[i * 4 + 1] = q.x;
      rot[i * 4 + 2] = q.y;
      rot[i * 4 + 3] = q.z;
      for (int a = 0; a < 3; ++a) log_scale[i * 3 + a] = std::log(scales[i][a]);
    }
    const auto weights = vq_importance(opacities, scales);
    const Codebook rb = vq_train(rot, 4, weights, config.k_rot, config.iterations, config.seed, VqSpace::Rotation);
    const Codebook sb =
        vq_train(log_scale, 3, weights, config.k_scale, config.iterations, config.seed + 1, VqSpace::Euclidean);
    k_rot = static_cast<std::uint32_t>(rb.size());
    k_scale = static_cast<std::uint32_t>(sb.size());

    ByteWriter re, se;
    for (double v : rb.entries) re.f32(static_cast<float>(v));
    for (double v : sb.entries) se.f32(static_cast<float>(v));
    s.streams[0] = re.take();
    s.streams[1] = se.take();
    s.streams[2] = ac_encode_symbols(rb.indices, k_rot);
    s.streams[3] = ac_encode_symbols(sb.indices, k_scale);
  } else {
    s.streams[2] = ac_encode_symbols({}, 1);
    s.streams[3] = ac_encode_symbols({}, 1);
  }
  ByteWriter p;
  p.u32(k_rot);
  p.u32(k_scale);
  s.params = p.take();
  return s.serialize();
}

VqDecoded decode_covariance_vq(std::span<const std::uint8_t> section) {
  const Section s = expect_section(section, SectionKind::CovarianceVq, 4);
  ByteReader p(s.params);
  const std::uint32_t k_rot = p.u32(), k_scale = p.u32();
  if (s.streams[0].size() != std::size_t{k_rot} * 16 || s.streams[1].size() != std::size_t{k_scale} * 12)
    throw DecodeError("VQ codebook size does not match header");
  if (k_rot > 4096 || k_scale > 4096) throw DecodeError("VQ codebook too large");

  std::vector<Quat> rot_book(k_rot);
  std::vector<Vec3> scale_book(k_scale);
  ByteReader rr(s.streams[0]), sr(s.streams[1]);
  for (auto& q : rot_book) {
    Quat e;
    e.w = rr.f32();
    e.x = rr.f32();
    e.y = rr.f32();
    e.z = rr.f32();
    q = e.norm() > 0 ? e.canonical() : Quat{};
  }
  for (auto& v : scale_book)
    for (int a = 0; a < 3; ++a) v[a] = std::exp(static_cast<double>(sr.f32()));

  VqDecoded out;
  out.rotation_index = ac_decode_symbols(s.streams[2], std::max<std::uint32_t>(k_rot, 1));
  out.scale_index = ac_decode_symbols(s.streams[3], std::max<std::uint32_t>(k_scale, 1));
  if (out.rotation_index.size() != out.scale_index.size()) throw DecodeError("VQ index streams disagree on count");
  if (!out.rotation_index.empty() && (k_rot == 0 || k_scale == 0)) throw DecodeError("VQ indices without codebook");
  out.rotations.reserve(out.rotation_index.size());
  out.scales.reserve(out.scale_index.size());
  for (std::size_t i = 0; i < out.rotation_index.size(); ++i) {
    out.rotations.push_back(rot_book[out.rotation_index[i]]);
    out.scales.push_back(scale_book[out.scale_index[i]]);
  }
  return out;
}

}  // namespace gsc
