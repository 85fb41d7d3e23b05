#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace gsc {

/// MSB-first bit packer; flush() pads the last byte with zeros.
class BitWriter {
 public:
  void put_bit(unsigned bit);
  /// Low `count` bits of value, most significant first. count <= 32.
  void put_bits(std::uint32_t value, int count);
  void flush();
  std::vector<std::uint8_t> take();

 private:
  std::vector<std::uint8_t> buf_;
  std::uint32_t acc_ = 0;
  int fill_ = 0;
};

class BitReader {
 public:
  explicit BitReader(std::span<const std::uint8_t> data) : data_(data) {}
  unsigned get_bit();
  std::uint32_t get_bits(int count);

 private:
  std::span<const std::uint8_t> data_;
  std::size_t bit_ = 0;
};

inline std::uint32_t zigzag(std::int32_t v) {
  return (static_cast<std::uint32_t>(v) << 1) ^ static_cast<std::uint32_t>(v >> 31);
}
inline std::int32_t unzigzag(std::uint32_t u) {
  return static_cast<std::int32_t>((u >> 1) ^ (0u - (u & 1)));
}

/// Adaptive run-length / Golomb-Rice state. Both parameters are fixed point
/// with kScale fractional steps and stay within [0, kMaxParam * kScale].
struct RlgrState {
  static constexpr std::uint32_t kScale = 16;
  static constexpr std::uint32_t kMaxParam = 24;

  std::uint32_t run = 0;   // run-mode parameter; 2^(run / kScale) zeros per complete run
  std::uint32_t rice = 0;  // Golomb-Rice parameter

  std::uint32_t run_k() const { return run / kScale; }
  std::uint32_t rice_k() const { return rice / kScale; }
};

/// Payload: [u32 count][RLGR bits, MSB-first].
std::vector<std::uint8_t> rlgr_encode(std::span<const std::int32_t> values);
std::vector<std::int32_t> rlgr_decode(std::span<const std::uint8_t> payload);

/// Adaptive frequency model shared by the arithmetic encoder and decoder.
class FrequencyModel {
 public:
  static constexpr std::uint32_t kIncrement = 8;
  static constexpr std::uint32_t kMaxTotal = 1u << 16;

  explicit FrequencyModel(std::uint32_t alphabet);

  std::uint32_t alphabet() const { return static_cast<std::uint32_t>(freq_.size()); }
  std::uint32_t total() const { return total_; }
  std::uint32_t freq(std::uint32_t s) const { return freq_[s]; }
  std::uint32_t cumulative(std::uint32_t s) const;
  /// Symbol whose cumulative interval contains target; writes its low bound.
  std::uint32_t find(std::uint32_t target, std::uint32_t& low) const;
  void update(std::uint32_t s);

 private:
  std::vector<std::uint32_t> freq_;
  std::uint32_t total_;
};

/// Payload: [u32 count][range-coded bytes]. alphabet must lie in [1, 4096].
std::vector<std::uint8_t> ac_encode_symbols(std::span<const std::uint32_t> symbols, std::uint32_t alphabet);
std::vector<std::uint32_t> ac_decode_symbols(std::span<const std::uint8_t> payload, std::uint32_t alphabet);

}  // namespace gsc
