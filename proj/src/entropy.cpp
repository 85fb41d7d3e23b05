#include "gsc/entropy.hpp"

#include <algorithm>
#include <string>

#include "gsc/bytes.hpp"
#include "gsc/errors.hpp"

namespace gsc {

// ---------------------------------------------------------------------------
// Bit I/O

void BitWriter::put_bit(unsigned bit) {
  acc_ = (acc_ << 1) | (bit & 1u);
  if (++fill_ == 8) {
    buf_.push_back(static_cast<std::uint8_t>(acc_));
    acc_ = 0;
    fill_ = 0;
  }
}

void BitWriter::put_bits(std::uint32_t value, int count) {
  for (int i = count - 1; i >= 0; --i) put_bit((value >> i) & 1u);
}

void BitWriter::flush() {
  while (fill_ != 0) put_bit(0);
}

std::vector<std::uint8_t> BitWriter::take() {
  flush();
  return std::move(buf_);
}

unsigned BitReader::get_bit() {
  if (bit_ >= data_.size() * 8) throw DecodeError("bit stream truncated");
  const unsigned b = (data_[bit_ >> 3] >> (7 - (bit_ & 7))) & 1u;
  ++bit_;
  return b;
}

std::uint32_t BitReader::get_bits(int count) {
  std::uint32_t v = 0;
  for (int i = 0; i < count; ++i) v = (v << 1) | get_bit();
  return v;
}

// ---------------------------------------------------------------------------
// RLGR

namespace {

constexpr std::uint32_t kRunUpNoRun = 3;    // zero coded outside run mode
constexpr std::uint32_t kRunDownNoRun = 1;  // nonzero coded outside run mode
constexpr std::uint32_t kRunUp = 4;         // complete run
constexpr std::uint32_t kRunDown = 6;       // partial run
constexpr std::uint32_t kRiceUp = 2;
constexpr std::uint32_t kRiceDown = 1;
constexpr std::uint32_t kEscapeQuotient = 24;
constexpr std::uint32_t kParamCap = RlgrState::kMaxParam * RlgrState::kScale;

void raise(std::uint32_t& p, std::uint32_t by) { p = std::min(p + by, kParamCap); }
void lower(std::uint32_t& p, std::uint32_t by) { p -= std::min(p, by); }

void adapt_rice(RlgrState& st, std::uint32_t u) {
  const std::uint32_t k = st.rice_k();
  if (k < 32 && (u >> k) != 0)
    raise(st.rice, kRiceUp);
  else if (u == 0)
    lower(st.rice, kRiceDown);
}

void put_rice(BitWriter& bw, std::uint32_t u, std::uint32_t k) {
  const std::uint32_t q = u >> k;
  if (q < kEscapeQuotient) {
    for (std::uint32_t i = 0; i < q; ++i) bw.put_bit(1);
    bw.put_bit(0);
    bw.put_bits(u, static_cast<int>(k));
  } else {
    for (std::uint32_t i = 0; i < kEscapeQuotient; ++i) bw.put_bit(1);
    bw.put_bits(u, 32);
  }
}

std::uint32_t get_rice(BitReader& br, std::uint32_t k) {
  std::uint32_t q = 0;
  while (q < kEscapeQuotient && br.get_bit() == 1) ++q;
  if (q == kEscapeQuotient) return br.get_bits(32);
  return (q << k) | br.get_bits(static_cast<int>(k));
}

}  // namespace

std::vector<std::uint8_t> rlgr_encode(std::span<const std::int32_t> values) {
  const std::size_t n = values.size();
  BitWriter bw;
  RlgrState st;
  std::size_t i = 0;
  while (i < n) {
    const std::uint32_t k = st.run_k();
    if (k == 0) {
      const std::uint32_t u = zigzag(values[i++]);
      put_rice(bw, u, st.rice_k());
      adapt_rice(st, u);
      if (u == 0)
        raise(st.run, kRunUpNoRun);
      else
        lower(st.run, kRunDownNoRun);
      continue;
    }
    const std::size_t m = std::size_t{1} << k;
    std::size_t r = 0;
    while (r < m && i + r < n && values[i + r] == 0) ++r;
    if (r == m || i + r == n) {
      // Complete run. At the end of the data a short tail of zeros is sent the
      // same way; the decoder stops at the element count.
      bw.put_bit(0);
      i += r;
      raise(st.run, kRunUp);
    } else {
      const std::uint32_t u = zigzag(values[i + r]) - 1;
      bw.put_bit(1);
      bw.put_bits(static_cast<std::uint32_t>(r), static_cast<int>(k));
      put_rice(bw, u, st.rice_k());
      adapt_rice(st, u);
      lower(st.run, kRunDown);
      i += r + 1;
    }
  }

  ByteWriter out;
  out.u32(static_cast<std::uint32_t>(n));
  out.bytes(bw.take());
  return out.take();
}

std::vector<std::int32_t> rlgr_decode(std::span<const std::uint8_t> payload) {
  ByteReader header(payload);
  const std::size_t n = header.u32();
  BitReader br(payload.subspan(4));
  RlgrState st;
  std::vector<std::int32_t> out;
  out.reserve(std::min<std::size_t>(n, payload.size() * 64));
  while (out.size() < n) {
    const std::uint32_t k = st.run_k();
    if (k == 0) {
      const std::uint32_t u = get_rice(br, st.rice_k());
      adapt_rice(st, u);
      if (u == 0)
        raise(st.run, kRunUpNoRun);
      else
        lower(st.run, kRunDownNoRun);
      out.push_back(unzigzag(u));
      continue;
    }
    const std::size_t m = std::size_t{1} << k;
    if (br.get_bit() == 0) {
      out.resize(out.size() + std::min(m, n - out.size()), 0);
      raise(st.run, kRunUp);
    } else {
      const std::size_t r = br.get_bits(static_cast<int>(k));
      const std::uint32_t u = get_rice(br, st.rice_k());
      if (out.size() + r + 1 > n || u == 0xffffffffu) throw DecodeError("RLGR stream inconsistent with count");
      adapt_rice(st, u);
      lower(st.run, kRunDown);
      out.resize(out.size() + r, 0);
      out.push_back(unzigzag(u + 1));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Adaptive arithmetic (range) coding

FrequencyModel::FrequencyModel(std::uint32_t alphabet) : freq_(alphabet, 1), total_(alphabet) {}

std::uint32_t FrequencyModel::cumulative(std::uint32_t s) const {
  std::uint32_t c = 0;
  for (std::uint32_t i = 0; i < s; ++i) c += freq_[i];
  return c;
}

std::uint32_t FrequencyModel::find(std::uint32_t target, std::uint32_t& low) const {
  std::uint32_t c = 0;
  for (std::uint32_t s = 0; s < freq_.size(); ++s) {
    if (target < c + freq_[s]) {
      low = c;
      return s;
    }
    c += freq_[s];
  }
  low = c - freq_.back();
  return static_cast<std::uint32_t>(freq_.size() - 1);
}

void FrequencyModel::update(std::uint32_t s) {
  freq_[s] += kIncrement;
  total_ += kIncrement;
  if (total_ > kMaxTotal) {
    total_ = 0;
    for (auto& f : freq_) {
      f = (f + 1) / 2;
      total_ += f;
    }
  }
}

namespace {

constexpr std::uint32_t kTop = 1u << 24;
constexpr std::uint32_t kMaxAlphabet = 4096;

class RangeEncoder {
 public:
  explicit RangeEncoder(std::vector<std::uint8_t>& out) : out_(out) {}

  void encode(std::uint32_t low, std::uint32_t freq, std::uint32_t total) {
    const std::uint32_t r = range_ / total;
    low_ += static_cast<std::uint64_t>(r) * low;
    range_ = r * freq;
    while (range_ < kTop) {
      range_ <<= 8;
      shift_low();
    }
  }

  void finish() {
    for (int i = 0; i < 5; ++i) shift_low();
  }

 private:
  // Carry-propagating byte output: pending 0xFF bytes wait in cache_size_
  // until it is known whether a carry ripples through them.
  void shift_low() {
    if (static_cast<std::uint32_t>(low_) < 0xff000000u || (low_ >> 32) != 0) {
      const auto carry = static_cast<std::uint8_t>(low_ >> 32);
      std::uint8_t temp = cache_;
      do {
        out_.push_back(static_cast<std::uint8_t>(temp + carry));
        temp = 0xff;
      } while (--cache_size_ != 0);
      cache_ = static_cast<std::uint8_t>(low_ >> 24);
    }
    ++cache_size_;
    low_ = (low_ & 0x00ffffffu) << 8;
  }

  std::vector<std::uint8_t>& out_;
  std::uint64_t low_ = 0;
  std::uint32_t range_ = 0xffffffffu;
  std::uint8_t cache_ = 0;
  std::uint64_t cache_size_ = 1;
};

class RangeDecoder {
 public:
  explicit RangeDecoder(std::span<const std::uint8_t> in) : in_(in) {
    for (int i = 0; i < 5; ++i) code_ = (code_ << 8) | next();
  }

  std::uint32_t target(std::uint32_t total) {
    r_ = range_ / total;
    return std::min(code_ / r_, total - 1);
  }

  void consume(std::uint32_t low, std::uint32_t freq) {
    code_ -= r_ * low;
    range_ = r_ * freq;
    while (range_ < kTop) {
      code_ = (code_ << 8) | next();
      range_ <<= 8;
    }
  }

 private:
  std::uint32_t next() {
    if (pos_ >= in_.size()) throw DecodeError("arithmetic-coded stream truncated");
    return in_[pos_++];
  }

  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
  std::uint32_t code_ = 0;
  std::uint32_t range_ = 0xffffffffu;
  std::uint32_t r_ = 1;
};

void check_alphabet(std::uint32_t alphabet) {
  if (alphabet < 1 || alphabet > kMaxAlphabet)
    throw InvalidInput("arithmetic coder alphabet must lie in [1, " + std::to_string(kMaxAlphabet) + "]");
}

}  // namespace

std::vector<std::uint8_t> ac_encode_symbols(std::span<const std::uint32_t> symbols, std::uint32_t alphabet) {
  check_alphabet(alphabet);
  ByteWriter header;
  header.u32(static_cast<std::uint32_t>(symbols.size()));
  std::vector<std::uint8_t> out = header.take();
  if (symbols.empty()) return out;

  FrequencyModel model(alphabet);
  RangeEncoder enc(out);
  for (std::uint32_t s : symbols) {
    if (s >= alphabet) throw InvalidInput("symbol outside alphabet");
    enc.encode(model.cumulative(s), model.freq(s), model.total());
    model.update(s);
  }
  enc.finish();
  return out;
}

std::vector<std::uint32_t> ac_decode_symbols(std::span<const std::uint8_t> payload, std::uint32_t alphabet) {
  check_alphabet(alphabet);
  ByteReader header(payload);
  const std::size_t n = header.u32();
  std::vector<std::uint32_t> out;
  if (n == 0) return out;
  // Each symbol costs at least a few bits at the worst-case probability floor,
  // so a count wildly beyond the payload size means a corrupt header.
  if (n > (payload.size() + 16) * 8 * 65536ull) throw DecodeError("symbol count inconsistent with payload size");
  out.reserve(std::min<std::size_t>(n, payload.size() * 8));

  FrequencyModel model(alphabet);
  RangeDecoder dec(payload.subspan(4));
  for (std::size_t i = 0; i < n; ++i) {
    std::uint32_t low = 0;
    const std::uint32_t s = model.find(dec.target(model.total()), low);
    dec.consume(low, model.freq(s));
    model.update(s);
    out.push_back(s);
  }
  return out;
}

}  // namespace gsc
