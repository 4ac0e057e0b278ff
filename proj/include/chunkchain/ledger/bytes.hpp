#pragma once

#include <algorithm>
#include <array>
#include <compare>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace chunkchain {

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;

/// Base class for every error the library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DecodeError : public Error {
 public:
  using Error::Error;
};

inline ByteView as_bytes(std::string_view text) {
  return {reinterpret_cast<const std::uint8_t *>(text.data()), text.size()};
}

inline std::string to_hex(ByteView bytes) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  out.reserve(bytes.size() * 2);
  for (auto b : bytes) {
    out.push_back(kDigits[b >> 4]);
    out.push_back(kDigits[b & 0x0f]);
  }
  return out;
}

inline Bytes from_hex(std::string_view hex) {
  auto nibble = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
  };
  if (hex.size() % 2 != 0) throw DecodeError("hex string has odd length");
  Bytes out(hex.size() / 2);
  for (std::size_t i = 0; i < out.size(); ++i) {
    int hi = nibble(hex[2 * i]);
    int lo = nibble(hex[2 * i + 1]);
    if (hi < 0 || lo < 0) throw DecodeError("invalid hex digit");
    out[i] = static_cast<std::uint8_t>((hi << 4) | lo);
  }
  return out;
}

/// 32-byte hash output. Orders lexicographically by byte, which equals the
/// ordering of the lowercase hex rendering.
struct Digest {
  std::array<std::uint8_t, 32> bytes{};

  static Digest from_span(ByteView raw) {
    if (raw.size() != 32) throw DecodeError("digest must be 32 bytes");
    Digest d;
    std::copy(raw.begin(), raw.end(), d.bytes.begin());
    return d;
  }
  static Digest from_hex(std::string_view hex) {
    if (hex.size() != 64) throw DecodeError("digest hex must be 64 characters");
    return from_span(chunkchain::from_hex(hex));
  }

  std::string hex() const { return to_hex(bytes); }
  bool is_zero() const {
    return std::all_of(bytes.begin(), bytes.end(), [](auto b) { return b == 0; });
  }

  friend auto operator<=>(const Digest &, const Digest &) = default;
};

/// Number of leading zero bits, 0..256.
inline unsigned leading_zero_bits(const Digest &d) {
  unsigned bits = 0;
  for (auto b : d.bytes) {
    if (b == 0) {
      bits += 8;
      continue;
    }
    for (int i = 7; i >= 0 && !((b >> i) & 1); --i) ++bits;
    break;
  }
  return bits;
}

// Canonical serialization: byte fields as 4-byte big-endian length + raw
// bytes, integers as 8-byte big-endian, enums as 1 byte, lists as 4-byte
// big-endian count followed by elements.
class CanonicalWriter {
 public:
  void field(ByteView raw) {
    if (raw.size() > 0xffffffffu) throw Error("field too large to serialize");
    put_u32(static_cast<std::uint32_t>(raw.size()));
    out_.insert(out_.end(), raw.begin(), raw.end());
  }
  void field(std::string_view text) { field(as_bytes(text)); }
  void field(const Digest &d) { field(ByteView(d.bytes)); }
  void u64(std::uint64_t v) {
    for (int shift = 56; shift >= 0; shift -= 8)
      out_.push_back(static_cast<std::uint8_t>(v >> shift));
  }
  void i64(std::int64_t v) { u64(static_cast<std::uint64_t>(v)); }
  void u8(std::uint8_t v) { out_.push_back(v); }
  void count(std::size_t n) {
    if (n > 0xffffffffu) throw Error("list too long to serialize");
    put_u32(static_cast<std::uint32_t>(n));
  }

  const Bytes &bytes() const & { return out_; }
  Bytes take() && { return std::move(out_); }

 private:
  void put_u32(std::uint32_t v) {
    for (int shift = 24; shift >= 0; shift -= 8)
      out_.push_back(static_cast<std::uint8_t>(v >> shift));
  }

  Bytes out_;
};

class CanonicalReader {
 public:
  explicit CanonicalReader(ByteView in) : in_(in) {}

  Bytes field() {
    auto n = get_u32();
    need(n);
    Bytes out(in_.begin() + pos_, in_.begin() + pos_ + n);
    pos_ += n;
    return out;
  }
  std::string text() {
    auto raw = field();
    return {raw.begin(), raw.end()};
  }
  Digest digest() { return Digest::from_span(field()); }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v = (v << 8) | in_[pos_++];
    return v;
  }
  std::int64_t i64() { return static_cast<std::int64_t>(u64()); }
  std::uint8_t u8() {
    need(1);
    return in_[pos_++];
  }
  std::size_t count() { return get_u32(); }

  bool done() const { return pos_ == in_.size(); }

 private:
  void need(std::size_t n) const {
    if (in_.size() - pos_ < n) throw DecodeError("truncated canonical encoding");
  }
  std::uint32_t get_u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v = (v << 8) | in_[pos_++];
    return v;
  }

  ByteView in_;
  std::size_t pos_ = 0;
};

}  // namespace chunkchain
