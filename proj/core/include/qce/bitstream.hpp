#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace qce {

// Ordered bit sequence, MSB-first within every codeword.
class BitStream {
 public:
  void push(bool bit) { bits_.push_back(bit); }
  // Writes the low `width` bits of value, most significant first.
  void append_uint(std::uint64_t value, int width);
  void append(const BitStream& other);

  std::size_t size() const { return bits_.size(); }
  bool empty() const { return bits_.empty(); }
  bool operator[](std::size_t i) const { return bits_[i]; }
  bool operator==(const BitStream&) const = default;

  std::string to_bits() const;
  // Zero-padded to the next byte boundary; padding is not part of size().
  std::string to_hex() const;

  static BitStream from_bits(std::string_view bits);
  static BitStream from_hex(std::string_view hex);

 private:
  std::vector<bool> bits_;
};

class BitReader {
 public:
  explicit BitReader(const BitStream& stream, std::size_t pos = 0)
      : stream_(&stream), pos_(pos) {}

  // Throws kTruncatedStream when exhausted.
  bool read_bit();
  std::uint64_t read_uint(int width);

  std::size_t position() const { return pos_; }
  std::size_t remaining() const { return stream_->size() - pos_; }
  // True when every remaining bit is zero (byte padding).
  bool at_padding() const;

 private:
  const BitStream* stream_;
  std::size_t pos_;
};

}  // namespace qce
