#include "qce/bitstream.hpp"

#include <cctype>

#include "qce/errors.hpp"

namespace qce {

void BitStream::append_uint(std::uint64_t value, int width) {
  for (int i = width - 1; i >= 0; --i) push(((value >> i) & 1u) != 0);
}

void BitStream::append(const BitStream& other) {
  bits_.insert(bits_.end(), other.bits_.begin(), other.bits_.end());
}

std::string BitStream::to_bits() const {
  std::string s;
  s.reserve(bits_.size());
  for (bool b : bits_) s.push_back(b ? '1' : '0');
  return s;
}

std::string BitStream::to_hex() const {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string s;
  const std::size_t nibbles = (bits_.size() + 7) / 8 * 2;
  for (std::size_t n = 0; n < nibbles; ++n) {
    int v = 0;
    for (std::size_t j = 0; j < 4; ++j) {
      const std::size_t i = n * 4 + j;
      v = (v << 1) | (i < bits_.size() && bits_[i] ? 1 : 0);
    }
    s.push_back(kDigits[v]);
  }
  return s;
}

BitStream BitStream::from_bits(std::string_view bits) {
  BitStream out;
  for (char c : bits) {
    if (c != '0' && c != '1') {
      throw QceError(ErrorCode::kInvalidArgument,
                     "bit strings may only contain 0 and 1");
    }
    out.push(c == '1');
  }
  return out;
}

BitStream BitStream::from_hex(std::string_view hex) {
  BitStream out;
  for (char c : hex) {
    const int lc = std::tolower(static_cast<unsigned char>(c));
    int v;
    if (lc >= '0' && lc <= '9') {
      v = lc - '0';
    } else if (lc >= 'a' && lc <= 'f') {
      v = lc - 'a' + 10;
    } else {
      throw QceError(ErrorCode::kInvalidArgument, "invalid hex digit");
    }
    out.append_uint(static_cast<std::uint64_t>(v), 4);
  }
  return out;
}

bool BitReader::read_bit() {
  if (pos_ >= stream_->size()) {
    throw QceError(ErrorCode::kTruncatedStream, "read past end of stream");
  }
  return (*stream_)[pos_++];
}

std::uint64_t BitReader::read_uint(int width) {
  std::uint64_t v = 0;
  for (int i = 0; i < width; ++i) v = (v << 1) | (read_bit() ? 1u : 0u);
  return v;
}

bool BitReader::at_padding() const {
  for (std::size_t i = pos_; i < stream_->size(); ++i) {
    if ((*stream_)[i]) return false;
  }
  return true;
}

}  // namespace qce
