#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fedsim/tensor.hpp"

namespace fedsim {

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;

/// Appends big-endian primitives to a growing buffer.
class ByteWriter {
 public:
  void u8(std::uint8_t v) { buf_.push_back(v); }
  void u16(std::uint16_t v);
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void f64(double v);
  void raw(ByteView bytes) { buf_.insert(buf_.end(), bytes.begin(), bytes.end()); }
  /// u16 length prefix + bytes. Throws kMalformedEncoding above 65535 bytes.
  void short_string(std::string_view s);

  const Bytes& bytes() const& noexcept { return buf_; }
  Bytes take() && { return std::move(buf_); }

 private:
  Bytes buf_;
};

/// Cursor over an immutable byte view. Short reads throw kTruncatedInput.
class ByteReader {
 public:
  explicit ByteReader(ByteView bytes) : bytes_(bytes) {}

  std::uint8_t u8();
  std::uint16_t u16();
  std::uint32_t u32();
  std::uint64_t u64();
  double f64();
  std::string short_string();

  std::size_t remaining() const noexcept { return bytes_.size() - pos_; }
  std::size_t position() const noexcept { return pos_; }
  bool at_end() const noexcept { return pos_ == bytes_.size(); }

 private:
  ByteView take(std::size_t n);

  ByteView bytes_;
  std::size_t pos_ = 0;
};

void encode_parameters(const Parameters& p, ByteWriter& out);
Bytes encode_parameters(const Parameters& p);

/// Reads one encoded Parameters value and leaves the cursor after it.
Parameters decode_parameters(ByteReader& in);
/// Whole-buffer form; trailing bytes are kMalformedEncoding.
Parameters decode_parameters(ByteView bytes);

void encode_config(const ConfigMap& c, ByteWriter& out);
Bytes encode_config(const ConfigMap& c);

ConfigMap decode_config(ByteReader& in);
ConfigMap decode_config(ByteView bytes);

}  // namespace fedsim
