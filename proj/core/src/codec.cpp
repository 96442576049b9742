#include "fedsim/codec.hpp"

#include <bit>
#include <cmath>

#include "fedsim/error.hpp"

namespace fedsim {

namespace {

constexpr std::uint8_t kTagBool = 0x00;
constexpr std::uint8_t kTagInt = 0x01;
constexpr std::uint8_t kTagFloat = 0x02;
constexpr std::uint8_t kTagString = 0x03;

}  // namespace

void ByteWriter::u16(std::uint16_t v) {
  buf_.push_back(static_cast<std::uint8_t>(v >> 8));
  buf_.push_back(static_cast<std::uint8_t>(v));
}

void ByteWriter::u32(std::uint32_t v) {
  for (int shift = 24; shift >= 0; shift -= 8) {
    buf_.push_back(static_cast<std::uint8_t>(v >> shift));
  }
}

void ByteWriter::u64(std::uint64_t v) {
  for (int shift = 56; shift >= 0; shift -= 8) {
    buf_.push_back(static_cast<std::uint8_t>(v >> shift));
  }
}

void ByteWriter::f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

void ByteWriter::short_string(std::string_view s) {
  if (s.size() > 0xFFFF) {
    fail(ErrorCode::kMalformedEncoding,
         "string of " + std::to_string(s.size()) + " bytes exceeds u16 length");
  }
  u16(static_cast<std::uint16_t>(s.size()));
  const auto* p = reinterpret_cast<const std::uint8_t*>(s.data());
  buf_.insert(buf_.end(), p, p + s.size());
}

ByteView ByteReader::take(std::size_t n) {
  if (remaining() < n) {
    fail(ErrorCode::kTruncatedInput, "need " + std::to_string(n) +
                                         " bytes at offset " +
                                         std::to_string(pos_) + ", have " +
                                         std::to_string(remaining()));
  }
  auto view = bytes_.subspan(pos_, n);
  pos_ += n;
  return view;
}

std::uint8_t ByteReader::u8() { return take(1)[0]; }

std::uint16_t ByteReader::u16() {
  auto b = take(2);
  return static_cast<std::uint16_t>((b[0] << 8) | b[1]);
}

std::uint32_t ByteReader::u32() {
  auto b = take(4);
  std::uint32_t v = 0;
  for (auto x : b) v = (v << 8) | x;
  return v;
}

std::uint64_t ByteReader::u64() {
  auto b = take(8);
  std::uint64_t v = 0;
  for (auto x : b) v = (v << 8) | x;
  return v;
}

double ByteReader::f64() { return std::bit_cast<double>(u64()); }

std::string ByteReader::short_string() {
  const auto len = u16();
  auto b = take(len);
  return std::string(reinterpret_cast<const char*>(b.data()), b.size());
}

void encode_parameters(const Parameters& p, ByteWriter& out) {
  out.u32(static_cast<std::uint32_t>(p.tensors.size()));
  for (const auto& t : p.tensors) {
    out.u8(static_cast<std::uint8_t>(t.ndims()));
    for (auto d : t.shape()) out.u32(d);
    for (auto v : t.data()) out.f64(v);
  }
}

Bytes encode_parameters(const Parameters& p) {
  ByteWriter w;
  encode_parameters(p, w);
  return std::move(w).take();
}

Parameters decode_parameters(ByteReader& in) {
  const auto count = in.u32();
  Parameters p;
  // Each tensor occupies at least its ndims byte.
  if (count > in.remaining()) {
    fail(ErrorCode::kMalformedEncoding,
         "declared " + std::to_string(count) + " tensors in " +
             std::to_string(in.remaining()) + " bytes");
  }
  p.tensors.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto ndims = in.u8();
    std::vector<std::uint32_t> shape(ndims);
    for (auto& d : shape) d = in.u32();
    const auto n = element_count(shape);
    if (n > in.remaining() / 8) {
      fail(ErrorCode::kMalformedEncoding,
           "tensor " + std::to_string(i) + " declares " + std::to_string(n) +
               " values but only " + std::to_string(in.remaining()) +
               " bytes remain");
    }
    std::vector<double> data(static_cast<std::size_t>(n));
    for (auto& v : data) {
      v = in.f64();
      if (!std::isfinite(v)) {
        fail(ErrorCode::kMalformedEncoding,
             "tensor " + std::to_string(i) + " carries a non-finite value");
      }
    }
    p.tensors.push_back(make_tensor(std::move(shape), std::move(data)));
  }
  return p;
}

Parameters decode_parameters(ByteView bytes) {
  ByteReader in(bytes);
  auto p = decode_parameters(in);
  if (!in.at_end()) {
    fail(ErrorCode::kMalformedEncoding,
         std::to_string(in.remaining()) + " trailing bytes after parameters");
  }
  return p;
}

void encode_config(const ConfigMap& c, ByteWriter& out) {
  out.u32(static_cast<std::uint32_t>(c.size()));
  for (const auto& [key, value] : c.entries()) {
    out.short_string(key);
    std::visit(
        [&out](const auto& v) {
          using T = std::decay_t<decltype(v)>;
          if constexpr (std::is_same_v<T, bool>) {
            out.u8(kTagBool);
            out.u8(v ? 1 : 0);
          } else if constexpr (std::is_same_v<T, std::int64_t>) {
            out.u8(kTagInt);
            out.u64(static_cast<std::uint64_t>(v));
          } else if constexpr (std::is_same_v<T, double>) {
            out.u8(kTagFloat);
            out.f64(v);
          } else {
            out.u8(kTagString);
            out.short_string(v);
          }
        },
        value);
  }
}

Bytes encode_config(const ConfigMap& c) {
  ByteWriter w;
  encode_config(c, w);
  return std::move(w).take();
}

ConfigMap decode_config(ByteReader& in) {
  const auto count = in.u32();
  // Smallest entry: empty key (2) + tag (1) + bool (1).
  if (count > in.remaining() / 4) {
    fail(ErrorCode::kTruncatedInput,
         "declared " + std::to_string(count) + " entries in " +
             std::to_string(in.remaining()) + " bytes");
  }
  ConfigMap c;
  for (std::uint32_t i = 0; i < count; ++i) {
    auto key = in.short_string();
    if (c.contains(key)) {
      fail(ErrorCode::kDuplicateKey, "key '" + key + "' appears twice");
    }
    const auto tag = in.u8();
    switch (tag) {
      case kTagBool: {
        const auto b = in.u8();
        if (b > 1) {
          fail(ErrorCode::kMalformedEncoding,
               "bool byte for '" + key + "' is " + std::to_string(b));
        }
        c.set(std::move(key), b == 1);
        break;
      }
      case kTagInt:
        c.set(std::move(key), static_cast<std::int64_t>(in.u64()));
        break;
      case kTagFloat:
        c.set(std::move(key), in.f64());
        break;
      case kTagString:
        c.set(std::move(key), in.short_string());
        break;
      default:
        fail(ErrorCode::kUnknownValueTag,
             "tag " + std::to_string(tag) + " for key '" + key + "'");
    }
  }
  return c;
}

ConfigMap decode_config(ByteView bytes) {
  ByteReader in(bytes);
  auto c = decode_config(in);
  if (!in.at_end()) {
    fail(ErrorCode::kMalformedEncoding,
         std::to_string(in.remaining()) + " trailing bytes after config");
  }
  return c;
}

}  // namespace fedsim
