#include "splitinfer/codec.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "splitinfer/bytes.hpp"
#include "splitinfer/error.hpp"

namespace splitinfer {

uint32_t Crc32(std::span<const uint8_t> bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed in chunks for very large buffers.
  size_t off = 0;
  while (off < bytes.size()) {
    const size_t n = std::min<size_t>(bytes.size() - off, 1u << 30);
    crc = crc32(crc, bytes.data() + off, static_cast<uInt>(n));
    off += n;
  }
  return static_cast<uint32_t>(crc);
}

QuantizedTensor QuantizeInt8(const Tensor& t) {
  if (!t.AllFinite()) {
    throw Error(ErrorCode::kNonFiniteInput, "tensor contains NaN or Inf");
  }
  float lo = 0.0f, hi = 0.0f;
  for (float v : t.data()) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  QuantizedTensor out;
  out.values.resize(t.size());
  if (hi == lo) {
    // All-zero tensor: identity parameters, q == 0 everywhere.
    out.params = {1.0f, 0};
    return out;
  }
  const float scale = static_cast<float>((static_cast<double>(hi) - lo) / 255.0);
  // Reciprocal of the unrounded step; the float scale can move half-step ties.
  const double inv = 255.0 / (static_cast<double>(hi) - lo);
  const auto zp = static_cast<int32_t>(-128 - std::lround(lo * inv));
  out.params = {scale, std::clamp<int32_t>(zp, -128, 127)};
  const auto data = t.data();
  for (size_t i = 0; i < data.size(); ++i) {
    const long q = std::lround(data[i] * inv) + out.params.zero_point;
    out.values[i] = static_cast<int8_t>(std::clamp<long>(q, -128, 127));
  }
  return out;
}

Tensor Dequantize(std::span<const int8_t> values, const QuantParams& q,
                  const Shape& shape) {
  if (values.size() != NumElements(shape)) {
    throw Error(ErrorCode::kLengthMismatch,
                std::to_string(values.size()) + " values for shape " +
                    ShapeString(shape));
  }
  std::vector<float> data(values.size());
  const double scale = q.scale;
  for (size_t i = 0; i < values.size(); ++i) {
    data[i] = static_cast<float>((static_cast<int32_t>(values[i]) - q.zero_point) * scale);
  }
  return Tensor(shape, std::move(data));
}

namespace {

std::vector<uint8_t> Deflate(std::span<const uint8_t> raw, int level) {
  uLongf bound = compressBound(static_cast<uLong>(raw.size()));
  std::vector<uint8_t> out(bound);
  const int rc = compress2(out.data(), &bound, raw.data(),
                           static_cast<uLong>(raw.size()), level);
  if (rc != Z_OK) {
    throw Error(ErrorCode::kCompressionFailure,
                "zlib compress2 returned " + std::to_string(rc));
  }
  out.resize(bound);
  return out;
}

std::vector<uint8_t> Inflate(std::span<const uint8_t> payload, size_t raw_len) {
  // One spare byte distinguishes "too long" from "exactly raw_len".
  std::vector<uint8_t> out(raw_len + 1);
  z_stream zs{};
  if (inflateInit(&zs) != Z_OK) {
    throw Error(ErrorCode::kInflateFailure, "inflateInit failed");
  }
  zs.next_in = const_cast<Bytef*>(payload.data());
  zs.avail_in = static_cast<uInt>(payload.size());
  zs.next_out = out.data();
  zs.avail_out = static_cast<uInt>(out.size());
  const int rc = inflate(&zs, Z_FINISH);
  const size_t produced = zs.total_out;
  inflateEnd(&zs);
  if (rc == Z_STREAM_END) {
    if (produced != raw_len) {
      throw Error(ErrorCode::kLengthMismatch,
                  "inflated " + std::to_string(produced) + " bytes, expected " +
                      std::to_string(raw_len));
    }
    out.resize(raw_len);
    return out;
  }
  if (rc == Z_BUF_ERROR && zs.avail_out == 0) {
    throw Error(ErrorCode::kLengthMismatch,
                "payload inflates past " + std::to_string(raw_len) + " bytes");
  }
  throw Error(ErrorCode::kInflateFailure,
              "zlib inflate returned " + std::to_string(rc));
}

}  // namespace

CompressedActivation EncodeActivation(const Tensor& t, SplitPoint l,
                                      const CodecOptions& options) {
  if (options.level < 1 || options.level > 9) {
    throw Error(ErrorCode::kInvalidParameter,
                "compression level must be in 1..9, got " +
                    std::to_string(options.level));
  }
  CompressedActivation c;
  c.split = l;
  c.shape = t.shape();
  c.quantized = options.quantize;
  if (options.quantize) {
    QuantizedTensor q = QuantizeInt8(t);
    c.quant = q.params;
    const auto* bytes = reinterpret_cast<const uint8_t*>(q.values.data());
    c.raw_len = static_cast<uint32_t>(q.values.size());
    c.payload = Deflate({bytes, q.values.size()}, options.level);
  } else {
    if (!t.AllFinite()) {
      throw Error(ErrorCode::kNonFiniteInput, "tensor contains NaN or Inf");
    }
    const auto* bytes = reinterpret_cast<const uint8_t*>(t.data().data());
    const size_t n = t.size() * sizeof(float);
    c.raw_len = static_cast<uint32_t>(n);
    c.payload = Deflate({bytes, n}, options.level);
  }
  c.payload_crc32 = Crc32(c.payload);
  return c;
}

Tensor DecodeActivation(const CompressedActivation& c) {
  if (Crc32(c.payload) != c.payload_crc32) {
    throw Error(ErrorCode::kCrcMismatch, "payload checksum does not match");
  }
  const size_t count = NumElements(c.shape);
  const size_t expected = c.quantized ? count : count * sizeof(float);
  if (c.raw_len != expected) {
    throw Error(ErrorCode::kLengthMismatch,
                "raw_len " + std::to_string(c.raw_len) + " disagrees with shape " +
                    ShapeString(c.shape));
  }
  std::vector<uint8_t> raw = Inflate(c.payload, c.raw_len);
  if (c.quantized) {
    return Dequantize({reinterpret_cast<const int8_t*>(raw.data()), raw.size()},
                      c.quant, c.shape);
  }
  std::vector<float> data(count);
  std::memcpy(data.data(), raw.data(), raw.size());
  return Tensor(c.shape, std::move(data));
}

std::vector<uint8_t> SerializeContainer(const CompressedActivation& c) {
  std::vector<uint8_t> out;
  out.reserve(32 + 4 * c.shape.size() + c.payload.size());
  ByteWriter w(out);
  w.PutString("SACT");
  w.Put<uint8_t>(kContainerVersion);
  w.Put<uint8_t>(c.quantized ? 1 : 0);
  w.Put<uint8_t>(static_cast<uint8_t>(c.split.index));
  w.Put<uint8_t>(static_cast<uint8_t>(c.shape.size()));
  for (size_t d : c.shape) w.Put<uint32_t>(static_cast<uint32_t>(d));
  w.Put<float>(c.quant.scale);
  w.Put<int32_t>(c.quant.zero_point);
  w.Put<uint32_t>(c.raw_len);
  w.Put<uint32_t>(static_cast<uint32_t>(c.payload.size()));
  w.PutBytes(c.payload);
  w.Put<uint32_t>(c.payload_crc32);
  return out;
}

CompressedActivation ParseContainer(std::span<const uint8_t> bytes) {
  ByteReader r(bytes, ErrorCode::kMalformed);
  auto magic = r.GetBytes(4);
  if (std::memcmp(magic.data(), "SACT", 4) != 0) {
    throw Error(ErrorCode::kBadMagic, "container magic is not SACT");
  }
  if (const auto version = r.Get<uint8_t>(); version != kContainerVersion) {
    throw Error(ErrorCode::kBadVersion,
                "container version " + std::to_string(version));
  }
  CompressedActivation c;
  const auto flags = r.Get<uint8_t>();
  if (flags & ~1u) {
    throw Error(ErrorCode::kMalformed, "unknown container flags");
  }
  c.quantized = flags & 1u;
  c.split.index = r.Get<uint8_t>();
  const auto ndim = r.Get<uint8_t>();
  if (ndim == 0) throw Error(ErrorCode::kMalformed, "container has rank 0");
  for (uint8_t i = 0; i < ndim; ++i) {
    const auto d = r.Get<uint32_t>();
    if (d == 0) throw Error(ErrorCode::kMalformed, "zero-sized dimension");
    c.shape.push_back(d);
  }
  c.quant.scale = r.Get<float>();
  c.quant.zero_point = r.Get<int32_t>();
  if (c.quantized && !(c.quant.scale > 0.0f && std::isfinite(c.quant.scale))) {
    throw Error(ErrorCode::kMalformed, "quantization scale must be positive");
  }
  c.raw_len = r.Get<uint32_t>();
  const auto payload_len = r.Get<uint32_t>();
  auto payload = r.GetBytes(payload_len);
  c.payload.assign(payload.begin(), payload.end());
  c.payload_crc32 = r.Get<uint32_t>();
  if (r.remaining() != 0) {
    throw Error(ErrorCode::kMalformed,
                std::to_string(r.remaining()) + " trailing bytes after container");
  }
  return c;
}

}  // namespace splitinfer
