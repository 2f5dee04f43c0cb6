#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "splitinfer/backbone.hpp"
#include "splitinfer/tensor.hpp"

namespace splitinfer {

struct QuantParams {
  float scale = 1.0f;
  int32_t zero_point = 0;
};

struct QuantizedTensor {
  std::vector<int8_t> values;
  QuantParams params;
};

// Per-tensor affine INT8 quantization: q = clamp(round(x/scale) + zp, -128, 127)
// with scale = (max - min) / 255 over the range widened to include zero, so
// the zero point always fits in int8. An all-zero tensor gets scale 1, zp 0.
QuantizedTensor QuantizeInt8(const Tensor& t);

Tensor Dequantize(std::span<const int8_t> values, const QuantParams& q,
                  const Shape& shape);

struct CompressedActivation {
  SplitPoint split;
  Shape shape;
  bool quantized = true;
  QuantParams quant;
  std::vector<uint8_t> payload;  // zlib (RFC 1950) stream
  uint32_t payload_crc32 = 0;
  uint32_t raw_len = 0;          // bytes before deflate

  friend bool operator==(const CompressedActivation&,
                         const CompressedActivation&) = default;
};

struct CodecOptions {
  int level = 6;
  bool quantize = true;  // false: lossless FP32 payload
};

CompressedActivation EncodeActivation(const Tensor& t, SplitPoint l,
                                      const CodecOptions& options = {});
Tensor DecodeActivation(const CompressedActivation& c);

// Wire layout:
//   "SACT" | version u8 | flags u8 | split u8 | ndim u8 | dims u32*ndim |
//   scale f32 | zero_point i32 | raw_len u32 | payload_len u32 | payload |
//   crc32 u32, all little-endian.
std::vector<uint8_t> SerializeContainer(const CompressedActivation& c);
CompressedActivation ParseContainer(std::span<const uint8_t> bytes);

constexpr uint8_t kContainerVersion = 1;

}  // namespace splitinfer
