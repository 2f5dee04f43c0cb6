#include <doctest.h>
#include <zlib.h>

#include <cfloat>
#include <cmath>
#include <cstring>
#include <limits>

#include "splitinfer/backbone.hpp"
#include "splitinfer/bytes.hpp"
#include "splitinfer/codec.hpp"
#include "splitinfer/frames.hpp"
#include "support.hpp"

using namespace splitinfer;
using splitinfer::testing::CodeOf;
using splitinfer::testing::UniformTensor;

namespace {

// Bitwise CRC-32 (IEEE 802.3, reflected 0xEDB88320).
uint32_t ReferenceCrc(std::span<const uint8_t> bytes) {
  uint32_t crc = 0xFFFFFFFFu;
  for (uint8_t b : bytes) {
    crc ^= b;
    for (int k = 0; k < 8; ++k) crc = (crc >> 1) ^ (0xEDB88320u & (0u - (crc & 1u)));
  }
  return ~crc;
}

// Round-trip error bound: half a quantization step plus float rounding of
// x / scale and of (q - zp) * scale.
double Bound(const QuantParams& q, float x) {
  return q.scale / 2.0 + 2.0 * FLT_EPSILON * std::abs(x);
}

Tensor RandomShapeTensor(SplitMix64& rng) {
  Shape shape;
  const size_t rank = 1 + rng.Next() % 4;
  for (size_t i = 0; i < rank; ++i) shape.push_back(1 + rng.Next() % 9);
  const double lo = rng.Uniform(-50, 10), hi = lo + rng.Uniform(1e-3, 60);
  return UniformTensor(shape, rng.Next(), lo, hi);
}

}  // namespace

TEST_CASE("crc32 matches the bitwise reference") {
  const std::string check = "123456789";
  const auto* p = reinterpret_cast<const uint8_t*>(check.data());
  CHECK(Crc32({p, check.size()}) == 0xCBF43926u);
  SplitMix64 rng(4);
  for (int i = 0; i < 20; ++i) {
    std::vector<uint8_t> buf(rng.Next() % 5000);
    for (auto& b : buf) b = static_cast<uint8_t>(rng.Next());
    CHECK(Crc32(buf) == ReferenceCrc(buf));
  }
}

TEST_CASE("quantizing [-1, 1] uses the full int8 range") {
  Tensor t({5}, {-1.0f, -0.5f, 0.0f, 0.5f, 1.0f});
  const QuantizedTensor q = QuantizeInt8(t);
  CHECK(q.params.scale == doctest::Approx(2.0 / 255.0).epsilon(1e-7));
  CHECK(q.values.front() == -128);
  CHECK(q.values.back() == 127);
}

TEST_CASE("zero tensor round-trips exactly") {
  const Tensor zeros({4, 8});
  const QuantizedTensor q = QuantizeInt8(zeros);
  CHECK(q.params.scale == 1.0f);
  CHECK(q.params.zero_point == 0);
  for (int8_t v : q.values) CHECK(v == 0);
  CHECK(Dequantize(q.values, q.params, zeros.shape()) == zeros);
  CHECK(DecodeActivation(EncodeActivation(zeros, SplitPoint{1})) == zeros);
}

TEST_CASE("constant tensors keep the half-step bound") {
  for (float c : {0.3f, -7.25f, 1e-6f}) {
    Tensor t({3, 3});
    std::fill(t.vec().begin(), t.vec().end(), c);
    const QuantizedTensor q = QuantizeInt8(t);
    const Tensor back = Dequantize(q.values, q.params, t.shape());
    for (size_t i = 0; i < t.size(); ++i) CHECK(std::abs(back[i] - t[i]) <= Bound(q.params, t[i]));
  }
}

TEST_CASE("dequantize applies the affine formula") {
  const std::vector<int8_t> v(6, 127);
  const Tensor t = Dequantize(v, {0.01f, 0}, {2, 3});
  for (float x : t.vec()) CHECK(x == doctest::Approx(1.27).epsilon(1e-6));
  CHECK(CodeOf([&] { Dequantize(v, {0.01f, 0}, {2, 2}); }) == ErrorCode::kLengthMismatch);
}

TEST_CASE("non-finite input is rejected") {
  Tensor t({3}, {0.0f, std::numeric_limits<float>::quiet_NaN(), 1.0f});
  CHECK(CodeOf([&] { QuantizeInt8(t); }) == ErrorCode::kNonFiniteInput);
  t[1] = std::numeric_limits<float>::infinity();
  CHECK(CodeOf([&] { EncodeActivation(t, SplitPoint{1}); }) == ErrorCode::kNonFiniteInput);
}

TEST_CASE("property: 1000 uniform values stay within half a step") {
  const Tensor t = UniformTensor({1000}, 77);
  const QuantizedTensor q = QuantizeInt8(t);
  const Tensor back = Dequantize(q.values, q.params, t.shape());
  for (size_t i = 0; i < t.size(); ++i) CHECK(std::abs(back[i] - t[i]) <= Bound(q.params, t[i]));
}

TEST_CASE("property: values already on the grid round-trip exactly") {
  SplitMix64 rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    const Tensor t = RandomShapeTensor(rng);
    const QuantizedTensor q = QuantizeInt8(t);
    const Tensor grid = Dequantize(q.values, q.params, t.shape());
    const QuantizedTensor q2 = QuantizeInt8(grid);
    CHECK(Dequantize(q2.values, q2.params, grid.shape()) == grid);
  }
}

TEST_CASE("property: encode/decode of 100 random tensors") {
  SplitMix64 rng(9);
  for (int trial = 0; trial < 100; ++trial) {
    const Tensor t = RandomShapeTensor(rng);
    const CompressedActivation c = EncodeActivation(t, SplitPoint{1 + trial % 5});
    CHECK(c.raw_len == t.size());
    CHECK(c.payload_crc32 == ReferenceCrc(c.payload));
    CHECK(c.quant.zero_point >= -128);
    CHECK(c.quant.zero_point <= 127);
    const Tensor back = DecodeActivation(ParseContainer(SerializeContainer(c)));
    REQUIRE(back.shape() == t.shape());
    for (size_t i = 0; i < t.size(); ++i) CHECK(std::abs(back[i] - t[i]) <= Bound(c.quant, t[i]));
  }
}

TEST_CASE("oracle: payload inflates with plain zlib to the quantized bytes") {
  const Tensor t = UniformTensor({7, 11, 13}, 10);
  const CompressedActivation c = EncodeActivation(t, SplitPoint{2});
  std::vector<uint8_t> raw(c.raw_len);
  uLongf len = raw.size();
  REQUIRE(uncompress(raw.data(), &len, c.payload.data(), c.payload.size()) == Z_OK);
  CHECK(len == c.raw_len);
  const QuantizedTensor q = QuantizeInt8(t);
  CHECK(std::memcmp(raw.data(), q.values.data(), raw.size()) == 0);
}

TEST_CASE("bypass mode is bit-exact") {
  Tensor t = UniformTensor({4, 5, 6}, 11, -1e6, 1e6);
  t[0] = -0.0f;
  t[1] = std::numeric_limits<float>::denorm_min();
  t[2] = std::numeric_limits<float>::max();
  const CompressedActivation c = EncodeActivation(t, SplitPoint{3}, {6, false});
  CHECK_FALSE(c.quantized);
  const Tensor back = DecodeActivation(ParseContainer(SerializeContainer(c)));
  CHECK(std::memcmp(back.data().data(), t.data().data(), t.size() * sizeof(float)) == 0);
}

TEST_CASE("container layout fields are little-endian at fixed offsets") {
  const Tensor t = UniformTensor({2, 3}, 12);
  const CompressedActivation c = EncodeActivation(t, SplitPoint{4});
  const auto bytes = SerializeContainer(c);
  CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "SACT");
  CHECK(bytes[4] == 1);
  CHECK(bytes[5] == 1);
  CHECK(bytes[6] == 4);
  CHECK(bytes[7] == 2);
  uint32_t d0, d1, payload_len, crc;
  std::memcpy(&d0, &bytes[8], 4);
  std::memcpy(&d1, &bytes[12], 4);
  CHECK(d0 == 2);
  CHECK(d1 == 3);
  std::memcpy(&payload_len, &bytes[28], 4);
  CHECK(payload_len == c.payload.size());
  std::memcpy(&crc, &bytes[bytes.size() - 4], 4);
  CHECK(crc == c.payload_crc32);
  CHECK(bytes.size() == 32 + c.payload.size() + 4);
}

TEST_CASE("corruption is detected") {
  const Tensor t = UniformTensor({16, 16}, 13);
  const CompressedActivation good = EncodeActivation(t, SplitPoint{1});

  CompressedActivation flipped = good;
  flipped.payload[flipped.payload.size() / 2] ^= 0x40;
  CHECK(CodeOf([&] { DecodeActivation(flipped); }) == ErrorCode::kCrcMismatch);

  CompressedActivation truncated = good;
  truncated.payload.resize(truncated.payload.size() / 2);
  const ErrorCode code = CodeOf([&] { DecodeActivation(truncated); });
  CHECK((code == ErrorCode::kCrcMismatch || code == ErrorCode::kInflateFailure));
  truncated.payload_crc32 = Crc32(truncated.payload);
  CHECK(CodeOf([&] { DecodeActivation(truncated); }) == ErrorCode::kInflateFailure);

  CompressedActivation longer = good;
  longer.raw_len += 1;
  longer.shape = {1, good.raw_len + 1};
  CHECK(CodeOf([&] { DecodeActivation(longer); }) == ErrorCode::kLengthMismatch);

  auto bytes = SerializeContainer(good);
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  CHECK(CodeOf([&] { ParseContainer(bad_magic); }) == ErrorCode::kBadMagic);
  auto bad_version = bytes;
  bad_version[4] = 9;
  CHECK(CodeOf([&] { ParseContainer(bad_version); }) == ErrorCode::kBadVersion);
  auto trailing = bytes;
  trailing.push_back(0);
  CHECK(CodeOf([&] { ParseContainer(trailing); }) == ErrorCode::kMalformed);
  auto cut = bytes;
  cut.resize(cut.size() - 3);
  CHECK(CodeOf([&] { ParseContainer(cut); }) == ErrorCode::kMalformed);
}

TEST_CASE("compression level is validated and output is deterministic") {
  const Tensor t = UniformTensor({8, 8, 8}, 14);
  CHECK(CodeOf([&] { EncodeActivation(t, SplitPoint{1}, {0, true}); }) ==
        ErrorCode::kInvalidParameter);
  CHECK(CodeOf([&] { EncodeActivation(t, SplitPoint{1}, {10, true}); }) ==
        ErrorCode::kInvalidParameter);
  for (int level = 1; level <= 9; ++level) {
    CHECK(SerializeContainer(EncodeActivation(t, SplitPoint{1}, {level, true})) ==
          SerializeContainer(EncodeActivation(t, SplitPoint{1}, {level, true})));
  }
}

TEST_CASE("property: container never exceeds the deflate expansion bound") {
  SplitMix64 rng(15);
  for (int trial = 0; trial < 60; ++trial) {
    Tensor t = RandomShapeTensor(rng);
    // Incompressible content is the worst case for the bound.
    for (float& v : t.vec()) v = static_cast<float>(rng.Uniform(-1, 1));
    const bool quantize = trial % 2 == 0;
    const CompressedActivation c = EncodeActivation(t, SplitPoint{1}, {1 + trial % 9, quantize});
    const size_t raw = c.raw_len;
    CHECK(SerializeContainer(c).size() <= raw + raw / 1000 + 64);
  }
}

TEST_CASE("natural-statistics split-1 activation compresses to under half") {
  const StagedBackbone m;
  const Tensor x = SyntheticFrame(224, 224, 21);
  const Tensor a = m.ForwardHead(x, SplitPoint{1});
  const auto bytes = SerializeContainer(EncodeActivation(a, SplitPoint{1}));
  CHECK(static_cast<double>(bytes.size()) <= 0.5 * static_cast<double>(a.size() * 4));
}
