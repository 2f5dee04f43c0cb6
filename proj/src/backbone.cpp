#include "splitinfer/backbone.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "splitinfer/error.hpp"
#include "splitinfer/rng.hpp"

namespace splitinfer {
namespace {

// out[o, p] = tanh(bias[o] + sum_c w[o, c] * in[c, p]) over `positions`.
// Positions are processed in tiles so the input slab stays in cache; the
// per-element accumulation order is the same as the untiled loop.
void MixChannels(const std::vector<float>& weight, const std::vector<float>& bias,
                 size_t in_ch, size_t out_ch, size_t positions,
                 const float* in, float* out, bool apply_tanh) {
  constexpr size_t kTile = 256;
  float acc[kTile];
  for (size_t p0 = 0; p0 < positions; p0 += kTile) {
    const size_t n = std::min(kTile, positions - p0);
    for (size_t o = 0; o < out_ch; ++o) {
      std::fill(acc, acc + n, bias[o]);
      const float* w = weight.data() + o * in_ch;
      for (size_t c = 0; c < in_ch; ++c) {
        const float wc = w[c];
        const float* src = in + c * positions + p0;
        for (size_t p = 0; p < n; ++p) acc[p] += wc * src[p];
      }
      float* dst = out + o * positions + p0;
      for (size_t p = 0; p < n; ++p) dst[p] = apply_tanh ? std::tanh(acc[p]) : acc[p];
    }
  }
}

}  // namespace

StagedBackbone::StagedBackbone(BackboneConfig config) : config_(config) {
  if (config_.num_stages < 1 || config_.patch_size < 1 ||
      config_.embed_channels < 1 || config_.input_channels < 1 ||
      config_.readout_dim < 1) {
    throw Error(ErrorCode::kInvalidParameter, "backbone geometry must be positive");
  }
  auto make = [&](size_t in, size_t out, uint64_t tag) {
    Linear lin;
    lin.in = in;
    lin.out = out;
    SplitMix64 rng(MixSeed(config_.seed, tag));
    const double bound = std::sqrt(3.0 / static_cast<double>(in));
    lin.weight.resize(in * out);
    for (float& w : lin.weight) w = static_cast<float>(rng.Uniform(-bound, bound));
    lin.bias.resize(out);
    for (float& b : lin.bias) b = static_cast<float>(rng.Uniform(-0.1, 0.1));
    return lin;
  };
  const size_t p = static_cast<size_t>(config_.patch_size);
  stages_.push_back(make(static_cast<size_t>(config_.input_channels) * p * p,
                         channels_at(1), 1));
  for (int s = 2; s <= config_.num_stages; ++s) {
    stages_.push_back(make(channels_at(s - 1), channels_at(s), static_cast<uint64_t>(s)));
  }
  readout_ = make(channels_at(config_.num_stages),
                  static_cast<size_t>(config_.readout_dim), 1000);
}

size_t StagedBackbone::spatial_multiple() const {
  return static_cast<size_t>(config_.patch_size) << (config_.num_stages - 1);
}

size_t StagedBackbone::channels_at(int l) const {
  return static_cast<size_t>(config_.embed_channels) << (l - 1);
}

void StagedBackbone::ValidateInput(const Shape& shape) const {
  const size_t m = spatial_multiple();
  if (shape.size() != 3 || shape[0] != static_cast<size_t>(config_.input_channels) ||
      shape[1] % m != 0 || shape[2] % m != 0) {
    throw Error(ErrorCode::kShapeMismatch,
                "input " + ShapeString(shape) + " must be [" +
                    std::to_string(config_.input_channels) +
                    ",H,W] with H and W divisible by " + std::to_string(m));
  }
}

Shape StagedBackbone::BoundaryShape(const Shape& input_shape, int l) const {
  if (l < 1 || l > config_.num_stages) {
    throw Error(ErrorCode::kInvalidSplit,
                "no stage boundary for split " + std::to_string(l));
  }
  ValidateInput(input_shape);
  const size_t div = static_cast<size_t>(config_.patch_size) << (l - 1);
  return {channels_at(l), input_shape[1] / div, input_shape[2] / div};
}

Tensor StagedBackbone::RunStage(int stage, const Tensor& x) const {
  const Linear& lin = stages_[static_cast<size_t>(stage - 1)];
  const size_t h = x.dim(1), w = x.dim(2);
  if (stage == 1) {
    // Patch embedding: gather each p x p patch into a column, then mix.
    const size_t p = static_cast<size_t>(config_.patch_size);
    const size_t ho = h / p, wo = w / p, cin = x.dim(0);
    const size_t positions = ho * wo;
    std::vector<float> cols(lin.in * positions);
    for (size_t c = 0; c < cin; ++c) {
      for (size_t di = 0; di < p; ++di) {
        for (size_t dj = 0; dj < p; ++dj) {
          float* dst = cols.data() + ((c * p + di) * p + dj) * positions;
          for (size_t i = 0; i < ho; ++i) {
            const float* src = x.data().data() + (c * h + i * p + di) * w + dj;
            for (size_t j = 0; j < wo; ++j) dst[i * wo + j] = src[j * p];
          }
        }
      }
    }
    Tensor out({lin.out, ho, wo});
    MixChannels(lin.weight, lin.bias, lin.in, lin.out, positions, cols.data(),
                out.data().data(), true);
    return out;
  }
  // Patch merging: 2x2 average pool, then channel doubling.
  const size_t ho = h / 2, wo = w / 2, cin = x.dim(0);
  std::vector<float> pooled(cin * ho * wo);
  const float* src = x.data().data();
  for (size_t c = 0; c < cin; ++c) {
    for (size_t i = 0; i < ho; ++i) {
      const float* r0 = src + (c * h + 2 * i) * w;
      const float* r1 = r0 + w;
      float* dst = pooled.data() + (c * ho + i) * wo;
      for (size_t j = 0; j < wo; ++j) {
        dst[j] = 0.25f * ((r0[2 * j] + r0[2 * j + 1]) + (r1[2 * j] + r1[2 * j + 1]));
      }
    }
  }
  Tensor out({lin.out, ho, wo});
  MixChannels(lin.weight, lin.bias, lin.in, lin.out, ho * wo, pooled.data(),
              out.data().data(), true);
  return out;
}

Tensor StagedBackbone::Readout(const Tensor& x) const {
  const size_t c = x.dim(0), positions = x.dim(1) * x.dim(2);
  std::vector<float> pooled(c);
  for (size_t k = 0; k < c; ++k) {
    double sum = 0.0;
    const float* src = x.data().data() + k * positions;
    for (size_t p = 0; p < positions; ++p) sum += src[p];
    pooled[k] = static_cast<float>(sum / static_cast<double>(positions));
  }
  Tensor out({readout_.out});
  MixChannels(readout_.weight, readout_.bias, readout_.in, readout_.out, 1,
              pooled.data(), out.data().data(), false);
  return out;
}

Tensor StagedBackbone::RunStages(Tensor x, int first, int last) const {
  for (int s = first; s <= last; ++s) x = RunStage(s, x);
  return x;
}

Tensor StagedBackbone::ForwardFull(const Tensor& input) const {
  ValidateInput(input.shape());
  return Readout(RunStages(input, 1, config_.num_stages));
}

Tensor StagedBackbone::ForwardHead(const Tensor& input, SplitPoint l) const {
  if (l.index < 1 || l.index > config_.num_stages) {
    throw Error(ErrorCode::kInvalidSplit,
                "head split must be in 1.." + std::to_string(config_.num_stages) +
                    ", got " + std::to_string(l.index));
  }
  ValidateInput(input.shape());
  return RunStages(input, 1, l.index);
}

Tensor StagedBackbone::ForwardTail(const Tensor& activation, SplitPoint l) const {
  if (l.index == server_split()) return ForwardFull(activation);
  if (l.index < 1 || l.index > config_.num_stages) {
    throw Error(ErrorCode::kInvalidSplit,
                "tail split must be in 1.." + std::to_string(server_split()) +
                    ", got " + std::to_string(l.index));
  }
  const Shape& s = activation.shape();
  const size_t m = size_t{1} << (config_.num_stages - l.index);
  if (s.size() != 3 || s[0] != channels_at(l.index) || s[1] % m != 0 ||
      s[2] % m != 0) {
    throw Error(ErrorCode::kShapeMismatch,
                "activation " + ShapeString(s) + " does not match boundary " +
                    std::to_string(l.index) + " (" +
                    std::to_string(channels_at(l.index)) + " channels)");
  }
  return Readout(RunStages(activation, l.index + 1, config_.num_stages));
}

}  // namespace splitinfer
