#pragma once

#include <compare>
#include <cstdint>
#include <vector>

#include "splitinfer/tensor.hpp"

namespace splitinfer {

// Stage boundary at which inference is cut. 0 runs everything on the device,
// 1..num_stages cut after that stage, num_stages + 1 ships the raw input.
struct SplitPoint {
  int index = 0;

  static constexpr int kLocal = 0;
  static constexpr int kServer = 5;

  constexpr bool is_local() const { return index == kLocal; }
  friend constexpr auto operator<=>(SplitPoint, SplitPoint) = default;
};

struct BackboneConfig {
  int num_stages = 4;
  int patch_size = 4;
  int embed_channels = 96;
  int input_channels = 3;
  int readout_dim = 16;
  uint64_t seed = 42;
};

// Deterministic toy hierarchical backbone with patch-merging stage geometry:
// stage 1 embeds p x p patches into embed_channels, each later stage 2x2
// average-pools and doubles channels. A global-pool linear readout stands in
// for the detection head. Immutable after construction.
class StagedBackbone {
 public:
  explicit StagedBackbone(BackboneConfig config = {});

  const BackboneConfig& config() const { return config_; }
  int num_stages() const { return config_.num_stages; }
  int server_split() const { return config_.num_stages + 1; }

  // Spatial divisibility required of the input (patch_size * 2^(stages-1)).
  size_t spatial_multiple() const;
  size_t channels_at(int l) const;
  Shape BoundaryShape(const Shape& input_shape, int l) const;

  Tensor ForwardFull(const Tensor& input) const;
  Tensor ForwardHead(const Tensor& input, SplitPoint l) const;
  Tensor ForwardTail(const Tensor& activation, SplitPoint l) const;

  void ValidateInput(const Shape& shape) const;

 private:
  struct Linear {
    size_t in = 0;
    size_t out = 0;
    std::vector<float> weight;  // [out, in]
    std::vector<float> bias;    // [out]
  };

  Tensor RunStage(int stage, const Tensor& x) const;
  Tensor Readout(const Tensor& x) const;
  Tensor RunStages(Tensor x, int first, int last) const;

  BackboneConfig config_;
  std::vector<Linear> stages_;
  Linear readout_;
};

}  // namespace splitinfer
