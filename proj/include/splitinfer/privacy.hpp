#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "splitinfer/backbone.hpp"
#include "splitinfer/tensor.hpp"

namespace splitinfer {

// Row-major n x p sample matrix; each row is one flattened observation.
struct SampleMatrix {
  size_t rows = 0;
  size_t cols = 0;
  std::vector<double> values;

  std::span<const double> row(size_t i) const {
    return {values.data() + i * cols, cols};
  }
};

// Biased (V-statistic) distance correlation in [0, 1]. Returns 0 when either
// sample has zero distance variance.
double DistanceCorrelation(const SampleMatrix& x, const SampleMatrix& y);

struct LeakageScore {
  double value = 0.0;
  SplitPoint split;
  size_t sample_count = 0;
};

struct LeakageOptions {
  size_t max_coordinates = 4096;
  uint64_t seed = 0x5eed;
};

// Seeded strided subset of at most `max_coords` indices out of `length`.
std::vector<size_t> SubsampleIndices(size_t length, size_t max_coords,
                                     uint64_t seed);

// Distance correlation between the raw frames and what split `l` transmits.
LeakageScore LeakageOfSplit(const StagedBackbone& model,
                            std::span<const Tensor> frames, SplitPoint l,
                            const LeakageOptions& options = {});

}  // namespace splitinfer
