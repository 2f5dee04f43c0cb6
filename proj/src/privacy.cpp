#include "splitinfer/privacy.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "splitinfer/error.hpp"
#include "splitinfer/rng.hpp"

namespace splitinfer {
namespace {

std::vector<double> PairwiseDistances(const SampleMatrix& m) {
  const size_t n = m.rows;
  std::vector<double> d(n * n, 0.0);
  for (size_t i = 0; i < n; ++i) {
    const auto ri = m.row(i);
    for (size_t j = i + 1; j < n; ++j) {
      const auto rj = m.row(j);
      double s = 0.0;
      for (size_t k = 0; k < m.cols; ++k) {
        const double diff = ri[k] - rj[k];
        s += diff * diff;
      }
      d[i * n + j] = d[j * n + i] = std::sqrt(s);
    }
  }
  return d;
}

struct Moments {
  std::vector<double> row_mean;
  double grand_mean = 0.0;
};

Moments MomentsOf(const std::vector<double>& d, size_t n) {
  Moments m;
  m.row_mean.assign(n, 0.0);
  for (size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (size_t j = 0; j < n; ++j) s += d[i * n + j];
    m.row_mean[i] = s / static_cast<double>(n);
    m.grand_mean += s;
  }
  m.grand_mean /= static_cast<double>(n * n);
  return m;
}

// Squared distance covariance without materializing the centered matrices:
//   mean(a_ij b_ij) - 2 mean_i(a_i. b_i.) + mean(a) mean(b).
double DCov2(const std::vector<double>& a, const Moments& ma,
             const std::vector<double>& b, const Moments& mb, size_t n) {
  double cross = 0.0;
  for (size_t k = 0; k < n * n; ++k) cross += a[k] * b[k];
  double rows = 0.0;
  for (size_t i = 0; i < n; ++i) rows += ma.row_mean[i] * mb.row_mean[i];
  const double nn = static_cast<double>(n);
  return cross / (nn * nn) - 2.0 * rows / nn + ma.grand_mean * mb.grand_mean;
}

}  // namespace

double DistanceCorrelation(const SampleMatrix& x, const SampleMatrix& y) {
  if (x.rows != y.rows) {
    throw Error(ErrorCode::kDimensionMismatch,
                "sample counts differ: " + std::to_string(x.rows) + " vs " +
                    std::to_string(y.rows));
  }
  if (x.rows < 2) {
    throw Error(ErrorCode::kSampleCount, "distance correlation needs n >= 2");
  }
  const size_t n = x.rows;
  const auto a = PairwiseDistances(x);
  const auto ma = MomentsOf(a, n);
  const auto b = PairwiseDistances(y);
  const auto mb = MomentsOf(b, n);
  const double vx = DCov2(a, ma, a, ma, n);
  const double vy = DCov2(b, mb, b, mb, n);
  if (!(vx > 0.0) || !(vy > 0.0)) return 0.0;
  const double cov = std::max(0.0, DCov2(a, ma, b, mb, n));
  const double r2 = cov / std::sqrt(vx * vy);
  return std::clamp(std::sqrt(r2), 0.0, 1.0);
}

std::vector<size_t> SubsampleIndices(size_t length, size_t max_coords,
                                     uint64_t seed) {
  std::vector<size_t> idx;
  if (length <= max_coords) {
    idx.resize(length);
    for (size_t i = 0; i < length; ++i) idx[i] = i;
    return idx;
  }
  // Even stride with a seeded phase and a seeded sub-stride jitter.
  SplitMix64 rng(seed);
  const double stride = static_cast<double>(length) / static_cast<double>(max_coords);
  const double phase = rng.Uniform(0.0, stride);
  idx.reserve(max_coords);
  for (size_t k = 0; k < max_coords; ++k) {
    const double jitter = rng.Uniform(0.0, 0.5) * stride;
    auto i = static_cast<size_t>(phase * 0.5 + static_cast<double>(k) * stride + jitter);
    idx.push_back(std::min(i, length - 1));
  }
  return idx;
}

namespace {

SampleMatrix Flatten(std::span<const Tensor> ts, const LeakageOptions& options) {
  SampleMatrix m;
  m.rows = ts.size();
  const size_t len = ts.front().size();
  const auto idx = SubsampleIndices(len, options.max_coordinates, options.seed);
  m.cols = idx.size();
  m.values.reserve(m.rows * m.cols);
  for (const Tensor& t : ts) {
    if (t.size() != len) {
      throw Error(ErrorCode::kDimensionMismatch, "observations differ in size");
    }
    for (size_t i : idx) m.values.push_back(t[i]);
  }
  return m;
}

}  // namespace

LeakageScore LeakageOfSplit(const StagedBackbone& model,
                            std::span<const Tensor> frames, SplitPoint l,
                            const LeakageOptions& options) {
  if (frames.size() < 2) {
    throw Error(ErrorCode::kSampleCount, "leakage needs at least 2 frames");
  }
  if (l.index < 0 || l.index > model.server_split()) {
    throw Error(ErrorCode::kInvalidSplit,
                "split " + std::to_string(l.index) + " is not a candidate");
  }
  LeakageScore score{0.0, l, frames.size()};
  if (l.is_local()) return score;
  const SampleMatrix inputs = Flatten(frames, options);
  if (l.index == model.server_split()) {
    score.value = DistanceCorrelation(inputs, inputs);
    return score;
  }
  std::vector<Tensor> acts;
  acts.reserve(frames.size());
  for (const Tensor& f : frames) acts.push_back(model.ForwardHead(f, l));
  score.value = DistanceCorrelation(inputs, Flatten(acts, options));
  return score;
}

}  // namespace splitinfer
