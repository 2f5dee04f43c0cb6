#include "splitinfer/cost_model.hpp"

#include <string>

#include "splitinfer/error.hpp"

namespace splitinfer {
namespace {

void CheckSplit(const ModelProfile& profile, int l) {
  if (!profile.IsCandidate(l)) {
    throw Error(ErrorCode::kUnknownSplit,
                "split " + std::to_string(l) + " is not a profile candidate");
  }
}

}  // namespace

double TransmissionMs(int64_t bytes, double mbps) {
  if (bytes == 0) return 0.0;
  if (!(mbps > 0.0)) {
    throw Error(ErrorCode::kInvalidParameter, "uplink throughput must be positive");
  }
  return 8.0 * static_cast<double>(bytes) / (mbps * 1000.0);
}

DelayReport E2eDelayWithPathMs(const ModelProfile& profile, int l,
                               const ChannelState& ch, double path_ms) {
  CheckSplit(profile, l);
  const auto i = static_cast<size_t>(l);
  DelayReport r;
  r.split = l;
  r.head_ms = profile.head_compute_ms[i];
  if (l != SplitPoint::kLocal) {
    r.codec_ms = profile.codec_ms[i];
    r.tx_ms = TransmissionMs(profile.PayloadBytes(l), ch.uplink_mbps);
    r.path_ms = path_ms;
    r.tail_ms = profile.tail_compute_ms[i];
  }
  r.total_ms = r.head_ms + r.codec_ms + r.tx_ms + r.path_ms + r.tail_ms;
  return r;
}

DelayReport E2eDelay(const ModelProfile& profile, int l, const ChannelState& ch,
                     const PathConfig& path) {
  return E2eDelayWithPathMs(profile, l, ch, PathDelayMean(path, 2));
}

EnergyReport UeEnergy(const ModelProfile& profile, int l, const ChannelState& ch) {
  CheckSplit(profile, l);
  const auto i = static_cast<size_t>(l);
  EnergyReport r;
  r.split = l;
  r.compute_wh = profile.head_energy_wh[i];
  if (l != SplitPoint::kLocal) {
    r.tx_wh = Interpolate(profile.throughput.levels_db(), profile.tx_energy_wh[i],
                          ch.interference_db);
  }
  r.total_wh = r.compute_wh + r.tx_wh;
  return r;
}

EnergyReport UeEnergyAveraged(const ModelProfile& profile, int l) {
  CheckSplit(profile, l);
  const auto i = static_cast<size_t>(l);
  EnergyReport r;
  r.split = l;
  r.compute_wh = profile.head_energy_wh[i];
  if (l != SplitPoint::kLocal) {
    const auto& row = profile.tx_energy_wh[i];
    double sum = 0.0;
    for (double v : row) sum += v;
    r.tx_wh = sum / static_cast<double>(row.size());
  }
  r.total_wh = r.compute_wh + r.tx_wh;
  return r;
}

}  // namespace splitinfer
