#pragma once

#include "splitinfer/channel.hpp"
#include "splitinfer/profile.hpp"

namespace splitinfer {

struct DelayReport {
  int split = 0;
  double head_ms = 0.0;
  double codec_ms = 0.0;
  double tx_ms = 0.0;
  double path_ms = 0.0;
  double tail_ms = 0.0;
  double total_ms = 0.0;
};

struct EnergyReport {
  int split = 0;
  double compute_wh = 0.0;
  double tx_wh = 0.0;
  double total_wh = 0.0;
};

// Uplink serialization time of `bytes` at `mbps`.
double TransmissionMs(int64_t bytes, double mbps);

// Per-frame E2E delay using the expected round-trip path delay.
DelayReport E2eDelay(const ModelProfile& profile, int l, const ChannelState& ch,
                     const PathConfig& path);
// Same decomposition with an explicit (e.g. sampled) round-trip path delay.
DelayReport E2eDelayWithPathMs(const ModelProfile& profile, int l,
                               const ChannelState& ch, double path_ms);

EnergyReport UeEnergy(const ModelProfile& profile, int l, const ChannelState& ch);

// Energy with the tx term averaged over the profile's interference levels.
EnergyReport UeEnergyAveraged(const ModelProfile& profile, int l);

}  // namespace splitinfer
