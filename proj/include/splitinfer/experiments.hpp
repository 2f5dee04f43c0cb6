#pragma once

#include <optional>
#include <string>
#include <vector>

#include "splitinfer/channel.hpp"
#include "splitinfer/cost_model.hpp"
#include "splitinfer/profile.hpp"
#include "splitinfer/selector.hpp"

namespace splitinfer {

struct SimulateOptions {
  std::vector<PathKind> paths = {PathKind::kDupf};
  bool include_adaptive = true;
  ObjectiveWeights weights;
  double estimator_noise_pct = 0.0;
  double hysteresis = 0.0;
  uint64_t seed = 1;
};

// "l0".."l5" for fixed splits; the selector runs as "adaptive".
std::string FixedModeName(int l);
inline constexpr const char* kAdaptiveMode = "adaptive";

struct SimulationRow {
  PathKind path = PathKind::kDupf;
  std::string mode;
  ChannelState channel;
  DelayReport delay;
  EnergyReport energy;
  double leakage = 0.0;
  bool degraded = false;
};

// One row per (path, mode, trace sample). Each row draws its own path
// jitter sample; compute and tx terms come from the true channel.
std::vector<SimulationRow> RunSimulation(const ModelProfile& profile, const ChannelTrace& trace,
                                         const SimulateOptions& options);

std::string ResultsToCsv(const std::vector<SimulationRow>& rows);

struct SummaryRow {
  PathKind path = PathKind::kDupf;
  std::string mode;
  std::optional<double> interference_db;  // empty: all samples of the mode
  size_t count = 0;
  double delay_mean_ms = 0.0;
  double delay_std_ms = 0.0;
  double energy_mean_wh = 0.0;
  double energy_std_wh = 0.0;
  double leakage_mean = 0.0;
  std::string delay_provenance;
  std::string energy_provenance;
  std::string leakage_provenance;
};

// Per-(path, mode, interference level) and per-(path, mode) statistics with
// population standard deviations.
std::vector<SummaryRow> Summarize(const ModelProfile& profile,
                                  const std::vector<SimulationRow>& rows);
std::string SummaryToCsv(const std::vector<SummaryRow>& summary);

}  // namespace splitinfer
