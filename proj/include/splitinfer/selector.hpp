#pragma once

#include <optional>
#include <string>
#include <vector>

#include "splitinfer/channel.hpp"
#include "splitinfer/profile.hpp"

namespace splitinfer {

struct ObjectiveWeights {
  double w_delay = 1.0;
  double w_privacy = 0.0;
  double w_energy = 0.0;
  std::optional<double> max_delay_ms;
  std::optional<double> max_leakage;
  std::optional<double> max_energy_wh;

  // Scales non-negative raw weights to sum to 1.
  static ObjectiveWeights Normalized(double delay, double privacy, double energy);
  void Validate() const;
};

struct CandidateEval {
  int split = 0;
  double delay_ms = 0.0;
  double leakage = 0.0;
  double energy_wh = 0.0;
  double objective = 0.0;
  bool feasible = true;
  double violation = 0.0;  // worst relative constraint violation, 0 if feasible
};

struct SplitDecision {
  int chosen_l = 0;
  double objective_value = 0.0;
  std::vector<CandidateEval> breakdown;
  double estimator_mbps_used = 0.0;
  bool degraded = false;

  const CandidateEval& chosen() const;
};

// Scores every candidate split against the estimated channel and returns the
// feasible argmin of the weighted objective. Delay and energy are normalized
// by the UE-only values. Ties go to lower leakage, then lower split. With no
// feasible candidate, the smallest worst-case violation wins and the decision
// is marked degraded.
SplitDecision SelectSplit(const ModelProfile& profile, const ChannelState& estimate,
                          const PathConfig& path, const ObjectiveWeights& weights);

struct AdaptiveOptions {
  double estimator_noise_pct = 0.0;
  PathKind path = PathKind::kDupf;
  // Keep the previous split unless the new choice improves the objective by
  // more than this fraction. 0 re-decides freely every sample.
  double hysteresis = 0.0;
  uint64_t seed = 1;
};

struct TimelineRow {
  double timestamp_ms = 0.0;
  double interference_db = 0.0;
  double estimated_mbps = 0.0;
  int chosen_l = 0;
  double predicted_ms = 0.0;
  double realized_ms = 0.0;
  double leakage = 0.0;
  double energy_wh = 0.0;
  bool degraded = false;
};

std::vector<TimelineRow> AdaptiveRun(const ModelProfile& profile, const ChannelTrace& trace,
                                     const ObjectiveWeights& weights,
                                     const AdaptiveOptions& options);

std::string TimelineToCsv(const std::vector<TimelineRow>& rows);

}  // namespace splitinfer
