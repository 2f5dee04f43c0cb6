#include "splitinfer/selector.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>

#include "splitinfer/cost_model.hpp"
#include "splitinfer/error.hpp"

namespace splitinfer {
namespace {

double Violation(double value, const std::optional<double>& limit) {
  if (!limit || value <= *limit) return 0.0;
  return (value - *limit) / std::max(std::abs(*limit), 1e-12);
}

bool NearlyEqual(double a, double b) {
  return std::abs(a - b) <= 1e-12 * std::max({1.0, std::abs(a), std::abs(b)});
}

// Strict "better" on (primary, leakage, split).
bool Better(double primary_a, const CandidateEval& a, double primary_b,
            const CandidateEval& b) {
  if (!NearlyEqual(primary_a, primary_b)) return primary_a < primary_b;
  if (a.leakage != b.leakage) return a.leakage < b.leakage;
  return a.split < b.split;
}

}  // namespace

ObjectiveWeights ObjectiveWeights::Normalized(double delay, double privacy, double energy) {
  const double sum = delay + privacy + energy;
  if (delay < 0.0 || privacy < 0.0 || energy < 0.0 || !(sum > 0.0) || !std::isfinite(sum)) {
    throw Error(ErrorCode::kInvalidParameter,
                "weights must be non-negative with a positive sum");
  }
  ObjectiveWeights w;
  w.w_delay = delay / sum;
  w.w_privacy = privacy / sum;
  w.w_energy = energy / sum;
  return w;
}

void ObjectiveWeights::Validate() const {
  if (w_delay < 0.0 || w_privacy < 0.0 || w_energy < 0.0) {
    throw Error(ErrorCode::kInvalidParameter, "weights must be non-negative");
  }
  if (std::abs(w_delay + w_privacy + w_energy - 1.0) > 1e-9) {
    throw Error(ErrorCode::kInvalidParameter, "weights must sum to 1");
  }
}

const CandidateEval& SplitDecision::chosen() const {
  for (const auto& c : breakdown) {
    if (c.split == chosen_l) return c;
  }
  throw Error(ErrorCode::kUnknownSplit, "chosen split missing from breakdown");
}

SplitDecision SelectSplit(const ModelProfile& profile, const ChannelState& estimate,
                          const PathConfig& path, const ObjectiveWeights& weights) {
  weights.Validate();
  const double t_ref = E2eDelay(profile, SplitPoint::kLocal, estimate, path).total_ms;
  const double e_ref = UeEnergy(profile, SplitPoint::kLocal, estimate).total_wh;

  SplitDecision d;
  d.estimator_mbps_used = estimate.uplink_mbps;
  for (int l : profile.candidates) {
    CandidateEval c;
    c.split = l;
    c.delay_ms = E2eDelay(profile, l, estimate, path).total_ms;
    c.energy_wh = UeEnergy(profile, l, estimate).total_wh;
    c.leakage = profile.leakage[static_cast<size_t>(l)];
    c.objective = weights.w_delay * c.delay_ms / t_ref + weights.w_privacy * c.leakage +
                  weights.w_energy * c.energy_wh / e_ref;
    c.violation = std::max({Violation(c.delay_ms, weights.max_delay_ms),
                            Violation(c.leakage, weights.max_leakage),
                            Violation(c.energy_wh, weights.max_energy_wh)});
    c.feasible = c.violation == 0.0;
    d.breakdown.push_back(c);
  }

  const CandidateEval* best = nullptr;
  for (const auto& c : d.breakdown) {
    if (!c.feasible) continue;
    if (!best || Better(c.objective, c, best->objective, *best)) best = &c;
  }
  if (!best) {
    d.degraded = true;
    for (const auto& c : d.breakdown) {
      if (!best || (NearlyEqual(c.violation, best->violation)
                        ? Better(c.objective, c, best->objective, *best)
                        : c.violation < best->violation)) {
        best = &c;
      }
    }
  }
  d.chosen_l = best->split;
  d.objective_value = best->objective;
  return d;
}

std::vector<TimelineRow> AdaptiveRun(const ModelProfile& profile, const ChannelTrace& trace,
                                     const ObjectiveWeights& weights,
                                     const AdaptiveOptions& options) {
  if (trace.samples.empty()) throw Error(ErrorCode::kEmptyTrace, "trace has no samples");
  if (options.hysteresis < 0.0 || options.hysteresis >= 1.0) {
    throw Error(ErrorCode::kInvalidParameter, "hysteresis must lie in [0, 1)");
  }
  const PathConfig& path = profile.Path(options.path);
  std::vector<TimelineRow> rows;
  rows.reserve(trace.samples.size());
  std::optional<int> previous;
  for (size_t i = 0; i < trace.samples.size(); ++i) {
    const ChannelState& truth = trace.samples[i];
    ChannelState estimate = truth;
    estimate.uplink_mbps =
        EstimateThroughput(truth, options.estimator_noise_pct, MixSeed(options.seed, i));
    const SplitDecision d = SelectSplit(profile, estimate, path, weights);

    int chosen = d.chosen_l;
    bool degraded = d.degraded;
    if (previous && *previous != chosen && options.hysteresis > 0.0) {
      const CandidateEval& prev = *std::find_if(
          d.breakdown.begin(), d.breakdown.end(),
          [&](const CandidateEval& c) { return c.split == *previous; });
      const bool prev_ok = prev.feasible || d.degraded;
      if (prev_ok && d.objective_value > (1.0 - options.hysteresis) * prev.objective) {
        chosen = *previous;
        degraded = !prev.feasible;
      }
    }
    previous = chosen;

    TimelineRow row;
    row.timestamp_ms = truth.timestamp_ms;
    row.interference_db = truth.interference_db;
    row.estimated_mbps = estimate.uplink_mbps;
    row.chosen_l = chosen;
    row.predicted_ms = E2eDelay(profile, chosen, estimate, path).total_ms;
    row.realized_ms = E2eDelay(profile, chosen, truth, path).total_ms;
    row.leakage = profile.leakage[static_cast<size_t>(chosen)];
    row.energy_wh = UeEnergy(profile, chosen, truth).total_wh;
    row.degraded = degraded;
    rows.push_back(row);
  }
  return rows;
}

std::string TimelineToCsv(const std::vector<TimelineRow>& rows) {
  std::string out =
      "timestamp_ms,interference_db,estimated_mbps,chosen_l,predicted_ms,realized_ms,"
      "leakage,energy_wh,degraded\n";
  for (const auto& r : rows) {
    out += fmt::format("{:.3f},{:.4f},{:.6f},{},{:.3f},{:.3f},{:.4f},{:.8f},{}\n",
                       r.timestamp_ms, r.interference_db, r.estimated_mbps, r.chosen_l,
                       r.predicted_ms, r.realized_ms, r.leakage, r.energy_wh,
                       r.degraded ? 1 : 0);
  }
  return out;
}

}  // namespace splitinfer
