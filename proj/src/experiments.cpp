#include "splitinfer/experiments.hpp"

#include <fmt/format.h>

#include <cmath>
#include <map>
#include <set>
#include <tuple>

#include "splitinfer/error.hpp"

namespace splitinfer {

std::string FixedModeName(int l) { return fmt::format("l{}", l); }

std::vector<SimulationRow> RunSimulation(const ModelProfile& profile, const ChannelTrace& trace,
                                         const SimulateOptions& options) {
  if (trace.samples.empty()) throw Error(ErrorCode::kEmptyTrace, "trace has no samples");
  if (options.paths.empty()) throw Error(ErrorCode::kInvalidParameter, "no path selected");
  std::vector<SimulationRow> rows;
  for (PathKind kind : options.paths) {
    const PathConfig& path = profile.Path(kind);
    std::vector<int> chosen_adaptive;
    std::vector<bool> degraded_adaptive;
    if (options.include_adaptive) {
      AdaptiveOptions ao;
      ao.estimator_noise_pct = options.estimator_noise_pct;
      ao.path = kind;
      ao.hysteresis = options.hysteresis;
      ao.seed = options.seed;
      for (const auto& r : AdaptiveRun(profile, trace, options.weights, ao)) {
        chosen_adaptive.push_back(r.chosen_l);
        degraded_adaptive.push_back(r.degraded);
      }
    }
    const int n_modes = profile.num_splits() + (options.include_adaptive ? 1 : 0);
    for (int mode = 0; mode < n_modes; ++mode) {
      const bool adaptive = mode == profile.num_splits();
      SplitMix64 rng(MixSeed(options.seed, static_cast<uint64_t>(kind) * 64 + static_cast<uint64_t>(mode) + 1));
      for (size_t i = 0; i < trace.samples.size(); ++i) {
        const ChannelState& ch = trace.samples[i];
        const int l = adaptive ? chosen_adaptive[i] : mode;
        SimulationRow row;
        row.path = kind;
        row.mode = adaptive ? kAdaptiveMode : FixedModeName(mode);
        row.channel = ch;
        const double path_ms = l == SplitPoint::kLocal ? 0.0 : PathDelaySample(path, 2, rng);
        row.delay = E2eDelayWithPathMs(profile, l, ch, path_ms);
        row.energy = UeEnergy(profile, l, ch);
        row.leakage = profile.leakage[static_cast<size_t>(l)];
        row.degraded = adaptive && degraded_adaptive[i];
        rows.push_back(std::move(row));
      }
    }
  }
  return rows;
}

std::string ResultsToCsv(const std::vector<SimulationRow>& rows) {
  std::string out =
      "path,mode,timestamp_ms,interference_db,uplink_mbps,split,head_ms,codec_ms,tx_ms,"
      "path_ms,tail_ms,total_ms,compute_wh,tx_wh,total_wh,leakage,degraded\n";
  for (const auto& r : rows) {
    out += fmt::format(
        "{},{},{:.3f},{:.4f},{:.6f},{},{:.4f},{:.4f},{:.4f},{:.4f},{:.4f},{:.4f},{:.9f},{:.9f},"
        "{:.9f},{:.4f},{}\n",
        ToString(r.path), r.mode, r.channel.timestamp_ms, r.channel.interference_db,
        r.channel.uplink_mbps, r.delay.split, r.delay.head_ms, r.delay.codec_ms, r.delay.tx_ms,
        r.delay.path_ms, r.delay.tail_ms, r.delay.total_ms, r.energy.compute_wh, r.energy.tx_wh,
        r.energy.total_wh, r.leakage, r.degraded ? 1 : 0);
  }
  return out;
}

namespace {

struct Accumulator {
  size_t n = 0;
  double delay_sum = 0.0, delay_sq = 0.0;
  double energy_sum = 0.0, energy_sq = 0.0;
  double leakage_sum = 0.0;
  std::set<std::string> leakage_labels;

  void Add(const SimulationRow& r, const ModelProfile& p) {
    ++n;
    delay_sum += r.delay.total_ms;
    delay_sq += r.delay.total_ms * r.delay.total_ms;
    energy_sum += r.energy.total_wh;
    energy_sq += r.energy.total_wh * r.energy.total_wh;
    leakage_sum += r.leakage;
    leakage_labels.insert(p.ProvenanceOf("leakage", static_cast<size_t>(r.delay.split)));
  }
};

double Std(double sum, double sq, size_t n) {
  const double mean = sum / static_cast<double>(n);
  return std::sqrt(std::max(0.0, sq / static_cast<double>(n) - mean * mean));
}

std::string Join(const std::set<std::string>& labels) {
  std::string out;
  for (const auto& l : labels) out += (out.empty() ? "" : "+") + l;
  return out;
}

}  // namespace

std::vector<SummaryRow> Summarize(const ModelProfile& profile,
                                  const std::vector<SimulationRow>& rows) {
  // Keys keep first-seen mode order so output follows the results file.
  using Key = std::tuple<int, int, int>;  // path, mode order, level index (-1 = all)
  std::map<std::string, int> mode_order;
  std::map<Key, Accumulator> acc;
  std::map<Key, double> level_of;
  std::map<int, std::string> mode_name;
  for (const auto& r : rows) {
    auto [it, inserted] = mode_order.try_emplace(r.mode, static_cast<int>(mode_order.size()));
    mode_name[it->second] = r.mode;
    const int path = static_cast<int>(r.path);
    int level = -1;
    const auto& levels = profile.throughput.levels_db();
    for (size_t i = 0; i < levels.size(); ++i) {
      if (std::abs(levels[i] - r.channel.interference_db) < 1e-9) level = static_cast<int>(i);
    }
    if (level >= 0) {
      const Key k{path, it->second, level};
      acc[k].Add(r, profile);
      level_of[k] = levels[static_cast<size_t>(level)];
    }
    acc[Key{path, it->second, static_cast<int>(levels.size())}].Add(r, profile);
  }
  std::vector<SummaryRow> out;
  for (const auto& [k, a] : acc) {
    SummaryRow s;
    s.path = static_cast<PathKind>(std::get<0>(k));
    s.mode = mode_name[std::get<1>(k)];
    if (auto it = level_of.find(k); it != level_of.end()) s.interference_db = it->second;
    s.count = a.n;
    s.delay_mean_ms = a.delay_sum / static_cast<double>(a.n);
    s.delay_std_ms = Std(a.delay_sum, a.delay_sq, a.n);
    s.energy_mean_wh = a.energy_sum / static_cast<double>(a.n);
    s.energy_std_wh = Std(a.energy_sum, a.energy_sq, a.n);
    s.leakage_mean = a.leakage_sum / static_cast<double>(a.n);
    s.delay_provenance = "calibrated";
    s.energy_provenance = "calibrated";
    s.leakage_provenance = Join(a.leakage_labels);
    out.push_back(std::move(s));
  }
  return out;
}

std::string SummaryToCsv(const std::vector<SummaryRow>& summary) {
  std::string out =
      "path,mode,interference_db,count,delay_mean_ms,delay_std_ms,delay_provenance,"
      "energy_mean_wh,energy_std_wh,energy_provenance,leakage,leakage_provenance\n";
  for (const auto& s : summary) {
    out += fmt::format("{},{},{},{},{:.3f},{:.3f},{},{:.9f},{:.9f},{},{:.4f},{}\n",
                       ToString(s.path), s.mode,
                       s.interference_db ? fmt::format("{:.0f}", *s.interference_db) : "all",
                       s.count, s.delay_mean_ms, s.delay_std_ms, s.delay_provenance,
                       s.energy_mean_wh, s.energy_std_wh, s.energy_provenance, s.leakage_mean,
                       s.leakage_provenance);
  }
  return out;
}

}  // namespace splitinfer
