#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "splitinfer/rng.hpp"

namespace splitinfer {

inline constexpr double kMinInterferenceDb = -40.0;
inline constexpr double kMaxInterferenceDb = -5.0;

// The five jammer levels of the interference sweep.
inline constexpr double kSweepLevelsDb[] = {-40.0, -30.0, -20.0, -10.0, -5.0};

struct ChannelState {
  double timestamp_ms = 0.0;
  double interference_db = kMinInterferenceDb;
  double uplink_mbps = 0.0;

  friend bool operator==(const ChannelState&, const ChannelState&) = default;
};

// Piecewise-linear interference -> uplink throughput map. Anchors must be
// strictly increasing in dB and non-increasing in throughput.
class ThroughputTable {
 public:
  ThroughputTable() = default;
  ThroughputTable(std::vector<double> levels_db, std::vector<double> mbps);

  double Lookup(double interference_db) const;
  double max_mbps() const { return mbps_.front(); }
  double min_mbps() const { return mbps_.back(); }
  const std::vector<double>& levels_db() const { return levels_db_; }
  const std::vector<double>& mbps() const { return mbps_; }

 private:
  std::vector<double> levels_db_;
  std::vector<double> mbps_;
};

// Piecewise-linear interpolation over (xs, ys); xs strictly increasing and
// x within [xs.front(), xs.back()].
double Interpolate(const std::vector<double>& xs, const std::vector<double>& ys,
                   double x);

// Noisy-oracle stand-in for the spectrum-sensing throughput estimator:
// multiplicative noise uniform in [1 - noise_pct, 1 + noise_pct].
double EstimateThroughput(const ChannelState& truth, double noise_pct,
                          uint64_t seed);

enum class PathKind { kDupf, kCupf };

std::string_view ToString(PathKind kind);
PathKind ParsePathKind(std::string_view name);

struct PathConfig {
  PathKind kind = PathKind::kDupf;
  double extra_oneway_ms = 0.0;
  double jitter_ms = 0.0;     // half-width of uniform jitter
  double overhead_ms = 0.0;   // per one-way message

  static PathConfig Dupf() { return {PathKind::kDupf, 0.0, 0.0, 0.0}; }
  static PathConfig Cupf() { return {PathKind::kCupf, 100.0, 5.0, 27.8}; }
};

// Sum over directions of (extra + U(-jitter, +jitter) + overhead).
double PathDelaySample(const PathConfig& path, int direction_count, uint64_t seed);
double PathDelaySample(const PathConfig& path, int direction_count, SplitMix64& rng);
double PathDelayMean(const PathConfig& path, int direction_count);

enum class Scenario { kConstant, kSweep, kRandomWalk };

std::string_view ToString(Scenario s);
Scenario ParseScenario(std::string_view name);

struct TraceOptions {
  double duration_ms = 20000.0;
  double step_ms = 100.0;
  Scenario scenario = Scenario::kSweep;
  uint64_t seed = 1;
  double constant_db = kMinInterferenceDb;
  double walk_step_db = 2.0;
};

struct ChannelTrace {
  uint64_t seed = 0;
  std::vector<ChannelState> samples;
};

ChannelTrace GenerateTrace(const ThroughputTable& table, const TraceOptions& options);

// CSV: header `timestamp_ms,interference_db,uplink_mbps`, LF endings.
std::string TraceToCsv(const ChannelTrace& trace);
ChannelTrace ParseTraceCsv(std::string_view text);

// Single-owner replay cursor: state in effect at a given time.
class TraceCursor {
 public:
  explicit TraceCursor(const ChannelTrace& trace) : trace_(trace) {}
  const ChannelState& At(double timestamp_ms);

 private:
  const ChannelTrace& trace_;
  size_t pos_ = 0;
};

}  // namespace splitinfer
