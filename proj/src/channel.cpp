#include "splitinfer/channel.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <charconv>
#include <cmath>

#include "splitinfer/error.hpp"

namespace splitinfer {

double Interpolate(const std::vector<double>& xs, const std::vector<double>& ys,
                   double x) {
  if (xs.empty() || xs.size() != ys.size()) {
    throw Error(ErrorCode::kInvalidParameter, "interpolation table is malformed");
  }
  if (x < xs.front() || x > xs.back()) {
    throw Error(ErrorCode::kOutOfRange,
                fmt::format("{} outside [{}, {}]", x, xs.front(), xs.back()));
  }
  const auto it = std::upper_bound(xs.begin(), xs.end(), x);
  if (it == xs.end()) return ys.back();
  const size_t hi = static_cast<size_t>(it - xs.begin());
  const size_t lo = hi - 1;
  const double t = (x - xs[lo]) / (xs[hi] - xs[lo]);
  return ys[lo] + t * (ys[hi] - ys[lo]);
}

ThroughputTable::ThroughputTable(std::vector<double> levels_db, std::vector<double> mbps)
    : levels_db_(std::move(levels_db)), mbps_(std::move(mbps)) {
  if (levels_db_.size() < 2 || levels_db_.size() != mbps_.size()) {
    throw Error(ErrorCode::kInvalidParameter,
                "throughput table needs >= 2 matching anchors");
  }
  for (size_t i = 0; i < mbps_.size(); ++i) {
    if (!(mbps_[i] > 0.0) || !std::isfinite(mbps_[i])) {
      throw Error(ErrorCode::kInvalidParameter, "throughput must be positive");
    }
    if (i > 0 && (levels_db_[i] <= levels_db_[i - 1] || mbps_[i] > mbps_[i - 1])) {
      throw Error(ErrorCode::kInvalidParameter,
                  "throughput table must be monotone in interference");
    }
  }
}

double ThroughputTable::Lookup(double interference_db) const {
  if (!(interference_db >= kMinInterferenceDb && interference_db <= kMaxInterferenceDb)) {
    throw Error(ErrorCode::kOutOfRange,
                fmt::format("interference {} dB outside [{}, {}]", interference_db,
                            kMinInterferenceDb, kMaxInterferenceDb));
  }
  return Interpolate(levels_db_, mbps_, interference_db);
}

double EstimateThroughput(const ChannelState& truth, double noise_pct, uint64_t seed) {
  if (noise_pct <= 0.0) return truth.uplink_mbps;
  SplitMix64 rng(seed);
  const double factor = rng.Uniform(1.0 - noise_pct, 1.0 + noise_pct);
  return std::max(truth.uplink_mbps * factor, 1e-6);
}

std::string_view ToString(PathKind kind) {
  return kind == PathKind::kDupf ? "dupf" : "cupf";
}

PathKind ParsePathKind(std::string_view name) {
  if (name == "dupf") return PathKind::kDupf;
  if (name == "cupf") return PathKind::kCupf;
  throw Error(ErrorCode::kInvalidParameter,
              fmt::format("unknown path '{}' (expected dupf or cupf)", name));
}

double PathDelaySample(const PathConfig& path, int direction_count, SplitMix64& rng) {
  double total = 0.0;
  for (int d = 0; d < direction_count; ++d) {
    const double jitter =
        path.jitter_ms > 0.0 ? rng.Uniform(-path.jitter_ms, path.jitter_ms) : 0.0;
    total += path.extra_oneway_ms + jitter + path.overhead_ms;
  }
  return std::max(total, 0.0);
}

double PathDelaySample(const PathConfig& path, int direction_count, uint64_t seed) {
  SplitMix64 rng(seed);
  return PathDelaySample(path, direction_count, rng);
}

double PathDelayMean(const PathConfig& path, int direction_count) {
  return direction_count * (path.extra_oneway_ms + path.overhead_ms);
}

std::string_view ToString(Scenario s) {
  switch (s) {
    case Scenario::kConstant: return "constant";
    case Scenario::kSweep: return "sweep";
    case Scenario::kRandomWalk: return "random-walk";
  }
  return "?";
}

Scenario ParseScenario(std::string_view name) {
  if (name == "constant") return Scenario::kConstant;
  if (name == "sweep") return Scenario::kSweep;
  if (name == "random-walk") return Scenario::kRandomWalk;
  throw Error(ErrorCode::kInvalidParameter, fmt::format("unknown scenario '{}'", name));
}

ChannelTrace GenerateTrace(const ThroughputTable& table, const TraceOptions& options) {
  if (!(options.duration_ms > 0.0) || !(options.step_ms > 0.0)) {
    throw Error(ErrorCode::kInvalidParameter, "duration and step must be positive");
  }
  if (options.scenario == Scenario::kConstant &&
      !(options.constant_db >= kMinInterferenceDb &&
        options.constant_db <= kMaxInterferenceDb)) {
    throw Error(ErrorCode::kInvalidParameter, "constant level outside [-40, -5] dB");
  }
  ChannelTrace trace;
  trace.seed = options.seed;
  SplitMix64 rng(options.seed);
  double walk = rng.Uniform(kMinInterferenceDb, kMaxInterferenceDb);
  const auto count = static_cast<size_t>(std::ceil(options.duration_ms / options.step_ms));
  constexpr size_t kLevels = std::size(kSweepLevelsDb);
  for (size_t i = 0; i < count; ++i) {
    const double t = static_cast<double>(i) * options.step_ms;
    double level = options.constant_db;
    switch (options.scenario) {
      case Scenario::kConstant:
        break;
      case Scenario::kSweep: {
        const auto seg = std::min(
            kLevels - 1, static_cast<size_t>(t * kLevels / options.duration_ms));
        level = kSweepLevelsDb[seg];
        break;
      }
      case Scenario::kRandomWalk:
        if (i > 0) {
          walk += rng.Uniform(-options.walk_step_db, options.walk_step_db);
          if (walk < kMinInterferenceDb) walk = 2 * kMinInterferenceDb - walk;
          if (walk > kMaxInterferenceDb) walk = 2 * kMaxInterferenceDb - walk;
          walk = std::clamp(walk, kMinInterferenceDb, kMaxInterferenceDb);
        }
        level = walk;
        break;
    }
    trace.samples.push_back({t, level, table.Lookup(level)});
  }
  return trace;
}

std::string TraceToCsv(const ChannelTrace& trace) {
  std::string out = "timestamp_ms,interference_db,uplink_mbps\n";
  for (const auto& s : trace.samples) {
    out += fmt::format("{:.3f},{:.4f},{:.6f}\n", s.timestamp_ms, s.interference_db,
                       s.uplink_mbps);
  }
  return out;
}

namespace {

double ParseField(std::string_view field, size_t line) {
  double v = 0.0;
  const auto* end = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(field.data(), end, v);
  if (ec != std::errc() || ptr != end) {
    throw Error(ErrorCode::kParse,
                fmt::format("line {}: '{}' is not a number", line, field));
  }
  return v;
}

}  // namespace

ChannelTrace ParseTraceCsv(std::string_view text) {
  ChannelTrace trace;
  size_t line_no = 0;
  bool header = true;
  while (!text.empty()) {
    const size_t nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    if (header) {
      if (line != "timestamp_ms,interference_db,uplink_mbps") {
        throw Error(ErrorCode::kParse,
                    fmt::format("line {}: unexpected trace header '{}'", line_no, line));
      }
      header = false;
      continue;
    }
    double f[3];
    for (int k = 0; k < 3; ++k) {
      const size_t comma = line.find(',');
      if ((k < 2) == (comma == std::string_view::npos)) {
        throw Error(ErrorCode::kParse,
                    fmt::format("line {}: expected 3 fields", line_no));
      }
      f[k] = ParseField(line.substr(0, comma), line_no);
      line = k < 2 ? line.substr(comma + 1) : std::string_view{};
    }
    if (!trace.samples.empty() && f[0] <= trace.samples.back().timestamp_ms) {
      throw Error(ErrorCode::kParse,
                  fmt::format("line {}: timestamps must strictly increase", line_no));
    }
    if (!(f[2] > 0.0)) {
      throw Error(ErrorCode::kParse,
                  fmt::format("line {}: uplink_mbps must be positive", line_no));
    }
    trace.samples.push_back({f[0], f[1], f[2]});
  }
  if (header) throw Error(ErrorCode::kParse, "trace is empty (no header)");
  if (trace.samples.empty()) throw Error(ErrorCode::kParse, "trace has no samples");
  return trace;
}

const ChannelState& TraceCursor::At(double timestamp_ms) {
  const auto& s = trace_.samples;
  if (s.empty()) throw Error(ErrorCode::kEmptyTrace, "cursor over empty trace");
  if (pos_ >= s.size() || s[pos_].timestamp_ms > timestamp_ms) pos_ = 0;
  while (pos_ + 1 < s.size() && s[pos_ + 1].timestamp_ms <= timestamp_ms) ++pos_;
  return s[pos_];
}

}  // namespace splitinfer
