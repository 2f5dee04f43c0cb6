#include "splitinfer/calibration.hpp"

#include <Eigen/Dense>
#include <fmt/format.h>

#include <algorithm>
#include <cmath>

#include "splitinfer/cost_model.hpp"
#include "splitinfer/error.hpp"

namespace splitinfer {

using nlohmann::json;

namespace {

[[noreturn]] void Infeasible(const std::string& why) {
  throw Error(ErrorCode::kInfeasibleFit, why);
}

// Accumulates weighted rows of A x = b.
class LeastSquares {
 public:
  explicit LeastSquares(int cols) : cols_(cols) {}

  void AddRow(const std::vector<std::pair<int, double>>& coefs, double rhs,
              double weight = 1.0) {
    std::vector<double> row(static_cast<size_t>(cols_), 0.0);
    for (auto [c, v] : coefs) row[static_cast<size_t>(c)] += v * weight;
    rows_.push_back(std::move(row));
    rhs_.push_back(rhs * weight);
  }

  Eigen::VectorXd Solve(const char* what) const {
    if (rows_.empty()) Infeasible(fmt::format("{}: no rows", what));
    Eigen::MatrixXd a(static_cast<Eigen::Index>(rows_.size()), cols_);
    Eigen::VectorXd b(static_cast<Eigen::Index>(rows_.size()));
    for (size_t r = 0; r < rows_.size(); ++r) {
      for (int c = 0; c < cols_; ++c) a(static_cast<Eigen::Index>(r), c) = rows_[r][static_cast<size_t>(c)];
      b(static_cast<Eigen::Index>(r)) = rhs_[r];
    }
    // Equilibrate columns so the rank decision is scale-free.
    Eigen::VectorXd norms = a.colwise().norm().transpose();
    for (int c = 0; c < cols_; ++c) {
      if (norms(c) == 0.0) {
        Infeasible(fmt::format("{}: parameter {} is not constrained", what, c));
      }
      a.col(c) /= norms(c);
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
    qr.setThreshold(1e-10);
    if (qr.rank() < cols_) {
      Infeasible(fmt::format("{}: under-determined (rank {} < {})", what, qr.rank(), cols_));
    }
    Eigen::VectorXd x = qr.solve(b);
    return x.cwiseQuotient(norms);
  }

 private:
  int cols_;
  std::vector<std::vector<double>> rows_;
  std::vector<double> rhs_;
};

template <typename T>
std::vector<T> Values(const json& base, const char* name) {
  return base.at(name).at("values").get<std::vector<T>>();
}

ProvenanceLabels Labels(const json& base, const char* name) {
  const json& p = base.at(name).at("provenance");
  if (p.is_string()) return {p.get<std::string>()};
  return p.get<ProvenanceLabels>();
}

}  // namespace

CalibrationTargets TargetsFromJson(const json& j) {
  try {
    CalibrationTargets t;
    t.name = j.at("name").get<std::string>();
    t.base = j.at("base");
    for (const json& a : j.at("anchors")) {
      CalibrationAnchor anchor;
      anchor.id = a.at("id").get<std::string>();
      anchor.kind = a.at("kind").get<std::string>();
      anchor.split = a.at("split").get<int>();
      if (a.contains("interference_db") && !a.at("interference_db").is_null()) {
        anchor.interference_db = a.at("interference_db").get<double>();
      }
      anchor.value = a.at("value").get<double>();
      anchor.cite = a.value("cite", "");
      if (anchor.kind != "delay" && anchor.kind != "energy") {
        throw Error(ErrorCode::kParse, "anchor " + anchor.id + ": unknown kind " + anchor.kind);
      }
      if (anchor.kind == "delay" && !anchor.interference_db) {
        throw Error(ErrorCode::kParse, "delay anchor " + anchor.id + " needs interference_db");
      }
      if (!(anchor.value > 0.0)) {
        throw Error(ErrorCode::kParse, "anchor " + anchor.id + " must be positive");
      }
      t.anchors.push_back(std::move(anchor));
    }
    return t;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("calibration targets: ") + e.what());
  }
}

CalibrationTargets LoadTargets(const std::filesystem::path& path) {
  try {
    return TargetsFromJson(json::parse(ReadFile(path)));
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kParse, path.string() + ": " + e.what());
  }
}

ModelProfile CalibrateProfile(const CalibrationTargets& targets,
                              const CalibrationOptions& options) {
  if (targets.anchors.empty()) Infeasible("target table is empty");
  const json& base = targets.base;

  ModelProfile p;
  try {
    p.name = targets.name;
    const json& m = base.at("model");
    p.model.num_stages = m.at("num_stages").get<int>();
    p.model.patch_size = m.at("patch_size").get<int>();
    p.model.embed_channels = m.at("embed_channels").get<int>();
    p.model.input_channels = m.value("input_channels", 3);
    p.model.readout_dim = m.value("readout_dim", 16);
    p.model.seed = m.at("seed").get<uint64_t>();
    p.input_height = m.value("input_height", size_t{224});
    p.input_width = m.value("input_width", size_t{224});
    p.frame_rate_fps = base.value("frame_rate_fps", 10.0);
    p.input_bytes = base.at("input_bytes").at("value").get<int64_t>();
    p.provenance["input_bytes"] = Labels(base, "input_bytes");
    p.raw_activation_bytes = Values<int64_t>(base, "raw_activation_bytes");
    p.provenance["raw_activation_bytes"] = Labels(base, "raw_activation_bytes");
    p.compressed_activation_bytes = Values<int64_t>(base, "compressed_activation_bytes");
    p.provenance["compressed_activation_bytes"] = Labels(base, "compressed_activation_bytes");
    p.tail_compute_ms = Values<double>(base, "tail_compute_ms");
    p.provenance["tail_compute_ms"] = Labels(base, "tail_compute_ms");
    p.codec_ms = Values<double>(base, "codec_ms");
    p.provenance["codec_ms"] = Labels(base, "codec_ms");
    p.leakage = Values<double>(base, "leakage");
    p.provenance["leakage"] = Labels(base, "leakage");
    const json& paths = base.at("paths");
    for (const char* kind : {"dupf", "cupf"}) {
      const json& pj = paths.at(kind);
      PathConfig& pc = std::string(kind) == "dupf" ? p.dupf : p.cupf;
      pc.extra_oneway_ms = pj.at("extra_oneway_ms").get<double>();
      pc.jitter_ms = pj.at("jitter_ms").get<double>();
      pc.overhead_ms = pj.at("overhead_ms").get<double>();
    }
    p.provenance["paths"] = Labels(base, "paths");
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("calibration base: ") + e.what());
  }

  const int stages = p.model.num_stages;
  const int splits = stages + 2;
  const int server = stages + 1;
  p.candidates.resize(static_cast<size_t>(splits));
  for (int l = 0; l < splits; ++l) p.candidates[static_cast<size_t>(l)] = l;

  const auto levels = base.at("interference_db").get<std::vector<double>>();
  const auto share = Values<double>(base, "head_share");
  const auto shape = Values<double>(base, "radio_power_shape");
  std::vector<std::optional<double>> ratio;
  for (const json& r : base.at("compute_tx_ratio").at("values")) {
    ratio.push_back(r.is_null() ? std::nullopt : std::optional<double>(r.get<double>()));
  }
  const size_t n_levels = levels.size();
  const int flat = base.value("flat_levels", 2);
  if (n_levels < 3 || flat < 1 || static_cast<size_t>(flat) >= n_levels ||
      share.size() != static_cast<size_t>(server) || shape.size() != n_levels ||
      ratio.size() != static_cast<size_t>(splits)) {
    throw Error(ErrorCode::kParse, "calibration base groups have inconsistent sizes");
  }
  auto level_index = [&](double db) {
    for (size_t i = 0; i < n_levels; ++i) {
      if (std::abs(levels[i] - db) < 1e-9) return i;
    }
    throw Error(ErrorCode::kParse, fmt::format("anchor level {} dB is not a table level", db));
  };
  // Levels in the flat low-interference regime share one throughput value.
  auto u_param = [&](size_t i) {
    return static_cast<int>(i < static_cast<size_t>(flat) ? 0 : i - static_cast<size_t>(flat) + 1);
  };

  // --- Stage 1: delay. Parameters: head_ms[0..stages], then 1/throughput.
  const int n_head = server;
  const int n_u = static_cast<int>(n_levels) - flat + 1;
  LeastSquares delay(n_head + n_u);
  bool any_delay = false;
  for (const auto& a : targets.anchors) {
    if (a.kind != "delay") continue;
    if (a.split < 0 || a.split >= splits) {
      throw Error(ErrorCode::kParse, "anchor " + a.id + ": split out of range");
    }
    any_delay = true;
    const size_t li = level_index(*a.interference_db);
    std::vector<std::pair<int, double>> coefs;
    double fixed = 0.0;
    if (a.split < server) coefs.emplace_back(a.split, 1.0);
    if (a.split != SplitPoint::kLocal) {
      const auto i = static_cast<size_t>(a.split);
      fixed = p.tail_compute_ms[i] + p.codec_ms[i] + PathDelayMean(p.dupf, 2);
      coefs.emplace_back(n_head + u_param(li),
                         8.0 * static_cast<double>(p.PayloadBytes(a.split)) / 1000.0);
    }
    for (auto& c : coefs) c.second /= a.value;
    delay.AddRow(coefs, (a.value - fixed) / a.value);
  }
  if (!any_delay) Infeasible("no delay anchors");
  const double w = options.prior_weight;
  for (int l = 1; l < server; ++l) {
    delay.AddRow({{l, 1.0 / 1000.0}, {0, -share[static_cast<size_t>(l)] / 1000.0}}, 0.0, w);
  }
  // Levels no transmitting anchor touches are interpolated linearly in 1/R.
  std::vector<bool> pinned(n_levels, false);
  for (const auto& a : targets.anchors) {
    if (a.kind == "delay" && a.split != SplitPoint::kLocal) {
      pinned[level_index(*a.interference_db)] = true;
    }
  }
  for (size_t i = 0; i < static_cast<size_t>(flat); ++i) {
    pinned[i] = std::any_of(pinned.begin(), pinned.begin() + flat, [](bool b) { return b; });
  }
  // An unpinned last level is extrapolated from the two before it.
  for (size_t level = static_cast<size_t>(flat); level < n_levels; ++level) {
    if (pinned[level]) continue;
    const size_t i = level + 1 < n_levels ? level : level - 1;
    const double dl = levels[i] - levels[i - 1];
    const double dr = levels[i + 1] - levels[i];
    const double k = 500.0;
    delay.AddRow({{n_head + u_param(i + 1), k / dr},
                  {n_head + u_param(i), -k / dr - k / dl},
                  {n_head + u_param(i - 1), k / dl}},
                 0.0, w);
  }
  const Eigen::VectorXd dx = delay.Solve("delay fit");

  p.head_compute_ms.assign(static_cast<size_t>(splits), 0.0);
  for (int l = 0; l < n_head; ++l) p.head_compute_ms[static_cast<size_t>(l)] = dx(l);
  std::vector<double> mbps(n_levels);
  for (size_t i = 0; i < n_levels; ++i) {
    const double u = dx(n_head + u_param(i));
    if (!(u > 0.0) || !std::isfinite(u)) {
      Infeasible(fmt::format("fitted throughput at {} dB is not positive", levels[i]));
    }
    mbps[i] = 1.0 / u;
    if (i > 0 && mbps[i] > mbps[i - 1] * (1.0 + 1e-12)) {
      Infeasible(fmt::format(
          "anchors imply throughput rising with interference ({} dB: {:.3f} > {:.3f} Mbps)",
          levels[i], mbps[i], mbps[i - 1]));
    }
    if (i > 0) mbps[i] = std::min(mbps[i], mbps[i - 1]);
  }
  for (double h : p.head_compute_ms) {
    if (h < 0.0) Infeasible("fitted head compute time is negative");
  }
  p.throughput = ThroughputTable(levels, mbps);
  p.provenance["throughput"] = {"calibrated"};
  ProvenanceLabels head_labels(static_cast<size_t>(splits), "calibrated");
  head_labels.back() = "placeholder";
  p.provenance["head_compute_ms"] = head_labels;

  // --- Stage 2: energy. Parameters: head_energy_wh[0..server], radio scale.
  std::vector<double> tau(static_cast<size_t>(splits), 0.0);
  for (int l = 1; l < splits; ++l) {
    double sum = 0.0;
    for (size_t i = 0; i < n_levels; ++i) {
      sum += shape[i] * TransmissionMs(p.PayloadBytes(l), mbps[i]) / 3.6e6;
    }
    tau[static_cast<size_t>(l)] = sum / static_cast<double>(n_levels);
  }
  const int scale_col = splits;
  LeastSquares energy(splits + 1);
  for (const auto& a : targets.anchors) {
    if (a.kind != "energy") continue;
    if (a.split < 0 || a.split >= splits) {
      throw Error(ErrorCode::kParse, "anchor " + a.id + ": split out of range");
    }
    energy.AddRow({{a.split, 1.0 / a.value},
                   {scale_col, tau[static_cast<size_t>(a.split)] / a.value}},
                  1.0);
  }
  for (int l = 0; l < splits; ++l) {
    const auto& r = ratio[static_cast<size_t>(l)];
    if (!r) continue;
    energy.AddRow({{l, 1.0 / 0.01}, {scale_col, -*r * tau[static_cast<size_t>(l)] / 0.01}},
                  0.0, w);
  }
  const Eigen::VectorXd ex = energy.Solve("energy fit");
  const double scale = ex(scale_col);
  if (!(scale > 0.0)) Infeasible("fitted radio power is not positive");
  p.head_energy_wh.assign(static_cast<size_t>(splits), 0.0);
  for (int l = 0; l < splits; ++l) {
    const double e = ex(l);
    if (e < 0.0) Infeasible(fmt::format("fitted compute energy for split {} is negative", l));
    p.head_energy_wh[static_cast<size_t>(l)] = e;
  }
  for (int l = 2; l < server; ++l) {
    if (p.head_energy_wh[static_cast<size_t>(l)] < p.head_energy_wh[static_cast<size_t>(l - 1)]) {
      Infeasible("compute energy must not decrease with deeper head splits");
    }
  }
  for (int l = 0; l < server; ++l) {
    if (p.head_energy_wh[static_cast<size_t>(server)] > p.head_energy_wh[static_cast<size_t>(l)]) {
      Infeasible("server-only compute energy must be the minimum");
    }
  }
  p.radio_power_w.resize(n_levels);
  for (size_t i = 0; i < n_levels; ++i) p.radio_power_w[i] = scale * shape[i];
  p.tx_energy_wh.assign(static_cast<size_t>(splits), std::vector<double>(n_levels, 0.0));
  for (int l = 1; l < splits; ++l) {
    for (size_t i = 0; i < n_levels; ++i) {
      p.tx_energy_wh[static_cast<size_t>(l)][i] =
          p.radio_power_w[i] * TransmissionMs(p.PayloadBytes(l), mbps[i]) / 3.6e6;
    }
  }
  p.provenance["head_energy_wh"] = {"calibrated"};
  p.provenance["radio_power_w"] = {"calibrated"};
  p.provenance["tx_energy_wh"] = {"calibrated"};
  p.Validate();

  // --- Residuals against every anchor through the public cost model.
  double worst = 0.0;
  for (const auto& a : targets.anchors) {
    AnchorFit fit{a.id, a.kind, a.split, a.interference_db.value_or(0.0), a.value, 0.0, 0.0};
    if (a.kind == "delay") {
      const ChannelState ch{0.0, *a.interference_db,
                            p.throughput.Lookup(*a.interference_db)};
      fit.fitted = E2eDelay(p, a.split, ch, p.dupf).total_ms;
    } else {
      fit.fitted = UeEnergyAveraged(p, a.split).total_wh;
    }
    fit.relative_residual = (fit.fitted - a.value) / a.value;
    worst = std::max(worst, std::abs(fit.relative_residual));
    p.calibration.push_back(fit);
  }
  if (worst > options.max_relative_residual) {
    Infeasible(fmt::format("worst anchor residual {:.2f}% exceeds {:.2f}%", 100.0 * worst,
                           100.0 * options.max_relative_residual));
  }
  return p;
}

std::string FormatResidualReport(const ModelProfile& profile) {
  std::string out = fmt::format("{:<14} {:<7} {:>5} {:>9} {:>12} {:>12} {:>9}\n", "anchor",
                                "kind", "split", "level_db", "target", "fitted", "resid%");
  double worst = 0.0;
  for (const auto& a : profile.calibration) {
    const std::string level =
        a.kind == "delay" ? fmt::format("{:.0f}", a.interference_db) : "avg";
    out += fmt::format("{:<14} {:<7} {:>5} {:>9} {:>12.6g} {:>12.6g} {:>+9.3f}\n", a.id,
                       a.kind, a.split, level, a.target, a.fitted,
                       100.0 * a.relative_residual);
    worst = std::max(worst, std::abs(a.relative_residual));
  }
  out += fmt::format("max |residual| = {:.3f}% over {} anchors\n", 100.0 * worst,
                     profile.calibration.size());
  return out;
}

}  // namespace splitinfer
