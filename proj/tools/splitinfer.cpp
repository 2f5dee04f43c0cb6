// splitinfer: simulate, plot, calibrate, and run split inference over TCP.

#include <csignal>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "splitinfer/backbone.hpp"
#include "splitinfer/calibration.hpp"
#include "splitinfer/channel.hpp"
#include "splitinfer/error.hpp"
#include "splitinfer/experiments.hpp"
#include "splitinfer/frames.hpp"
#include "splitinfer/plot.hpp"
#include "splitinfer/profile.hpp"
#include "splitinfer/selector.hpp"
#include "splitinfer/transport.hpp"

namespace fs = std::filesystem;
using namespace splitinfer;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;
constexpr int kExitInfeasible = 3;

struct Globals {
  uint64_t seed = 1;
  std::string profile = std::string(SPLITINFER_DATA_DIR) + "/profile.json";
};

struct TraceArgs {
  std::string scenario = "sweep";
  double duration_ms = 20000.0;
  double step_ms = 100.0;
  double constant_db = kMinInterferenceDb;
  double walk_step_db = 2.0;

  void Register(CLI::App* app) {
    app->add_option("--scenario", scenario, "constant | sweep | random-walk")
        ->check(CLI::IsMember({"constant", "sweep", "random-walk"}))
        ->capture_default_str();
    app->add_option("--duration-ms", duration_ms)->capture_default_str();
    app->add_option("--step-ms", step_ms)->capture_default_str();
    app->add_option("--constant-db", constant_db)->capture_default_str();
    app->add_option("--walk-step-db", walk_step_db)->capture_default_str();
  }

  ChannelTrace Generate(const ModelProfile& profile, uint64_t seed) const {
    TraceOptions o;
    o.scenario = ParseScenario(scenario);
    o.duration_ms = duration_ms;
    o.step_ms = step_ms;
    o.constant_db = constant_db;
    o.walk_step_db = walk_step_db;
    o.seed = seed;
    return GenerateTrace(profile.throughput, o);
  }
};

void Emit(const std::string& text, const std::string& out) {
  if (out.empty() || out == "-") {
    std::cout << text;
  } else {
    WriteFile(out, text);
  }
}

const std::string kSplitHelp = "split point; one of 0 (UE-only), 1, 2, 3, 4, 5 (server-only)";

CLI::Validator SplitValidator() {
  return CLI::Validator(
      [](std::string& s) -> std::string {
        if (s.size() == 1 && s[0] >= '0' && s[0] <= '5') return {};
        return "invalid split '" + s + "'; valid splits are 0, 1, 2, 3, 4, 5";
      },
      "SPLIT in {0,1,2,3,4,5}");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Split inference simulator, calibrator and head/tail runtime"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--seed", g.seed, "base seed for every random stream")->capture_default_str();
  app.add_option("--profile", g.profile, "model profile JSON")->capture_default_str();

  // simulate
  auto* sim = app.add_subcommand("simulate", "cost-model simulation over a channel trace");
  std::string sim_trace, sim_out, sim_summary, sim_timeline, sim_path = "dupf";
  std::vector<double> sim_weights = {1.0, 0.0, 0.0};
  std::optional<double> max_delay, max_leak, max_energy;
  double noise_pct = 0.0, hysteresis = 0.0;
  bool no_adaptive = false;
  TraceArgs sim_trace_args;
  sim->add_option("--trace", sim_trace, "trace CSV; generated from the scenario flags if absent");
  sim->add_option("--path", sim_path, "dupf | cupf | both")
      ->check(CLI::IsMember({"dupf", "cupf", "both"}))
      ->capture_default_str();
  sim->add_option("--weights", sim_weights, "delay privacy energy weights (normalized)")
      ->expected(3)
      ->capture_default_str();
  sim->add_option("--max-delay-ms", max_delay);
  sim->add_option("--max-leakage", max_leak);
  sim->add_option("--max-energy-wh", max_energy);
  sim->add_option("--noise-pct", noise_pct, "estimator noise as a fraction")->capture_default_str();
  sim->add_option("--hysteresis", hysteresis, "switching threshold, e.g. 0.05")->capture_default_str();
  sim->add_flag("--no-adaptive", no_adaptive, "fixed modes only");
  sim->add_option("--out", sim_out, "results CSV (default stdout)");
  sim->add_option("--summary", sim_summary, "summary CSV (default stderr)");
  sim->add_option("--timeline", sim_timeline, "adaptive decision timeline CSV");
  sim_trace_args.Register(sim);

  // plot
  auto* plot = app.add_subcommand("plot", "render a figure from simulate output");
  std::string plot_results, plot_figure, plot_out;
  PlotOptions plot_opts;
  plot->add_option("--results", plot_results, "results CSV")->required();
  plot->add_option("--figure", plot_figure, "fig4 | fig5 | fig6 | fig7 | fig8")->required();
  plot->add_option("--out", plot_out, "SVG path (default stdout)");
  plot->add_option("--mode", plot_opts.fig8_mode, "mode plotted by fig8")->capture_default_str();
  plot->add_option("--window", plot_opts.moving_average_window, "fig8 moving-average window")
      ->capture_default_str();

  // calibrate
  auto* cal = app.add_subcommand("calibrate", "fit a profile to published anchors");
  std::string cal_targets = std::string(SPLITINFER_DATA_DIR) + "/calibration_targets.json";
  std::string cal_out;
  bool cal_report = false;
  CalibrationOptions cal_opts;
  cal->add_option("--targets", cal_targets)->capture_default_str();
  cal->add_option("--out", cal_out, "profile JSON (default stdout)");
  cal->add_flag("--report", cal_report, "print the per-anchor residual table to stderr");
  cal->add_option("--max-residual", cal_opts.max_relative_residual)->capture_default_str();

  // serve
  auto* serve = app.add_subcommand("serve", "run the tail server");
  std::string listen = "127.0.0.1:7450";
  serve->add_option("--listen", listen, "host:port (port 0 picks a free port)")->capture_default_str();

  // head
  auto* head = app.add_subcommand("head", "run the head client against a tail server");
  std::string connect = "127.0.0.1:7450", frames_src = "synthetic:10", inject = "none";
  std::string head_log, head_results;
  int split = 1, codec_level = 6, timeout_ms = 30000, pipeline = 1;
  bool bypass = false;
  head->add_option("--connect", connect, "server host:port")->capture_default_str();
  head->add_option("--split", split, kSplitHelp)->check(SplitValidator())->capture_default_str();
  head->add_option("--frames", frames_src, "directory of .ppm files or synthetic:N")
      ->capture_default_str();
  head->add_option("--codec-level", codec_level, "DEFLATE level")
      ->check(CLI::Range(1, 9))
      ->capture_default_str();
  head->add_flag("--bypass-quant", bypass, "send lossless FP32 payloads");
  head->add_option("--inject-path", inject, "none | dupf | cupf")
      ->check(CLI::IsMember({"none", "dupf", "cupf"}))
      ->capture_default_str();
  head->add_option("--timeout-ms", timeout_ms)->capture_default_str();
  head->add_option("--pipeline", pipeline, "outstanding frames per session")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  head->add_option("--log", head_log, "timing log CSV (default stdout)");
  head->add_option("--results", head_results, "per-frame readout CSV");

  // trace-gen
  auto* tgen = app.add_subcommand("trace-gen", "generate a channel trace CSV");
  std::string tgen_out;
  TraceArgs tgen_args;
  tgen_args.Register(tgen);
  tgen->add_option("--out", tgen_out, "trace CSV (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*cal) {
      const ModelProfile p = CalibrateProfile(LoadTargets(cal_targets), cal_opts);
      if (cal_report) std::cerr << FormatResidualReport(p);
      Emit(ProfileToJson(p).dump(2) + "\n", cal_out);
      return kExitOk;
    }
    if (*plot) {
      const CsvTable table = ParseCsv(ReadFile(plot_results));
      Emit(RenderFigure(plot_figure, table, plot_opts), plot_out);
      return kExitOk;
    }

    const ModelProfile profile = LoadProfile(g.profile);

    if (*tgen) {
      Emit(TraceToCsv(tgen_args.Generate(profile, g.seed)), tgen_out);
      return kExitOk;
    }
    if (*sim) {
      const ChannelTrace trace = sim_trace.empty() ? sim_trace_args.Generate(profile, g.seed)
                                                   : ParseTraceCsv(ReadFile(sim_trace));
      SimulateOptions o;
      if (sim_path == "both") {
        o.paths = {PathKind::kDupf, PathKind::kCupf};
      } else {
        o.paths = {ParsePathKind(sim_path)};
      }
      o.include_adaptive = !no_adaptive;
      o.weights = ObjectiveWeights::Normalized(sim_weights[0], sim_weights[1], sim_weights[2]);
      o.weights.max_delay_ms = max_delay;
      o.weights.max_leakage = max_leak;
      o.weights.max_energy_wh = max_energy;
      o.estimator_noise_pct = noise_pct;
      o.hysteresis = hysteresis;
      o.seed = g.seed;
      const auto rows = RunSimulation(profile, trace, o);
      Emit(ResultsToCsv(rows), sim_out);
      const std::string summary = SummaryToCsv(Summarize(profile, rows));
      if (sim_summary.empty()) {
        std::cerr << summary;
      } else {
        WriteFile(sim_summary, summary);
      }
      if (!sim_timeline.empty()) {
        AdaptiveOptions ao;
        ao.estimator_noise_pct = noise_pct;
        ao.path = o.paths.front();
        ao.hysteresis = hysteresis;
        ao.seed = g.seed;
        WriteFile(sim_timeline, TimelineToCsv(AdaptiveRun(profile, trace, o.weights, ao)));
      }
      return kExitOk;
    }

    const StagedBackbone model(profile.model);
    if (*serve) {
      // Block termination signals in every thread so sigwait receives them.
      sigset_t set;
      sigemptyset(&set);
      sigaddset(&set, SIGINT);
      sigaddset(&set, SIGTERM);
      pthread_sigmask(SIG_BLOCK, &set, nullptr);
      ServerConfig sc;
      sc.profile_name = profile.name;
      sc.listen = ParseEndpoint(listen);
      TailServer server(model, sc);
      server.Start();
      fmt::print("listening on {}:{}\n", sc.listen.host, server.port());
      std::fflush(stdout);
      int sig = 0;
      sigwait(&set, &sig);
      server.Stop();
      fmt::print(stderr, "stopped after {} sessions, {} error frames\n", server.sessions_served(),
                 server.errors_sent());
      return kExitOk;
    }
    if (*head) {
      HeadConfig hc;
      hc.profile_name = profile.name;
      hc.connect = ParseEndpoint(connect);
      hc.split = split;
      hc.codec.level = codec_level;
      hc.codec.quantize = !bypass;
      if (inject != "none") hc.inject_path = profile.Path(ParsePathKind(inject));
      hc.seed = g.seed;
      hc.timeout = std::chrono::milliseconds(timeout_ms);
      hc.pipeline_depth = pipeline;
      const auto frames = LoadFrames(frames_src, profile.input_height, profile.input_width, g.seed);
      const auto outcomes = RunHead(model, frames, hc);
      Emit(TimingLogToCsv(outcomes, split), head_log);
      if (!head_results.empty()) {
        std::string csv = "frame";
        const size_t dims = static_cast<size_t>(profile.model.readout_dim);
        for (size_t k = 0; k < dims; ++k) csv += fmt::format(",y{}", k);
        csv += "\n";
        for (const auto& o : outcomes) {
          csv += std::to_string(o.index);
          for (size_t k = 0; k < dims; ++k) {
            csv += o.ok ? fmt::format(",{:.9g}", o.result[k]) : std::string(",");
          }
          csv += "\n";
        }
        WriteFile(head_results, csv);
      }
      size_t failed = 0;
      for (const auto& o : outcomes) failed += o.ok ? 0 : 1;
      if (failed > 0) {
        fmt::print(stderr, "{} of {} frames failed\n", failed, outcomes.size());
        return kExitRuntime;
      }
      return kExitOk;
    }
  } catch (const Error& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return e.code() == ErrorCode::kInfeasibleFit ? kExitInfeasible : kExitRuntime;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kExitRuntime;
  }
  return kExitUsage;
}
