#include <doctest.h>

#include <cmath>
#include <limits>

#include "splitinfer/cost_model.hpp"
#include "splitinfer/selector.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace splitinfer;
using splitinfer::testing::CodeOf;
using splitinfer::testing::EnumerateArgmin;
using splitinfer::testing::ShippedProfile;

namespace {

ChannelState At(double db) {
  return {0.0, db, ShippedProfile().throughput.Lookup(db)};
}

ObjectiveWeights W(double d, double p, double e) { return ObjectiveWeights::Normalized(d, p, e); }

ObjectiveWeights RandomWeights(SplitMix64& rng) {
  ObjectiveWeights w = W(rng.Uniform(), rng.Uniform(), rng.Uniform());
  if (rng.Next() % 3 == 0) w.max_delay_ms = rng.Uniform(200.0, 5000.0);
  if (rng.Next() % 3 == 0) w.max_leakage = rng.Uniform(0.0, 1.0);
  if (rng.Next() % 3 == 0) w.max_energy_wh = rng.Uniform(0.0, 0.025);
  return w;
}

}  // namespace

TEST_CASE("delay-only weights choose server-only at every sweep level") {
  for (double db : kSweepLevelsDb) {
    CHECK(SelectSplit(ShippedProfile(), At(db), PathConfig::Dupf(), W(1, 0, 0)).chosen_l == 5);
  }
}

TEST_CASE("privacy-only weights choose local") {
  const SplitDecision d = SelectSplit(ShippedProfile(), At(-20), PathConfig::Dupf(), W(0, 1, 0));
  CHECK(d.chosen_l == 0);
  CHECK(d.objective_value == 0.0);
  CHECK_FALSE(d.degraded);
}

TEST_CASE("leakage cap 0.6 at -30 dB picks the delay argmin below the cap") {
  ObjectiveWeights w = W(1, 0, 0);
  w.max_leakage = 0.6;
  const auto& p = ShippedProfile();
  const SplitDecision d = SelectSplit(p, At(-30), PathConfig::Dupf(), w);
  int want = -1;
  double best = std::numeric_limits<double>::infinity();
  for (int l = 0; l <= 5; ++l) {
    if (p.leakage[l] > 0.6) continue;
    const double t = E2eDelay(p, l, At(-30), PathConfig::Dupf()).total_ms;
    if (t < best) best = t, want = l;
  }
  CHECK(d.chosen_l == want);
  CHECK(d.chosen_l == 1);
  CHECK(d.breakdown.size() == 6);
  CHECK_FALSE(d.breakdown[5].feasible);
  CHECK(d.estimator_mbps_used == At(-30).uplink_mbps);
}

TEST_CASE("property: selector equals exhaustive enumeration") {
  const auto& p = ShippedProfile();
  SplitMix64 rng(2024);
  int feasible_cases = 0;
  for (int i = 0; i < 1000; ++i) {
    const ObjectiveWeights w = RandomWeights(rng);
    const double db = rng.Uniform(-40.0, -5.0);
    const ChannelState ch{0.0, db, p.throughput.Lookup(db) * rng.Uniform(0.8, 1.2)};
    const PathConfig path = rng.Next() % 2 ? PathConfig::Cupf() : PathConfig::Dupf();
    const SplitDecision d = SelectSplit(p, ch, path, w);
    bool any = false;
    const int want = EnumerateArgmin(p, ch, path, w, &any);
    CHECK(d.degraded == !any);
    REQUIRE(d.breakdown.size() == 6);
    for (int l = 0; l <= 5; ++l) CHECK(d.breakdown[l].split == l);
    if (any) {
      ++feasible_cases;
      CHECK(d.chosen_l == want);
      // Constraint soundness.
      const CandidateEval& c = d.chosen();
      if (w.max_delay_ms) CHECK(c.delay_ms <= *w.max_delay_ms);
      if (w.max_leakage) CHECK(c.leakage <= *w.max_leakage);
      if (w.max_energy_wh) CHECK(c.energy_wh <= *w.max_energy_wh);
    } else {
      double min_violation = std::numeric_limits<double>::infinity();
      for (const auto& c : d.breakdown) min_violation = std::min(min_violation, c.violation);
      CHECK(d.chosen().violation == doctest::Approx(min_violation));
    }
  }
  CHECK(feasible_cases > 500);
}

TEST_CASE("property: scaling raw weights leaves the choice unchanged") {
  const auto& p = ShippedProfile();
  SplitMix64 rng(5);
  for (int i = 0; i < 300; ++i) {
    const double a = rng.Uniform(), b = rng.Uniform(), c = rng.Uniform();
    const double k = std::exp(rng.Uniform(-5.0, 5.0));
    const ChannelState ch = At(rng.Uniform(-40.0, -5.0));
    CHECK(SelectSplit(p, ch, PathConfig::Dupf(), W(a, b, c)).chosen_l ==
          SelectSplit(p, ch, PathConfig::Dupf(), W(k * a, k * b, k * c)).chosen_l);
  }
}

TEST_CASE("property: more privacy weight never raises leakage") {
  const auto& p = ShippedProfile();
  SplitMix64 rng(6);
  for (int i = 0; i < 200; ++i) {
    const double d = rng.Uniform(), e = rng.Uniform();
    const ChannelState ch = At(rng.Uniform(-40.0, -5.0));
    const PathConfig path = i % 2 ? PathConfig::Cupf() : PathConfig::Dupf();
    double prev = 2.0;
    for (int step = 0; step <= 50; ++step) {
      const double t = step / 50.0;
      const ObjectiveWeights w = W((1 - t) * d + 1e-9, t, (1 - t) * e);
      const double leak = p.leakage[SelectSplit(p, ch, path, w).chosen_l];
      CHECK(leak <= prev);
      prev = leak;
    }
  }
}

TEST_CASE("ties go to lower leakage, then lower split") {
  ModelProfile p = ShippedProfile();
  p.leakage = {0.0, 0.5, 0.5, 0.5, 0.5, 1.0};
  // Privacy-only with a cap that excludes local: splits 1..4 tie on J.
  ObjectiveWeights w = W(0, 1, 0);
  w.max_delay_ms = 3000.0;
  p.head_compute_ms[0] = 10000.0;
  CHECK(SelectSplit(p, At(-40), PathConfig::Dupf(), w).chosen_l == 1);
  p.leakage = {0.0, 0.5, 0.4, 0.4, 0.5, 1.0};
  // J = leakage here, so 2 and 3 tie on J and on leakage.
  CHECK(SelectSplit(p, At(-40), PathConfig::Dupf(), w).chosen_l == 2);
}

TEST_CASE("infeasible constraints degrade instead of failing") {
  ObjectiveWeights w = W(1, 0, 0);
  w.max_delay_ms = 1.0;
  const SplitDecision d = SelectSplit(ShippedProfile(), At(-20), PathConfig::Dupf(), w);
  CHECK(d.degraded);
  CHECK(d.chosen_l == 5);
  for (const auto& c : d.breakdown) CHECK_FALSE(c.feasible);
}

TEST_CASE("weights validation") {
  CHECK(CodeOf([] { W(-1, 1, 1); }) == ErrorCode::kInvalidParameter);
  CHECK(CodeOf([] { W(0, 0, 0); }) == ErrorCode::kInvalidParameter);
  ObjectiveWeights w;
  w.w_delay = 0.7;
  w.w_privacy = 0.7;
  CHECK(CodeOf([&] { SelectSplit(ShippedProfile(), At(-20), PathConfig::Dupf(), w); }) ==
        ErrorCode::kInvalidParameter);
}

TEST_CASE("adaptive run: constant trace gives identical decisions") {
  const auto& p = ShippedProfile();
  TraceOptions o;
  o.scenario = Scenario::kConstant;
  o.constant_db = -20;
  const auto rows = AdaptiveRun(p, GenerateTrace(p.throughput, o), W(0.5, 0.3, 0.2), {});
  REQUIRE(!rows.empty());
  for (const auto& r : rows) {
    CHECK(r.chosen_l == rows.front().chosen_l);
    CHECK(r.predicted_ms == r.realized_ms);
  }
}

TEST_CASE("adaptive run: sweep under delay-only weights stays at server-only") {
  const auto& p = ShippedProfile();
  const auto rows = AdaptiveRun(p, GenerateTrace(p.throughput, {}), W(1, 0, 0), {});
  CHECK(rows.size() == 200);
  for (const auto& r : rows) CHECK(r.chosen_l == 5);
}

TEST_CASE("adaptive run: leakage cap 0.9 moves shallower as interference rises") {
  const auto& p = ShippedProfile();
  ObjectiveWeights w = W(1, 0, 0);
  w.max_leakage = 0.9;
  const auto rows = AdaptiveRun(p, GenerateTrace(p.throughput, {}), w, {});
  for (size_t i = 1; i < rows.size(); ++i) {
    CHECK(rows[i].chosen_l <= rows[i - 1].chosen_l);
    CHECK(rows[i].chosen_l != 5);
  }
}

TEST_CASE("adaptive run: estimator noise shows as prediction error") {
  const auto& p = ShippedProfile();
  AdaptiveOptions opts;
  opts.estimator_noise_pct = 0.2;
  ObjectiveWeights w = W(1, 0, 0);
  w.max_leakage = 0.9;
  const auto rows = AdaptiveRun(p, GenerateTrace(p.throughput, {}), w, opts);
  int gaps = 0;
  for (const auto& r : rows) gaps += r.predicted_ms != r.realized_ms;
  CHECK(gaps > 100);
  CHECK(TimelineToCsv(rows) == TimelineToCsv(AdaptiveRun(p, GenerateTrace(p.throughput, {}), w, opts)));
}

TEST_CASE("adaptive run: hysteresis suppresses marginal switches") {
  const auto& p = ShippedProfile();
  AdaptiveOptions opts;
  opts.estimator_noise_pct = 0.3;
  const ObjectiveWeights w = W(0.5, 0.4, 0.1);
  TraceOptions t;
  t.scenario = Scenario::kRandomWalk;
  const ChannelTrace trace = GenerateTrace(p.throughput, t);
  auto switches = [&](double h) {
    opts.hysteresis = h;
    const auto rows = AdaptiveRun(p, trace, w, opts);
    int n = 0;
    for (size_t i = 1; i < rows.size(); ++i) n += rows[i].chosen_l != rows[i - 1].chosen_l;
    return n;
  };
  const int free_switches = switches(0.0);
  MESSAGE("switches without hysteresis " << free_switches << ", with 5% " << switches(0.05));
  CHECK(switches(0.05) <= free_switches);
  CHECK(switches(0.9) <= switches(0.05));
  opts.hysteresis = 1.0;
  CHECK(CodeOf([&] { AdaptiveRun(p, trace, w, opts); }) == ErrorCode::kInvalidParameter);
}

TEST_CASE("adaptive run errors and CSV header") {
  const auto& p = ShippedProfile();
  CHECK(CodeOf([&] { AdaptiveRun(p, ChannelTrace{}, W(1, 0, 0), {}); }) == ErrorCode::kEmptyTrace);
  const std::string csv = TimelineToCsv({});
  CHECK(csv ==
        "timestamp_ms,interference_db,estimated_mbps,chosen_l,predicted_ms,realized_ms,"
        "leakage,energy_wh,degraded\n");
}
