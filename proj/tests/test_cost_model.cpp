#include <doctest.h>

#include <cmath>

#include "splitinfer/calibration.hpp"
#include "splitinfer/cost_model.hpp"
#include "support.hpp"

using namespace splitinfer;
using splitinfer::testing::CodeOf;
using splitinfer::testing::DataPath;
using splitinfer::testing::ShippedProfile;

namespace {

ChannelState At(double db) {
  return {0.0, db, ShippedProfile().throughput.Lookup(db)};
}

double DupfDelay(int l, double db) {
  return E2eDelay(ShippedProfile(), l, At(db), PathConfig::Dupf()).total_ms;
}

bool Within(double got, double want, double rel) {
  return std::abs(got - want) <= rel * std::abs(want);
}

}  // namespace

TEST_CASE("delay anchors within 2%") {
  CHECK(Within(DupfDelay(0, -30), 3842.7, 0.02));
  CHECK(Within(DupfDelay(1, -30), 1262.9, 0.02));
  CHECK(Within(DupfDelay(1, -10), 1586.1, 0.02));
  CHECK(Within(DupfDelay(1, -5), 2652.8, 0.02));
  CHECK(Within(DupfDelay(3, -5), 4114.6, 0.02));
  CHECK(Within(DupfDelay(4, -5), 4710.0, 0.02));
  CHECK(Within(DupfDelay(5, -40), 327.6, 0.02));
  CHECK(Within(DupfDelay(5, -5), 691.1, 0.02));
  // Local-only and server-only baselines: 3842.7 / 327.6.
  CHECK(Within(DupfDelay(0, -40) / DupfDelay(5, -40), 11.73, 0.05));
}

TEST_CASE("energy anchors within 2%") {
  const auto& p = ShippedProfile();
  CHECK(Within(UeEnergyAveraged(p, 0).total_wh, 0.0213, 0.02));
  CHECK(Within(UeEnergyAveraged(p, 1).total_wh, 0.0051, 0.02));
  CHECK(Within(UeEnergyAveraged(p, 5).total_wh, 0.0001, 0.02));
  CHECK(UeEnergy(p, 0, At(-5)).tx_wh == 0.0);
}

TEST_CASE("delay matches the hand-computed decomposition") {
  const auto& p = ShippedProfile();
  const PathConfig cupf = PathConfig::Cupf();
  for (int l = 0; l <= 5; ++l) {
    for (double db : kSweepLevelsDb) {
      const double mbps = p.throughput.Lookup(db);
      double bytes = 0.0, want = p.head_compute_ms[l];
      if (l > 0) {
        bytes = l == 5 ? 1312000.0 : static_cast<double>(p.compressed_activation_bytes[l]);
        want += p.codec_ms[l] + bytes * 8.0 / (mbps * 1000.0) + 255.6 + p.tail_compute_ms[l];
      }
      const DelayReport r = E2eDelay(p, l, {0.0, db, mbps}, cupf);
      CHECK(r.total_ms == doctest::Approx(want).epsilon(1e-12));
      CHECK(r.total_ms == r.head_ms + r.codec_ms + r.tx_ms + r.path_ms + r.tail_ms);
      for (double c : {r.head_ms, r.codec_ms, r.tx_ms, r.path_ms, r.tail_ms}) CHECK(c >= 0.0);
      const EnergyReport e = UeEnergy(p, l, {0.0, db, mbps});
      CHECK(e.total_wh == e.compute_wh + e.tx_wh);
      CHECK(e.compute_wh >= 0.0);
      CHECK(e.tx_wh >= 0.0);
    }
  }
}

TEST_CASE("unknown splits are rejected") {
  const auto& p = ShippedProfile();
  CHECK(CodeOf([&] { E2eDelay(p, 6, At(-40), PathConfig::Dupf()); }) == ErrorCode::kUnknownSplit);
  CHECK(CodeOf([&] { E2eDelay(p, -1, At(-40), PathConfig::Dupf()); }) == ErrorCode::kUnknownSplit);
  CHECK(CodeOf([&] { UeEnergy(p, 7, At(-40)); }) == ErrorCode::kUnknownSplit);
}

TEST_CASE("property: delay non-increasing in throughput, UE-only channel-free") {
  const auto& p = ShippedProfile();
  SplitMix64 rng(8);
  const DelayReport local = E2eDelay(p, 0, At(-40), PathConfig::Dupf());
  const EnergyReport local_e = UeEnergy(p, 0, At(-40));
  for (int trial = 0; trial < 500; ++trial) {
    const double db = rng.Uniform(-40.0, -5.0);
    const double m1 = rng.Uniform(0.5, 200.0), m2 = rng.Uniform(0.5, 200.0);
    const int l = 1 + static_cast<int>(rng.Next() % 5);
    const PathConfig path = trial % 2 ? PathConfig::Cupf() : PathConfig::Dupf();
    const double d1 = E2eDelay(p, l, {0, db, m1}, path).total_ms;
    const double d2 = E2eDelay(p, l, {0, db, m2}, path).total_ms;
    if (m1 <= m2) CHECK(d1 >= d2);
    else CHECK(d1 <= d2);
    CHECK(E2eDelay(p, 0, {0, db, m1}, path).total_ms == local.total_ms);
    CHECK(UeEnergy(p, 0, {0, db, m1}).total_wh == local_e.total_wh);
  }
}

TEST_CASE("compute dominates transmission energy by 25x to 50x") {
  const auto& p = ShippedProfile();
  for (int l = 1; l <= 4; ++l) {
    const EnergyReport e = UeEnergyAveraged(p, l);
    const double ratio = e.compute_wh / e.tx_wh;
    INFO("split " << l << " ratio " << ratio);
    CHECK(ratio >= 25.0);
    CHECK(ratio <= 50.0);
  }
}

TEST_CASE("transmission energy rises with interference") {
  const auto& p = ShippedProfile();
  for (int l = 1; l <= 5; ++l) {
    for (size_t k = 1; k < p.tx_energy_wh[l].size(); ++k) {
      CHECK(p.tx_energy_wh[l][k] > p.tx_energy_wh[l][k - 1]);
    }
  }
}

TEST_CASE("shipped profile invariants") {
  const auto& p = ShippedProfile();
  CHECK(p.input_bytes == 1312000);
  CHECK(p.raw_activation_bytes[5] == p.input_bytes);
  CHECK(p.leakage.front() == 0.0);
  CHECK(p.leakage.back() == 1.0);
  for (int l = 2; l <= 4; ++l) CHECK(p.head_energy_wh[l] >= p.head_energy_wh[l - 1]);
  for (int l = 0; l < 5; ++l) CHECK(p.head_energy_wh[5] < p.head_energy_wh[l]);
  for (int l = 1; l <= 4; ++l) {
    CHECK(p.raw_activation_bytes[l] >= 34000000);
    CHECK(p.raw_activation_bytes[l] <= 45000000);
    const double reduction =
        1.0 - static_cast<double>(p.compressed_activation_bytes[l]) / p.raw_activation_bytes[l];
    CHECK(reduction >= 0.85);
    CHECK(reduction <= 0.87);
  }
  CHECK_NOTHROW(p.Validate());
}

TEST_CASE("provenance labels") {
  const auto& p = ShippedProfile();
  CHECK(p.ProvenanceOf("input_bytes") == "paper");
  CHECK(p.ProvenanceOf("throughput", 2) == "calibrated");
  CHECK(p.ProvenanceOf("leakage", 1) == "paper");
  CHECK(p.ProvenanceOf("leakage", 2) == "placeholder");
  CHECK(p.ProvenanceOf("no_such_group") == "unknown");
  for (const auto& [group, labels] : p.provenance) {
    for (const auto& label : labels) {
      INFO(group);
      CHECK((label == "paper" || label == "calibrated" || label == "placeholder"));
    }
  }
}

TEST_CASE("profile JSON round trip") {
  const auto& p = ShippedProfile();
  const nlohmann::json j = ProfileToJson(p);
  CHECK(ProfileToJson(ProfileFromJson(j)) == j);
  nlohmann::json broken = j;
  broken.erase("head_compute_ms");
  CHECK_THROWS_AS(ProfileFromJson(broken), Error);
}

TEST_CASE("calibration reproduces the shipped profile") {
  const ModelProfile fit = CalibrateProfile(LoadTargets(DataPath("calibration_targets.json")));
  CHECK(ProfileToJson(fit) == ProfileToJson(ShippedProfile()));
  for (const auto& a : fit.calibration) {
    INFO(a.id);
    CHECK(std::abs(a.relative_residual) <= 0.02);
  }
  const std::string report = FormatResidualReport(fit);
  CHECK(report.find("split1-30") != std::string::npos);
}

TEST_CASE("calibration without the -5 dB anchors still fits") {
  nlohmann::json j = nlohmann::json::parse(ReadFile(DataPath("calibration_targets.json")));
  auto& anchors = j["anchors"];
  for (auto it = anchors.begin(); it != anchors.end();) {
    if (it->contains("interference_db") && (*it)["interference_db"] == -5) it = anchors.erase(it);
    else ++it;
  }
  const ModelProfile fit = CalibrateProfile(TargetsFromJson(j));
  for (const auto& a : fit.calibration) CHECK(std::abs(a.relative_residual) <= 0.02);
  const auto& mbps = fit.throughput.mbps();
  for (size_t k = 1; k < mbps.size(); ++k) CHECK(mbps[k] <= mbps[k - 1]);
}

TEST_CASE("calibration failures are infeasible-fit") {
  nlohmann::json j = nlohmann::json::parse(ReadFile(DataPath("calibration_targets.json")));
  nlohmann::json empty = j;
  empty["anchors"] = nlohmann::json::array();
  CHECK(CodeOf([&] { CalibrateProfile(TargetsFromJson(empty)); }) == ErrorCode::kInfeasibleFit);

  // Split-1 faster under heavier interference: needs throughput to rise.
  nlohmann::json rising = j;
  for (auto& a : rising["anchors"]) {
    if (a["id"] == "split1-5") a["value"] = 1300.0;
  }
  CHECK(CodeOf([&] { CalibrateProfile(TargetsFromJson(rising)); }) == ErrorCode::kInfeasibleFit);

  // UE-only is channel independent, so 3842.7 and 6000 cannot both fit.
  nlohmann::json spread = j;
  for (auto& a : spread["anchors"]) {
    if (a["id"] == "ue-5") a["value"] = 6000.0;
  }
  CHECK(CodeOf([&] { CalibrateProfile(TargetsFromJson(spread)); }) == ErrorCode::kInfeasibleFit);
}
