#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "splitinfer/profile.hpp"

namespace splitinfer {

struct CalibrationAnchor {
  std::string id;
  std::string kind;  // "delay" or "energy"
  int split = 0;
  std::optional<double> interference_db;  // delay anchors only
  double value = 0.0;
  std::string cite;
};

// Anchors plus the fixed (non-fitted) profile groups they are fitted around.
struct CalibrationTargets {
  std::string name;
  nlohmann::json base;
  std::vector<CalibrationAnchor> anchors;
};

CalibrationTargets TargetsFromJson(const nlohmann::json& j);
CalibrationTargets LoadTargets(const std::filesystem::path& path);

struct CalibrationOptions {
  double max_relative_residual = 0.05;
  double prior_weight = 1e-3;
};

// Weighted least-squares fit of per-split head compute time, the
// interference -> throughput table, per-split head energy and the radio power
// scale, minimizing relative error over all anchors. Throws kInfeasibleFit
// when the anchors are empty, under-determined, contradict the monotone
// channel model, or leave any anchor residual above the limit.
ModelProfile CalibrateProfile(const CalibrationTargets& targets,
                              const CalibrationOptions& options = {});

std::string FormatResidualReport(const ModelProfile& profile);

}  // namespace splitinfer
