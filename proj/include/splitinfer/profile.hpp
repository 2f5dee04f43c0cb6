#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "splitinfer/backbone.hpp"
#include "splitinfer/channel.hpp"

namespace splitinfer {

// Where a number came from: "paper" (published measurement), "calibrated"
// (fitted to published anchors) or "placeholder" (assumed).
using ProvenanceLabels = std::vector<std::string>;

struct AnchorFit {
  std::string id;
  std::string kind;
  int split = 0;
  double interference_db = 0.0;
  double target = 0.0;
  double fitted = 0.0;
  double relative_residual = 0.0;
};

// Per-split calibration record. Per-split vectors are indexed by split index
// 0..5; tx_energy_wh is indexed [split][interference level].
struct ModelProfile {
  std::string name;
  BackboneConfig model;
  size_t input_height = 224;
  size_t input_width = 224;
  double frame_rate_fps = 10.0;
  std::vector<int> candidates;

  int64_t input_bytes = 0;
  std::vector<int64_t> raw_activation_bytes;
  std::vector<int64_t> compressed_activation_bytes;
  std::vector<double> head_compute_ms;
  std::vector<double> tail_compute_ms;
  std::vector<double> codec_ms;
  std::vector<double> head_energy_wh;
  std::vector<double> leakage;

  ThroughputTable throughput;
  std::vector<double> radio_power_w;                  // per throughput level
  std::vector<std::vector<double>> tx_energy_wh;      // [split][level]

  PathConfig dupf = PathConfig::Dupf();
  PathConfig cupf = PathConfig::Cupf();

  std::map<std::string, ProvenanceLabels> provenance;
  std::vector<AnchorFit> calibration;

  int num_splits() const { return static_cast<int>(candidates.size()); }
  bool IsCandidate(int l) const;
  // Provenance of one value within a numeric group.
  std::string ProvenanceOf(const std::string& group, size_t index = 0) const;
  const PathConfig& Path(PathKind kind) const {
    return kind == PathKind::kDupf ? dupf : cupf;
  }
  int64_t PayloadBytes(int l) const;

  void Validate() const;
};

nlohmann::json ProfileToJson(const ModelProfile& p);
ModelProfile ProfileFromJson(const nlohmann::json& j);

ModelProfile LoadProfile(const std::filesystem::path& path);
void SaveProfile(const ModelProfile& p, const std::filesystem::path& path);

std::string ReadFile(const std::filesystem::path& path);
void WriteFile(const std::filesystem::path& path, const std::string& content);

}  // namespace splitinfer
