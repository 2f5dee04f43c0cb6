#include "splitinfer/profile.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "splitinfer/error.hpp"

namespace splitinfer {

using nlohmann::json;

bool ModelProfile::IsCandidate(int l) const {
  return std::find(candidates.begin(), candidates.end(), l) != candidates.end();
}

std::string ModelProfile::ProvenanceOf(const std::string& group, size_t index) const {
  const auto it = provenance.find(group);
  if (it == provenance.end() || it->second.empty()) return "unknown";
  return it->second.size() == 1 ? it->second.front()
                                 : it->second.at(std::min(index, it->second.size() - 1));
}

int64_t ModelProfile::PayloadBytes(int l) const {
  if (l == SplitPoint::kLocal) return 0;
  if (l == SplitPoint::kServer) return input_bytes;
  return compressed_activation_bytes.at(static_cast<size_t>(l));
}

void ModelProfile::Validate() const {
  auto fail = [](const std::string& what) {
    throw Error(ErrorCode::kParse, "profile: " + what);
  };
  if (candidates.empty()) fail("no candidate splits");
  for (size_t i = 0; i < candidates.size(); ++i) {
    if (candidates[i] != static_cast<int>(i)) fail("candidates must be 0..N-1");
  }
  const size_t n = candidates.size();
  if (n != static_cast<size_t>(model.num_stages) + 2) {
    fail("candidate count must be num_stages + 2");
  }
  auto check_len = [&](const auto& v, const char* name) {
    if (v.size() != n) fail(fmt::format("{} has {} entries, expected {}", name, v.size(), n));
    for (auto x : v) {
      if (!(x >= 0) || !std::isfinite(static_cast<double>(x))) {
        fail(fmt::format("{} must be finite and non-negative", name));
      }
    }
  };
  check_len(raw_activation_bytes, "raw_activation_bytes");
  check_len(compressed_activation_bytes, "compressed_activation_bytes");
  check_len(head_compute_ms, "head_compute_ms");
  check_len(tail_compute_ms, "tail_compute_ms");
  check_len(codec_ms, "codec_ms");
  check_len(head_energy_wh, "head_energy_wh");
  check_len(leakage, "leakage");
  if (input_bytes <= 0) fail("input_bytes must be positive");
  if (leakage.front() != 0.0 || leakage.back() != 1.0) {
    fail("leakage must be 0 for local and 1 for server-only");
  }
  for (double p : leakage) {
    if (p > 1.0) fail("leakage must lie in [0, 1]");
  }
  if (tx_energy_wh.size() != n) fail("tx_energy_wh needs one row per split");
  for (const auto& row : tx_energy_wh) {
    if (row.size() != throughput.levels_db().size()) {
      fail("tx_energy_wh rows must match throughput levels");
    }
  }
  if (radio_power_w.size() != throughput.levels_db().size()) {
    fail("radio_power_w must match throughput levels");
  }
}

namespace {

json Group(const json& values, const ProvenanceLabels& labels) {
  json g;
  g["values"] = values;
  if (labels.size() == 1) {
    g["provenance"] = labels.front();
  } else {
    g["provenance"] = labels;
  }
  return g;
}

ProvenanceLabels LabelsOf(const json& g) {
  if (!g.contains("provenance")) return {"unknown"};
  const json& p = g.at("provenance");
  if (p.is_string()) return {p.get<std::string>()};
  return p.get<ProvenanceLabels>();
}

json PathToJson(const PathConfig& p) {
  return {{"extra_oneway_ms", p.extra_oneway_ms},
          {"jitter_ms", p.jitter_ms},
          {"overhead_ms", p.overhead_ms}};
}

PathConfig PathFromJson(const json& j, PathKind kind) {
  PathConfig p;
  p.kind = kind;
  p.extra_oneway_ms = j.at("extra_oneway_ms").get<double>();
  p.jitter_ms = j.at("jitter_ms").get<double>();
  p.overhead_ms = j.at("overhead_ms").get<double>();
  return p;
}

}  // namespace

json ProfileToJson(const ModelProfile& p) {
  auto labels = [&](const std::string& g) {
    auto it = p.provenance.find(g);
    return it == p.provenance.end() ? ProvenanceLabels{"unknown"} : it->second;
  };
  json j;
  j["name"] = p.name;
  j["format_version"] = 1;
  j["model"] = {{"num_stages", p.model.num_stages},
                {"patch_size", p.model.patch_size},
                {"embed_channels", p.model.embed_channels},
                {"input_channels", p.model.input_channels},
                {"readout_dim", p.model.readout_dim},
                {"seed", p.model.seed},
                {"input_height", p.input_height},
                {"input_width", p.input_width}};
  j["frame_rate_fps"] = p.frame_rate_fps;
  j["candidates"] = p.candidates;
  j["input_bytes"] = {{"value", p.input_bytes}, {"provenance", labels("input_bytes").front()}};
  j["raw_activation_bytes"] = Group(p.raw_activation_bytes, labels("raw_activation_bytes"));
  j["compressed_activation_bytes"] =
      Group(p.compressed_activation_bytes, labels("compressed_activation_bytes"));
  j["head_compute_ms"] = Group(p.head_compute_ms, labels("head_compute_ms"));
  j["tail_compute_ms"] = Group(p.tail_compute_ms, labels("tail_compute_ms"));
  j["codec_ms"] = Group(p.codec_ms, labels("codec_ms"));
  j["head_energy_wh"] = Group(p.head_energy_wh, labels("head_energy_wh"));
  j["leakage"] = Group(p.leakage, labels("leakage"));
  j["throughput"] = {{"interference_db", p.throughput.levels_db()},
                     {"uplink_mbps", p.throughput.mbps()},
                     {"provenance", labels("throughput").front()}};
  j["radio_power_w"] = {{"interference_db", p.throughput.levels_db()},
                        {"values", p.radio_power_w},
                        {"provenance", labels("radio_power_w").front()}};
  j["tx_energy_wh"] = {{"interference_db", p.throughput.levels_db()},
                       {"values", p.tx_energy_wh},
                       {"provenance", labels("tx_energy_wh").front()}};
  j["paths"] = {{"dupf", PathToJson(p.dupf)}, {"cupf", PathToJson(p.cupf)},
                {"provenance", labels("paths").front()}};
  json cal = json::array();
  for (const auto& a : p.calibration) {
    cal.push_back({{"id", a.id},
                   {"kind", a.kind},
                   {"split", a.split},
                   {"interference_db", a.interference_db},
                   {"target", a.target},
                   {"fitted", a.fitted},
                   {"relative_residual", a.relative_residual}});
  }
  j["calibration"] = cal;
  return j;
}

ModelProfile ProfileFromJson(const json& j) {
  try {
    ModelProfile p;
    p.name = j.at("name").get<std::string>();
    const json& m = j.at("model");
    p.model.num_stages = m.at("num_stages").get<int>();
    p.model.patch_size = m.at("patch_size").get<int>();
    p.model.embed_channels = m.at("embed_channels").get<int>();
    p.model.input_channels = m.value("input_channels", 3);
    p.model.readout_dim = m.value("readout_dim", 16);
    p.model.seed = m.at("seed").get<uint64_t>();
    p.input_height = m.value("input_height", size_t{224});
    p.input_width = m.value("input_width", size_t{224});
    p.frame_rate_fps = j.value("frame_rate_fps", 10.0);
    p.candidates = j.at("candidates").get<std::vector<int>>();

    p.input_bytes = j.at("input_bytes").at("value").get<int64_t>();
    p.provenance["input_bytes"] = LabelsOf(j.at("input_bytes"));
    auto group = [&](const char* name, auto& out) {
      const json& g = j.at(name);
      out = g.at("values").get<std::decay_t<decltype(out)>>();
      p.provenance[name] = LabelsOf(g);
    };
    group("raw_activation_bytes", p.raw_activation_bytes);
    group("compressed_activation_bytes", p.compressed_activation_bytes);
    group("head_compute_ms", p.head_compute_ms);
    group("tail_compute_ms", p.tail_compute_ms);
    group("codec_ms", p.codec_ms);
    group("head_energy_wh", p.head_energy_wh);
    group("leakage", p.leakage);

    const json& t = j.at("throughput");
    p.throughput = ThroughputTable(t.at("interference_db").get<std::vector<double>>(),
                                   t.at("uplink_mbps").get<std::vector<double>>());
    p.provenance["throughput"] = LabelsOf(t);
    group("radio_power_w", p.radio_power_w);
    group("tx_energy_wh", p.tx_energy_wh);

    const json& paths = j.at("paths");
    p.dupf = PathFromJson(paths.at("dupf"), PathKind::kDupf);
    p.cupf = PathFromJson(paths.at("cupf"), PathKind::kCupf);
    p.provenance["paths"] = LabelsOf(paths);

    if (j.contains("calibration")) {
      for (const json& a : j.at("calibration")) {
        p.calibration.push_back({a.at("id").get<std::string>(),
                                 a.at("kind").get<std::string>(), a.at("split").get<int>(),
                                 a.at("interference_db").get<double>(),
                                 a.at("target").get<double>(), a.at("fitted").get<double>(),
                                 a.at("relative_residual").get<double>()});
      }
    }
    p.Validate();
    return p;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("profile: ") + e.what());
  }
}

std::string ReadFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void WriteFile(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out << content;
  if (!out) throw Error(ErrorCode::kIo, "write failed for " + path.string());
}

ModelProfile LoadProfile(const std::filesystem::path& path) {
  const std::string text = ReadFile(path);
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kParse, path.string() + ": " + e.what());
  }
  return ProfileFromJson(j);
}

void SaveProfile(const ModelProfile& p, const std::filesystem::path& path) {
  WriteFile(path, ProfileToJson(p).dump(2) + "\n");
}

}  // namespace splitinfer
