#pragma once

#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include <json.hpp>

#include "survgen/error.hpp"
#include "survgen/hash.hpp"
#include "survgen/schema.hpp"
#include "survgen/trainer.hpp"

namespace survgen {

inline constexpr const char* kCheckpointFormat = "survgen-checkpoint";
inline constexpr int kCheckpointVersion = 1;

inline nlohmann::json schema_to_json(const FeatureSchema& s) {
  nlohmann::json cols = nlohmann::json::array();
  for (const auto& c : s.columns)
    cols.push_back({{"name", c.name},
                    {"kind", c.kind == ColumnKind::continuous ? "continuous" : "discrete"},
                    {"labels", c.labels}});
  return {{"columns", cols},
          {"time", s.time_column},
          {"event", s.event_column},
          {"delimiter", std::string(1, s.delimiter)}};
}

inline FeatureSchema schema_from_json(const nlohmann::json& j) {
  FeatureSchema s;
  for (const auto& c : j.at("columns")) {
    Column col;
    col.name = c.at("name").get<std::string>();
    col.kind = c.at("kind").get<std::string>() == "continuous" ? ColumnKind::continuous
                                                               : ColumnKind::discrete;
    col.labels = c.at("labels").get<std::vector<std::string>>();
    s.columns.push_back(std::move(col));
  }
  s.time_column = j.at("time").get<std::string>();
  s.event_column = j.at("event").get<std::string>();
  s.delimiter = j.at("delimiter").get<std::string>().at(0);
  s.validate();
  return s;
}

/// Extra provenance stored alongside the model.
struct CheckpointInfo {
  std::uint64_t seed = 0;
  std::string config_hash;
};

/// Serializes a trained model as a single-line JSON document. Doubles are
/// written in shortest round-trip form, so identical state gives identical bytes.
inline std::string checkpoint_to_string(const TrainedModel& m, const CheckpointInfo& info = {}) {
  using nlohmann::json;
  json j;
  j["format"] = kCheckpointFormat;
  j["version"] = kCheckpointVersion;
  j["schema"] = schema_to_json(m.schema);
  j["schema_hash"] = m.schema.hash();
  j["codec"] = {{"cont_mean", m.codec.cont_mean},
                {"cont_std", m.codec.cont_std},
                {"time_mean", m.codec.time_mean},
                {"time_std", m.codec.time_std},
                {"labels", m.codec.labels},
                {"t_floor", m.codec.t_floor}};
  j["schedule"] = {{"sigma_min", m.schedule.sigma_min},
                   {"sigma_max", m.schedule.sigma_max},
                   {"rho", m.schedule.rho},
                   {"eps_mask", m.schedule.eps_mask}};
  j["survival_loss"] = {{"tau", m.surv.tau}, {"alpha_decay", m.surv.alpha_decay}};
  const auto& L = m.params.layout;
  j["layout"] = {{"hidden", L.hidden}, {"surv_hidden", L.surv_hidden}, {"time_dim", L.time_dim}};
  json tensors = json::array();
  m.params.for_each_tensor([&](const std::string& name, const Matrix& t) {
    std::vector<double> data;
    data.reserve(static_cast<std::size_t>(t.size()));
    for (Eigen::Index r = 0; r < t.rows(); ++r)
      for (Eigen::Index c = 0; c < t.cols(); ++c) data.push_back(t(r, c));
    tensors.push_back({{"name", name}, {"shape", {t.rows(), t.cols()}}, {"data", data}});
  });
  j["tensors"] = tensors;
  j["provenance"] = {{"seed", info.seed}, {"config_hash", info.config_hash}};
  return j.dump() + "\n";
}

inline TrainedModel checkpoint_from_string(const std::string& text, CheckpointInfo* info = nullptr) {
  using nlohmann::json;
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw SchemaError(std::string("checkpoint is not valid JSON: ") + e.what());
  }
  try {
    if (j.at("format") != kCheckpointFormat) throw SchemaError("not a survgen checkpoint");
    if (j.at("version") != kCheckpointVersion)
      throw SchemaError("unsupported checkpoint version " + j.at("version").dump());
    TrainedModel m;
    m.schema = schema_from_json(j.at("schema"));
    if (m.schema.hash() != j.at("schema_hash").get<std::string>())
      throw SchemaError("checkpoint schema hash mismatch");
    const auto& c = j.at("codec");
    m.codec.cont_mean = c.at("cont_mean").get<std::vector<double>>();
    m.codec.cont_std = c.at("cont_std").get<std::vector<double>>();
    m.codec.time_mean = c.at("time_mean").get<double>();
    m.codec.time_std = c.at("time_std").get<double>();
    m.codec.labels = c.at("labels").get<std::vector<std::vector<std::string>>>();
    m.codec.t_floor = c.at("t_floor").get<double>();
    if (m.codec.d_cont() != m.schema.d_cont() || m.codec.d_disc() != m.schema.d_disc())
      throw SchemaError("checkpoint codec does not match its schema");
    const auto& s = j.at("schedule");
    m.schedule = {s.at("sigma_min").get<double>(), s.at("sigma_max").get<double>(),
                  s.at("rho").get<double>(), s.at("eps_mask").get<double>()};
    m.schedule.validate();
    m.surv = {j.at("survival_loss").at("tau").get<double>(),
              j.at("survival_loss").at("alpha_decay").get<double>()};
    const auto& l = j.at("layout");
    m.params = DenoiserParams(DenoiserLayout::for_codec(
        m.codec, l.at("hidden").get<std::vector<std::size_t>>(), l.at("surv_hidden").get<std::size_t>(),
        l.at("time_dim").get<std::size_t>()));
    std::map<std::string, const json*> by_name;
    for (const auto& t : j.at("tensors")) by_name[t.at("name").get<std::string>()] = &t;
    m.params.for_each_tensor([&](const std::string& name, Matrix& t) {
      auto it = by_name.find(name);
      if (it == by_name.end()) throw SchemaError("checkpoint is missing tensor '" + name + "'");
      const auto& tj = *it->second;
      const auto shape = tj.at("shape").get<std::vector<Eigen::Index>>();
      if (shape.size() != 2 || shape[0] != t.rows() || shape[1] != t.cols())
        throw SchemaError("tensor '" + name + "' has the wrong shape");
      const auto data = tj.at("data").get<std::vector<double>>();
      if (static_cast<Eigen::Index>(data.size()) != t.size())
        throw SchemaError("tensor '" + name + "' has the wrong size");
      std::size_t k = 0;
      for (Eigen::Index r = 0; r < t.rows(); ++r)
        for (Eigen::Index cc = 0; cc < t.cols(); ++cc) t(r, cc) = data[k++];
    });
    if (!m.params.all_finite()) throw SchemaError("checkpoint contains non-finite weights");
    if (info) {
      info->seed = j.at("provenance").at("seed").get<std::uint64_t>();
      info->config_hash = j.at("provenance").at("config_hash").get<std::string>();
    }
    return m;
  } catch (const json::exception& e) {
    throw SchemaError(std::string("malformed checkpoint: ") + e.what());
  }
}

inline void save_checkpoint(const std::string& path, const TrainedModel& m,
                            const CheckpointInfo& info = {}) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write checkpoint '" + path + "'");
  out << checkpoint_to_string(m, info);
  if (!out) throw Error("failed writing checkpoint '" + path + "'");
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SchemaError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline TrainedModel load_checkpoint(const std::string& path, CheckpointInfo* info = nullptr) {
  return checkpoint_from_string(read_file(path), info);
}

/// Content hash of a checkpoint file.
inline std::string file_hash(const std::string& path) { return hex64(fnv1a64(read_file(path))); }

}  // namespace survgen
