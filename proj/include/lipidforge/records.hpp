#pragma once

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "lipidforge/predictors.hpp"

namespace lf {

inline constexpr const char* kEmptyState = "EMPTY";

struct VisitRecord {
  std::string state_smiles;  // canonical SMILES or EMPTY
  std::string action_smiles;
  int visit_count = 0;
  int siblings_total = 0;
};

struct PathStep {
  std::string block_id;
  std::string template_id;  // empty for the head-selection step
};

struct GenerationRecord {
  std::string product_smiles;
  std::vector<PathStep> path;
  PropertyScore score{0.0, false, 0.0};
  std::string engine;  // naive | guided | random
  int simulation_index = 0;
  int iteration = 0;
};

inline nlohmann::ordered_json to_json(const VisitRecord& r) {
  return {{"state", r.state_smiles},
          {"action", r.action_smiles},
          {"visits", r.visit_count},
          {"siblings_total", r.siblings_total}};
}

inline VisitRecord visit_record_from_json(const nlohmann::json& j) {
  VisitRecord r;
  r.state_smiles = j.at("state").get<std::string>();
  r.action_smiles = j.at("action").get<std::string>();
  r.visit_count = j.at("visits").get<int>();
  r.siblings_total = j.at("siblings_total").get<int>();
  if (r.visit_count > r.siblings_total) {
    throw std::runtime_error("visit record: visits exceed siblings_total");
  }
  return r;
}

inline nlohmann::ordered_json to_json(const GenerationRecord& r) {
  nlohmann::ordered_json path = nlohmann::ordered_json::array();
  for (const PathStep& s : r.path) {
    path.push_back({{"block", s.block_id}, {"template", s.template_id}});
  }
  return {{"product", r.product_smiles},
          {"path", path},
          {"lipid_score", r.score.lipid_score},
          {"ionizable", r.score.ionizable},
          {"total", r.score.total},
          {"engine", r.engine},
          {"simulation", r.simulation_index},
          {"iteration", r.iteration}};
}

inline GenerationRecord generation_record_from_json(const nlohmann::json& j) {
  GenerationRecord r;
  r.product_smiles = j.at("product").get<std::string>();
  for (const auto& s : j.at("path")) {
    r.path.push_back({s.at("block").get<std::string>(),
                      s.at("template").get<std::string>()});
  }
  r.score.lipid_score = j.at("lipid_score").get<double>();
  r.score.ionizable = j.at("ionizable").get<bool>();
  r.score.total = j.at("total").get<double>();
  r.engine = j.at("engine").get<std::string>();
  r.simulation_index = j.at("simulation").get<int>();
  r.iteration = j.at("iteration").get<int>();
  return r;
}

template <typename Record>
void write_jsonl(const std::vector<Record>& records, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write log file: " + path);
  for (const Record& r : records) out << to_json(r).dump() << '\n';
}

inline std::vector<VisitRecord> read_visit_records(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open visit record file: " + path);
  std::vector<VisitRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    out.push_back(visit_record_from_json(nlohmann::json::parse(line)));
  }
  return out;
}

inline std::vector<GenerationRecord> read_generation_records(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open generation log: " + path);
  std::vector<GenerationRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    out.push_back(generation_record_from_json(nlohmann::json::parse(line)));
  }
  return out;
}

}  // namespace lf
