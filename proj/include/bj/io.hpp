#pragma once
// Instance JSON files and CSV number formatting.

#include <charconv>
#include <fstream>
#include <string>
#include <system_error>
#include <vector>

#include "json.hpp"

#include "bj/core.hpp"

namespace bj {

/// Shortest decimal that round-trips to the same double.
inline std::string format_real(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  if (res.ec != std::errc{}) throw std::runtime_error("format_real: to_chars failed");
  return std::string(buf, res.ptr);
}

inline nlohmann::json instance_to_json(const ProblemInstance& inst) {
  nlohmann::json j;
  j["scores"] = inst.scores;
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t k = 0; k < inst.variances.rows(); ++k) {
    const auto r = inst.variances.row(k);
    rows.push_back(std::vector<double>(r.begin(), r.end()));
  }
  j["variances"] = rows;
  j["costs"] = inst.costs;
  j["score_range"] = inst.score_range;
  j["metadata"] = inst.metadata;
  return j;
}

/// Accepts `variances` as K rows of J entries or as one flat row-major list.
inline ProblemInstance instance_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ValidationError("instance JSON must be an object");
  for (const char* key : {"scores", "variances", "costs"}) {
    if (!j.contains(key)) throw ValidationError(std::string("instance JSON lacks '") + key + "'");
  }
  ProblemInstance inst;
  try {
    inst.scores = j.at("scores").get<std::vector<double>>();
    inst.costs = j.at("costs").get<std::vector<double>>();
    inst.score_range = j.value("score_range", 1.0);
    const auto& v = j.at("variances");
    const std::size_t k_count = inst.scores.size();
    const std::size_t j_count = inst.costs.size();
    std::vector<double> flat;
    if (!v.is_array()) throw ValidationError("instance JSON: 'variances' must be an array");
    if (!v.empty() && v.front().is_array()) {
      if (v.size() != k_count) {
        throw ValidationError(detail::concat("dimension mismatch: ", v.size(),
                                             " variance rows for K = ", k_count));
      }
      for (const auto& row : v) {
        const auto r = row.get<std::vector<double>>();
        if (r.size() != j_count) {
          throw ValidationError(detail::concat("dimension mismatch: variance row of length ",
                                               r.size(), " for J = ", j_count));
        }
        flat.insert(flat.end(), r.begin(), r.end());
      }
    } else {
      flat = v.get<std::vector<double>>();
      if (flat.size() != k_count * j_count) {
        throw ValidationError(detail::concat("dimension mismatch: ", flat.size(),
                                             " variances for K x J = ", k_count, " x ",
                                             j_count));
      }
    }
    inst.variances = Grid<double>(k_count, j_count, std::move(flat));
    if (j.contains("metadata")) {
      for (const auto& [key, value] : j.at("metadata").items()) {
        inst.metadata[key] = value.is_string() ? value.get<std::string>() : value.dump();
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("instance JSON: ") + e.what());
  }
  return inst;
}

inline nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open '" + path + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError("cannot parse '" + path + "': " + e.what());
  }
}

/// Reads and validates an instance file.
inline ProblemInstance load_instance(const std::string& path) {
  ProblemInstance inst = instance_from_json(read_json_file(path));
  return validate_instance(inst);
}

inline void save_instance(const ProblemInstance& inst, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write '" + path + "'");
  out << instance_to_json(inst).dump(2) << '\n';
}

}  // namespace bj
