#pragma once

// Run configuration: JSON ingestion and validation for the batch front door.
// Complex numbers are [re, im] pairs; matrices are row-major nested arrays.

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "btdet/cxlinalg.hpp"
#include "btdet/errors.hpp"
#include "btdet/odeprop.hpp"
#include "btdet/triplets.hpp"
#include "btdet/weyl.hpp"

namespace btdet {
namespace cli {

using json = nlohmann::ordered_json;

class ConfigError : public Error {
public:
  ConfigError(std::string pointer, std::string msg)
      : Error(ErrorKind::Io, pointer + ": " + msg), pointer_(std::move(pointer)) {}
  const std::string& pointer() const noexcept { return pointer_; }

private:
  std::string pointer_;
};

namespace detail {

inline cx parse_complex(const json& j, const std::string& at) {
  if (j.is_number()) return cx(j.get<double>(), 0.0);
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
    throw ConfigError(at, "expected a complex number as [re, im]");
  return cx(j[0].get<double>(), j[1].get<double>());
}

inline CMat parse_matrix(const json& j, const std::string& at) {
  if (!j.is_array() || j.empty()) throw ConfigError(at, "expected a non-empty matrix array");
  const std::size_t rows = j.size();
  const std::size_t cols = j[0].is_array() ? j[0].size() : 0;
  if (cols == 0) throw ConfigError(at, "expected rows of complex entries");
  CMat m(rows, cols);
  for (std::size_t i = 0; i < rows; ++i) {
    if (!j[i].is_array() || j[i].size() != cols)
      throw ConfigError(at + "/" + std::to_string(i), "ragged matrix row");
    for (std::size_t k = 0; k < cols; ++k)
      m(i, k) = parse_complex(j[i][k], at + "/" + std::to_string(i) + "/" + std::to_string(k));
  }
  return m;
}

inline std::vector<double> parse_real_grid(const json& j, const std::string& at) {
  std::vector<double> out;
  if (j.is_array()) {
    for (std::size_t i = 0; i < j.size(); ++i) {
      if (!j[i].is_number()) throw ConfigError(at, "grid entries must be numbers");
      out.push_back(j[i].get<double>());
    }
  } else if (j.is_object()) {
    for (const char* k : {"from", "to", "points"})
      if (!j.contains(k)) throw ConfigError(at, std::string("missing '") + k + "'");
    const double a = j["from"].get<double>(), b = j["to"].get<double>();
    const int n = j["points"].get<int>();
    if (n < 2 || !(b > a)) throw ConfigError(at, "need points >= 2 and to > from");
    for (int i = 0; i < n; ++i)
      out.push_back(a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1));
  } else {
    throw ConfigError(at, "expected an array or {from, to, points}");
  }
  for (std::size_t i = 1; i < out.size(); ++i)
    if (out[i] <= out[i - 1]) throw ConfigError(at, "grid must be strictly ascending");
  return out;
}

inline std::vector<cx> parse_path(const json& j, const std::string& at) {
  std::vector<cx> pts;
  if (j.is_object() && j.value("kind", "") == "segment") {
    const cx a = parse_complex(j.at("from"), at + "/from");
    const cx b = parse_complex(j.at("to"), at + "/to");
    const int n = j.value("points", 0);
    if (n < 2) throw ConfigError(at, "segment needs points >= 2");
    for (int i = 0; i < n; ++i)
      pts.push_back(a + (b - a) * (static_cast<double>(i) / static_cast<double>(n - 1)));
    return pts;
  }
  if (j.is_object() && j.value("kind", "") == "circle") {
    const cx c = parse_complex(j.at("center"), at + "/center");
    const double r = j.at("radius").get<double>();
    const int n = j.value("points", 0);
    if (n < 8) throw ConfigError(at, "circle needs points >= 8");
    for (int i = 0; i <= n; ++i) {
      const double th = 2.0 * kPi * static_cast<double>(i) / static_cast<double>(n);
      pts.push_back(c + r * cx(std::cos(th), std::sin(th)));
    }
    return pts;
  }
  if (j.is_array()) {
    for (std::size_t i = 0; i < j.size(); ++i)
      pts.push_back(parse_complex(j[i], at + "/" + std::to_string(i)));
    if (pts.size() < 2) throw ConfigError(at, "need at least 2 path points");
    return pts;
  }
  throw ConfigError(at, "expected a segment/circle object or an explicit point list");
}

} // namespace detail

// --- configuration model --------------------------------------------------------

enum class ProblemKind { FreeHalfLine, JostHalfLine, Interval };

struct TaskConfig {
  std::string type;
  std::string name;
  std::string output;
  json raw;
};

struct RunConfig {
  ProblemKind problem = ProblemKind::FreeHalfLine;
  std::size_t channels = 1;
  std::optional<PotentialSpec> potential;  // absent for the free half-line
  std::vector<std::pair<std::string, CMat>> extensions;
  std::vector<TaskConfig> tasks;
  std::vector<double> eps_ladder = {1e-2, 1e-3, 1e-4, 1e-5, 1e-6};
  std::string output_dir = ".";

  std::size_t boundary_dim() const {
    return problem == ProblemKind::Interval ? 2 * channels : channels;
  }

  WeylMap make_weyl() const {
    switch (problem) {
      case ProblemKind::FreeHalfLine: return WeylMap::free_halfline(channels);
      case ProblemKind::JostHalfLine: return WeylMap::jost_halfline(*potential);
      case ProblemKind::Interval: return WeylMap::interval(*potential);
    }
    throw Error(ErrorKind::Parameter, "make_weyl: bad problem kind");
  }

  const CMat& extension(const std::string& name) const {
    for (const auto& [n, m] : extensions)
      if (n == name) return m;
    throw Error(ErrorKind::Parameter, "unknown extension '" + name + "'");
  }
};

inline RunConfig parse_config(const json& root) {
  RunConfig cfg;
  if (!root.is_object()) throw ConfigError("/", "config must be a JSON object");
  if (!root.contains("problem")) throw ConfigError("/problem", "missing");
  const json& prob = root["problem"];
  const std::string kind = prob.value("kind", "");
  cfg.channels = prob.value("channels", 1);
  if (cfg.channels == 0) throw ConfigError("/problem/channels", "must be positive");

  const json pot = prob.value("potential", json{{"type", "zero"}});
  auto build_potential = [&](odeprop::Support support, double endpoint) {
    const std::string pt = pot.value("type", "zero");
    if (pt == "zero") return PotentialSpec::zero(cfg.channels, support, endpoint);
    if (pt == "square_well") {
      if (cfg.channels != 1) throw ConfigError("/problem/potential", "square_well is scalar");
      return PotentialSpec::square_well(pot.value("depth", 0.0), pot.value("width", endpoint));
    }
    if (pt == "csv") {
      if (!pot.contains("path")) throw ConfigError("/problem/potential/path", "missing");
      return PotentialSpec::from_csv(pot["path"].get<std::string>(), support);
    }
    throw ConfigError("/problem/potential/type", "unknown type '" + pt + "'");
  };

  if (kind == "free_halfline") {
    cfg.problem = ProblemKind::FreeHalfLine;
    if (pot.value("type", "zero") != "zero")
      throw ConfigError("/problem/potential", "free_halfline takes no potential");
  } else if (kind == "jost_halfline") {
    cfg.problem = ProblemKind::JostHalfLine;
    const double R = prob.value("R", 0.0);
    if (!(R > 0.0)) throw ConfigError("/problem/R", "half-line cutoff R must be positive");
    cfg.potential = build_potential(odeprop::Support::HalfLine, R);
  } else if (kind == "interval") {
    cfg.problem = ProblemKind::Interval;
    const double b = prob.value("b", 0.0);
    if (!(b > 0.0)) throw ConfigError("/problem/b", "interval length b must be positive");
    cfg.potential = build_potential(odeprop::Support::Interval, b);
  } else {
    throw ConfigError("/problem/kind", "expected free_halfline | jost_halfline | interval");
  }

  if (!root.contains("extensions") || !root["extensions"].is_array())
    throw ConfigError("/extensions", "missing extension list");
  for (std::size_t i = 0; i < root["extensions"].size(); ++i) {
    const json& e = root["extensions"][i];
    const std::string at = "/extensions/" + std::to_string(i);
    if (!e.contains("name")) throw ConfigError(at + "/name", "missing");
    const std::string name = e["name"].get<std::string>();
    for (const auto& [n, m] : cfg.extensions)
      if (n == name) throw ConfigError(at + "/name", "duplicate extension name");
    CMat m = detail::parse_matrix(e.at("matrix"), at + "/matrix");
    if (m.rows() != cfg.boundary_dim() || m.cols() != cfg.boundary_dim())
      throw ConfigError(at + "/matrix", "expected a " + std::to_string(cfg.boundary_dim()) + "x" +
                                            std::to_string(cfg.boundary_dim()) + " matrix");
    cfg.extensions.emplace_back(name, std::move(m));
  }

  if (root.contains("numeric")) {
    const json& num = root["numeric"];
    if (num.contains("eps_ladder")) {
      cfg.eps_ladder.clear();
      for (const auto& e : num["eps_ladder"]) cfg.eps_ladder.push_back(e.get<double>());
      if (cfg.eps_ladder.size() < 2)
        throw ConfigError("/numeric/eps_ladder", "need at least two rungs");
      for (std::size_t i = 1; i < cfg.eps_ladder.size(); ++i)
        if (cfg.eps_ladder[i] >= cfg.eps_ladder[i - 1] || cfg.eps_ladder[i] <= 0)
          throw ConfigError("/numeric/eps_ladder", "ladder must be positive and decreasing");
    }
  }

  if (root.contains("output")) cfg.output_dir = root["output"].value("dir", ".");

  if (!root.contains("tasks") || !root["tasks"].is_array())
    throw ConfigError("/tasks", "missing task list");
  const std::vector<std::string> known = {"pdet_path",    "locate",      "ssf",
                                          "complex_ssf",  "trace_check", "dissipative",
                                          "functional_trace", "oracle_compare"};
  for (std::size_t i = 0; i < root["tasks"].size(); ++i) {
    const json& t = root["tasks"][i];
    const std::string at = "/tasks/" + std::to_string(i);
    TaskConfig tc;
    tc.type = t.value("type", "");
    if (std::find(known.begin(), known.end(), tc.type) == known.end())
      throw ConfigError(at + "/type", "unknown task type '" + tc.type + "'");
    tc.name = t.value("name", tc.type + "_" + std::to_string(i));
    tc.output = t.value("output", tc.name + (tc.type == "pdet_path" || tc.type == "ssf" ||
                                                     tc.type == "complex_ssf" || tc.type == "locate"
                                                 ? ".csv"
                                                 : ".json"));
    tc.raw = t;
    // every referenced extension must exist and match the boundary dimension
    auto check_ext = [&](const std::string& key) {
      if (!t.contains(key)) return;
      if (t[key].is_string()) {
        cfg.extension(t[key].get<std::string>());
      } else if (t[key].is_array()) {
        for (const auto& n : t[key]) cfg.extension(n.get<std::string>());
      }
    };
    try {
      check_ext("pair");
      check_ext("extension");
    } catch (const Error& e) {
      throw ConfigError(at, e.what());
    }
    if (t.contains("pair") && (!t["pair"].is_array() || t["pair"].size() != 2))
      throw ConfigError(at + "/pair", "expected [\"Bprime\", \"B\"]");
    cfg.tasks.push_back(std::move(tc));
  }
  return cfg;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("/", "cannot open " + path);
  json root;
  try {
    in >> root;
  } catch (const std::exception& e) {
    throw ConfigError("/", std::string("JSON parse failure: ") + e.what());
  }
  return parse_config(root);
}

} // namespace cli
} // namespace btdet
