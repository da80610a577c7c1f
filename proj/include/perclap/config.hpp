#pragma once

// Experiment configuration: strict JSON parsing, validation and
// serialization. Every effective parameter is serialized explicitly.

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "perclap/errors.hpp"
#include "perclap/laplacian.hpp"
#include "perclap/spectral.hpp"
#include "perclap/tails.hpp"

namespace perclap {

enum class Task { ids, verify, tails, decay, all };
enum class TailMode { analytic, empirical };

inline std::string_view to_string(Task t) {
  switch (t) {
    case Task::ids: return "ids";
    case Task::verify: return "verify";
    case Task::tails: return "tails";
    case Task::decay: return "decay";
    case Task::all: return "all";
  }
  return "?";
}

inline Task task_from_string(std::string_view s) {
  for (auto t : {Task::ids, Task::verify, Task::tails, Task::decay, Task::all})
    if (s == to_string(t)) return t;
  throw ConfigError("unknown task '" + std::string(s) + "' (expected ids, verify, tails, decay or all)");
}

inline std::string_view to_string(TailMode m) { return m == TailMode::analytic ? "analytic" : "empirical"; }

/// Safe subcritical caps on p for runs guarded as subcritical. These are
/// engineering margins below the d=2 and d=3 bond thresholds.
inline constexpr double subcritical_cap_d2 = 0.45;
inline constexpr double subcritical_cap_d3 = 0.2;

struct ExperimentConfig {
  Task task = Task::ids;
  int d = 1;
  std::int64_t L = 0;
  double p = 0;
  std::uint64_t realizations = 1;
  std::uint64_t seed = 1;
  std::vector<Boundary> boundary_conditions{Boundary::neumann, Boundary::pseudo_dirichlet, Boundary::dirichlet};
  GridSpec grid;
  TailMode tail_mode = TailMode::analytic;
  TailWindow tail_window;
  double ordering_e_max = 0.5;
  std::uint64_t decay_samples = 100000;
  std::int64_t decay_box_side = 0;  // 0 selects the per-dimension default
  std::size_t cheeger_limit = 18;
  bool subcritical_guard = true;
  std::string output_dir = "perclap_out";

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

/// Largest admissible verify.cheeger_limit.
constexpr std::size_t cheeger_limit_max() noexcept { return 20; }

/// Every range violation, one message each; empty when valid.
inline std::vector<std::string> validate(const ExperimentConfig& c) {
  std::vector<std::string> v;
  if (c.d < 1 || c.d > 3) v.push_back("d must lie in 1..3");
  if (c.L < 2) v.push_back("L must be >= 2");
  if (!(c.p > 0 && c.p < 1)) v.push_back("p must lie in (0,1)");
  if (c.realizations < 1) v.push_back("realizations must be >= 1");
  if (c.boundary_conditions.empty()) v.push_back("boundary_conditions must be nonempty");
  {
    auto bcs = c.boundary_conditions;
    std::sort(bcs.begin(), bcs.end());
    if (std::adjacent_find(bcs.begin(), bcs.end()) != bcs.end()) v.push_back("boundary_conditions has duplicates");
  }
  if (c.grid.points < 2) v.push_back("grid.points must be >= 2");
  if (c.grid.edge_refinement < 0 || c.grid.edge_refinement > 60) v.push_back("grid.edge_refinement must lie in 0..60");
  if (c.d >= 1 && c.d <= 3) {
    const double width = spectral_width(c.d);
    if (!(c.tail_window.e_min > 0 && c.tail_window.e_min < c.tail_window.e_max && c.tail_window.e_max < width))
      v.push_back("tail window must satisfy 0 < e_min < e_max < 4d");
    if (!(c.ordering_e_max > 0 && c.ordering_e_max < width)) v.push_back("tail.ordering_e_max must lie in (0,4d)");
  }
  if (c.tail_window.points < 8) v.push_back("tail.points must be >= 8");
  const bool tails = c.task == Task::tails || c.task == Task::all;
  if (tails && c.tail_mode == TailMode::analytic && c.d != 1) v.push_back("tail.mode analytic requires d = 1");
  if (c.subcritical_guard) {
    if (c.d == 2 && c.p > subcritical_cap_d2) v.push_back("subcritical guard: p must be <= 0.45 for d = 2");
    if (c.d == 3 && c.p > subcritical_cap_d3) v.push_back("subcritical guard: p must be <= 0.2 for d = 3");
  }
  const bool decay = c.task == Task::decay || c.task == Task::all;
  if (decay) {
    if (c.d == 2 && c.p >= 0.4) v.push_back("decay: p must be < 0.4 for d = 2");
    if (c.d == 3 && c.p >= 0.2) v.push_back("decay: p must be < 0.2 for d = 3");
  }
  if (c.decay_samples < 1) v.push_back("decay.samples must be >= 1");
  if (c.decay_box_side < 0 || c.decay_box_side == 1 || c.decay_box_side == 2) v.push_back("decay.box_side must be 0 (auto) or >= 3");
  if (c.cheeger_limit < 2 || c.cheeger_limit > cheeger_limit_max()) v.push_back("verify.cheeger_limit must lie in 2..20");
  return v;
}

inline nlohmann::json to_json(const ExperimentConfig& c, bool with_output_dir = true) {
  nlohmann::json bcs = nlohmann::json::array();
  for (auto b : c.boundary_conditions) bcs.push_back(std::string(to_string(b)));
  nlohmann::json j = {
      {"task", std::string(to_string(c.task))},
      {"d", c.d},
      {"L", c.L},
      {"p", c.p},
      {"realizations", c.realizations},
      {"seed", c.seed},
      {"boundary_conditions", bcs},
      {"grid", {{"points", c.grid.points}, {"edge_refinement", c.grid.edge_refinement}}},
      {"tail",
       {{"mode", std::string(to_string(c.tail_mode))},
        {"e_min", c.tail_window.e_min},
        {"e_max", c.tail_window.e_max},
        {"points", c.tail_window.points},
        {"ordering_e_max", c.ordering_e_max}}},
      {"decay", {{"samples", c.decay_samples}, {"box_side", c.decay_box_side}}},
      {"verify", {{"cheeger_limit", c.cheeger_limit}}},
      {"subcritical_guard", c.subcritical_guard},
  };
  if (with_output_dir) j["output_dir"] = c.output_dir;
  return j;
}

inline std::string serialize(const ExperimentConfig& c) { return to_json(c).dump(2) + "\n"; }

namespace detail {

class StrictReader {
public:
  explicit StrictReader(std::vector<std::string>& errors) : errors_(errors) {}

  void reject_unknown(const nlohmann::json& obj, const std::string& where, std::initializer_list<const char*> known) {
    if (!obj.is_object()) {
      errors_.push_back(where + ": expected an object");
      return;
    }
    for (const auto& [key, _] : obj.items())
      if (std::none_of(known.begin(), known.end(), [&](const char* k) { return key == k; }))
        errors_.push_back(where + ": unknown key '" + key + "'");
  }

  template <class T>
  void read(const nlohmann::json& obj, const char* key, const std::string& where, T& out, bool required = false) {
    if (!obj.is_object() || !obj.contains(key)) {
      if (required) errors_.push_back(where + key + ": missing required key");
      return;
    }
    const auto& v = obj.at(key);
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) throw std::invalid_argument("expected a boolean");
      } else if constexpr (std::is_integral_v<T>) {
        if (!v.is_number_integer()) throw std::invalid_argument("expected an integer");
        if constexpr (std::is_unsigned_v<T>)
          if (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0)
            throw std::invalid_argument("expected a non-negative integer");
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!v.is_number()) throw std::invalid_argument("expected a number");
      } else {
        if (!v.is_string()) throw std::invalid_argument("expected a string");
      }
      out = v.get<T>();
    } catch (const std::exception& e) {
      errors_.push_back(where + key + ": " + e.what());
    }
  }

private:
  std::vector<std::string>& errors_;
};

}  // namespace detail

/// Strict parse: unknown keys and wrong types are errors; every violation is
/// reported together in one ConfigError.
inline ExperimentConfig parse_config_json(const nlohmann::json& j) {
  std::vector<std::string> errors;
  detail::StrictReader r(errors);
  ExperimentConfig c;
  r.reject_unknown(j, "config", {"task", "d", "L", "p", "realizations", "seed", "boundary_conditions", "grid", "tail",
                                 "decay", "verify", "subcritical_guard", "output_dir"});
  if (!j.is_object()) throw ConfigError("config: expected a JSON object");

  std::string task = std::string(to_string(c.task));
  r.read(j, "task", "", task);
  try {
    c.task = task_from_string(task);
  } catch (const ConfigError& e) {
    errors.push_back(e.what());
  }
  r.read(j, "d", "", c.d, true);
  r.read(j, "L", "", c.L, true);
  r.read(j, "p", "", c.p, true);
  r.read(j, "realizations", "", c.realizations);
  r.read(j, "seed", "", c.seed);
  r.read(j, "subcritical_guard", "", c.subcritical_guard);
  r.read(j, "output_dir", "", c.output_dir);

  if (j.contains("boundary_conditions")) {
    const auto& b = j.at("boundary_conditions");
    if (!b.is_array()) {
      errors.push_back("boundary_conditions: expected an array");
    } else {
      c.boundary_conditions.clear();
      for (const auto& x : b) {
        if (!x.is_string()) {
          errors.push_back("boundary_conditions: entries must be strings");
          continue;
        }
        try {
          c.boundary_conditions.push_back(boundary_from_string(x.get<std::string>()));
        } catch (const ConfigError& e) {
          errors.push_back(e.what());
        }
      }
    }
  }
  if (j.contains("grid")) {
    const auto& g = j.at("grid");
    r.reject_unknown(g, "grid", {"points", "edge_refinement"});
    r.read(g, "points", "grid.", c.grid.points);
    r.read(g, "edge_refinement", "grid.", c.grid.edge_refinement);
  }
  if (j.contains("tail")) {
    const auto& t = j.at("tail");
    r.reject_unknown(t, "tail", {"mode", "e_min", "e_max", "points", "ordering_e_max"});
    std::string mode = std::string(to_string(c.tail_mode));
    r.read(t, "mode", "tail.", mode);
    if (mode == "analytic")
      c.tail_mode = TailMode::analytic;
    else if (mode == "empirical")
      c.tail_mode = TailMode::empirical;
    else
      errors.push_back("tail.mode: expected 'analytic' or 'empirical'");
    r.read(t, "e_min", "tail.", c.tail_window.e_min);
    r.read(t, "e_max", "tail.", c.tail_window.e_max);
    r.read(t, "points", "tail.", c.tail_window.points);
    r.read(t, "ordering_e_max", "tail.", c.ordering_e_max);
  }
  if (j.contains("decay")) {
    const auto& dcy = j.at("decay");
    r.reject_unknown(dcy, "decay", {"samples", "box_side"});
    r.read(dcy, "samples", "decay.", c.decay_samples);
    r.read(dcy, "box_side", "decay.", c.decay_box_side);
  }
  if (j.contains("verify")) {
    const auto& ver = j.at("verify");
    r.reject_unknown(ver, "verify", {"cheeger_limit"});
    r.read(ver, "cheeger_limit", "verify.", c.cheeger_limit);
  }
  if (errors.empty()) {
    auto range = validate(c);
    errors.insert(errors.end(), range.begin(), range.end());
  }
  if (!errors.empty()) {
    std::ostringstream msg;
    msg << "invalid configuration (" << errors.size() << " violation" << (errors.size() == 1 ? "" : "s") << "):";
    for (const auto& e : errors) msg << "\n  - " << e;
    throw ConfigError(msg.str());
  }
  return c;
}

inline ExperimentConfig parse_config_string(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("malformed config JSON: ") + e.what());
  }
  return parse_config_json(j);
}

inline ExperimentConfig parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_string(ss.str());
}

}  // namespace perclap
