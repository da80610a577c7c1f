#pragma once

// Orchestration of experiment tasks over realizations, result files, and
// the manifest with content hashes. Parallelism never changes the output:
// realizations are computed independently and merged positionally.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include "perclap/config.hpp"
#include "perclap/errors.hpp"
#include "perclap/isoperimetry.hpp"
#include "perclap/lattice.hpp"
#include "perclap/spectral.hpp"
#include "perclap/symmetry.hpp"
#include "perclap/tails.hpp"

namespace perclap {

inline std::string sha256_hex(const std::string& data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("sha256 digest failed");
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
  return os.str();
}

/// Shortest round-trip-safe text for a double: 17 significant digits.
inline std::string format_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// Runs f(i) for i in [0, n) on up to `threads` workers and returns the
/// results in index order. The exception of the lowest failing index is
/// rethrown.
template <class F>
auto parallel_map(std::size_t n, unsigned threads, F&& f) -> std::vector<decltype(f(std::size_t{}))> {
  using R = decltype(f(std::size_t{}));
  std::vector<std::optional<R>> slots(n);
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        slots[i].emplace(f(i));
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const unsigned workers = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < workers; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  std::vector<R> out;
  out.reserve(n);
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

struct RunOptions {
  unsigned threads = 1;
  bool emit_graph = false;
  std::optional<std::string> output_dir;  // overrides the config
  std::ostream* log = nullptr;
};

struct OutputFile {
  std::string name;
  std::string sha256;
};

struct RunReport {
  int exit_code = 0;
  std::string status = "ok";
  std::string failure;
  std::filesystem::path directory;
  std::vector<OutputFile> outputs;
  std::uint64_t violations = 0;
};

namespace detail {

class OutputSink {
public:
  OutputSink(std::filesystem::path dir, RunReport& report) : dir_(std::move(dir)), report_(report) {
    std::filesystem::create_directories(dir_);
  }

  void write(const std::string& name, const std::string& content) {
    std::ofstream out(dir_ / name, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write output file " + (dir_ / name).string());
    out << content;
    report_.outputs.push_back({name, sha256_hex(content)});
  }

  void write_json(const std::string& name, const nlohmann::json& j) { write(name, j.dump(2) + "\n"); }

private:
  std::filesystem::path dir_;
  RunReport& report_;
};

inline std::vector<PercolationGraph> sample_realizations(const ExperimentConfig& c, const RunOptions& opt) {
  const LatticeBox box(c.d, c.L);
  return parallel_map(c.realizations, opt.threads,
                      [&](std::size_t r) { return sample_graph(box, c.p, derive_seed(c.seed, r)); });
}

struct RealizationSpectra {
  std::vector<GraphSpectrum> per_bc;  // aligned with the requested boundary conditions
  std::uint64_t zero_modes = 0;
};

inline std::vector<RealizationSpectra> realization_spectra(const ExperimentConfig& c,
                                                           const std::vector<PercolationGraph>& graphs,
                                                           const std::vector<double>& grid, const RunOptions& opt) {
  return parallel_map(graphs.size(), opt.threads, [&](std::size_t r) {
    const auto parts = clusters(graphs[r]);
    RealizationSpectra rs;
    for (auto bc : c.boundary_conditions)
      rs.per_bc.push_back(graph_spectrum(parts, graphs[r].box().vertex_count(), bc, grid));
    rs.zero_modes = zero_mode_count(parts, zero_tolerance(c.d));
    return rs;
  });
}

inline std::vector<EmpiricalIDS> pool_ids(const ExperimentConfig& c, const std::vector<RealizationSpectra>& spectra,
                                          const std::vector<double>& grid) {
  std::vector<EmpiricalIDS> out;
  for (std::size_t b = 0; b < c.boundary_conditions.size(); ++b) {
    std::vector<GraphSpectrum> parts;
    parts.reserve(spectra.size());
    for (const auto& s : spectra) parts.push_back(s.per_bc[b]);
    out.push_back(EmpiricalIDS::pool(c.boundary_conditions[b], c.d, grid, parts));
  }
  return out;
}

inline std::string ids_csv(const EmpiricalIDS& ids) {
  std::string s = "E,N\n";
  for (double e : ids.grid()) s += format_g17(e) + "," + format_g17(ids(e)) + "\n";
  return s;
}

inline void run_ids(const ExperimentConfig& c, const std::vector<PercolationGraph>& graphs, const RunOptions& opt,
                    OutputSink& sink) {
  const auto grid = energy_grid(c.d, c.grid);
  const auto spectra = realization_spectra(c, graphs, grid, opt);
  const auto ids = pool_ids(c, spectra, grid);
  std::uint64_t zeros = 0;
  for (const auto& s : spectra) zeros += s.zero_modes;
  for (const auto& x : ids) {
    const std::string tag(to_string(x.boundary()));
    sink.write("ids_" + tag + ".csv", ids_csv(x));
    const auto collisions = x.grid_collisions();
    sink.write_json("ids_" + tag + "_summary.json",
                    {{"bc", tag},
                     {"p", c.p},
                     {"d", c.d},
                     {"L", c.L},
                     {"realizations", c.realizations},
                     {"seed", c.seed},
                     {"kappa_hat", static_cast<double>(zeros) / static_cast<double>(x.volume())},
                     {"total_vertices", x.volume()},
                     {"clusters", x.cluster_count()},
                     {"grid_points", grid.size()},
                     {"grid_collisions", collisions}});
  }
}

struct CheckTally {
  std::string name;
  std::uint64_t evaluated = 0;
  std::uint64_t violations = 0;
  /// Worst deviation (reflection) or smallest margin (bounds).
  double extreme = std::numeric_limits<double>::quiet_NaN();

  void worst_max(double v) { extreme = std::isnan(extreme) ? v : std::max(extreme, v); }
  void worst_min(double v) { extreme = std::isnan(extreme) ? v : std::min(extreme, v); }
};

struct RealizationVerification {
  std::vector<CheckTally> tallies;
  std::vector<IsoperimetryReport> reports;
  double fk_min = std::numeric_limits<double>::infinity();
};

inline constexpr double verify_tolerance = 1e-9;
inline constexpr double margin_tolerance = 1e-12;
inline constexpr std::size_t reflection_size_limit = 500;

inline RealizationVerification verify_realization(const ExperimentConfig& c, const PercolationGraph& g,
                                                  const std::vector<double>& grid) {
  RealizationVerification rv;
  auto& t = rv.tallies;
  t = {{"zero_mode_cluster_identity"}, {"reflection_per_cluster"}, {"pooled_reflection_D_vs_N"},
       {"pooled_symmetry_Dt"},        {"chain_ordering"},         {"cheeger"},
       {"crude_cheeger"},              {"faber_krahn_positive"}};
  const auto parts = clusters(g);
  const double width = spectral_width(c.d);

  const auto zeros = zero_mode_count(parts, zero_tolerance(c.d));
  ++t[0].evaluated;
  if (zeros != parts.size()) ++t[0].violations;
  t[0].worst_max(std::abs(static_cast<double>(zeros) - static_cast<double>(parts.size())));

  std::vector<double> pooled_n, pooled_dt, pooled_d;
  bool pooled_complete = true;
  for (const auto& cl : parts) {
    const auto chain = chain_check(cl, grid, verify_tolerance);
    ++t[4].evaluated;
    if (!chain.ok) ++t[4].violations;

    if (cl.size() > dense_threshold) {
      pooled_complete = false;
    } else {
      const auto n_ev = eigenvalues(assemble(cl, Boundary::neumann));
      const auto dt_ev = eigenvalues(assemble(cl, Boundary::pseudo_dirichlet));
      const auto d_ev = eigenvalues(assemble(cl, Boundary::dirichlet));
      pooled_n.insert(pooled_n.end(), n_ev.begin(), n_ev.end());
      pooled_dt.insert(pooled_dt.end(), dt_ev.begin(), dt_ev.end());
      pooled_d.insert(pooled_d.end(), d_ev.begin(), d_ev.end());
      if (cl.size() <= reflection_size_limit) {
        double dev = 0;
        for (std::size_t i = 0; i < n_ev.size(); ++i)
          dev = std::max(dev, std::abs(d_ev[i] - (width - n_ev[n_ev.size() - 1 - i])));
        ++t[1].evaluated;
        if (!(dev < verify_tolerance)) ++t[1].violations;
        t[1].worst_max(dev);
      }
    }
    if (cl.size() < 2) continue;
    auto rep = isoperimetry_report(cl, c.cheeger_limit);
    if (rep.cheeger_margin) {
      ++t[5].evaluated;
      if (*rep.cheeger_margin < -margin_tolerance) ++t[5].violations;
      t[5].worst_min(*rep.cheeger_margin);
    }
    ++t[6].evaluated;
    if (rep.crude_margin < -margin_tolerance) ++t[6].violations;
    t[6].worst_min(rep.crude_margin);
    ++t[7].evaluated;
    if (!(rep.fk_ratio > 0)) ++t[7].violations;
    t[7].worst_min(rep.fk_ratio);
    rv.fk_min = std::min(rv.fk_min, rep.fk_ratio);
    rv.reports.push_back(std::move(rep));
  }

  if (pooled_complete) {
    std::sort(pooled_n.begin(), pooled_n.end());
    std::sort(pooled_dt.begin(), pooled_dt.end());
    std::sort(pooled_d.begin(), pooled_d.end());
    const auto n = pooled_n.size();
    double dev_d = 0, dev_dt = 0;
    for (std::size_t i = 0; i < n; ++i) {
      dev_d = std::max(dev_d, std::abs(pooled_d[i] - (width - pooled_n[n - 1 - i])));
      dev_dt = std::max(dev_dt, std::abs(pooled_dt[i] - (width - pooled_dt[n - 1 - i])));
    }
    ++t[2].evaluated;
    if (!(dev_d < verify_tolerance)) ++t[2].violations;
    t[2].worst_max(dev_d);
    ++t[3].evaluated;
    if (!(dev_dt < verify_tolerance)) ++t[3].violations;
    t[3].worst_max(dev_dt);
  }
  return rv;
}

inline std::string optional_g17(const std::optional<double>& v) { return v ? format_g17(*v) : ""; }

inline std::uint64_t run_verify(const ExperimentConfig& c, const std::vector<PercolationGraph>& graphs,
                                const RunOptions& opt, OutputSink& sink) {
  const auto grid = energy_grid(c.d, c.grid);
  const auto per = parallel_map(graphs.size(), opt.threads,
                                [&](std::size_t r) { return verify_realization(c, graphs[r], grid); });
  std::vector<CheckTally> total = per.front().tallies;
  for (auto& x : total) {
    x.evaluated = 0;
    x.violations = 0;
    x.extreme = std::numeric_limits<double>::quiet_NaN();
  }
  const bool is_min[] = {false, false, false, false, false, true, true, true};
  double fk_min = std::numeric_limits<double>::infinity();
  std::string clusters_csv = std::string(isoperimetry_csv_header) + "\n";
  for (const auto& rv : per) {
    for (std::size_t k = 0; k < total.size(); ++k) {
      total[k].evaluated += rv.tallies[k].evaluated;
      total[k].violations += rv.tallies[k].violations;
      if (!std::isnan(rv.tallies[k].extreme)) {
        if (is_min[k])
          total[k].worst_min(rv.tallies[k].extreme);
        else
          total[k].worst_max(rv.tallies[k].extreme);
      }
    }
    fk_min = std::min(fk_min, rv.fk_min);
    for (const auto& rep : rv.reports) {
      clusters_csv += std::to_string(rep.size) + "," + format_g17(rep.e1_n) + "," + format_g17(rep.e1_dt) + "," +
                      format_g17(rep.e1_d) + "," +
                      (rep.h_ch ? std::to_string(rep.h_ch->num) + "/" + std::to_string(rep.h_ch->den) : "") + "," +
                      optional_g17(rep.cheeger_margin) + "," + format_g17(rep.crude_margin) + "," +
                      format_g17(rep.fk_ratio) + "\n";
    }
  }
  // The estimate is the population minimum; every ratio is >= it by construction.
  CheckTally fk_estimate{"faber_krahn_estimate", std::isinf(fk_min) ? 0u : 1u,
                         std::isinf(fk_min) || fk_min > 0 ? 0u : 1u, std::isinf(fk_min) ? std::nan("") : fk_min};
  total.push_back(fk_estimate);

  std::string summary = "check,evaluated,violations,extreme\n";
  std::uint64_t violations = 0;
  for (const auto& x : total) {
    summary += x.name + "," + std::to_string(x.evaluated) + "," + std::to_string(x.violations) + "," +
               (std::isnan(x.extreme) ? std::string() : format_g17(x.extreme)) + "\n";
    violations += x.violations;
  }
  sink.write("verification.csv", summary);
  sink.write("clusters.csv", clusters_csv);
  return violations;
}

inline nlohmann::json tail_json(const TailFit& f, double p, TailMode mode) {
  return {{"bc", std::string(to_string(f.bc))},
          {"edge", std::string(to_string(f.edge))},
          {"d", f.dim},
          {"p", p},
          {"mode", std::string(to_string(mode))},
          {"window", {f.window.e_min, f.window.e_max}},
          {"slope", f.slope},
          {"expected_slope", f.expected_slope},
          {"residual", f.residual},
          {"points", f.points},
          {"qualitative", f.dim >= 2},
          {"status", "ok"}};
}

inline void run_tails(const ExperimentConfig& c, const std::vector<PercolationGraph>& graphs, const RunOptions& opt,
                      OutputSink& sink) {
  nlohmann::json summary = {{"mode", std::string(to_string(c.tail_mode))}, {"fits", nlohmann::json::array()}};
  std::optional<double> n_lower, d_upper;
  auto record = [&](Boundary bc, SpectralEdge edge, const nlohmann::json& j) {
    const std::string name = "tail_" + std::string(to_string(bc)) + "_" + std::string(to_string(edge)) + ".json";
    sink.write_json(name, j);
    summary["fits"].push_back(name);
    if (j.at("status") == "ok") {
      if (bc == Boundary::neumann && edge == SpectralEdge::lower) n_lower = j.at("slope").get<double>();
      if (bc == Boundary::dirichlet && edge == SpectralEdge::upper) d_upper = j.at("slope").get<double>();
    }
  };
  auto failed = [&](Boundary bc, SpectralEdge edge, const std::string& why) {
    return nlohmann::json{{"bc", std::string(to_string(bc))},
                          {"edge", std::string(to_string(edge))},
                          {"d", c.d},
                          {"p", c.p},
                          {"mode", std::string(to_string(c.tail_mode))},
                          {"window", {c.tail_window.e_min, c.tail_window.e_max}},
                          {"expected_slope", expected_tail_slope(bc, edge, c.d)},
                          {"status", "insufficient_data"},
                          {"message", why}};
  };

  if (c.tail_mode == TailMode::analytic) {
    for (auto bc : c.boundary_conditions)
      for (auto edge : {SpectralEdge::lower, SpectralEdge::upper})
        record(bc, edge, tail_json(fit_tail_analytic(c.p, bc, edge, c.tail_window), c.p, c.tail_mode));
  } else {
    const auto grid = energy_grid(c.d, c.grid);
    const auto spectra = realization_spectra(c, graphs, grid, opt);
    const auto ids = pool_ids(c, spectra, grid);
    for (const auto& x : ids)
      for (auto edge : {SpectralEdge::lower, SpectralEdge::upper}) {
        try {
          record(x.boundary(), edge, tail_json(fit_tail(x, edge, c.tail_window), c.p, c.tail_mode));
        } catch (const InsufficientDataError& e) {
          record(x.boundary(), edge, failed(x.boundary(), edge, e.what()));
        } catch (const DomainError& e) {
          record(x.boundary(), edge, failed(x.boundary(), edge, e.what()));
        }
      }
    const EmpiricalIDS* n_ids = nullptr;
    const EmpiricalIDS* dt_ids = nullptr;
    for (const auto& x : ids) {
      if (x.boundary() == Boundary::neumann) n_ids = &x;
      if (x.boundary() == Boundary::pseudo_dirichlet) dt_ids = &x;
    }
    if (n_ids && dt_ids) {
      const auto ord = tail_ordering_check(*n_ids, *dt_ids, c.ordering_e_max);
      summary["ordering"] = {{"e_max", c.ordering_e_max},
                             {"points", ord.points},
                             {"ok", ord.ok},
                             {"worst_gap", ord.worst_gap}};
    }
  }
  if (n_lower && d_upper) summary["reflection_identical"] = (*n_lower == *d_upper);
  sink.write_json("tails_summary.json", summary);
}

inline void run_decay(const ExperimentConfig& c, OutputSink& sink, std::ostream* log) {
  const auto fit = cluster_size_decay(c.d, c.p, c.decay_samples, c.seed, c.decay_box_side);
  nlohmann::json j = {{"d", c.d},
                      {"p", c.p},
                      {"samples", fit.samples},
                      {"zeta_hat", fit.zeta_hat},
                      {"r2", fit.r2},
                      {"fit_range", {fit.fit_min_n, fit.fit_max_n}},
                      {"box_side", fit.box_side},
                      {"truncated", fit.truncated},
                      {"survival", fit.survival},
                      {"cluster_survival", fit.cluster_survival}};
  if (fit.truncated > 0) {
    j["warning"] = "clusters reached the box boundary in " + std::to_string(fit.truncated) + " samples";
    if (log) *log << "warning: " << j["warning"].get<std::string>() << "\n";
  }
  sink.write_json("decay.json", j);
}

inline nlohmann::json manifest_json(const ExperimentConfig& c, const RunReport& report) {
  nlohmann::json outs = nlohmann::json::array();
  for (const auto& o : report.outputs) outs.push_back({{"file", o.name}, {"sha256", o.sha256}});
  auto cfg = to_json(c, false);
  cfg["decay"]["box_side_effective"] =
      c.decay_box_side > 0 ? c.decay_box_side : default_decay_box_side(c.d);
  nlohmann::json j = {{"config", cfg}, {"outputs", outs}, {"status", report.status}, {"violations", report.violations}};
  if (!report.failure.empty()) j["failure"] = report.failure;
  return j;
}

}  // namespace detail

/// Executes the configured task. Exit codes: 0 success, 3 numeric failure
/// (partial outputs are kept and the manifest is marked failed).
inline RunReport run(const ExperimentConfig& config, const RunOptions& opt = {}) {
  if (auto v = validate(config); !v.empty()) {
    std::string msg = "invalid configuration:";
    for (const auto& e : v) msg += "\n  - " + e;
    throw ConfigError(msg);
  }
  RunReport report;
  report.directory = opt.output_dir.value_or(config.output_dir);
  detail::OutputSink sink(report.directory, report);
  try {
    const bool needs_graphs = config.task != Task::decay &&
                              !(config.task == Task::tails && config.tail_mode == TailMode::analytic);
    std::vector<PercolationGraph> graphs;
    if (needs_graphs) graphs = detail::sample_realizations(config, opt);
    if (opt.emit_graph)
      for (std::size_t r = 0; r < graphs.size(); ++r)
        sink.write_json("graph_" + std::to_string(r) + ".json", graph_to_json(graphs[r]));
    const auto t = config.task;
    if (t == Task::ids || t == Task::all) detail::run_ids(config, graphs, opt, sink);
    if (t == Task::verify || t == Task::all) report.violations = detail::run_verify(config, graphs, opt, sink);
    if (t == Task::tails || t == Task::all) detail::run_tails(config, graphs, opt, sink);
    if (t == Task::decay || t == Task::all) detail::run_decay(config, sink, opt.log);
  } catch (const NumericError& e) {
    report.exit_code = 3;
    report.status = "failed";
    report.failure = e.what();
  } catch (const PrecisionError& e) {
    report.exit_code = 3;
    report.status = "failed";
    report.failure = e.what();
  }
  std::ofstream(report.directory / "manifest.json", std::ios::binary)
      << detail::manifest_json(config, report).dump(2) << "\n";
  return report;
}

}  // namespace perclap
