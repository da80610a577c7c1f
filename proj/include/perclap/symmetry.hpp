#pragma once

// Structural spectral relations between the three Laplacians of a cluster:
// the Neumann/Dirichlet reflection and the operator chain
// 0 <= Neumann <= Pseudo-Dirichlet <= Dirichlet <= 4d.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <vector>

#include "perclap/laplacian.hpp"
#include "perclap/spectral.hpp"

namespace perclap {

struct ReflectionResult {
  bool ok = false;
  double max_deviation = 0.0;
};

/// Compares the Dirichlet spectrum with 4d minus the reversed Neumann spectrum.
inline ReflectionResult reflection_check(const Cluster& cluster, double tol) {
  if (!(tol > 0)) throw DomainError("reflection_check: tol must be positive");
  const auto n_spec = eigenvalues(assemble(cluster, Boundary::neumann));
  const auto d_spec = eigenvalues(assemble(cluster, Boundary::dirichlet));
  const double width = spectral_width(cluster.dim());
  ReflectionResult r;
  const std::size_t n = n_spec.size();
  for (std::size_t i = 0; i < n; ++i)
    r.max_deviation = std::max(r.max_deviation, std::abs(d_spec[i] - (width - n_spec[n - 1 - i])));
  r.ok = r.max_deviation <= tol;
  return r;
}

/// Eigenvalue counts (N, Dt, D) at or below E + tol.
using ChainCounts = std::array<std::size_t, 3>;

struct ChainResult {
  bool ok = true;
  /// First grid energy where the ordering failed, NaN if none.
  double first_violation = std::numeric_limits<double>::quiet_NaN();
  /// Eigenvalues outside [-tol, 4d + tol] were found.
  bool out_of_range = false;
};

namespace detail {

struct ClusterCounter {
  ClusterCounter(const Cluster& c, Boundary bc) : op(assemble(c, bc)) {
    if (c.size() <= dense_threshold) spectrum = eigenvalues(op);
  }
  std::size_t operator()(double e) const {
    return op.size() <= dense_threshold ? count_sorted_leq(spectrum, e) : count_leq(op, e).count;
  }
  SymmetricOperator op;
  std::vector<double> spectrum;
};

}  // namespace detail

/// Minmax ordering of the three operators implies
/// count_N(E) >= count_Dt(E) >= count_D(E) at every energy.
inline ChainResult chain_check(const Cluster& cluster, const std::vector<double>& grid, double tol) {
  if (grid.empty()) throw DomainError("chain_check: empty energy grid");
  const detail::ClusterCounter cn(cluster, Boundary::neumann), ct(cluster, Boundary::pseudo_dirichlet),
      cd(cluster, Boundary::dirichlet);
  ChainResult r;
  const double width = spectral_width(cluster.dim());
  const auto n = cluster.size();
  for (const auto* c : {&cn, &ct, &cd}) {
    if ((*c)(std::nextafter(-tol, -1.0)) != 0 || (*c)(width + tol) != n) r.out_of_range = true;
    if (!c->spectrum.empty() && (c->spectrum.front() < -tol || c->spectrum.back() > width + tol))
      r.out_of_range = true;
  }
  for (double e : grid) {
    const ChainCounts k{cn(e + tol), ct(e + tol), cd(e + tol)};
    if (!(k[0] >= k[1] && k[1] >= k[2])) {
      r.ok = false;
      r.first_violation = e;
      break;
    }
  }
  if (r.out_of_range) r.ok = false;
  return r;
}

/// Counts (N, Dt, D) of eigenvalues <= E for one energy, no tolerance.
inline ChainCounts chain_counts(const Cluster& cluster, double e) {
  return {count_leq(assemble(cluster, Boundary::neumann), e).count,
          count_leq(assemble(cluster, Boundary::pseudo_dirichlet), e).count,
          count_leq(assemble(cluster, Boundary::dirichlet), e).count};
}

}  // namespace perclap
