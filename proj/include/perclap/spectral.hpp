#pragma once

// Per-cluster spectra, inertia-based eigenvalue counting, and the empirical
// integrated density of states pooled over clusters and realizations.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <Eigen/SparseCholesky>
#include <lapacke.h>

#include "perclap/errors.hpp"
#include "perclap/laplacian.hpp"
#include "perclap/lattice.hpp"

namespace perclap {

/// Clusters up to this size are diagonalized densely; larger ones are only
/// probed through inertia counts.
inline constexpr std::size_t dense_threshold = 2048;

/// Eigenvalues within this distance of zero are zero modes: 1e-9 * 4d.
constexpr double zero_tolerance(int dim) noexcept { return 1e-9 * spectral_width(dim); }

/// Shift applied when a factorization hits a (near-)zero pivot: 1e-12 * 4d.
constexpr double breakdown_shift(int dim) noexcept { return 1e-12 * spectral_width(dim); }

/// All eigenvalues, ascending. Requires size() <= dense_threshold.
inline std::vector<double> eigenvalues(const SymmetricOperator& op) {
  const auto n = op.size();
  if (n > dense_threshold)
    throw DomainError("eigenvalues: cluster " + std::to_string(op.cluster_id()) + " has " + std::to_string(n) +
                      " vertices, above the dense threshold");
  if (n == 1) return {static_cast<double>(op.diagonal()[0])};
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(op.dense(), Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success)
    throw NumericError("eigensolver did not converge on cluster " + std::to_string(op.cluster_id()) + " (" +
                       std::to_string(n) + " vertices, bc " + std::string(to_string(op.boundary())) + ")");
  const auto& ev = solver.eigenvalues();
  std::vector<double> out(ev.data(), ev.data() + ev.size());
  std::sort(out.begin(), out.end());
  return out;
}

/// Number of entries of an ascending sequence that are <= e.
inline std::size_t count_sorted_leq(const std::vector<double>& sorted, double e) {
  return static_cast<std::size_t>(std::upper_bound(sorted.begin(), sorted.end(), e) - sorted.begin());
}

struct InertiaCount {
  std::size_t count = 0;
  /// E lies on (or within breakdown_shift below) an eigenvalue; the count
  /// includes eigenvalues up to E + breakdown_shift.
  bool shifted = false;
};

namespace detail {

struct PivotInertia {
  std::size_t negative = 0;
  std::size_t tiny = 0;
  bool ok = true;
  double smallest = std::numeric_limits<double>::infinity();
};

inline void classify_pivot(double d, double tiny_tol, PivotInertia& r) {
  r.smallest = std::min(r.smallest, std::abs(d));
  if (std::abs(d) <= tiny_tol)
    ++r.tiny;
  else if (d < 0)
    ++r.negative;
}

// Bunch-Kaufman LDL^T of M - E*1; D has 1x1 and 2x2 blocks.
inline PivotInertia dense_inertia(const SymmetricOperator& op, double shift, double tiny_tol) {
  Eigen::MatrixXd a = op.dense();
  a.diagonal().array() -= shift;
  const auto n = static_cast<lapack_int>(a.rows());
  std::vector<lapack_int> ipiv(static_cast<std::size_t>(n));
  const lapack_int info = LAPACKE_dsytrf(LAPACK_COL_MAJOR, 'L', n, a.data(), n, ipiv.data());
  PivotInertia r;
  if (info < 0) {
    r.ok = false;
    return r;
  }
  for (lapack_int k = 0; k < n;) {
    if (ipiv[static_cast<std::size_t>(k)] > 0) {
      classify_pivot(a(k, k), tiny_tol, r);
      k += 1;
    } else {
      const double p = a(k, k), q = a(k + 1, k), s = a(k + 1, k + 1);
      const double mean = 0.5 * (p + s);
      const double rad = std::hypot(0.5 * (p - s), q);
      classify_pivot(mean - rad, tiny_tol, r);
      classify_pivot(mean + rad, tiny_tol, r);
      k += 2;
    }
  }
  return r;
}

// Sparse LDL^T (no pivoting, fill-reducing ordering) of M - E*1.
inline PivotInertia sparse_inertia(const SymmetricOperator& op, double shift, double tiny_tol) {
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>, Eigen::Lower, Eigen::AMDOrdering<int>> ldlt;
  ldlt.setShift(-shift);
  ldlt.compute(op.sparse());
  PivotInertia r;
  if (ldlt.info() != Eigen::Success) {
    r.ok = false;
    return r;
  }
  const auto& d = ldlt.vectorD();
  for (Eigen::Index i = 0; i < d.size(); ++i) classify_pivot(d[i], tiny_tol, r);
  return r;
}

/// Upper limit on band storage, in doubles (512 MiB).
inline constexpr double band_storage_limit = 6.4e7;

/// Full spectrum by banded tridiagonal reduction. Cluster vertices are in
/// site order, so the bandwidth is at most L^(d-1).
inline std::vector<double> band_eigenvalues(const SymmetricOperator& op) {
  const auto n = static_cast<lapack_int>(op.size());
  lapack_int kd = 0;
  for (const auto& e : op.edges()) kd = std::max(kd, static_cast<lapack_int>(e.i > e.j ? e.i - e.j : e.j - e.i));
  if (static_cast<double>(kd + 1) * static_cast<double>(n) > band_storage_limit)
    throw NumericError("cluster " + std::to_string(op.cluster_id()) + " (" + std::to_string(op.size()) +
                       " vertices, bandwidth " + std::to_string(kd) + ") exceeds the band solver storage limit");
  const auto ld = static_cast<std::size_t>(kd + 1);
  std::vector<double> ab(ld * static_cast<std::size_t>(n), 0.0);
  for (std::size_t j = 0; j < op.size(); ++j) ab[j * ld] = op.diagonal()[j];
  for (const auto& e : op.edges()) {
    const auto lo = std::min(e.i, e.j), hi = std::max(e.i, e.j);
    ab[(hi - lo) + lo * ld] = -1.0;
  }
  std::vector<double> w(op.size());
  const lapack_int info = LAPACKE_dsbev(LAPACK_COL_MAJOR, 'N', 'L', n, kd, ab.data(), kd + 1, w.data(), nullptr, 1);
  if (info != 0)
    throw NumericError("band eigensolver failed on cluster " + std::to_string(op.cluster_id()) + " (info " +
                       std::to_string(info) + ")");
  return w;
}

/// Below this pivot magnitude the unpivoted sparse factorization is not
/// trusted: integer degrees equal to E cancel exactly, and pivot growth
/// erodes the signs that carry the inertia.
constexpr double reliable_pivot(int dim) noexcept { return 1e-6 * spectral_width(dim); }

}  // namespace detail

/// Number of eigenvalues <= E from the inertia of M - E*1. For a dense
/// cluster, a (near-)zero Bunch-Kaufman pivot means E sits on an eigenvalue
/// and the count is retaken at E + breakdown_shift. For a large cluster the
/// sparse LDL^T is used when all its pivots are well away from zero;
/// otherwise the count comes from the banded spectrum. Eigenvalues within
/// breakdown_shift above E are counted and the result is flagged.
inline InertiaCount count_leq(const SymmetricOperator& op, double e) {
  if (op.size() == 1) return {op.diagonal()[0] <= e ? std::size_t{1} : std::size_t{0}, false};
  const double eps = breakdown_shift(op.dim());
  if (op.size() > dense_threshold) {
    const auto ldl = detail::sparse_inertia(op, e, eps);
    if (ldl.ok && ldl.smallest > detail::reliable_pivot(op.dim())) return {ldl.negative, false};
    const auto ev = detail::band_eigenvalues(op);
    const auto upper = count_sorted_leq(ev, e + eps);
    return {upper, upper != count_sorted_leq(ev, e - eps)};
  }
  const auto first = detail::dense_inertia(op, e, eps);
  if (first.ok && first.tiny == 0) return {first.negative, false};
  const auto retry = detail::dense_inertia(op, e + eps, eps);
  if (!retry.ok)
    throw NumericError("inertia factorization failed on cluster " + std::to_string(op.cluster_id()) + " (" +
                       std::to_string(op.size()) + " vertices) at E = " + std::to_string(e));
  // Remaining tiny pivots certify eigenvalues within ~eps of E.
  return {retry.negative + retry.tiny, true};
}

/// Spectrum of one cluster operator: the full list when dense, otherwise
/// only the lowest non-zero eigenvalue (by inertia bisection).
struct SpectralSummary {
  std::size_t size = 0;
  Boundary bc = Boundary::neumann;
  std::vector<double> eigenvalues;
  bool full = false;
  /// Lowest non-zero eigenvalue; NaN for an isolated vertex under Neumann.
  double lowest_nonzero = std::numeric_limits<double>::quiet_NaN();
};

/// Smallest E with count_leq(op, E) >= k, to absolute precision `resolution`.
inline double bisect_count(const SymmetricOperator& op, std::size_t k, double lo, double hi, double resolution) {
  while (hi - lo > resolution) {
    const double mid = 0.5 * (lo + hi);
    if (count_leq(op, mid).count >= k)
      hi = mid;
    else
      lo = mid;
  }
  return hi;
}

inline SpectralSummary spectral_summary(const SymmetricOperator& op) {
  SpectralSummary s;
  s.size = op.size();
  s.bc = op.boundary();
  const bool neumann = op.boundary() == Boundary::neumann;
  if (op.size() <= dense_threshold) {
    s.eigenvalues = eigenvalues(op);
    s.full = true;
    if (!neumann)
      s.lowest_nonzero = s.eigenvalues[0];
    else if (s.size >= 2)
      s.lowest_nonzero = s.eigenvalues[1];
    return s;
  }
  const double width = spectral_width(op.dim());
  const double lo = neumann ? zero_tolerance(op.dim()) : 0.0;
  s.lowest_nonzero = bisect_count(op, neumann ? 2 : 1, lo, width, 1e-13 * width);
  return s;
}

/// Energy grid: `points` uniform energies on [0, 4d] plus 4d*2^-k and
/// 4d - 4d*2^-k for k = 1..edge_refinement.
struct GridSpec {
  int points = 512;
  int edge_refinement = 20;
  friend bool operator==(const GridSpec&, const GridSpec&) = default;
};

inline std::vector<double> energy_grid(int dim, const GridSpec& spec = {}) {
  if (spec.points < 2) throw ConfigError("energy grid needs at least 2 points");
  if (spec.edge_refinement < 0) throw ConfigError("energy grid refinement must be >= 0");
  const double width = spectral_width(dim);
  std::vector<double> g;
  g.reserve(static_cast<std::size_t>(spec.points + 2 * spec.edge_refinement));
  for (int i = 0; i < spec.points; ++i) g.push_back(width * i / (spec.points - 1));
  for (int k = 1; k <= spec.edge_refinement; ++k) {
    const double h = std::ldexp(width, -k);
    g.push_back(h);
    g.push_back(width - h);
  }
  std::sort(g.begin(), g.end());
  g.erase(std::unique(g.begin(), g.end()), g.end());
  return g;
}

/// Eigenvalues of all clusters of one realization for one boundary
/// condition. Clusters above the dense threshold contribute counts on the
/// grid instead of eigenvalues.
struct GraphSpectrum {
  std::vector<double> eigenvalues;            // unsorted, dense clusters only
  std::vector<std::uint64_t> large_counts;    // per grid point, empty if no large cluster
  std::uint64_t large_vertices = 0;
  std::uint64_t volume = 0;
  std::size_t cluster_count = 0;
};

inline GraphSpectrum graph_spectrum(const std::vector<Cluster>& parts, std::uint64_t volume, Boundary bc,
                                    const std::vector<double>& grid) {
  GraphSpectrum gs;
  gs.volume = volume;
  gs.cluster_count = parts.size();
  gs.eigenvalues.reserve(static_cast<std::size_t>(volume));
  const double tol = parts.empty() ? 0.0 : zero_tolerance(parts.front().dim());
  for (const auto& c : parts) {
    if (c.size() == 1) {
      gs.eigenvalues.push_back(isolated_vertex_value(bc, c.dim()));
      continue;
    }
    const auto op = assemble(c, bc);
    if (c.size() <= dense_threshold) {
      const auto ev = eigenvalues(op);
      gs.eigenvalues.insert(gs.eigenvalues.end(), ev.begin(), ev.end());
    } else {
      if (gs.large_counts.empty()) gs.large_counts.assign(grid.size(), 0);
      gs.large_vertices += c.size();
      for (std::size_t k = 0; k < grid.size(); ++k) gs.large_counts[k] += count_leq(op, grid[k] + tol).count;
    }
  }
  return gs;
}

/// Right-continuous step function E -> (#eigenvalues <= E) / volume, pooled
/// over clusters and realizations. Eigenvalues within `tolerance` above E
/// count as <= E so rounded atoms stay on the correct side.
class EmpiricalIDS {
public:
  EmpiricalIDS(Boundary bc, int dim, std::vector<double> grid) : bc_(bc), dim_(dim), grid_(std::move(grid)) {
    tolerance_ = zero_tolerance(dim);
  }

  /// Pool realizations as disjoint blocks. Order of `parts` does not affect
  /// the result: the multiset is sorted and counts are summed.
  static EmpiricalIDS pool(Boundary bc, int dim, std::vector<double> grid, const std::vector<GraphSpectrum>& parts) {
    EmpiricalIDS ids(bc, dim, std::move(grid));
    std::size_t total = 0;
    for (const auto& p : parts) total += p.eigenvalues.size();
    ids.eigenvalues_.reserve(total);
    for (const auto& p : parts) {
      ids.eigenvalues_.insert(ids.eigenvalues_.end(), p.eigenvalues.begin(), p.eigenvalues.end());
      ids.volume_ += p.volume;
      ids.cluster_count_ += p.cluster_count;
      if (!p.large_counts.empty()) {
        if (ids.large_counts_.empty()) ids.large_counts_.assign(ids.grid_.size(), 0);
        for (std::size_t k = 0; k < ids.grid_.size(); ++k) ids.large_counts_[k] += p.large_counts[k];
        ids.large_vertices_ += p.large_vertices;
      }
    }
    std::sort(ids.eigenvalues_.begin(), ids.eigenvalues_.end());
    return ids;
  }

  /// Dirichlet IDS from a Neumann one by the spectral reflection
  /// lambda -> 4d - lambda. The Neumann multiset is retained so that
  /// distances to the upper edge are exact.
  static EmpiricalIDS reflect(const EmpiricalIDS& neumann) {
    if (neumann.bc_ != Boundary::neumann) throw DomainError("reflect: expects a Neumann IDS");
    if (neumann.has_large_clusters()) throw DomainError("reflect: IDS contains grid-only large-cluster counts");
    EmpiricalIDS d(Boundary::dirichlet, neumann.dim_, neumann.grid_);
    const double width = spectral_width(neumann.dim_);
    d.eigenvalues_.reserve(neumann.eigenvalues_.size());
    for (auto it = neumann.eigenvalues_.rbegin(); it != neumann.eigenvalues_.rend(); ++it)
      d.eigenvalues_.push_back(width - *it);
    d.mirror_ = neumann.eigenvalues_;
    d.volume_ = neumann.volume_;
    d.cluster_count_ = neumann.cluster_count_;
    return d;
  }

  Boundary boundary() const noexcept { return bc_; }
  int dim() const noexcept { return dim_; }
  std::uint64_t volume() const noexcept { return volume_; }
  std::size_t cluster_count() const noexcept { return cluster_count_; }
  double tolerance() const noexcept { return tolerance_; }
  const std::vector<double>& grid() const noexcept { return grid_; }
  const std::vector<double>& eigenvalues() const noexcept { return eigenvalues_; }
  bool has_large_clusters() const noexcept { return !large_counts_.empty(); }
  bool is_reflection() const noexcept { return !mirror_.empty(); }

  /// N(E). With large clusters present only grid energies are supported.
  double operator()(double e) const {
    if (volume_ == 0) throw DomainError("empty IDS");
    std::uint64_t c = count_sorted_leq(eigenvalues_, e + tolerance_);
    if (has_large_clusters()) {
      const auto it = std::lower_bound(grid_.begin(), grid_.end(), e);
      if (it == grid_.end() || *it != e)
        throw DomainError("IDS with large clusters can only be evaluated on its grid");
      c += large_counts_[static_cast<std::size_t>(it - grid_.begin())];
    }
    return static_cast<double>(c) / static_cast<double>(volume_);
  }

  std::vector<double> grid_values() const {
    std::vector<double> v;
    v.reserve(grid_.size());
    for (double e : grid_) v.push_back((*this)(e));
    return v;
  }

  /// Distances of the eigenvalues to the lower (0) or upper (4d) spectral
  /// edge, ascending. Exact for reflected IDS at the upper edge.
  std::vector<double> edge_distances(bool upper) const {
    if (has_large_clusters()) throw DomainError("edge distances unavailable with grid-only large-cluster counts");
    if (!upper) return eigenvalues_;
    if (is_reflection()) return mirror_;
    const double width = spectral_width(dim_);
    std::vector<double> d;
    d.reserve(eigenvalues_.size());
    for (auto it = eigenvalues_.rbegin(); it != eigenvalues_.rend(); ++it) d.push_back(width - *it);
    return d;
  }

  /// Grid energies lying within the tolerance of a detected eigenvalue.
  std::vector<double> grid_collisions() const {
    std::vector<double> hits;
    for (double e : grid_) {
      const auto it = std::lower_bound(eigenvalues_.begin(), eigenvalues_.end(), e - tolerance_);
      if (it != eigenvalues_.end() && *it <= e + tolerance_) hits.push_back(e);
    }
    return hits;
  }

private:
  Boundary bc_;
  int dim_;
  double tolerance_;
  std::vector<double> grid_;
  std::vector<double> eigenvalues_;
  std::vector<double> mirror_;
  std::vector<std::uint64_t> large_counts_;
  std::uint64_t large_vertices_ = 0;
  std::uint64_t volume_ = 0;
  std::size_t cluster_count_ = 0;
};

inline EmpiricalIDS empirical_ids(const std::vector<PercolationGraph>& graphs, Boundary bc,
                                  const std::vector<double>& grid) {
  if (graphs.empty()) throw DomainError("empirical_ids: no realizations supplied");
  const int dim = graphs.front().box().dim();
  std::vector<GraphSpectrum> parts;
  parts.reserve(graphs.size());
  for (const auto& g : graphs) {
    if (g.box().dim() != dim) throw DomainError("empirical_ids: realizations differ in dimension");
    parts.push_back(graph_spectrum(clusters(g), g.box().vertex_count(), bc, grid));
  }
  return EmpiricalIDS::pool(bc, dim, grid, parts);
}

/// Neumann eigenvalues <= tol, counted by inertia, summed over clusters.
inline std::uint64_t zero_mode_count(const std::vector<Cluster>& parts, double tol) {
  std::uint64_t n = 0;
  for (const auto& c : parts) n += count_leq(assemble(c, Boundary::neumann), tol).count;
  return n;
}

inline double zero_mode_density(const std::vector<PercolationGraph>& graphs, double tol) {
  if (!(tol > 0)) throw DomainError("zero_mode_density: tol must be positive");
  std::uint64_t zeros = 0, volume = 0;
  for (const auto& g : graphs) {
    zeros += zero_mode_count(clusters(g), tol);
    volume += g.box().vertex_count();
  }
  if (volume == 0) throw DomainError("zero_mode_density: no realizations supplied");
  return static_cast<double>(zeros) / static_cast<double>(volume);
}

}  // namespace perclap
