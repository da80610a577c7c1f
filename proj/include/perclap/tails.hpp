#pragma once

// Lifshits-tail exponent estimation: the exact one-dimensional IDS series,
// double-log regressions at both spectral edges, and the exponential decay
// of the cluster-size distribution.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "perclap/errors.hpp"
#include "perclap/laplacian.hpp"
#include "perclap/lattice.hpp"
#include "perclap/rng.hpp"
#include "perclap/spectral.hpp"

namespace perclap {

enum class SpectralEdge { lower, upper };

inline std::string_view to_string(SpectralEdge e) { return e == SpectralEdge::lower ? "lower" : "upper"; }

/// Limit of ln|ln(tail mass)| / ln(distance to edge).
inline double expected_tail_slope(Boundary bc, SpectralEdge edge, int dim) {
  const bool linear_clusters_dominate =
      (edge == SpectralEdge::lower && bc == Boundary::neumann) || (edge == SpectralEdge::upper && bc == Boundary::dirichlet);
  return linear_clusters_dominate ? -0.5 : -0.5 * dim;
}

// ---------------------------------------------------------------------------
// Path-graph spectra

/// k-th Neumann eigenvalue of the n-vertex path, k = 0..n-1.
inline double path_neumann_eigenvalue(std::int64_t n, std::int64_t k) {
  return 2.0 * (1.0 - std::cos(std::numbers::pi * static_cast<double>(k) / static_cast<double>(n)));
}

/// k-th Pseudo-Dirichlet eigenvalue of the n-vertex path, k = 1..n.
inline double path_pseudo_dirichlet_eigenvalue(std::int64_t n, std::int64_t k) {
  return 2.0 - 2.0 * std::cos(std::numbers::pi * static_cast<double>(k) / static_cast<double>(n + 1));
}

namespace detail {

// Eigenvalues within this distance above E count as <= E; the closed forms
// put exact atoms such as 2(1 - cos(pi/3)) = 1 a few ulps off.
inline constexpr double closed_form_slack = 1e-13;

// #{k in [1, kmax] : eig(k) <= e} for an eigenvalue increasing in k, seeded
// by the arccos inversion and corrected against the direct formula.
template <class Eig>
std::int64_t count_increasing(std::int64_t kmax, double period, double e, Eig eig) {
  if (e < 0) return 0;
  e += closed_form_slack;
  const double guess = e >= 4.0 ? static_cast<double>(kmax) : period * std::acos(1.0 - 0.5 * e) / std::numbers::pi;
  auto k = std::clamp<std::int64_t>(static_cast<std::int64_t>(std::floor(guess)), 0, kmax);
  while (k < kmax && eig(k + 1) <= e) ++k;
  while (k > 0 && eig(k) > e) --k;
  return k;
}

}  // namespace detail

/// Non-zero Neumann eigenvalues of the n-vertex path that are <= e.
inline std::int64_t path_neumann_count(std::int64_t n, double e) {
  return detail::count_increasing(n - 1, static_cast<double>(n), e,
                                  [n](std::int64_t k) { return path_neumann_eigenvalue(n, k); });
}

/// Pseudo-Dirichlet eigenvalues of the n-vertex path that are <= e.
inline std::int64_t path_pseudo_dirichlet_count(std::int64_t n, double e) {
  return detail::count_increasing(n, static_cast<double>(n + 1), e,
                                  [n](std::int64_t k) { return path_pseudo_dirichlet_eigenvalue(n, k); });
}

// ---------------------------------------------------------------------------
// One-dimensional series
//
// In d = 1 every cluster is a path, and a given site heads an n-vertex
// cluster with probability (1-p)^2 p^(n-1). Hence
//   N_X(E) - N_X(0) = sum_n (1-p)^2 p^(n-1) c_n(E)
// with c_n(E) the number of non-zero path eigenvalues <= E.

/// Truncation: smallest n with p^n < 1e-16, and at least 4*pi/sqrt(e_min).
inline std::int64_t series_truncation(double p, double e_min) {
  const auto by_mass = static_cast<std::int64_t>(std::ceil(std::log(1e-16) / std::log(p)));
  const auto by_energy = static_cast<std::int64_t>(std::ceil(4.0 * std::numbers::pi / std::sqrt(e_min)));
  return std::max({by_mass, by_energy, std::int64_t{2}});
}

namespace detail {

inline std::int64_t series_count(Boundary bc, std::int64_t n, double e) {
  switch (bc) {
    case Boundary::neumann: return path_neumann_count(n, e);
    case Boundary::pseudo_dirichlet: return path_pseudo_dirichlet_count(n, e);
    case Boundary::dirichlet: return path_neumann_count(n, e) + (e >= 4.0 ? 1 : 0);
  }
  return 0;
}

}  // namespace detail

/// ln(N_X(E) - N_X(0)) for d = 1, evaluated by log-sum-exp so that values far
/// below the double range stay representable. -inf when no path with at most
/// n_max vertices has a non-zero eigenvalue <= E.
inline double ids_1d_series_log(double p, double e, Boundary bc, std::int64_t n_max) {
  if (!(p > 0 && p < 1)) throw DomainError("ids_1d_series: p must lie in (0,1)");
  if (!(e > 0 && e <= 4)) throw DomainError("ids_1d_series: E must lie in (0,4]");
  if (n_max < 1) throw DomainError("ids_1d_series: n_max must be >= 1");
  const double log_p = std::log(p);
  const double log_head = 2.0 * std::log1p(-p);
  double top = -std::numeric_limits<double>::infinity();
  double acc = 0.0;
  for (std::int64_t n = 1; n <= n_max; ++n) {
    const auto c = detail::series_count(bc, n, e);
    if (c == 0) continue;
    const double term = log_head + static_cast<double>(n - 1) * log_p + std::log(static_cast<double>(c));
    if (term > top) {
      acc = acc * std::exp(top - term) + 1.0;
      top = term;
    } else {
      acc += std::exp(term - top);
    }
  }
  if (std::isinf(top)) return top;
  const double value = top + std::log(acc);
  // Neglected mass: sum_{n > n_max} n (1-p)^2 p^(n-1) = p^n_max (n_max (1-p) + 1).
  const double log_bound = static_cast<double>(n_max) * log_p + std::log(static_cast<double>(n_max) * (1 - p) + 1);
  if (log_bound - value > std::log(1e-10))
    throw PrecisionError("ids_1d_series: truncation at n_max = " + std::to_string(n_max) +
                             " leaves a tail bound too large relative to the value",
                         std::exp(log_bound));
  return value;
}

/// N_X(E) - N_X(0) for d = 1 (bc in {N, Dt, D}).
inline double ids_1d_series(double p, double e, Boundary bc, std::int64_t n_max) {
  const double v = ids_1d_series_log(p, e, bc, n_max);
  return std::isinf(v) ? 0.0 : std::exp(v);
}

// ---------------------------------------------------------------------------
// Tail regressions

struct TailWindow {
  double e_min = 1e-8;
  double e_max = 1e-3;
  int points = 41;
  friend bool operator==(const TailWindow&, const TailWindow&) = default;
};

/// Tail mass at distance t from the spectral edge, as a natural log.
struct TailSample {
  double distance;
  double log_mass;
};

struct TailFit {
  Boundary bc = Boundary::neumann;
  SpectralEdge edge = SpectralEdge::lower;
  int dim = 1;
  TailWindow window;
  double slope = 0;
  double intercept = 0;
  double residual = 0;
  std::size_t points = 0;
  double expected_slope = 0;
};

inline std::vector<double> log_spaced(double lo, double hi, int n) {
  std::vector<double> v;
  v.reserve(static_cast<std::size_t>(n));
  const double a = std::log(lo), b = std::log(hi);
  for (int i = 0; i < n; ++i) v.push_back(std::exp(a + (b - a) * i / (n - 1)));
  v.front() = lo;
  v.back() = hi;
  return v;
}

inline void validate_window(const TailWindow& w, int dim) {
  if (!(w.e_min > 0 && w.e_min < w.e_max && w.e_max < spectral_width(dim)))
    throw DomainError("tail window must satisfy 0 < e_min < e_max < 4d");
  if (w.points < 8) throw DomainError("tail window needs at least 8 points");
}

/// Least-squares slope of ln(-ln mass) against ln t over samples whose mass
/// lies in (floor, 1).
inline TailFit fit_tail_samples(const std::vector<TailSample>& samples, double log_floor) {
  std::vector<double> xs, ys;
  for (const auto& s : samples) {
    if (!(s.log_mass > log_floor && s.log_mass < 0.0) || !std::isfinite(s.log_mass)) continue;
    xs.push_back(std::log(s.distance));
    ys.push_back(std::log(-s.log_mass));
  }
  if (xs.size() < 8)
    throw InsufficientDataError("tail fit: only " + std::to_string(xs.size()) +
                                " points above the floor (need 8)");
  const double n = static_cast<double>(xs.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  TailFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double ss = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double r = ys[i] - (f.intercept + f.slope * xs[i]);
    ss += r * r;
  }
  f.residual = std::sqrt(ss / n);
  f.points = xs.size();
  return f;
}

/// Tail fit on the exact d = 1 series. Every d = 1 tail reduces to one of
/// two path counts: Pseudo-Dirichlet at either edge, or non-zero Neumann
/// eigenvalues (Neumann lower, and by reflection Dirichlet upper, Neumann
/// upper and Dirichlet lower).
inline TailFit fit_tail_analytic(double p, Boundary bc, SpectralEdge edge, const TailWindow& window) {
  validate_window(window, 1);
  const Boundary counted = bc == Boundary::pseudo_dirichlet ? Boundary::pseudo_dirichlet : Boundary::neumann;
  const auto n_max = series_truncation(p, window.e_min);
  std::vector<TailSample> samples;
  for (double t : log_spaced(window.e_min, window.e_max, window.points))
    samples.push_back({t, ids_1d_series_log(p, t, counted, n_max)});
  auto f = fit_tail_samples(samples, -std::numeric_limits<double>::infinity());
  f.bc = bc;
  f.edge = edge;
  f.dim = 1;
  f.window = window;
  f.expected_slope = expected_tail_slope(bc, edge, 1);
  return f;
}

/// Tail mass #{tol < distance <= t} / volume from an empirical IDS; points
/// below 10/volume are discarded.
inline TailFit fit_tail(const EmpiricalIDS& ids, SpectralEdge edge, const TailWindow& window) {
  validate_window(window, ids.dim());
  const auto dist = ids.edge_distances(edge == SpectralEdge::upper);
  const auto atoms = count_sorted_leq(dist, ids.tolerance());
  const double volume = static_cast<double>(ids.volume());
  std::vector<TailSample> samples;
  for (double t : log_spaced(window.e_min, window.e_max, window.points)) {
    const auto c = count_sorted_leq(dist, t);
    const double mass = c > atoms ? static_cast<double>(c - atoms) / volume : 0.0;
    samples.push_back({t, mass > 0 ? std::log(mass) : -std::numeric_limits<double>::infinity()});
  }
  auto f = fit_tail_samples(samples, std::log(10.0 / volume));
  f.bc = ids.boundary();
  f.edge = edge;
  f.dim = ids.dim();
  f.window = window;
  f.expected_slope = expected_tail_slope(ids.boundary(), edge, ids.dim());
  return f;
}

/// Pseudo-Dirichlet IDS against the Neumann tail mass N_N(E) - N_N(0) on
/// the grid energies in (0, e_max]. A faster-vanishing Pseudo-Dirichlet tail
/// (exponent d/2 > 1/2) keeps it below.
struct TailOrdering {
  bool ok = true;
  std::size_t points = 0;
  double worst_gap = -std::numeric_limits<double>::infinity();  // max of Dt - (N - N0)
};

inline TailOrdering tail_ordering_check(const EmpiricalIDS& neumann, const EmpiricalIDS& pseudo_dirichlet,
                                        double e_max) {
  TailOrdering r;
  const double n0 = neumann(0.0);
  for (double e : neumann.grid()) {
    if (!(e > 0 && e <= e_max)) continue;
    const double gap = pseudo_dirichlet(e) - (neumann(e) - n0);
    r.worst_gap = std::max(r.worst_gap, gap);
    if (gap > 0) r.ok = false;
    ++r.points;
  }
  return r;
}

// ---------------------------------------------------------------------------
// Cluster-size decay

struct DecayFit {
  int dim = 1;
  double p = 0;
  std::size_t samples = 0;
  std::int64_t box_side = 0;
  /// survival[n-1] = P(|V_0| >= n)
  std::vector<double> survival;
  /// Per-cluster size survival: fraction of clusters with at least n
  /// vertices, from the origin samples reweighted by 1/|V_0|.
  std::vector<double> cluster_survival;
  double zeta_hat = 0;
  double r2 = 0;
  std::size_t fit_min_n = 0, fit_max_n = 0;
  /// Samples whose cluster reached the box boundary.
  std::size_t truncated = 0;
};

inline std::int64_t default_decay_box_side(int dim) {
  switch (dim) {
    case 1: return 4001;
    case 2: return 257;
    default: return 65;
  }
}

/// Grows the cluster of the box centre for each sample (edges drawn lazily
/// from the counter stream keyed by derive_seed(seed, sample)) and fits
///   ln(cluster_survival(n)) ~ -zeta n
/// by least squares weighted with #{samples with |V_0| >= n}. The window is
/// [max(2, n_hi/5), n_hi] with n_hi the largest n having at least 50 such
/// samples.
inline DecayFit cluster_size_decay(int dim, double p, std::size_t samples, std::uint64_t seed,
                                   std::int64_t box_side = 0) {
  if (!(p > 0 && p < 1)) throw DomainError("cluster_size_decay: p must lie in (0,1)");
  if ((dim == 2 && p >= 0.4) || (dim == 3 && p >= 0.2) || dim > 3 || dim < 1)
    throw DomainError("cluster_size_decay: requires p < 0.4 (d=2), p < 0.2 (d=3), 1 <= d <= 3");
  if (samples == 0) throw DomainError("cluster_size_decay: samples must be positive");
  if (box_side <= 0) box_side = default_decay_box_side(dim);
  const LatticeBox box(dim, box_side);
  std::vector<std::int64_t> centre(static_cast<std::size_t>(dim), box_side / 2);
  const auto origin = box.index(centre);

  DecayFit fit;
  fit.dim = dim;
  fit.p = p;
  fit.samples = samples;
  fit.box_side = box_side;

  std::vector<std::uint32_t> stamp(static_cast<std::size_t>(box.vertex_count()), 0);
  std::vector<std::uint64_t> histogram(2, 0);
  std::vector<std::uint64_t> queue;
  for (std::size_t s = 0; s < samples; ++s) {
    const auto key = derive_seed(seed, s);
    const auto mark = static_cast<std::uint32_t>(s + 1);
    queue.assign(1, origin);
    stamp[origin] = mark;
    bool touched = false;
    for (std::size_t head = 0; head < queue.size(); ++head) {
      const auto v = queue[head];
      for (int a = 0; a < dim; ++a) {
        const auto x = box.coordinate(v, a);
        if (x == 0 || x == box_side - 1) touched = true;
        const auto stride = box.stride(a);
        if (x + 1 < box_side && counter_uniform(key, box.edge_index(v, a)) < p && stamp[v + stride] != mark) {
          stamp[v + stride] = mark;
          queue.push_back(v + stride);
        }
        if (x > 0 && counter_uniform(key, box.edge_index(v - stride, a)) < p && stamp[v - stride] != mark) {
          stamp[v - stride] = mark;
          queue.push_back(v - stride);
        }
      }
    }
    if (touched) ++fit.truncated;
    if (queue.size() >= histogram.size()) histogram.resize(queue.size() + 1, 0);
    ++histogram[queue.size()];
  }

  const std::size_t nmax = histogram.size() - 1;
  std::vector<std::uint64_t> at_least(nmax + 2, 0);
  std::vector<double> inv_weight(nmax + 2, 0.0);
  for (std::size_t n = nmax; n >= 1; --n) {
    at_least[n] = at_least[n + 1] + histogram[n];
    inv_weight[n] = inv_weight[n + 1] + static_cast<double>(histogram[n]) / static_cast<double>(n);
  }
  for (std::size_t n = 1; n <= nmax; ++n) {
    fit.survival.push_back(static_cast<double>(at_least[n]) / static_cast<double>(samples));
    fit.cluster_survival.push_back(inv_weight[n] / inv_weight[1]);
  }

  double sw = 0, sx = 0, sy = 0;
  std::vector<std::size_t> used;
  std::size_t n_hi = 0;
  while (n_hi < nmax && at_least[n_hi + 1] >= 50) ++n_hi;
  // The small-n region carries the sub-exponential prefactor; the rate is
  // read off the upper four fifths of the resolved range.
  const std::size_t n_lo = std::max<std::size_t>(2, (n_hi + 4) / 5);
  for (std::size_t n = n_lo; n <= n_hi; ++n) used.push_back(n);
  if (used.size() < 3) throw InsufficientDataError("cluster_size_decay: fewer than 3 sizes in the fit window");
  for (auto n : used) {
    const double w = static_cast<double>(at_least[n]);
    sw += w;
    sx += w * static_cast<double>(n);
    sy += w * std::log(fit.cluster_survival[n - 1]);
  }
  const double mx = sx / sw, my = sy / sw;
  double sxx = 0, sxy = 0, syy = 0;
  for (auto n : used) {
    const double w = static_cast<double>(at_least[n]);
    const double dx = static_cast<double>(n) - mx, dy = std::log(fit.cluster_survival[n - 1]) - my;
    sxx += w * dx * dx;
    sxy += w * dx * dy;
    syy += w * dy * dy;
  }
  fit.zeta_hat = -sxy / sxx;
  fit.r2 = syy > 0 ? (sxy * sxy) / (sxx * syy) : 1.0;
  fit.fit_min_n = used.front();
  fit.fit_max_n = used.back();
  return fit;
}

}  // namespace perclap
