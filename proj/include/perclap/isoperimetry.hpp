#pragma once

// Isoperimetric lower bounds (Cheeger, crude Cheeger, Faber-Krahn) and the
// variational upper bounds for linear and cubic clusters, checked against
// computed lowest non-zero eigenvalues.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "perclap/errors.hpp"
#include "perclap/laplacian.hpp"
#include "perclap/lattice.hpp"
#include "perclap/spectral.hpp"

namespace perclap {

/// Largest cluster handled by the exhaustive Cheeger search (2^20 subsets).
inline constexpr std::size_t cheeger_exhaustive_cutoff = 20;

/// Exact non-negative fraction num/den in lowest terms.
struct Rational {
  std::int64_t num = 0;
  std::int64_t den = 1;

  static Rational make(std::int64_t n, std::int64_t d) {
    const auto g = std::gcd(n, d);
    return g == 0 ? Rational{0, 1} : Rational{n / g, d / g};
  }
  double to_double() const noexcept { return static_cast<double>(num) / static_cast<double>(den); }

  friend bool operator==(const Rational&, const Rational&) = default;
  friend bool operator<(const Rational& a, const Rational& b) noexcept { return a.num * b.den < b.num * a.den; }
};

/// min over vertex subsets W with 1 <= |W| <= |V|/2 of |boundary edges(W)| / |W|.
/// Subsets are visited in Gray-code order so each step updates the boundary
/// count from a single vertex flip.
inline Rational cheeger_constant(const Cluster& cluster) {
  const auto n = cluster.size();
  if (n < 2) throw DomainError("cheeger_constant: cluster needs at least 2 vertices");
  if (n > cheeger_exhaustive_cutoff)
    throw UnsupportedSizeError("cheeger_constant: " + std::to_string(n) + " vertices exceeds exhaustive cutoff " +
                               std::to_string(cheeger_exhaustive_cutoff));
  std::vector<std::uint32_t> nbr(n, 0);
  for (const auto& e : cluster.edges()) {
    nbr[e.i] |= std::uint32_t{1} << e.j;
    nbr[e.j] |= std::uint32_t{1} << e.i;
  }
  std::uint32_t w = 0;
  std::int64_t boundary = 0;
  std::int64_t count = 0;
  std::optional<Rational> best;
  const std::uint64_t total = std::uint64_t{1} << n;
  for (std::uint64_t step = 1; step < total; ++step) {
    const int v = std::countr_zero(step);
    const std::uint32_t bit = std::uint32_t{1} << v;
    const std::int64_t deg = cluster.degree(static_cast<std::size_t>(v));
    if (w & bit) {
      w &= ~bit;
      boundary -= deg - 2 * std::popcount(nbr[static_cast<std::size_t>(v)] & w);
      --count;
    } else {
      boundary += deg - 2 * std::popcount(nbr[static_cast<std::size_t>(v)] & w);
      w |= bit;
      ++count;
    }
    if (2 * count <= static_cast<std::int64_t>(n)) {
      const Rational r{boundary, count};
      if (!best || r < *best) best = r;
    }
  }
  return Rational::make(best->num, best->den);
}

namespace detail {

inline double lowest_nonzero(const Cluster& cluster, Boundary bc) {
  return spectral_summary(assemble(cluster, bc)).lowest_nonzero;
}

}  // namespace detail

/// E1_N - h_Ch^2 / (4d); non-negative by the Cheeger inequality.
inline double check_cheeger(const Cluster& cluster) {
  const double h = cheeger_constant(cluster).to_double();
  return detail::lowest_nonzero(cluster, Boundary::neumann) - h * h / spectral_width(cluster.dim());
}

/// E1_N - 1/(d |V|^2); valid for clusters of any size.
inline double crude_cheeger_bound(const Cluster& cluster) {
  const double n = static_cast<double>(cluster.size());
  return 1.0 / (cluster.dim() * n * n);
}

inline double check_crude_cheeger(const Cluster& cluster) {
  if (cluster.size() < 2) throw DomainError("check_crude_cheeger: cluster needs at least 2 vertices");
  return detail::lowest_nonzero(cluster, Boundary::neumann) - crude_cheeger_bound(cluster);
}

/// E1_Dt * |V|^(2/d)
inline double fk_ratio(const Cluster& cluster) {
  if (cluster.size() < 2) throw DomainError("fk_ratio: isolated vertices are excluded");
  return detail::lowest_nonzero(cluster, Boundary::pseudo_dirichlet) *
         std::pow(static_cast<double>(cluster.size()), 2.0 / cluster.dim());
}

/// Minimum Faber-Krahn ratio over the clusters with at least 2 vertices.
inline double estimate_fk_constant(const std::vector<Cluster>& population) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& c : population)
    if (c.size() >= 2) best = std::min(best, fk_ratio(c));
  if (std::isinf(best)) throw DomainError("estimate_fk_constant: no cluster with at least 2 vertices");
  return best;
}

/// 12/n^2 - E1_N(L_n)
inline double linear_bound_check(std::int64_t n, int dim) {
  const auto path = make_linear_cluster(n, dim);
  return 12.0 / static_cast<double>(n * n) - detail::lowest_nonzero(path, Boundary::neumann);
}

/// 27d/l^2 - E1_D(Q_l)
inline double cubic_bound_check(std::int64_t l, int dim) {
  const auto cube = make_cubic_cluster(l, dim);
  return 27.0 * dim / static_cast<double>(l * l) - detail::lowest_nonzero(cube, Boundary::dirichlet);
}

struct IsoperimetryReport {
  std::size_t cluster_id = 0;
  std::size_t size = 0;
  double e1_n = 0, e1_dt = 0, e1_d = 0;
  std::optional<Rational> h_ch;
  std::optional<double> cheeger_margin;
  double crude_margin = 0;
  double fk_ratio = 0;
};

/// Full report for a cluster with |V| >= 2; the Cheeger constant is only
/// computed up to `exhaustive_limit` vertices.
inline IsoperimetryReport isoperimetry_report(const Cluster& cluster,
                                              std::size_t exhaustive_limit = cheeger_exhaustive_cutoff) {
  if (cluster.size() < 2) throw DomainError("isoperimetry_report: cluster needs at least 2 vertices");
  IsoperimetryReport r;
  r.cluster_id = cluster.id();
  r.size = cluster.size();
  r.e1_n = detail::lowest_nonzero(cluster, Boundary::neumann);
  r.e1_dt = detail::lowest_nonzero(cluster, Boundary::pseudo_dirichlet);
  r.e1_d = detail::lowest_nonzero(cluster, Boundary::dirichlet);
  if (cluster.size() <= std::min(exhaustive_limit, cheeger_exhaustive_cutoff)) {
    r.h_ch = cheeger_constant(cluster);
    const double h = r.h_ch->to_double();
    r.cheeger_margin = r.e1_n - h * h / spectral_width(cluster.dim());
  }
  r.crude_margin = r.e1_n - crude_cheeger_bound(cluster);
  r.fk_ratio = r.e1_dt * std::pow(static_cast<double>(cluster.size()), 2.0 / cluster.dim());
  return r;
}

inline constexpr const char* isoperimetry_csv_header = "size,e1_N,e1_Dt,e1_D,h_ch,cheeger_margin,crude_margin,fk_ratio";

}  // namespace perclap
