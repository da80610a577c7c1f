#pragma once

// Neumann, Pseudo-Dirichlet and Dirichlet Laplacians of a single cluster.
//
//   Neumann           D - A
//   Pseudo-Dirichlet  2d*1 - A
//   Dirichlet         2d*1 + (2d*1 - D) - A
//
// Entries are exact small integers; floating point only enters in the
// eigensolvers.

#include <cstdint>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "perclap/errors.hpp"
#include "perclap/lattice.hpp"

namespace perclap {

enum class Boundary { neumann, pseudo_dirichlet, dirichlet };

inline constexpr Boundary all_boundaries[] = {Boundary::neumann, Boundary::pseudo_dirichlet,
                                              Boundary::dirichlet};

/// Short tags used in file names and configs: "N", "Dt", "D".
inline std::string_view to_string(Boundary bc) {
  switch (bc) {
    case Boundary::neumann: return "N";
    case Boundary::pseudo_dirichlet: return "Dt";
    case Boundary::dirichlet: return "D";
  }
  return "?";
}

inline Boundary boundary_from_string(std::string_view s) {
  if (s == "N") return Boundary::neumann;
  if (s == "Dt") return Boundary::pseudo_dirichlet;
  if (s == "D") return Boundary::dirichlet;
  throw ConfigError("unknown boundary condition '" + std::string(s) + "' (expected N, Dt or D)");
}

/// Value of the 1x1 operator on an isolated vertex: 0, 2d, 4d.
constexpr int isolated_vertex_value(Boundary bc, int dim) noexcept {
  switch (bc) {
    case Boundary::neumann: return 0;
    case Boundary::pseudo_dirichlet: return 2 * dim;
    case Boundary::dirichlet: return 4 * dim;
  }
  return 0;
}

/// Upper end 4d of the spectral interval.
constexpr double spectral_width(int dim) noexcept { return 4.0 * dim; }

/// Symmetric operator of one cluster for one boundary condition, stored as
/// the integer diagonal plus the edge list (each edge is a -1 pair).
class SymmetricOperator {
public:
  SymmetricOperator(Boundary bc, int dim, std::size_t cluster_id, std::vector<int> diagonal,
                    std::vector<LocalEdge> edges)
      : bc_(bc), dim_(dim), cluster_id_(cluster_id), diagonal_(std::move(diagonal)), edges_(std::move(edges)) {}

  Boundary boundary() const noexcept { return bc_; }
  int dim() const noexcept { return dim_; }
  std::size_t cluster_id() const noexcept { return cluster_id_; }
  std::size_t size() const noexcept { return diagonal_.size(); }
  const std::vector<int>& diagonal() const noexcept { return diagonal_; }
  const std::vector<LocalEdge>& edges() const noexcept { return edges_; }

  std::int64_t trace() const noexcept {
    std::int64_t t = 0;
    for (int v : diagonal_) t += v;
    return t;
  }

  Eigen::MatrixXi dense_int() const {
    const auto n = static_cast<Eigen::Index>(size());
    Eigen::MatrixXi m = Eigen::MatrixXi::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) m(i, i) = diagonal_[static_cast<std::size_t>(i)];
    for (const auto& e : edges_) {
      m(e.i, e.j) = -1;
      m(e.j, e.i) = -1;
    }
    return m;
  }

  Eigen::MatrixXd dense() const { return dense_int().cast<double>(); }

  Eigen::SparseMatrix<double> sparse() const {
    std::vector<Eigen::Triplet<double>> t;
    t.reserve(size() + 2 * edges_.size());
    for (std::size_t i = 0; i < size(); ++i)
      t.emplace_back(static_cast<int>(i), static_cast<int>(i), diagonal_[i]);
    for (const auto& e : edges_) {
      t.emplace_back(static_cast<int>(e.i), static_cast<int>(e.j), -1.0);
      t.emplace_back(static_cast<int>(e.j), static_cast<int>(e.i), -1.0);
    }
    const auto n = static_cast<Eigen::Index>(size());
    Eigen::SparseMatrix<double> m(n, n);
    m.setFromTriplets(t.begin(), t.end());
    return m;
  }

  /// y = M x
  Eigen::VectorXd apply(const Eigen::VectorXd& x) const {
    Eigen::VectorXd y(x.size());
    for (std::size_t i = 0; i < size(); ++i) y[static_cast<Eigen::Index>(i)] = diagonal_[i] * x[static_cast<Eigen::Index>(i)];
    for (const auto& e : edges_) {
      y[e.i] -= x[e.j];
      y[e.j] -= x[e.i];
    }
    return y;
  }

  /// Debug dump as dense CSV, one matrix row per line.
  void write_csv(std::ostream& os) const {
    const auto m = dense_int();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      for (Eigen::Index j = 0; j < m.cols(); ++j) os << (j ? "," : "") << m(i, j);
      os << '\n';
    }
  }

private:
  Boundary bc_;
  int dim_;
  std::size_t cluster_id_;
  std::vector<int> diagonal_;
  std::vector<LocalEdge> edges_;
};

inline SymmetricOperator assemble(const Cluster& cluster, Boundary bc) {
  const int two_d = 2 * cluster.dim();
  std::vector<int> diag(cluster.size());
  for (std::size_t i = 0; i < cluster.size(); ++i) {
    const int deg = cluster.degree(i);
    switch (bc) {
      case Boundary::neumann: diag[i] = deg; break;
      case Boundary::pseudo_dirichlet: diag[i] = two_d; break;
      case Boundary::dirichlet: diag[i] = two_d + (two_d - deg); break;
    }
  }
  return SymmetricOperator(bc, cluster.dim(), cluster.id(), std::move(diag), cluster.edges());
}

/// 4d*1 - U M U with U the sign involution (-1)^(sum |x_nu|); applied to the
/// Neumann operator this reproduces the Dirichlet one exactly.
inline Eigen::MatrixXi reflect_by_sign_involution(const Cluster& cluster, const SymmetricOperator& op) {
  Eigen::MatrixXi m = op.dense_int();
  const auto n = m.rows();
  const int width = 4 * cluster.dim();
  Eigen::MatrixXi out(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      const int u = cluster.parity_sign(static_cast<std::size_t>(i)) * cluster.parity_sign(static_cast<std::size_t>(j));
      out(i, j) = (i == j ? width : 0) - u * m(i, j);
    }
  return out;
}

/// <phi, Delta_N phi> evaluated as a sum over edges of |phi(x) - phi(y)|^2.
inline double neumann_edge_form(const Cluster& cluster, const Eigen::VectorXd& phi) {
  double s = 0.0;
  for (const auto& e : cluster.edges()) {
    const double diff = phi[e.i] - phi[e.j];
    s += diff * diff;
  }
  return s;
}

}  // namespace perclap
