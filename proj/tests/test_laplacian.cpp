#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "perclap/laplacian.hpp"
#include "perclap/spectral.hpp"
#include "perclap/symmetry.hpp"

using namespace perclap;

namespace {

Cluster isolated_vertex(int dim) {
  return Cluster(dim, std::vector<std::int64_t>(static_cast<std::size_t>(dim), 0), {0}, {});
}

std::vector<Cluster> sampled_clusters(int dim, std::int64_t side, double p, int graphs, std::uint64_t seed) {
  std::vector<Cluster> out;
  const LatticeBox box(dim, side);
  for (int g = 0; g < graphs; ++g)
    for (auto& c : clusters(sample_graph(box, p, derive_seed(seed, g)))) out.push_back(std::move(c));
  return out;
}

}  // namespace

TEST(Assemble, EdgeMatrices) {
  const auto l2 = make_linear_cluster(2, 1);
  Eigen::MatrixXi n(2, 2), dt(2, 2), d(2, 2);
  n << 1, -1, -1, 1;
  dt << 2, -1, -1, 2;
  d << 3, -1, -1, 3;
  EXPECT_EQ(assemble(l2, Boundary::neumann).dense_int(), n);
  EXPECT_EQ(assemble(l2, Boundary::pseudo_dirichlet).dense_int(), dt);
  EXPECT_EQ(assemble(l2, Boundary::dirichlet).dense_int(), d);
}

TEST(Assemble, IsolatedVertex) {
  const auto v = isolated_vertex(2);
  EXPECT_EQ(assemble(v, Boundary::pseudo_dirichlet).diagonal(), std::vector<int>{4});
  EXPECT_EQ(assemble(v, Boundary::neumann).diagonal(), std::vector<int>{0});
  EXPECT_EQ(assemble(v, Boundary::dirichlet).diagonal(), std::vector<int>{8});
}

TEST(Assemble, BoundaryNames) {
  for (auto bc : all_boundaries) EXPECT_EQ(boundary_from_string(to_string(bc)), bc);
  EXPECT_THROW(boundary_from_string("X"), ConfigError);
}

TEST(Assemble, TraceIdentities) {
  for (int dim = 1; dim <= 3; ++dim)
    for (const auto& c : sampled_clusters(dim, dim == 1 ? 300 : 9, 0.4, 5, 3)) {
      const auto edges = static_cast<std::int64_t>(c.edges().size());
      const auto n = static_cast<std::int64_t>(c.size());
      EXPECT_EQ(assemble(c, Boundary::neumann).trace(), 2 * edges);
      EXPECT_EQ(assemble(c, Boundary::neumann).trace(), c.degree_sum());
      EXPECT_EQ(assemble(c, Boundary::pseudo_dirichlet).trace(), 2 * dim * n);
      EXPECT_EQ(assemble(c, Boundary::dirichlet).trace(), 4 * dim * n - 2 * edges);
    }
}

TEST(Assemble, QuadraticFormMatchesEdgeSum) {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> gauss;
  const auto parts = sampled_clusters(2, 20, 0.45, 3, 8);
  const Cluster* big = &parts.front();
  for (const auto& c : parts)
    if (c.size() > big->size()) big = &c;
  ASSERT_GE(big->size(), 5u);
  const auto op = assemble(*big, Boundary::neumann);
  for (int t = 0; t < 100; ++t) {
    Eigen::VectorXd phi(static_cast<Eigen::Index>(big->size()));
    for (auto& x : phi) x = gauss(rng);
    const double form = phi.dot(op.apply(phi));
    const double edge_sum = neumann_edge_form(*big, phi);
    EXPECT_NEAR(form, edge_sum, 1e-10 * std::abs(edge_sum));
  }
}

TEST(Assemble, ConstantVectorIsNeumannZeroMode) {
  for (const auto& c : sampled_clusters(3, 7, 0.3, 3, 21)) {
    const auto op = assemble(c, Boundary::neumann);
    const Eigen::VectorXd one = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(c.size()));
    EXPECT_LT(op.apply(one).norm(), 1e-12 * static_cast<double>(c.size()));
  }
}

TEST(Assemble, SignInvolutionReproducesDirichletExactly) {
  for (int dim = 1; dim <= 3; ++dim)
    for (const auto& c : sampled_clusters(dim, dim == 1 ? 200 : 8, 0.4, 4, 5)) {
      if (c.size() > 300) continue;
      EXPECT_EQ(reflect_by_sign_involution(c, assemble(c, Boundary::neumann)),
                assemble(c, Boundary::dirichlet).dense_int());
    }
}

TEST(Reflection, HandExamples) {
  const auto r = reflection_check(make_linear_cluster(2, 1), 1e-12);
  EXPECT_TRUE(r.ok);
  EXPECT_LT(r.max_deviation, 1e-14);
  const auto v = reflection_check(isolated_vertex(3), 1e-12);
  EXPECT_TRUE(v.ok);
  EXPECT_EQ(v.max_deviation, 0.0);
  EXPECT_THROW(reflection_check(isolated_vertex(1), 0.0), DomainError);
}

TEST(Reflection, SampledClusters) {
  for (int dim = 1; dim <= 3; ++dim)
    for (const auto& c : sampled_clusters(dim, dim == 1 ? 500 : 10, 0.3, 4, 9)) {
      if (c.size() > 200) continue;
      const auto r = reflection_check(c, 1e-9);
      EXPECT_TRUE(r.ok) << "size " << c.size() << " dev " << r.max_deviation;
    }
}

TEST(Chain, HandExamples) {
  const auto l2 = make_linear_cluster(2, 1);
  EXPECT_EQ(chain_counts(l2, 1.0), (ChainCounts{1, 1, 0}));
  const auto q = make_cubic_cluster(3, 2);
  EXPECT_EQ(chain_counts(q, 8.0), (ChainCounts{9, 9, 9}));
  EXPECT_EQ(chain_counts(q, -0.5), (ChainCounts{0, 0, 0}));
  EXPECT_THROW(chain_check(l2, {}, 1e-9), DomainError);
}

TEST(Chain, SampledClustersOnGrid) {
  for (int dim = 1; dim <= 3; ++dim) {
    const auto grid = energy_grid(dim);
    for (const auto& c : sampled_clusters(dim, dim == 1 ? 400 : 9, 0.3, 3, 14)) {
      const auto r = chain_check(c, grid, 1e-9);
      EXPECT_TRUE(r.ok);
      EXPECT_FALSE(r.out_of_range);
    }
  }
}

TEST(Spectrum, NoZeroInDirichletFamilies) {
  for (const auto& c : sampled_clusters(2, 12, 0.35, 5, 31)) {
    EXPECT_GT(eigenvalues(assemble(c, Boundary::pseudo_dirichlet)).front(), 1e-9);
    EXPECT_GT(eigenvalues(assemble(c, Boundary::dirichlet)).front(), 1e-9);
    const auto n = eigenvalues(assemble(c, Boundary::neumann));
    EXPECT_LT(std::abs(n.front()), 1e-9);
    if (n.size() > 1) EXPECT_GT(n[1], 1e-9);
  }
}

// Cutting the edges that cross a hyperplane lowers the Neumann form and
// raises the Dirichlet one (each cut edge adds [[1,1],[1,1]] >= 0), so pooled
// eigenvalue counts move in opposite directions.
TEST(Split, CountsMoveOppositeWays) {
  for (int dim = 1; dim <= 3; ++dim) {
    const LatticeBox box(dim, dim == 1 ? 60 : (dim == 2 ? 12 : 6));
    for (double p : {1.0, 0.45}) {
      const auto whole = sample_graph(box, p, 4);
      std::vector<Edge> kept;
      for (const auto& e : whole.open_edges())
        if ((box.coordinate(e.u, 0) < box.side() / 2) == (box.coordinate(e.v, 0) < box.side() / 2)) kept.push_back(e);
      if (p == 1.0) ASSERT_LT(kept.size(), whole.open_edges().size());
      const PercolationGraph split(box, p, 4, kept);
      const auto a = clusters(whole), b = clusters(split);
      auto pooled = [](const std::vector<Cluster>& parts, Boundary bc, double e) {
        std::size_t n = 0;
        for (const auto& c : parts) n += count_sorted_leq(eigenvalues(assemble(c, bc)), e + 1e-9);
        return n;
      };
      for (double e : energy_grid(dim, {41, 3})) {
        EXPECT_GE(pooled(b, Boundary::neumann, e), pooled(a, Boundary::neumann, e)) << dim << " " << e;
        EXPECT_LE(pooled(b, Boundary::dirichlet, e), pooled(a, Boundary::dirichlet, e)) << dim << " " << e;
      }
    }
  }
}
