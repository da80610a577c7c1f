#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "perclap/spectral.hpp"

using namespace perclap;

namespace {

std::vector<double> oracle_spectrum(const SymmetricOperator& op) {
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  for (const auto& e : op.edges()) edges.emplace_back(e.i, e.j);
  std::vector<double> diag(op.diagonal().begin(), op.diagonal().end());
  return oracle::jacobi_eigenvalues(oracle::laplacian(op.size(), edges, diag));
}

void expect_spectra_near(const std::vector<double>& a, const std::vector<double>& b, double tol) {
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], tol) << "index " << i;
}

}  // namespace

TEST(Eigenvalues, PathOfThree) {
  expect_spectra_near(eigenvalues(assemble(make_linear_cluster(3, 1), Boundary::neumann)), {0, 1, 3}, 1e-12);
}

TEST(Eigenvalues, IsolatedVertexDirichlet) {
  const Cluster v(2, {0, 0}, {0}, {});
  EXPECT_EQ(eigenvalues(assemble(v, Boundary::dirichlet)), std::vector<double>{8.0});
}

TEST(Eigenvalues, FourCycleAgainstJacobi) {
  const auto op = assemble(make_cubic_cluster(2, 2), Boundary::neumann);
  const auto oracle_ev = oracle_spectrum(op);
  expect_spectra_near(oracle_ev, {0, 2, 2, 4}, 1e-12);
  expect_spectra_near(eigenvalues(op), oracle_ev, 1e-12);
}

TEST(Eigenvalues, SampledClustersAgainstJacobi) {
  const LatticeBox box(2, 10);
  for (std::uint64_t s = 0; s < 5; ++s)
    for (const auto& c : clusters(sample_graph(box, 0.4, derive_seed(2, s)))) {
      if (c.size() > 40) continue;
      for (auto bc : all_boundaries) {
        const auto op = assemble(c, bc);
        expect_spectra_near(eigenvalues(op), oracle_spectrum(op), 1e-10);
      }
    }
}

TEST(CountLeq, Examples) {
  const auto op = assemble(make_linear_cluster(3, 1), Boundary::neumann);
  const auto at_one = count_leq(op, 1.0);
  EXPECT_EQ(at_one.count, 2u);
  EXPECT_TRUE(at_one.shifted);
  EXPECT_EQ(count_leq(op, 0.5).count, 1u);
  EXPECT_FALSE(count_leq(op, 0.5).shifted);
  EXPECT_EQ(count_leq(op, 4.0).count, 3u);
  EXPECT_EQ(count_leq(op, -1.0).count, 0u);
}

TEST(CountLeq, AgreesWithDenseCountsOnGrid) {
  const LatticeBox box(3, 8);
  const auto grid = energy_grid(3, {64, 6});
  for (std::uint64_t s = 0; s < 3; ++s)
    for (const auto& c : clusters(sample_graph(box, 0.25, derive_seed(4, s)))) {
      if (c.size() < 2) continue;
      for (auto bc : all_boundaries) {
        const auto op = assemble(c, bc);
        const auto ev = eigenvalues(op);
        for (double e : grid) {
          const auto k = count_leq(op, e);
          if (!k.shifted) EXPECT_EQ(k.count, count_sorted_leq(ev, e));
        }
        EXPECT_EQ(count_leq(op, 12.0).count, c.size());
        EXPECT_EQ(count_leq(op, -1.0).count, 0u);
      }
    }
}

// A 46x46 full block has 2116 vertices, above the dense threshold, so the
// sparse inertia path, its banded fallback and the bisection summary are all
// exercised. The grid graph spectrum is the oracle. Integer energies such as
// E = 4 put exact zeros on the unpivoted diagonal.
TEST(CountLeq, LargeClusterSparsePath) {
  const auto q = make_cubic_cluster(46, 2);
  ASSERT_GT(q.size(), dense_threshold);
  const auto op = assemble(q, Boundary::neumann);
  const auto exact = oracle::grid_neumann_spectrum(46, 2);
  const double eps = breakdown_shift(2);
  std::size_t flagged = 0;
  for (double e : energy_grid(2)) {
    const auto k = count_leq(op, e);
    EXPECT_GE(k.count, count_sorted_leq(exact, e - 1e-10)) << "E = " << e;
    EXPECT_LE(k.count, count_sorted_leq(exact, e + eps + 1e-10)) << "E = " << e;
    if (!k.shifted) EXPECT_EQ(k.count, count_sorted_leq(exact, e)) << "E = " << e;
    flagged += k.shifted;
  }
  EXPECT_GT(flagged, 0u);
  EXPECT_EQ(count_leq(op, 4.0).count, count_sorted_leq(exact, 4.0 + 1e-10));
  EXPECT_EQ(count_leq(op, 1e-9 * 8).count, 1u);
  EXPECT_THROW(eigenvalues(op), DomainError);
  const auto summary = spectral_summary(op);
  EXPECT_FALSE(summary.full);
  EXPECT_NEAR(summary.lowest_nonzero, exact[1], 1e-11);
}

TEST(CountLeq, BandSpectrumMatchesDense) {
  const auto parts = clusters(sample_graph(LatticeBox(3, 10), 0.3, 12));
  const Cluster* big = &parts.front();
  for (const auto& c : parts)
    if (c.size() > big->size()) big = &c;
  ASSERT_GT(big->size(), 100u);
  for (auto bc : all_boundaries) {
    const auto op = assemble(*big, bc);
    const auto band = detail::band_eigenvalues(op);
    const auto dense = eigenvalues(op);
    ASSERT_EQ(band.size(), dense.size());
    for (std::size_t i = 0; i < band.size(); ++i) EXPECT_NEAR(band[i], dense[i], 1e-10);
  }
}

TEST(EnergyGrid, ContainsUniformAndRefinedPoints) {
  const auto g = energy_grid(1);
  EXPECT_TRUE(std::is_sorted(g.begin(), g.end()));
  EXPECT_EQ(g.front(), 0.0);
  EXPECT_EQ(g.back(), 4.0);
  EXPECT_TRUE(std::binary_search(g.begin(), g.end(), std::ldexp(4.0, -20)));
  EXPECT_TRUE(std::binary_search(g.begin(), g.end(), 4.0 - std::ldexp(4.0, -20)));
  EXPECT_THROW(energy_grid(1, {1, 0}), ConfigError);
}

TEST(EmpiricalIDS, FullPathIsPathSpectrum) {
  const int n = 50;
  const auto g = sample_graph(LatticeBox(1, n), 1.0, 0);
  const auto grid = energy_grid(1, {33, 4});
  const auto ids = empirical_ids({g}, Boundary::neumann, grid);
  std::vector<double> path;
  for (int k = 0; k < n; ++k) path.push_back(2 * (1 - std::cos(M_PI * k / n)));
  for (double e : grid) {
    const double expected = static_cast<double>(count_sorted_leq(path, e + 1e-9)) / n;
    EXPECT_DOUBLE_EQ(ids(e), expected);
  }
}

TEST(EmpiricalIDS, EdgeValues) {
  const auto grid = energy_grid(2, {17, 2});
  const auto g0 = sample_graph(LatticeBox(2, 10), 0.0, 1);
  EXPECT_EQ(empirical_ids({g0}, Boundary::neumann, grid)(0.0), 1.0);
  const auto g = sample_graph(LatticeBox(2, 12), 0.3, 1);
  for (auto bc : {Boundary::pseudo_dirichlet, Boundary::dirichlet}) {
    const auto ids = empirical_ids({g}, bc, grid);
    double lowest = 1e9;
    for (const auto& c : clusters(g)) lowest = std::min(lowest, eigenvalues(assemble(c, bc)).front());
    EXPECT_EQ(ids(0.0), 0.0);
    EXPECT_EQ(ids(lowest * 0.999), 0.0);
    EXPECT_EQ(ids(8.0), 1.0);
  }
  EXPECT_THROW(empirical_ids({}, Boundary::neumann, grid), DomainError);
}

TEST(EmpiricalIDS, PooledReflectionIdentities) {
  const LatticeBox box(2, 11);
  std::vector<PercolationGraph> gs;
  for (std::uint64_t s = 0; s < 6; ++s) gs.push_back(sample_graph(box, 0.3, derive_seed(77, s)));
  const auto grid = energy_grid(2, {65, 4});
  const auto n = empirical_ids(gs, Boundary::neumann, grid);
  const auto d = empirical_ids(gs, Boundary::dirichlet, grid);
  const auto dt = empirical_ids(gs, Boundary::pseudo_dirichlet, grid);
  const auto nd = n.edge_distances(true), dd = d.edge_distances(false);
  ASSERT_EQ(nd.size(), dd.size());
  for (std::size_t i = 0; i < nd.size(); ++i) EXPECT_NEAR(nd[i], dd[i], 1e-9);
  const auto lo = dt.edge_distances(false), hi = dt.edge_distances(true);
  for (std::size_t i = 0; i < lo.size(); ++i) EXPECT_NEAR(lo[i], hi[i], 1e-9);
  const auto r = EmpiricalIDS::reflect(n);
  EXPECT_EQ(r.edge_distances(true), n.edge_distances(false));
}

TEST(EmpiricalIDS, InertiaCountsMatchPooledDense) {
  const LatticeBox box(3, 9);
  const auto g = sample_graph(box, 0.2, 5);
  const auto grid = energy_grid(3, {49, 3});
  const auto parts = clusters(g);
  for (auto bc : all_boundaries) {
    const auto ids = empirical_ids({g}, bc, grid);
    for (double e : grid) {
      std::uint64_t c = 0;
      for (const auto& cl : parts) c += count_leq(assemble(cl, bc), e + zero_tolerance(3)).count;
      EXPECT_EQ(static_cast<double>(c) / static_cast<double>(box.vertex_count()), ids(e)) << "E = " << e;
    }
  }
}

TEST(ZeroModes, Fixtures) {
  const double tol = zero_tolerance(1);
  EXPECT_EQ(zero_mode_density({sample_graph(LatticeBox(2, 6), 0.0, 1)}, tol), 1.0);
  EXPECT_DOUBLE_EQ(zero_mode_density({sample_graph(LatticeBox(1, 40), 1.0, 1)}, tol), 1.0 / 40);
  EXPECT_THROW(zero_mode_density({}, -1.0), DomainError);
}

TEST(ZeroModes, OneDimensionalDensityIsOneMinusP) {
  const std::int64_t side = 1000000;
  const double p = 0.3;
  const auto g = sample_graph(LatticeBox(1, side), p, 2024);
  const auto kappa = zero_mode_density({g}, zero_tolerance(1));
  // Leftmost-vertex oracle: vertex 0 heads a cluster, every other vertex
  // heads one iff its left bond is closed.
  const auto closed = static_cast<std::uint64_t>(side - 1) - g.open_edges().size();
  EXPECT_EQ(kappa * side, static_cast<double>(1 + closed));
  const double sigma = std::sqrt(p * (1 - p) / static_cast<double>(side));
  EXPECT_NEAR(kappa, 1 - p, 3 * sigma);
}

TEST(EmpiricalIDS, VolumeConvergenceOneDimension) {
  const auto grid = energy_grid(1);
  const auto a = empirical_ids({sample_graph(LatticeBox(1, 100000), 0.3, 8)}, Boundary::neumann, grid).grid_values();
  const auto b = empirical_ids({sample_graph(LatticeBox(1, 200000), 0.3, 8)}, Boundary::neumann, grid).grid_values();
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_LT(std::abs(a[i] - b[i]), 0.01);
}
