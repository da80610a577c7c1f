#pragma once

// Finite-volume bond percolation on Z^d: boxes, sampled open-edge sets,
// cluster decomposition, and the deterministic linear and cubic clusters.

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "perclap/errors.hpp"
#include "perclap/rng.hpp"

namespace perclap {

/// Nearest-neighbour bond between two linearized vertex indices, u < v.
struct Edge {
  std::uint64_t u;
  std::uint64_t v;
  friend bool operator==(const Edge&, const Edge&) = default;
  friend auto operator<=>(const Edge&, const Edge&) = default;
};

/// The box {0,...,L-1}^d with free boundary. Vertex x is linearized as
/// sum_nu x_nu * L^nu, so coordinate 0 varies fastest. Candidate edge
/// (x, x + e_a) has index lin(x) * d + a.
class LatticeBox {
public:
  static constexpr std::uint64_t max_vertices = std::uint64_t{1} << 40;

  LatticeBox(int dim, std::int64_t side) : dim_(dim), side_(side) {
    if (dim < 1) throw ConfigError("lattice box: dimension must be >= 1, got " + std::to_string(dim));
    if (side < 1) throw ConfigError("lattice box: side length must be >= 1, got " + std::to_string(side));
    std::uint64_t n = 1;
    strides_.reserve(static_cast<std::size_t>(dim));
    for (int a = 0; a < dim; ++a) {
      strides_.push_back(n);
      if (n > max_vertices / static_cast<std::uint64_t>(side))
        throw ConfigError("lattice box: L^d exceeds 2^40 vertices");
      n *= static_cast<std::uint64_t>(side);
    }
    vertex_count_ = n;
  }

  int dim() const noexcept { return dim_; }
  std::int64_t side() const noexcept { return side_; }
  std::uint64_t vertex_count() const noexcept { return vertex_count_; }

  /// d * L^(d-1) * (L-1)
  std::uint64_t candidate_edge_count() const noexcept {
    return static_cast<std::uint64_t>(dim_) * (vertex_count_ / static_cast<std::uint64_t>(side_)) *
           static_cast<std::uint64_t>(side_ - 1);
  }

  std::uint64_t stride(int axis) const noexcept { return strides_[static_cast<std::size_t>(axis)]; }

  std::int64_t coordinate(std::uint64_t vertex, int axis) const noexcept {
    return static_cast<std::int64_t>((vertex / stride(axis)) % static_cast<std::uint64_t>(side_));
  }

  std::uint64_t index(std::span<const std::int64_t> x) const {
    if (static_cast<int>(x.size()) != dim_) throw DomainError("lattice box: coordinate rank mismatch");
    std::uint64_t idx = 0;
    for (int a = 0; a < dim_; ++a) {
      const auto xa = x[static_cast<std::size_t>(a)];
      if (xa < 0 || xa >= side_) throw DomainError("lattice box: point outside box");
      idx += static_cast<std::uint64_t>(xa) * stride(a);
    }
    return idx;
  }

  std::uint64_t edge_index(std::uint64_t vertex, int axis) const noexcept {
    return vertex * static_cast<std::uint64_t>(dim_) + static_cast<std::uint64_t>(axis);
  }

  /// Calls f(edge_index, Edge) for every candidate edge in ascending index order.
  template <class F>
  void for_each_candidate_edge(F&& f) const {
    const auto d = static_cast<std::uint64_t>(dim_);
    const auto L = static_cast<std::uint64_t>(side_);
    for (std::uint64_t v = 0; v < vertex_count_; ++v) {
      for (int a = 0; a < dim_; ++a) {
        const std::uint64_t s = strides_[static_cast<std::size_t>(a)];
        if ((v / s) % L + 1 < L) f(v * d + static_cast<std::uint64_t>(a), Edge{v, v + s});
      }
    }
  }

  friend bool operator==(const LatticeBox& a, const LatticeBox& b) {
    return a.dim_ == b.dim_ && a.side_ == b.side_;
  }

private:
  int dim_;
  std::int64_t side_;
  std::uint64_t vertex_count_ = 0;
  std::vector<std::uint64_t> strides_;
};

/// One realization restricted to a box: the open edges, sorted ascending.
class PercolationGraph {
public:
  PercolationGraph(LatticeBox box, double p, std::uint64_t seed, std::vector<Edge> open_edges)
      : box_(std::move(box)), p_(p), seed_(seed), open_edges_(std::move(open_edges)) {}

  const LatticeBox& box() const noexcept { return box_; }
  double bond_probability() const noexcept { return p_; }
  std::uint64_t seed() const noexcept { return seed_; }
  const std::vector<Edge>& open_edges() const noexcept { return open_edges_; }

private:
  LatticeBox box_;
  double p_;
  std::uint64_t seed_;
  std::vector<Edge> open_edges_;
};

/// Each candidate edge is open iff the counter-based uniform keyed by
/// (seed, edge index) is below p. p = 0 and p = 1 are accepted as
/// deterministic fixtures.
inline PercolationGraph sample_graph(const LatticeBox& box, double p, std::uint64_t seed) {
  if (!(p >= 0.0 && p <= 1.0)) throw DomainError("sample_graph: p must lie in [0,1]");
  std::vector<Edge> open;
  open.reserve(static_cast<std::size_t>(static_cast<double>(box.candidate_edge_count()) * p * 1.05) + 16);
  box.for_each_candidate_edge([&](std::uint64_t idx, Edge e) {
    if (counter_uniform(seed, idx) < p) open.push_back(e);
  });
  return PercolationGraph(box, p, seed, std::move(open));
}

/// Edge between two local vertex indices of a cluster, i < j.
struct LocalEdge {
  std::uint32_t i;
  std::uint32_t j;
  friend bool operator==(const LocalEdge&, const LocalEdge&) = default;
};

/// A maximal connected component. Vertices are stored in ascending order of
/// their linearized site index; coordinates are kept so the sign involution
/// (-1)^(sum |x_nu|) can be evaluated.
class Cluster {
public:
  Cluster(int dim, std::vector<std::int64_t> coords, std::vector<std::uint64_t> sites,
          std::vector<LocalEdge> edges, std::size_t id = 0)
      : dim_(dim), coords_(std::move(coords)), sites_(std::move(sites)), edges_(std::move(edges)), id_(id) {
    if (sites_.empty()) throw DomainError("cluster: vertex list must be nonempty");
    if (coords_.size() != sites_.size() * static_cast<std::size_t>(dim_))
      throw DomainError("cluster: coordinate array size mismatch");
    degree_.assign(sites_.size(), 0);
    for (const auto& e : edges_) {
      if (e.i >= sites_.size() || e.j >= sites_.size() || e.i == e.j)
        throw DomainError("cluster: edge endpoint out of range");
      ++degree_[e.i];
      ++degree_[e.j];
    }
  }

  int dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return sites_.size(); }
  std::size_t id() const noexcept { return id_; }
  const std::vector<std::uint64_t>& sites() const noexcept { return sites_; }
  const std::vector<LocalEdge>& edges() const noexcept { return edges_; }
  const std::vector<int>& degrees() const noexcept { return degree_; }
  int degree(std::size_t i) const noexcept { return degree_[i]; }

  std::span<const std::int64_t> point(std::size_t i) const noexcept {
    return {coords_.data() + i * static_cast<std::size_t>(dim_), static_cast<std::size_t>(dim_)};
  }

  /// +1 or -1 according to the parity of sum_nu |x_nu|.
  int parity_sign(std::size_t i) const noexcept {
    std::int64_t s = 0;
    for (auto x : point(i)) s += x < 0 ? -x : x;
    return (s % 2 == 0) ? 1 : -1;
  }

  /// Sum of degrees, equal to twice the edge count.
  std::int64_t degree_sum() const noexcept {
    return std::accumulate(degree_.begin(), degree_.end(), std::int64_t{0});
  }

  bool is_connected() const {
    std::vector<std::vector<std::uint32_t>> adj(size());
    for (const auto& e : edges_) {
      adj[e.i].push_back(e.j);
      adj[e.j].push_back(e.i);
    }
    std::vector<char> seen(size(), 0);
    std::vector<std::uint32_t> stack{0};
    seen[0] = 1;
    std::size_t reached = 1;
    while (!stack.empty()) {
      const auto v = stack.back();
      stack.pop_back();
      for (auto w : adj[v])
        if (!seen[w]) {
          seen[w] = 1;
          ++reached;
          stack.push_back(w);
        }
    }
    return reached == size();
  }

private:
  int dim_;
  std::vector<std::int64_t> coords_;
  std::vector<std::uint64_t> sites_;
  std::vector<LocalEdge> edges_;
  std::vector<int> degree_;
  std::size_t id_;
};

namespace detail {

class DisjointSets {
public:
  explicit DisjointSets(std::size_t n) : parent_(n), size_(n, 1) {
    std::iota(parent_.begin(), parent_.end(), std::uint64_t{0});
  }

  std::uint64_t find(std::uint64_t x) noexcept {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }

  void unite(std::uint64_t a, std::uint64_t b) noexcept {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (size_[a] < size_[b]) std::swap(a, b);
    parent_[b] = a;
    size_[a] += size_[b];
  }

private:
  std::vector<std::uint64_t> parent_;
  std::vector<std::uint64_t> size_;
};

}  // namespace detail

/// Decompose a realization into its clusters (isolated vertices included),
/// ordered by smallest vertex index. Cluster ids are their positions.
inline std::vector<Cluster> clusters(const PercolationGraph& graph) {
  const auto& box = graph.box();
  const auto n = static_cast<std::size_t>(box.vertex_count());
  const int d = box.dim();
  detail::DisjointSets sets(n);
  for (const auto& e : graph.open_edges()) sets.unite(e.u, e.v);

  constexpr auto unassigned = static_cast<std::uint32_t>(-1);
  std::vector<std::uint32_t> label(n, unassigned);  // root -> cluster id
  std::vector<std::uint32_t> local(n);               // vertex -> local index
  std::vector<std::vector<std::uint64_t>> members;
  for (std::uint64_t v = 0; v < n; ++v) {
    const auto r = sets.find(v);
    if (label[r] == unassigned) {
      label[r] = static_cast<std::uint32_t>(members.size());
      members.emplace_back();
    }
    auto& m = members[label[r]];
    local[v] = static_cast<std::uint32_t>(m.size());
    m.push_back(v);
  }

  std::vector<std::vector<LocalEdge>> edges(members.size());
  for (const auto& e : graph.open_edges()) {
    const auto c = label[sets.find(e.u)];
    edges[c].push_back(LocalEdge{local[e.u], local[e.v]});
  }

  std::vector<Cluster> out;
  out.reserve(members.size());
  for (std::size_t c = 0; c < members.size(); ++c) {
    std::vector<std::int64_t> coords;
    coords.reserve(members[c].size() * static_cast<std::size_t>(d));
    for (auto v : members[c])
      for (int a = 0; a < d; ++a) coords.push_back(box.coordinate(v, a));
    out.emplace_back(d, std::move(coords), std::move(members[c]), std::move(edges[c]), c);
  }
  return out;
}

/// Path of n vertices along the first axis: degrees (1, 2, ..., 2, 1).
inline Cluster make_linear_cluster(std::int64_t n, int dim) {
  if (n < 2) throw DomainError("make_linear_cluster: n must be >= 2");
  if (dim < 1) throw DomainError("make_linear_cluster: dimension must be >= 1");
  std::vector<std::int64_t> coords(static_cast<std::size_t>(n * dim), 0);
  std::vector<std::uint64_t> sites(static_cast<std::size_t>(n));
  std::vector<LocalEdge> edges;
  for (std::int64_t i = 0; i < n; ++i) {
    coords[static_cast<std::size_t>(i * dim)] = i;
    sites[static_cast<std::size_t>(i)] = static_cast<std::uint64_t>(i);
    if (i + 1 < n) edges.push_back({static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(i + 1)});
  }
  return Cluster(dim, std::move(coords), std::move(sites), std::move(edges));
}

/// Fully connected l^d box (every candidate edge open).
inline Cluster make_cubic_cluster(std::int64_t l, int dim) {
  if (l < 2) throw DomainError("make_cubic_cluster: l must be >= 2");
  auto parts = clusters(sample_graph(LatticeBox(dim, l), 1.0, 0));
  return std::move(parts.front());
}

/// Debug dump: {d, L, p, seed, open_edges: [[i,j],...]} with linearized indices.
inline nlohmann::json graph_to_json(const PercolationGraph& g) {
  nlohmann::json edges = nlohmann::json::array();
  for (const auto& e : g.open_edges()) edges.push_back({e.u, e.v});
  return {{"d", g.box().dim()},
          {"L", g.box().side()},
          {"p", g.bond_probability()},
          {"seed", g.seed()},
          {"open_edges", std::move(edges)}};
}

}  // namespace perclap
