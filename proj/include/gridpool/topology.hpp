#pragma once

// Communication graphs between agents and their consensus weight matrices.

#include <Eigen/Dense>

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace gridpool {

class TopologyError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Undirected simple graph over agents 0..n-1.
class Topology {
 public:
  explicit Topology(std::size_t n);
  static Topology from_edges(std::size_t n, const std::vector<std::pair<std::size_t, std::size_t>>& edges);

  std::size_t size() const { return n_; }
  bool adjacent(std::size_t i, std::size_t j) const { return adj_[i * n_ + j] != 0; }
  std::size_t degree(std::size_t i) const;
  std::size_t edge_count() const;
  bool connected() const;
  std::vector<std::pair<std::size_t, std::size_t>> edges() const;

  void connect(std::size_t i, std::size_t j);

 private:
  std::size_t n_;
  std::vector<unsigned char> adj_;
};

/// All pairs adjacent.
Topology complete(std::size_t n);
/// Every agent linked to `hub` only.
Topology star(std::size_t n, std::size_t hub);
/// Agent i linked to i +/- 1 .. i +/- k/2 (mod n); k even, 2 <= k < n.
Topology nearest_k_ring(std::size_t n, std::size_t k);

struct WeightMatrix {
  Eigen::MatrixXd w;

  std::size_t size() const { return static_cast<std::size_t>(w.rows()); }
};

/// Throws TopologyError unless W is nonnegative, symmetric, doubly
/// stochastic within `tol`, and supported on adjacency plus diagonal.
void validate_weights(const WeightMatrix& w, const Topology& topology, double tol = 1e-12);

/// w_ij = 1 / (1 + max(deg i, deg j)) on edges, diagonal takes the rest.
WeightMatrix metropolis_weights(const Topology& topology);

/// 1 - |second largest eigenvalue modulus| of W.
double spectral_gap(const WeightMatrix& w);

}  // namespace gridpool
