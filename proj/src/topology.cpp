#include "gridpool/topology.hpp"

#include <algorithm>
#include <cmath>
#include <queue>

namespace gridpool {

Topology::Topology(std::size_t n) : n_(n), adj_(n * n, 0) {
  if (n < 1) throw TopologyError("topology needs at least one agent");
}

Topology Topology::from_edges(std::size_t n, const std::vector<std::pair<std::size_t, std::size_t>>& edges) {
  Topology t(n);
  for (const auto& [i, j] : edges) t.connect(i, j);
  return t;
}

void Topology::connect(std::size_t i, std::size_t j) {
  if (i >= n_ || j >= n_) throw TopologyError("edge endpoint out of range");
  if (i == j) throw TopologyError("self-loops are not stored in a topology");
  adj_[i * n_ + j] = 1;
  adj_[j * n_ + i] = 1;
}

std::size_t Topology::degree(std::size_t i) const {
  return static_cast<std::size_t>(std::count(adj_.begin() + static_cast<std::ptrdiff_t>(i * n_),
                                             adj_.begin() + static_cast<std::ptrdiff_t>((i + 1) * n_), 1));
}

std::size_t Topology::edge_count() const {
  return static_cast<std::size_t>(std::count(adj_.begin(), adj_.end(), 1)) / 2;
}

std::vector<std::pair<std::size_t, std::size_t>> Topology::edges() const {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t i = 0; i < n_; ++i)
    for (std::size_t j = i + 1; j < n_; ++j)
      if (adjacent(i, j)) out.emplace_back(i, j);
  return out;
}

bool Topology::connected() const {
  std::vector<bool> seen(n_, false);
  std::queue<std::size_t> frontier;
  frontier.push(0);
  seen[0] = true;
  std::size_t reached = 1;
  while (!frontier.empty()) {
    const std::size_t i = frontier.front();
    frontier.pop();
    for (std::size_t j = 0; j < n_; ++j) {
      if (adjacent(i, j) && !seen[j]) {
        seen[j] = true;
        ++reached;
        frontier.push(j);
      }
    }
  }
  return reached == n_;
}

Topology complete(std::size_t n) {
  if (n < 2) throw TopologyError("complete topology needs n >= 2");
  Topology t(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) t.connect(i, j);
  return t;
}

Topology star(std::size_t n, std::size_t hub) {
  if (n < 2) throw TopologyError("star topology needs n >= 2");
  if (hub >= n) throw TopologyError("star hub " + std::to_string(hub) + " out of range");
  Topology t(n);
  for (std::size_t i = 0; i < n; ++i)
    if (i != hub) t.connect(hub, i);
  return t;
}

Topology nearest_k_ring(std::size_t n, std::size_t k) {
  if (k < 2 || k % 2 != 0 || k >= n) {
    throw TopologyError("ring needs an even k with 2 <= k < n (got k=" + std::to_string(k) +
                        ", n=" + std::to_string(n) + ")");
  }
  Topology t(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t step = 1; step <= k / 2; ++step) t.connect(i, (i + step) % n);
  return t;
}

void validate_weights(const WeightMatrix& wm, const Topology& topology, double tol) {
  const auto& w = wm.w;
  const auto n = static_cast<Eigen::Index>(topology.size());
  if (w.rows() != n || w.cols() != n) throw TopologyError("weight matrix size differs from topology");
  if (!w.allFinite()) throw TopologyError("weight matrix has non-finite entries");
  for (Eigen::Index i = 0; i < n; ++i) {
    if (std::abs(w.row(i).sum() - 1.0) > tol) throw TopologyError("row " + std::to_string(i) + " does not sum to 1");
    if (std::abs(w.col(i).sum() - 1.0) > tol) throw TopologyError("column " + std::to_string(i) + " does not sum to 1");
    for (Eigen::Index j = 0; j < n; ++j) {
      if (w(i, j) < 0.0) throw TopologyError("weight matrix has negative entries");
      if (std::abs(w(i, j) - w(j, i)) > tol) throw TopologyError("weight matrix is not symmetric");
      if (i != j && w(i, j) != 0.0 &&
          !topology.adjacent(static_cast<std::size_t>(i), static_cast<std::size_t>(j))) {
        throw TopologyError("weight on non-adjacent pair (" + std::to_string(i) + ", " + std::to_string(j) + ")");
      }
    }
  }
}

WeightMatrix metropolis_weights(const Topology& topology) {
  if (!topology.connected()) throw TopologyError("topology is not connected");
  const std::size_t n = topology.size();
  WeightMatrix wm{Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n))};
  for (std::size_t i = 0; i < n; ++i) {
    double off = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j || !topology.adjacent(i, j)) continue;
      const double v = 1.0 / (1.0 + static_cast<double>(std::max(topology.degree(i), topology.degree(j))));
      wm.w(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
      off += v;
    }
    wm.w(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) = 1.0 - off;
  }
  return wm;
}

double spectral_gap(const WeightMatrix& wm) {
  const auto& w = wm.w;
  if (w.rows() < 2) return 1.0;
  std::vector<double> moduli;
  if ((w - w.transpose()).cwiseAbs().maxCoeff() <= 1e-12) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(w, Eigen::EigenvaluesOnly);
    for (Eigen::Index k = 0; k < eig.eigenvalues().size(); ++k) moduli.push_back(std::abs(eig.eigenvalues()(k)));
  } else {
    Eigen::EigenSolver<Eigen::MatrixXd> eig(w, false);
    for (Eigen::Index k = 0; k < eig.eigenvalues().size(); ++k) moduli.push_back(std::abs(eig.eigenvalues()(k)));
  }
  std::sort(moduli.begin(), moduli.end(), std::greater<>());
  // The leading eigenvalue of a stochastic matrix is 1.
  return 1.0 - moduli[1];
}

}  // namespace gridpool
