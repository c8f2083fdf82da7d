// Copyright The mixopt Authors
// SPDX-License-Identifier: Apache-2.0

#include "mixopt/network.hpp"

#include <cmath>
#include <numbers>

#include <Eigen/Eigenvalues>

#include "mixopt/conditioning.hpp"

namespace mixopt {

GossipMatrix laplacian(const std::vector<Edge>& edges, const std::optional<std::vector<double>>& weights, Index n) {
  if (n < 1) throw InvalidArgument("laplacian: n must be at least 1");
  if (weights && weights->size() != edges.size()) throw InvalidArgument("laplacian: one weight per edge required");
  GossipMatrix g;
  g.n = n;
  g.W = Mat::Zero(n, n);
  g.edges = edges;
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const auto [i, j] = edges[e];
    if (i < 0 || j < 0 || i >= n || j >= n) throw InvalidArgument("laplacian: edge endpoint out of range");
    if (i == j) throw InvalidArgument("laplacian: self loops are not edges");
    const double w = weights ? (*weights)[e] : 1.0;
    if (!(w > 0.0)) throw InvalidArgument("laplacian: edge weights must be positive");
    g.W(i, j) -= w;
    g.W(j, i) -= w;
    g.W(i, i) += w;
    g.W(j, j) += w;
  }
  return g;
}

Assumption4Report check_assumption4(const GossipMatrix& g, double tol) {
  Assumption4Report r;
  const Mat& w = g.W;
  const Index n = w.rows();
  if (n != w.cols() || n != g.n) {
    r.message = "W is not n x n";
    return r;
  }
  const double scale = std::max(1.0, w.cwiseAbs().maxCoeff());
  r.symmetric = (w - w.transpose()).cwiseAbs().maxCoeff() <= tol * scale;
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (w + w.transpose()));
  const auto& ev = es.eigenvalues();
  r.psd = ev.minCoeff() >= -tol * scale;

  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> expected =
      Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(n, n, false);
  for (Index i = 0; i < n; ++i) expected(i, i) = true;
  for (const auto& [i, j] : g.edges) {
    if (i >= 0 && j >= 0 && i < n && j < n) expected(i, j) = expected(j, i) = true;
  }
  r.pattern = true;
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      if (i == j) continue;  // a zero diagonal only happens for isolated nodes, caught by the kernel test
      if ((w(i, j) != 0.0) != expected(i, j)) r.pattern = false;
    }
  }
  const double lmax = std::max(0.0, ev.maxCoeff());
  r.nullity = 0;
  for (Index i = 0; i < n; ++i) {
    if (std::abs(ev(i)) <= 1e-9 * std::max(lmax, 1e-300)) ++r.nullity;
  }
  if (n == 1) r.nullity = 1;
  const Vec ones = Vec::Ones(n);
  r.kernel_is_consensus = r.nullity == 1 && (w * ones).norm() <= tol * scale * std::sqrt(double(n));
  if (!r.symmetric) r.message += "W is not symmetric; ";
  if (!r.psd) r.message += "W is not positive semidefinite; ";
  if (!r.pattern) r.message += "sparsity pattern differs from the edge list; ";
  if (!r.kernel_is_consensus)
    r.message += "ker W has dimension " + std::to_string(r.nullity) + " or is not spanned by the ones vector; ";
  return r;
}

double gossip_kappa(const Mat& w) {
  const EigenRange range = positive_eigen_range(w);
  if (range.lambda_min_plus <= 0.0) throw DegenerateError("gossip_kappa: W has no positive spectrum");
  return range.lambda_max / range.lambda_min_plus;
}

double path_beta(Index n) {
  if (n < 2) throw InvalidArgument("path_beta: n must be at least 2");
  const double c = std::cos(std::numbers::pi / static_cast<double>(n));
  return (1.0 + c) / (1.0 - c);
}

GossipMatrix weighted_path(Index n, double a) {
  if (n < 2) throw InvalidArgument("weighted_path: n must be at least 2");
  if (!(a >= 0.0 && a < 1.0)) throw InvalidArgument("weighted_path: a must lie in [0, 1)");
  std::vector<Edge> edges;
  std::vector<double> weights;
  for (Index i = 0; i + 1 < n; ++i) {
    edges.emplace_back(i, i + 1);
    weights.push_back(i == 0 ? 1.0 - a : 1.0);
  }
  return laplacian(edges, weights, n);
}

GossipMatrix path_for_kappa(double kappa_target, double rel_tol) {
  if (!(kappa_target >= path_beta(3) * (1.0 - 1e-12)))
    throw InvalidArgument("path_for_kappa: kappa target below the floor " + std::to_string(path_beta(3)));
  // Largest multiple of three whose unweighted path does not overshoot the target.
  Index n = 3;
  while (path_beta(n + 3) <= kappa_target) n += 3;
  double lo = 0.0;
  if (std::abs(gossip_kappa(weighted_path(n, 0.0).W) - kappa_target) <= rel_tol * kappa_target) return weighted_path(n, 0.0);
  // Bracket from above; a tiny first edge would fall under the rank threshold.
  double hi = 0.5;
  while (gossip_kappa(weighted_path(n, hi).W) < kappa_target) {
    lo = hi;
    hi = 1.0 - 0.5 * (1.0 - hi);
    if (hi > 1.0 - 1e-6)
      throw InvalidArgument("path_for_kappa: target not reachable on the " + std::to_string(n) + "-node path");
  }
  double a = 0.5 * (lo + hi);
  for (int it = 0; it < 200; ++it) {
    a = 0.5 * (lo + hi);
    const double k = gossip_kappa(weighted_path(n, a).W);
    if (std::abs(k - kappa_target) <= rel_tol * kappa_target) break;
    (k < kappa_target ? lo : hi) = a;
  }
  return weighted_path(n, a);
}

GossipMatrix standard_topology(Topology kind, Index n) {
  if (n < 2) throw InvalidArgument("standard_topology: n must be at least 2");
  std::vector<Edge> edges;
  switch (kind) {
    case Topology::path:
      for (Index i = 0; i + 1 < n; ++i) edges.emplace_back(i, i + 1);
      break;
    case Topology::cycle:
      for (Index i = 0; i + 1 < n; ++i) edges.emplace_back(i, i + 1);
      if (n > 2) edges.emplace_back(n - 1, 0);
      break;
    case Topology::star:
      for (Index i = 1; i < n; ++i) edges.emplace_back(0, i);
      break;
    case Topology::complete:
      for (Index i = 0; i < n; ++i) {
        for (Index j = i + 1; j < n; ++j) edges.emplace_back(i, j);
      }
      break;
  }
  return laplacian(edges, std::nullopt, n);
}

Topology parse_topology(const std::string& name) {
  if (name == "path") return Topology::path;
  if (name == "cycle") return Topology::cycle;
  if (name == "star") return Topology::star;
  if (name == "complete") return Topology::complete;
  throw InvalidArgument("unknown topology '" + name + "'");
}

}  // namespace mixopt
