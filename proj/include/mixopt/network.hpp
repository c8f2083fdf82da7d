// Copyright The mixopt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mixopt/operators.hpp"

namespace mixopt {

using Edge = std::pair<Index, Index>;

struct GossipMatrix {
  Index n = 0;
  Mat W;
  std::vector<Edge> edges;
};

struct Assumption4Report {
  bool symmetric = false;
  bool psd = false;
  bool pattern = false;             // W_ij != 0 exactly on the diagonal and the edges
  bool kernel_is_consensus = false;  // Wx = 0 iff x is constant
  Index nullity = 0;
  std::string message;

  bool ok() const { return symmetric && psd && pattern && kernel_is_consensus; }
};

// W = D - A with optional positive edge weights (default 1).
GossipMatrix laplacian(const std::vector<Edge>& edges, const std::optional<std::vector<double>>& weights, Index n);

Assumption4Report check_assumption4(const GossipMatrix& g, double tol = 1e-10);

// lambda_max / lambda_min+ of a symmetric PSD matrix.
double gossip_kappa(const Mat& w);

// Condition number (1 + cos(pi/n)) / (1 - cos(pi/n)) of the unweighted n-node path.
double path_beta(Index n);

// Path with n = 3m nodes and first-edge weight 1 - a, a chosen by bisection so
// that kappa(W) matches the target to rel_tol.
GossipMatrix path_for_kappa(double kappa_target, double rel_tol = 1e-9);

// The weighted path used by path_for_kappa, for a given a.
GossipMatrix weighted_path(Index n, double a);

enum class Topology { path, cycle, star, complete };

GossipMatrix standard_topology(Topology kind, Index n);
Topology parse_topology(const std::string& name);

}  // namespace mixopt
