// Copyright The mixopt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <string>

#include "mixopt/problems.hpp"

namespace mixopt {

// Truncated Nesterov chain. E is T x T lower bidiagonal (1, -1), M = E^T E.
// E1t and E2t hold the odd and even rows of E^T (1-based), zeros elsewhere,
// so E1t + E2t = E^T.
struct NesterovMatrices {
  Mat E;
  Mat M;
  Mat E1t;
  Mat E2t;
};

NesterovMatrices nesterov_tridiagonal(Index T);

// rho = (sqrt(2/3 k + 1) - 1) / (sqrt(2/3 k + 1) + 1) for k = kappa_product.
double nesterov_rho(double kappa_product);

// (rho^1, ..., rho^T).
Vec nesterov_dual_solution(double kappa_product, Index T);

enum class WorstKind { shared_local, coupled_local };

struct WorstInstanceSpec {
  WorstKind kind = WorstKind::shared_local;
  double kappa_f = 10.0;
  double kappa_C = 100.0;
  double kappa_A = 100.0;            // coupled_local only: L_A with mu_AC = 1
  std::optional<double> kappa_W;     // gossip from path_for_kappa; else an unweighted path on n nodes
  Index truncation = 64;
  Index n = 3;
  double mu_f = 1.0;

  void validate() const;
};

struct WorstInstance {
  MixedProblemData data;
  // Calibrated constants actually used.
  double L_prime = 0.0;
  double mu_prime = 0.0;
  // Measured conditioning of the constraint family.
  double measured_L = 0.0;
  double measured_mu = 0.0;
  double measured_kappa = 0.0;
  // Decay of the solution's t-block and the kappa_product that reproduces it
  // through nesterov_rho.
  double rho = 0.0;
  double kappa_product_eff = 0.0;
  Index t_offset = 0;  // offset of t inside each node's variable
  Index l = 0;         // coupled_local: number of local copies
};

// Shared-variable lower-bound instance: x_tilde = (p, t), p in R^{T+1}, t in R^T,
// C_tilde = (-sqrt(L') F, sqrt(mu') I) with F rows e_k - e_{k+1}, split over the
// node groups V1 (odd rows), V2 (zero), V3 (even rows).
WorstInstance build_worst_shared(const WorstInstanceSpec& spec);

// Coupled constraints with local consensus: C_i = diag(sqrt(W_C kron I), sqrt(W_C kron I)),
// A_i the masked chain blocks of the V1 / V3 groups.
WorstInstance build_worst_coupled_local(const WorstInstanceSpec& spec);

WorstInstance build_worst(const WorstInstanceSpec& spec);

WorstKind parse_worst_kind(const std::string& name);

}  // namespace mixopt
