// Copyright The mixopt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mixopt/problems.hpp"

namespace mixopt {

struct ApapcParams {
  double eta = 0.0;
  double theta = 0.0;
  double alpha = 0.0;
  double tau = 0.0;
  Index N = 0;  // 0: run until the stop rule fires
};

// tau = min(1, sqrt(mu/L)/2), eta = 1/(4 tau L), theta = 1/(eta sigma_max^2), alpha = mu.
ApapcParams apapc_params(double mu, double L, const SpectralBounds& bounds);

enum class StopRule {
  iterations,   // exactly params.N steps
  distance,     // ||u - hint|| <= tol * ||hint|| (absolute when the hint is 0)
  fixed_point,  // ||u^{k+1} - u^k|| / eta + ||B u^{k+1/2} - b|| <= tol
};

struct ApapcOptions {
  StopRule stop = StopRule::iterations;
  double tol = 1e-8;
  Index max_iters = 1000000;
  bool record_history = true;
  double divergence_bound = 1e12;
  // Called after each step with the iteration count, u^{k+1} and z^{k+1}; returning true stops.
  std::function<bool(Index, const Vec&, const Vec&)> callback;
};

struct SolveReport {
  Vec final_point;
  Vec dual;
  std::vector<double> distance_history;
  std::vector<double> objective_gap_history;
  std::vector<double> constraint_residual_history;
  std::vector<CounterSet> counter_history;
  CounterSet counters;
  double wall_time = 0.0;
  Index iterations = 0;
  bool converged = false;
  std::string method;
  // Sliding only: penalty, outer iterations per stage and stage accuracies.
  double penalty = 0.0;
  std::vector<Index> stage_iterations;
  std::vector<double> stage_eps;
};

SolveReport apapc(const AffineProblem& problem, const ApapcParams& params, const Vec& u0,
                  const ApapcOptions& opts = {});

struct RegularizedOptions {
  std::optional<double> D;  // G(u0) - min G, enables the a priori delta target
  Index max_iters = 1000000;
  Index check_every = 10;
  bool record_history = false;
};

// Runs APAPC on G + (nu/2)||u - u0||^2 with nu = eps / R^2 and stops on a
// certified bound on ||u - u*_nu||. Extra gradient and B applies spent on the
// certificate are counted.
SolveReport solve_convex_regularized(const AffineProblem& problem, double eps, double R, const Vec& u0,
                                     const RegularizedOptions& opts = {});

// argmin_w <g1 + g2, w> + (beta/2)||u3 - w||^2 + (beta eta/2)||u1 - w||^2 over the box (if any).
Vec sliding_prox_step(const Vec& g1, const Vec& g2, const Vec& u1, const Vec& u3, double beta, double eta,
                      const std::optional<Box>& box = std::nullopt);

// Deterministic gradient sliding schedule: gamma_k = 2/(k+1), beta_k = 2 L_r / k,
// eta_t = t/2, theta_t = 2(t+1)/(t(t+3)), D~ = d_tilde_factor R^2,
// N = ceil(sqrt(n_factor L_r R^2 / eps)), T_k = ceil(M^2 N k^2 / (D~ L_r^2)).
struct SlidingSchedule {
  double d_tilde_factor = 3.0 / 8.0;
  double n_factor = 3.0;
  std::optional<Index> N;
  std::optional<double> penalty;  // overrides r = 2 R_dual^2 / eps
  Index max_inner = 200000000;
};

struct SlidingOptions {
  SlidingSchedule schedule;
  double divergence_bound = 1e12;
  bool record_history = false;
};

SolveReport gradient_sliding(const AffineProblem& problem, double eps, double R, const Vec& u0,
                             const SlidingOptions& opts = {});

// Stage s runs gradient sliding to accuracy eps_s = mu R_s^2 / stage_divisor from the
// previous output, with R_{s+1}^2 = R_s^2 / 2. The schedule is anchored so the last
// stage has eps_S = eps.
struct RestartOptions {
  SlidingOptions sliding;
  double stage_divisor = 12.0;
  std::optional<double> R;  // initial distance bound; default from the box
};

SolveReport restarted_sliding(const AffineProblem& problem, double eps, double mu, const Vec& u0,
                              const RestartOptions& opts = {});

}  // namespace mixopt
