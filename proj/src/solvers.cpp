// Copyright The mixopt Authors
// SPDX-License-Identifier: Apache-2.0

#include "mixopt/solvers.hpp"

#include <chrono>
#include <cmath>

namespace mixopt {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

const SpectralBounds& require_bounds(const AffineProblem& problem) {
  if (!problem.bounds) throw InvalidArgument("problem has no spectral bounds; call ensure_bounds first");
  return *problem.bounds;
}

// Uncounted diagnostics for the histories.
struct History {
  const AffineProblem& problem;
  std::optional<double> optimum;

  explicit History(const AffineProblem& p) : problem(p) {
    if (p.solution_hint) optimum = p.objective.value(*p.solution_hint);
  }

  void record(SolveReport& rep, const Vec& u, const CounterSet& counters) const {
    if (problem.solution_hint) rep.distance_history.push_back((u - *problem.solution_hint).norm());
    if (optimum) rep.objective_gap_history.push_back(problem.objective.value(u) - *optimum);
    rep.constraint_residual_history.push_back((problem.B.apply(u) - problem.b).norm());
    rep.counter_history.push_back(counters);
  }
};

void guard(const Vec& u, double bound, const char* method, Index k) {
  const double norm = u.norm();
  if (!(norm <= bound)) {
    throw DivergenceError(std::string(method) + ": iterate norm " + std::to_string(norm) + " exceeds " +
                          std::to_string(bound) + " at iteration " + std::to_string(k) +
                          " (check the step parameters and spectral bounds)");
  }
}

Vec outer_forward(const AffineProblem& p, const Vec& u, CounterSet& c) {
  ++c.outer_forward;
  return p.B.apply(u, &c);
}

Vec outer_adjoint(const AffineProblem& p, const Vec& v, CounterSet& c) {
  ++c.outer_adjoint;
  return p.B.adjoint_apply(v, &c);
}

Vec gradient(const ObjectiveOracle& f, const Vec& u, CounterSet& c) {
  ++c.grad_calls;
  return f.gradient(u, &c);
}

}  // namespace

ApapcParams apapc_params(double mu, double L, const SpectralBounds& bounds) {
  if (!(mu > 0.0)) throw InvalidArgument("apapc_params: mu must be positive; use solve_convex_regularized for mu = 0");
  if (!(L >= mu)) throw InvalidArgument("apapc_params: need 0 < mu <= L");
  if (bounds.sigma_max_sq < 0.0) throw InvalidArgument("apapc_params: invalid spectral bounds");
  ApapcParams p;
  p.tau = std::min(1.0, 0.5 * std::sqrt(mu / L));
  p.eta = 1.0 / (4.0 * p.tau * L);
  p.theta = bounds.sigma_max_sq > 0.0 ? 1.0 / (p.eta * bounds.sigma_max_sq) : 0.0;
  p.alpha = mu;
  return p;
}

SolveReport apapc(const AffineProblem& problem, const ApapcParams& params, const Vec& u0, const ApapcOptions& opts) {
  const auto start = Clock::now();
  const ObjectiveOracle& G = problem.objective;
  if (!G.smooth) throw InvalidArgument("apapc: objective must be smooth");
  if (u0.size() != problem.dim()) throw InvalidArgument("apapc: u0 has the wrong length");
  if (!(params.tau > 0.0 && params.tau <= 1.0) || !(params.eta > 0.0) || params.theta < 0.0 || params.alpha < 0.0)
    throw InvalidArgument("apapc: invalid parameters");
  if (opts.stop == StopRule::distance && !problem.solution_hint)
    throw InvalidArgument("apapc: distance stop rule needs a solution hint");
  const Index limit = opts.stop == StopRule::iterations && params.N > 0 ? params.N : opts.max_iters;

  SolveReport rep;
  rep.method = "apapc";
  History hist(problem);
  CounterSet& c = rep.counters;
  const double tau = params.tau, eta = params.eta, theta = params.theta, alpha = params.alpha;
  const double shrink = 1.0 / (1.0 + eta * alpha);
  const double momentum = 2.0 * tau / (2.0 - tau);
  const double hint_scale =
      problem.solution_hint && problem.solution_hint->norm() > 0.0 ? problem.solution_hint->norm() : 1.0;

  Vec u = u0, uf = u0, z = Vec::Zero(problem.dim());
  if (opts.record_history) hist.record(rep, u, c);
  Index k = 0;
  while (k < limit) {
    const Vec ug = tau * u + (1.0 - tau) * uf;
    const Vec g = gradient(G, ug, c);
    const Vec step = g - alpha * ug;
    const Vec u_half = shrink * (u - eta * (step + z));
    const Vec res_half = outer_forward(problem, u_half, c) - problem.b;
    z += theta * outer_adjoint(problem, res_half, c);
    const Vec u_next = shrink * (u - eta * (step + z));
    uf = ug + momentum * (u_next - u);
    const double moved = (u_next - u).norm();
    u = u_next;
    ++k;
    guard(u, opts.divergence_bound, "apapc", k);
    if (opts.record_history) hist.record(rep, u, c);
    bool stop = false;
    if (opts.stop == StopRule::distance) {
      stop = (u - *problem.solution_hint).norm() <= opts.tol * hint_scale;
    } else if (opts.stop == StopRule::fixed_point) {
      stop = moved / eta + res_half.norm() <= opts.tol;
    }
    if (opts.callback && opts.callback(k, u, z)) stop = true;
    if (stop) {
      rep.converged = true;
      break;
    }
  }
  if (opts.stop == StopRule::iterations && k == limit) rep.converged = true;
  rep.final_point = u;
  rep.dual = z;
  rep.iterations = k;
  rep.wall_time = seconds_since(start);
  return rep;
}

SolveReport solve_convex_regularized(const AffineProblem& problem, double eps, double R, const Vec& u0,
                                     const RegularizedOptions& opts) {
  const auto start = Clock::now();
  if (!(eps > 0.0) || !(R > 0.0)) throw InvalidArgument("solve_convex_regularized: eps and R must be positive");
  const ObjectiveOracle& G = problem.objective;
  if (!G.L) throw InvalidArgument("solve_convex_regularized: objective needs a smoothness constant");
  const SpectralBounds& bounds = require_bounds(problem);
  if (bounds.sigma_min_plus_sq <= 0.0 && problem.B.rows() > 0)
    throw DegenerateError("solve_convex_regularized: constraint operator has no positive spectrum");

  const double nu = eps / (R * R);
  AffineProblem reg = problem;
  reg.objective = regularize(G, u0, nu);
  const double mu_r = reg.objective.mu;
  const double l_r = *reg.objective.L;
  const ApapcParams params = apapc_params(mu_r, std::max(l_r, mu_r), bounds);
  const double sigma_min = std::sqrt(bounds.sigma_min_plus_sq);
  const double sigma_max = std::sqrt(bounds.sigma_max_sq);
  const double l_g = *G.L;

  std::optional<double> delta;
  if (opts.D) delta = eps * eps / (32.0 * (*opts.D + eps / 2.0) * (l_g + nu));

  ApapcOptions ao;
  ao.stop = StopRule::iterations;
  ao.max_iters = opts.max_iters;
  ao.record_history = false;
  CounterSet extra;
  bool certified = false;
  ao.callback = [&](Index k, const Vec& u, const Vec& z) {
    if (k % std::max<Index>(1, opts.check_every) != 0) return false;
    ++extra.grad_calls;
    const Vec g_reg = reg.objective.gradient(u, &extra);
    ++extra.outer_forward;
    const double feas = problem.B.rows() > 0 ? (problem.B.apply(u, &extra) - problem.b).norm() : 0.0;
    const double proj = sigma_min > 0.0 ? feas / sigma_min : 0.0;
    // ||u - u*_nu|| <= ||grad G^nu(u) + z|| / mu' + (1 + L'/mu') dist(u, {Bu = b}).
    const double r = (g_reg + z).norm() / mu_r + (1.0 + l_r / mu_r) * proj;
    bool ok;
    if (delta) {
      ok = r * r <= *delta;
    } else {
      const double g = (g_reg - nu * (u - u0)).norm();
      ok = (g + l_r * r) * r + 0.5 * l_r * r * r <= 0.5 * eps;
    }
    ok = ok && feas <= sigma_max * eps;
    certified = ok;
    return ok;
  };
  SolveReport rep = apapc(reg, params, u0, ao);
  rep.method = "apapc_regularized";
  CounterSet& c = rep.counters;
  c.grad_calls += extra.grad_calls;
  c.outer_forward += extra.outer_forward;
  for (std::size_t i = 0; i < kTagCount; ++i) {
    c.forward[i] += extra.forward[i];
    c.adjoint[i] += extra.adjoint[i];
  }
  rep.converged = certified;
  if (opts.record_history) {
    History hist(problem);
    hist.record(rep, rep.final_point, c);
  }
  rep.wall_time = seconds_since(start);
  return rep;
}

Vec sliding_prox_step(const Vec& g1, const Vec& g2, const Vec& u1, const Vec& u3, double beta, double eta,
                      const std::optional<Box>& box) {
  if (!(beta > 0.0) || !(eta > 0.0)) throw InvalidArgument("sliding_prox_step: beta and eta must be positive");
  Vec w = (beta * u3 + beta * eta * u1 - g1 - g2) / (beta * (1.0 + eta));
  if (box) w = box->project(w);
  return w;
}

SolveReport gradient_sliding(const AffineProblem& problem, double eps, double R, const Vec& u0,
                             const SlidingOptions& opts) {
  const auto start = Clock::now();
  const ObjectiveOracle& G = problem.objective;
  if (!G.M) throw InvalidArgument("gradient_sliding: objective needs a subgradient bound M");
  if (!(eps > 0.0) || !(R > 0.0)) throw InvalidArgument("gradient_sliding: eps and R must be positive");
  if (u0.size() != problem.dim()) throw InvalidArgument("gradient_sliding: u0 has the wrong length");
  const SpectralBounds& bounds = require_bounds(problem);
  const SlidingSchedule& sch = opts.schedule;
  const double M = *G.M;
  const double r = sch.penalty ? *sch.penalty : sliding_penalty(M, bounds, eps);
  const double l_r = r * bounds.sigma_max_sq;
  if (!(l_r > 0.0)) throw DegenerateError("gradient_sliding: penalty has zero curvature");
  const double d_tilde = sch.d_tilde_factor * R * R;
  const Index N = sch.N ? *sch.N : static_cast<Index>(std::ceil(std::sqrt(sch.n_factor * l_r * R * R / eps)));

  SolveReport rep;
  rep.method = "sliding";
  rep.penalty = r;
  History hist(problem);
  CounterSet& c = rep.counters;
  const std::optional<Box>& box = G.domain;

  Vec u = box ? box->project(u0) : u0;
  Vec u_bar = u;
  if (opts.record_history) hist.record(rep, u_bar, c);
  for (Index k = 1; k <= N; ++k) {
    const double kd = static_cast<double>(k);
    const double gamma = 2.0 / (kd + 1.0);
    const double beta = 2.0 * l_r / kd;
    const double tk = std::ceil(M * M * static_cast<double>(N) * kd * kd / (d_tilde * l_r * l_r));
    const Index T = std::max<Index>(1, static_cast<Index>(std::min<double>(tk, static_cast<double>(sch.max_inner))));
    const Vec u_under = gamma * u + (1.0 - gamma) * u_bar;
    const Vec g2 = r * outer_adjoint(problem, outer_forward(problem, u_under, c) - problem.b, c);
    Vec w = u;
    Vec w_tilde = u;
    for (Index t = 1; t <= T; ++t) {
      const double td = static_cast<double>(t);
      const double eta = td / 2.0;
      const double theta = 2.0 * (td + 1.0) / (td * (td + 3.0));
      const Vec g1 = gradient(G, w, c);
      w = sliding_prox_step(g1, g2, w, u, beta, eta, box);
      w_tilde = theta * w + (1.0 - theta) * w_tilde;
    }
    u = w;
    u_bar = gamma * w_tilde + (1.0 - gamma) * u_bar;
    guard(u_bar, opts.divergence_bound, "gradient_sliding", k);
    if (opts.record_history) hist.record(rep, u_bar, c);
  }
  rep.final_point = u_bar;
  rep.iterations = N;
  rep.converged = true;
  rep.stage_iterations = {N};
  rep.stage_eps = {eps};
  rep.wall_time = seconds_since(start);
  return rep;
}

SolveReport restarted_sliding(const AffineProblem& problem, double eps, double mu, const Vec& u0,
                              const RestartOptions& opts) {
  const auto start = Clock::now();
  if (!(mu > 0.0)) throw InvalidArgument("restarted_sliding: mu must be positive");
  if (!(eps > 0.0)) throw InvalidArgument("restarted_sliding: eps must be positive");
  const ObjectiveOracle& G = problem.objective;
  if (!G.domain)
    throw InvalidArgument("restarted_sliding: strongly convex nonsmooth objectives need a bounded domain");
  const Box& box = *G.domain;
  const Vec start_point = box.project(u0);
  double R = 0.0;
  if (opts.R) {
    R = *opts.R;
  } else {
    R = (box.lo - start_point).cwiseAbs().cwiseMax((box.hi - start_point).cwiseAbs()).norm();
  }
  if (!(R > 0.0)) throw InvalidArgument("restarted_sliding: initial distance bound must be positive");

  // Stages s = 0..S with eps_s = mu R_s^2 / divisor, R_s^2 = R_0^2 / 2^s and eps_S = eps.
  const double ratio = mu * R * R / (opts.stage_divisor * eps);
  const Index S = ratio > 1.0 ? static_cast<Index>(std::ceil(std::log2(ratio) - 1e-12)) : 0;
  const double r0_sq = opts.stage_divisor * eps * std::ldexp(1.0, static_cast<int>(S)) / mu;

  SolveReport rep;
  rep.method = "sliding_restart";
  Vec u = start_point;
  History hist(problem);
  if (opts.sliding.record_history) hist.record(rep, u, rep.counters);
  for (Index s = 0; s <= S; ++s) {
    const double rs_sq = r0_sq * std::ldexp(1.0, -static_cast<int>(s));
    const double eps_s = s == S ? eps : mu * rs_sq / opts.stage_divisor;
    SlidingOptions so = opts.sliding;
    so.record_history = false;
    const SolveReport stage = gradient_sliding(problem, eps_s, std::sqrt(rs_sq), u, so);
    u = stage.final_point;
    CounterSet& c = rep.counters;
    c.grad_calls += stage.counters.grad_calls;
    c.outer_forward += stage.counters.outer_forward;
    c.outer_adjoint += stage.counters.outer_adjoint;
    for (std::size_t i = 0; i < kTagCount; ++i) {
      c.forward[i] += stage.counters.forward[i];
      c.adjoint[i] += stage.counters.adjoint[i];
    }
    rep.iterations += stage.iterations;
    rep.stage_iterations.push_back(stage.iterations);
    rep.stage_eps.push_back(eps_s);
    rep.penalty = stage.penalty;
    if (opts.sliding.record_history) hist.record(rep, u, rep.counters);
  }
  rep.final_point = u;
  rep.converged = true;
  rep.wall_time = seconds_since(start);
  return rep;
}

}  // namespace mixopt
