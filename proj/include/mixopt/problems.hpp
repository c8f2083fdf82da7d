// Copyright The mixopt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mixopt/conditioning.hpp"
#include "mixopt/network.hpp"
#include "mixopt/operators.hpp"

namespace mixopt {

struct Box {
  Vec lo;
  Vec hi;

  Vec project(const Vec& x) const { return x.cwiseMax(lo).cwiseMin(hi); }
  bool contains(const Vec& x, double tol = 0.0) const {
    return ((x - lo).array() >= -tol).all() && ((hi - x).array() >= -tol).all();
  }
  double diameter() const { return (hi - lo).norm(); }
};

// Effective dense form 0.5 x'Hx + h'x + c.
struct QuadraticForm {
  Mat H;
  Vec h;
  double c = 0.0;
};

// Parameters as given to quadratic_oracle, kept for serialization.
struct QuadraticSpec {
  Mat Q;
  Vec q;
  double mu_shift = 0.0;
};

// Value and (sub)gradient access with declared constants. The gradient member
// returns a subgradient when smooth is false. Calls may record operator
// applies (e.g. of a penalty term) into the counter set they receive.
struct ObjectiveOracle {
  Index dim = 0;
  std::function<double(const Vec&, CounterSet*)> value_fn;
  std::function<Vec(const Vec&, CounterSet*)> gradient_fn;
  double mu = 0.0;
  std::optional<double> L;
  std::optional<double> M;
  std::optional<Box> domain;
  bool smooth = true;
  std::optional<QuadraticForm> quadratic;
  std::optional<QuadraticSpec> spec;

  double value(const Vec& x, CounterSet* counters = nullptr) const { return value_fn(x, counters); }
  Vec gradient(const Vec& x, CounterSet* counters = nullptr) const { return gradient_fn(x, counters); }
  Vec subgradient(const Vec& x, CounterSet* counters = nullptr) const { return gradient_fn(x, counters); }
  // mu = L = 0: a linear function, which only the regularized path accepts.
  bool degenerate() const { return mu == 0.0 && L && *L == 0.0; }
};

ObjectiveOracle quadratic_oracle(const Mat& Q, const Vec& q, double mu_shift = 0.0);

// w * ||x - g||_1, optionally restricted to a box (for the subgradient bound).
ObjectiveOracle l1_oracle(const Vec& g, double weight = 1.0, std::optional<Box> domain = std::nullopt);

// ||x - g||_1 + (mu/2)||x||^2 on a box; M accounts for both terms on the box.
ObjectiveOracle strongly_convex_l1_oracle(const Vec& g, double mu, const Box& domain);

// F(x_1, ..., x_k) = sum_j f_j(x_j) over the concatenated vector.
ObjectiveOracle separable_sum(const std::vector<ObjectiveOracle>& parts);

// G(u) + (nu/2)||u0 - u||^2.
ObjectiveOracle regularize(const ObjectiveOracle& oracle, const Vec& u0, double nu);

// H_r(u) = G(u) + (r/2)||Bu - b||^2. If bounds are absent they are computed densely.
ObjectiveOracle penalize(const ObjectiveOracle& oracle, const Operator& B, const Vec& b, double r,
                         std::optional<SpectralBounds> bounds = std::nullopt);

// r = 2 R_dual^2 / eps with R_dual = M / sigma_min+(B).
double sliding_penalty(double M, const SpectralBounds& bounds, double eps);

struct NonsmoothPenaltyConfig {
  double alpha_sq = 0.0;
  double r = 0.0;
  double eps_checked = 0.0;
  bool clipped = false;
};

// alpha^2 for the nonsmooth strongly convex coupled penalty; needs A and W only.
double nonsmooth_penalty_alpha_sq(const SpectralBounds& a, const SpectralBounds& w);

// alpha^2 = (mu_A + L_A)/mu_W, r = M / sigma_min+(B) for the assembled B = (A alpha W),
// eps clipped to 4 r^2 mu_A / mu_f.
NonsmoothPenaltyConfig nonsmooth_strongly_convex_penalty_config(double M, double mu_f, const SpectralBounds& a,
                                                                const SpectralBounds& w,
                                                                const SpectralBounds& b_assembled, double eps);

// Problem (P) data. An empty group vector means the group is absent.
struct MixedProblemData {
  Index n = 0;
  std::vector<ObjectiveOracle> f;  // node i: over (x_i, x_tilde)
  std::vector<Mat> A;
  std::vector<Vec> b;
  std::vector<Mat> C;
  std::vector<Vec> c;
  std::vector<Mat> C_tilde;
  std::vector<Vec> c_tilde;
  Mat W;
  std::vector<Index> x_dims;
  Index shared_dim = 0;

  bool has_coupled() const { return !A.empty(); }
  bool has_local() const { return !C.empty(); }
  bool has_shared_constraints() const { return !C_tilde.empty(); }
  Index total_x() const;
  Index coupled_rows() const { return A.empty() ? 0 : A[0].rows(); }

  // Shapes, node counts, vector lengths. Throws InvalidArgument.
  void validate() const;
};

// Where each variable group lives inside the canonical vector u = (x, y, x_tilde copies).
struct ProblemLayout {
  Index n = 0;
  std::vector<Index> x_dims;
  Index x_offset = 0;
  Index x_size = 0;
  Index y_offset = 0;
  Index y_size = 0;  // n * m when the coupled block is present
  Index m = 0;
  Index xt_offset = 0;
  Index xt_size = 0;  // n * shared_dim
  Index shared_dim = 0;

  Index total() const { return x_size + y_size + xt_size; }
  Vec x(const Vec& u) const { return u.segment(x_offset, x_size); }
  Vec y(const Vec& u) const { return u.segment(y_offset, y_size); }
  // Copy of x_tilde held by node i.
  Vec x_tilde(const Vec& u, Index i = 0) const { return u.segment(xt_offset + i * shared_dim, shared_dim); }
};

// One diagonal block of a block-diagonal constraint operator.
struct ConstraintBlock {
  Operator op;
  Vec rhs;
  Index col_offset = 0;
  std::string name;
  std::optional<SpectralBounds> bounds;
};

struct AffineProblem {
  ObjectiveOracle objective;
  Operator B;
  Vec b;
  std::optional<SpectralBounds> bounds;
  std::optional<Vec> solution_hint;
  std::vector<ConstraintBlock> blocks;  // nonempty when B = diag(blocks)
  ProblemLayout layout;
  std::string regime;
  bool degenerate = false;       // constraint operator is identically zero
  std::vector<Index> degrees;    // Chebyshev degrees of the outer preconditioner, per block
  Index gossip_degree = 0;       // degree of W' when the gossip matrix is accelerated
  Index local_degree = 0;        // degree of C' when local constraints are accelerated

  Index dim() const { return objective.dim; }
};

struct BuildOptions {
  bool accelerate_gossip = false;  // replace W by P(W)
  bool accelerate_local = false;   // replace C by P(C^T C)
  SpectralOptions spectral;
};

AffineProblem build_consensus(const MixedProblemData& data, const BuildOptions& opts = {});
AffineProblem build_shared(const MixedProblemData& data, const BuildOptions& opts = {});
AffineProblem build_coupled(const MixedProblemData& data, const BuildOptions& opts = {});
AffineProblem build_coupled_local(const MixedProblemData& data, const BuildOptions& opts = {});
AffineProblem build_mixed(const MixedProblemData& data, const BuildOptions& opts = {});

// Replaces each constraint block by its Chebyshev form K u = b' and records certified bounds.
AffineProblem precondition(const AffineProblem& problem, const SpectralOptions& opts = {});

// Fills problem.bounds by dense SVD when missing.
void ensure_bounds(AffineProblem& problem, const SpectralOptions& opts = {});

// Minimizer of a quadratic objective on {Bu = b} via the minimum-norm KKT solution.
Vec dense_canonical_solution(const AffineProblem& problem);

enum class Regime { consensus, shared, coupled, coupled_local, mixed };

std::string regime_name(Regime r);
Regime parse_regime(const std::string& name);
// Narrowest regime whose builder accepts the data.
Regime detect_regime(const MixedProblemData& data);

struct PipelineOptions {
  bool accelerate_gossip = true;
  bool accelerate_local = true;
  bool precondition = true;
  bool solution_hint = true;
  SpectralOptions spectral;
};

// Builder, inner and outer Chebyshev acceleration, bounds and (for quadratics) the solution hint.
AffineProblem decentralized_problem(const MixedProblemData& data, Regime regime, const PipelineOptions& opts = {});
AffineProblem build(const MixedProblemData& data, Regime regime, const BuildOptions& opts = {});

}  // namespace mixopt
