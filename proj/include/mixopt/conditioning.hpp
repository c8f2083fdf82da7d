// Copyright The mixopt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "mixopt/operators.hpp"

namespace mixopt {

// Per-node constraint blocks B_1, ..., B_n.
struct MatrixFamily {
  std::vector<Mat> blocks;

  MatrixFamily() = default;
  explicit MatrixFamily(std::vector<Mat> b) : blocks(std::move(b)) {}
  Index n() const { return static_cast<Index>(blocks.size()); }
};

enum class ScalingRegime { coupled, coupled_local_mu_pos, coupled_local_mu_zero, shared, identical_local };

struct ScalingCoefficients {
  double alpha_sq = 0.0;
  double beta_sq = 0.0;
  std::optional<double> gamma_sq;
  ScalingRegime regime = ScalingRegime::coupled;
};

// Largest and smallest positive eigenvalue of a symmetric PSD matrix.
// Eigenvalues at or below rank_tol * lambda_max count as zero.
struct EigenRange {
  double lambda_max = 0.0;
  double lambda_min_plus = 0.0;
};

EigenRange positive_eigen_range(const Mat& sym, double rank_tol = 1e-9);

// S_B = (1/n) sum B_i B_i^T, or (1/n) sum B_i^T B_i when transposed.
Mat interaction_matrix(const MatrixFamily& family, bool transposed = false);

// kappa_hat_B = max_i lambda_max(B_i B_i^T) / lambda_min+(S_B).
double mixed_condition_number(const MatrixFamily& family, bool transposed = false);

// max_i lambda_max(B_i B_i^T) (or B_i^T B_i when transposed).
double max_block_lambda(const MatrixFamily& family, bool transposed = false);

struct ProjectedCondition {
  double mu_tilde = 0.0;
  double kappa_tilde = 1.0;
};

// mu_tilde = (1/n) sigma_min+^2(B' P_ker D), kappa_tilde = max_i lambda_max(B_i B_i^T) / mu_tilde,
// and kappa_tilde = 1 when mu_tilde <= degenerate_tol * max_i lambda_max(B_i B_i^T).
ProjectedCondition projected_condition_number(const MatrixFamily& b_family, const MatrixFamily& d_family,
                                              double degenerate_tol = 1e-9);

double coupled_scaling(const SpectralBounds& a, double s_a_min, const SpectralBounds& w);

ScalingCoefficients mixed_scaling(const SpectralBounds& a, double mu_tilde_ac, double l_s, const SpectralBounds& c,
                                  const SpectralBounds& w);

double shared_scaling(const MatrixFamily& c_tilde_family, const SpectralBounds& w);

// Same as above, taking the gossip matrix itself so that a kernel larger than
// the consensus line is rejected.
double shared_scaling(const MatrixFamily& c_tilde_family, const Mat& w);

ScalingCoefficients identical_local_scaling(const MatrixFamily& a_family, const SpectralBounds& c_tilde,
                                            const SpectralBounds& w);

// Chebyshev acceleration.
//
// The iteration runs on a normal residual map r(v) = B^T(Bv - b), or
// r(v) = Sv - s for a symmetric PSD S, with [lo, hi] bounding the positive
// spectrum of B^T B (resp. S).
struct ChebyshevPlan {
  Index degree = 1;
  double rho = 0.0;
  double nu = 0.0;
  double delta0 = 0.0;
  double lo = 0.0;
  double hi = 0.0;

  // Max of |1 - P| over [lo, hi]; the preconditioned spectrum lies in [1 - e, 1 + e].
  double deviation() const;
};

ChebyshevPlan chebyshev_plan(double hi, double lo);

template <typename Scalar, typename Residual>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> chebyshev_iterate(Eigen::Matrix<Scalar, Eigen::Dynamic, 1> v,
                                                           Residual&& residual, const ChebyshevPlan& plan) {
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  const Scalar rho = static_cast<Scalar>(plan.rho);
  const Scalar nu = static_cast<Scalar>(plan.nu);
  Scalar delta = static_cast<Scalar>(plan.delta0);
  Vector p = -residual(v) / nu;
  v += p;
  for (Index i = 1; i < plan.degree; ++i) {
    const Scalar beta = rho / delta;
    delta = -(nu + beta);
    p = (residual(v) + beta * p) / delta;
    v += p;
  }
  return v;
}

template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> chebyshev_apply(const Eigen::Ref<const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>>& v,
                                                         const LinearOperator<Scalar>& b_op,
                                                         const Eigen::Ref<const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>>& b,
                                                         const SpectralBounds& bounds, CounterSet* counters = nullptr) {
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  if (v.size() != b_op.cols() || b.size() != b_op.rows()) throw InvalidArgument("chebyshev_apply: shape mismatch");
  const ChebyshevPlan plan = chebyshev_plan(bounds.sigma_max_sq, bounds.sigma_min_plus_sq);
  auto residual = [&](const Vector& x) -> Vector {
    return b_op.adjoint_apply(b_op.apply(x, counters) - b, counters);
  };
  return chebyshev_iterate<Scalar>(Vector(v), residual, plan);
}

// Preconditioned constraint K u = b' with the same solution set as B u = b.
template <typename Scalar>
struct ChebyshevSystem {
  LinearOperator<Scalar> K;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> b_prime;
  SpectralBounds bounds;  // certified from the polynomial, given valid input bounds
  Index degree = 1;
};

// K = P(B^T B) = I - T(B^T B) applied matrix-free; b' = chebyshev_apply(0, B, b).
template <typename Scalar>
ChebyshevSystem<Scalar> chebyshev_operator(const LinearOperator<Scalar>& b_op,
                                           const Eigen::Ref<const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>>& b,
                                           const SpectralBounds& bounds) {
  using Op = LinearOperator<Scalar>;
  using Vector = typename Op::Vector;
  if (b.size() != b_op.rows()) throw InvalidArgument("chebyshev_operator: rhs length differs from operator rows");
  if (bounds.sigma_min_plus_sq <= 0.0) throw DegenerateError("chebyshev_operator: operator has no positive spectrum");
  const ChebyshevPlan plan = chebyshev_plan(bounds.sigma_max_sq, bounds.sigma_min_plus_sq);
  auto body = [b_op, plan](const typename Op::ConstRef& u, CounterSet* counters) -> Vector {
    auto residual = [&](const Vector& x) -> Vector { return b_op.adjoint_apply(b_op.apply(x, counters), counters); };
    return u - chebyshev_iterate<Scalar>(Vector(u), residual, plan);
  };
  ChebyshevSystem<Scalar> out;
  out.K = Op(b_op.cols(), b_op.cols(), body, body);
  out.b_prime = chebyshev_apply<Scalar>(Vector::Zero(b_op.cols()), b_op, b, bounds);
  const double e = plan.deviation();
  out.bounds = SpectralBounds{(1.0 + e) * (1.0 + e), (1.0 - e) * (1.0 - e), bounds.rank};
  out.degree = plan.degree;
  return out;
}

// P(S) for a symmetric PSD operator S with positive spectrum in [range.lambda_min_plus, range.lambda_max].
// Used for gossip acceleration W' = P(W): degree ceil(sqrt(kappa_W)), one S apply per step.
template <typename Scalar>
ChebyshevSystem<Scalar> chebyshev_psd_operator(const LinearOperator<Scalar>& s_op, const EigenRange& range) {
  using Op = LinearOperator<Scalar>;
  using Vector = typename Op::Vector;
  if (s_op.rows() != s_op.cols()) throw InvalidArgument("chebyshev_psd_operator: operator must be square");
  if (range.lambda_min_plus <= 0.0) throw DegenerateError("chebyshev_psd_operator: no positive spectrum");
  const ChebyshevPlan plan = chebyshev_plan(range.lambda_max, range.lambda_min_plus);
  auto body = [s_op, plan](const typename Op::ConstRef& u, CounterSet* counters) -> Vector {
    auto residual = [&](const Vector& x) -> Vector { return s_op.apply(x, counters); };
    return u - chebyshev_iterate<Scalar>(Vector(u), residual, plan);
  };
  ChebyshevSystem<Scalar> out;
  out.K = Op(s_op.rows(), s_op.cols(), body, body);
  out.b_prime = Vector::Zero(s_op.rows());
  const double e = plan.deviation();
  out.bounds = SpectralBounds{(1.0 + e) * (1.0 + e), (1.0 - e) * (1.0 - e), -1};
  out.degree = plan.degree;
  return out;
}

}  // namespace mixopt
