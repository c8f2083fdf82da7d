// Copyright The mixopt Authors
// SPDX-License-Identifier: Apache-2.0

#include "mixopt/conditioning.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>

namespace mixopt {

namespace {

// Unnormalized sum of B_i P_i B_i^T; a null projector means identity.
Mat gram_sum(const MatrixFamily& family, bool transposed, const std::vector<std::optional<Mat>>* projectors) {
  if (family.blocks.empty()) throw InvalidArgument("matrix family is empty");
  const Index m = transposed ? family.blocks[0].cols() : family.blocks[0].rows();
  Mat s = Mat::Zero(m, m);
  for (std::size_t i = 0; i < family.blocks.size(); ++i) {
    const Mat& b = family.blocks[i];
    const Index rows = transposed ? b.cols() : b.rows();
    if (rows != m) throw InvalidArgument("matrix family blocks differ in row dimension");
    const Mat bi = transposed ? Mat(b.transpose()) : b;
    if (projectors && (*projectors)[i]) {
      s += bi * (*(*projectors)[i]) * bi.transpose();
    } else {
      s += bi * bi.transpose();
    }
  }
  return s;
}

double lambda_max_sym(const Mat& sym) {
  if (sym.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Mat> es(sym, Eigen::EigenvaluesOnly);
  return std::max(0.0, es.eigenvalues().maxCoeff());
}

}  // namespace

EigenRange positive_eigen_range(const Mat& sym, double rank_tol) {
  EigenRange out;
  if (sym.size() == 0) return out;
  Eigen::SelfAdjointEigenSolver<Mat> es(sym, Eigen::EigenvaluesOnly);
  const auto& ev = es.eigenvalues();
  out.lambda_max = std::max(0.0, ev.maxCoeff());
  if (out.lambda_max <= 0.0) return out;
  double lo = out.lambda_max;
  for (Index i = 0; i < ev.size(); ++i) {
    if (ev(i) > rank_tol * out.lambda_max) lo = std::min(lo, ev(i));
  }
  out.lambda_min_plus = lo;
  return out;
}

Mat interaction_matrix(const MatrixFamily& family, bool transposed) {
  return gram_sum(family, transposed, nullptr) / static_cast<double>(family.n());
}

double max_block_lambda(const MatrixFamily& family, bool transposed) {
  double out = 0.0;
  for (const Mat& b : family.blocks) {
    out = std::max(out, lambda_max_sym(transposed ? Mat(b.transpose() * b) : Mat(b * b.transpose())));
  }
  return out;
}

double mixed_condition_number(const MatrixFamily& family, bool transposed) {
  // n * max / lambda_min+(sum) avoids rounding the 1/n factor twice.
  const EigenRange range = positive_eigen_range(gram_sum(family, transposed, nullptr));
  if (range.lambda_min_plus <= 0.0) throw DegenerateError("interaction matrix is identically zero");
  return static_cast<double>(family.n()) * max_block_lambda(family, transposed) / range.lambda_min_plus;
}

ProjectedCondition projected_condition_number(const MatrixFamily& b_family, const MatrixFamily& d_family,
                                              double degenerate_tol) {
  if (b_family.n() != d_family.n()) throw InvalidArgument("projected_condition_number: families differ in size");
  std::vector<std::optional<Mat>> projectors(b_family.blocks.size());
  for (std::size_t i = 0; i < b_family.blocks.size(); ++i) {
    const Mat& d = d_family.blocks[i];
    if (d.cols() != b_family.blocks[i].cols())
      throw InvalidArgument("projected_condition_number: column dimensions of B_i and D_i differ");
    const bool zero = d.size() == 0 || d.cwiseAbs().maxCoeff() == 0.0;
    if (!zero) projectors[i] = kernel_projector_matrix<double>(d);
  }
  const double lmax = max_block_lambda(b_family);
  const EigenRange range = positive_eigen_range(gram_sum(b_family, false, &projectors));
  ProjectedCondition out;
  const double n = static_cast<double>(b_family.n());
  out.mu_tilde = range.lambda_min_plus / n;
  if (out.mu_tilde <= degenerate_tol * lmax || range.lambda_min_plus <= 0.0) {
    out.mu_tilde = 0.0;
    out.kappa_tilde = 1.0;
    return out;
  }
  out.kappa_tilde = n * lmax / range.lambda_min_plus;
  return out;
}

double coupled_scaling(const SpectralBounds& a, double s_a_min, const SpectralBounds& w) {
  if (w.sigma_min_plus_sq <= 0.0) throw InvalidArgument("coupled_scaling: sigma_min+^2(W) must be positive");
  return (s_a_min + a.sigma_max_sq) / w.sigma_min_plus_sq;
}

ScalingCoefficients mixed_scaling(const SpectralBounds& a, double mu_tilde_ac, double l_s, const SpectralBounds& c,
                                  const SpectralBounds& w) {
  if (w.sigma_min_plus_sq <= 0.0) throw InvalidArgument("mixed_scaling: sigma_min+^2(W) must be positive");
  if (c.sigma_min_plus_sq <= 0.0) throw InvalidArgument("mixed_scaling: sigma_min+^2(C) must be positive");
  const double l_a = a.sigma_max_sq;
  ScalingCoefficients out;
  if (mu_tilde_ac > 0.0) {
    out.alpha_sq = (l_a + 0.25 * mu_tilde_ac) / w.sigma_min_plus_sq;
    out.beta_sq = (l_s + 0.5 * mu_tilde_ac) / c.sigma_min_plus_sq;
    out.regime = ScalingRegime::coupled_local_mu_pos;
  } else {
    out.alpha_sq = 2.0 * l_a / w.sigma_min_plus_sq;
    out.beta_sq = (l_s + 2.0 * l_a) / c.sigma_min_plus_sq;
    out.regime = ScalingRegime::coupled_local_mu_zero;
  }
  if (!(out.alpha_sq > 0.0) || !(out.beta_sq > 0.0)) throw InvalidArgument("mixed_scaling: coefficients not positive");
  return out;
}

double shared_scaling(const MatrixFamily& c_tilde_family, const SpectralBounds& w) {
  if (w.sigma_min_plus_sq <= 0.0) throw InvalidArgument("shared_scaling: sigma_min+^2(W) must be positive");
  const EigenRange s = positive_eigen_range(interaction_matrix(c_tilde_family, true));
  SpectralBounds ct;
  ct.sigma_max_sq = max_block_lambda(c_tilde_family, true);
  return coupled_scaling(ct, s.lambda_min_plus, w);
}

double shared_scaling(const MatrixFamily& c_tilde_family, const Mat& w) {
  if (kernel_basis<double>(w).cols() != 1)
    throw InvalidArgument("shared_scaling: ker W is not the consensus line (disconnected graph?)");
  return shared_scaling(c_tilde_family, spectral_bounds<double>(w));
}

ScalingCoefficients identical_local_scaling(const MatrixFamily& a_family, const SpectralBounds& c_tilde,
                                            const SpectralBounds& w) {
  const double s_a = positive_eigen_range(interaction_matrix(a_family)).lambda_min_plus;
  const double l_a = max_block_lambda(a_family);
  if (s_a <= 0.0) throw InvalidArgument("identical_local_scaling: lambda_min+(S_A) is zero");
  if (w.sigma_min_plus_sq <= 0.0) throw InvalidArgument("identical_local_scaling: sigma_min+^2(W) is zero");
  if (c_tilde.sigma_min_plus_sq <= 0.0) throw InvalidArgument("identical_local_scaling: sigma_min+^2(C~) is zero");
  ScalingCoefficients out;
  out.alpha_sq = 2.0 * c_tilde.sigma_min_plus_sq / s_a;
  out.beta_sq = (s_a + l_a) / w.sigma_min_plus_sq;
  out.gamma_sq = c_tilde.sigma_min_plus_sq / w.sigma_min_plus_sq;
  out.regime = ScalingRegime::identical_local;
  return out;
}

ChebyshevPlan chebyshev_plan(double hi, double lo) {
  if (!(lo > 0.0) || !(hi >= lo)) throw InvalidArgument("chebyshev_plan: need 0 < lo <= hi");
  ChebyshevPlan plan;
  plan.hi = hi;
  plan.lo = lo;
  // Guard against ceil() jumping on a ratio that is an integer square up to rounding.
  const double root = std::sqrt(hi / lo);
  plan.degree = std::max<Index>(1, static_cast<Index>(std::ceil(root * (1.0 - 1e-12))));
  plan.rho = (hi - lo) * (hi - lo) / 16.0;
  plan.nu = (hi + lo) / 2.0;
  plan.delta0 = -plan.nu / 2.0;
  return plan;
}

double ChebyshevPlan::deviation() const {
  if (hi <= lo) return 0.0;
  const double ratio = (hi + lo) / (hi - lo);
  return 1.0 / std::cosh(static_cast<double>(degree) * std::acosh(ratio));
}

}  // namespace mixopt
