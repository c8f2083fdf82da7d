// Copyright The mixopt Authors
// SPDX-License-Identifier: Apache-2.0

#include "mixopt/worstcase.hpp"

#include <cmath>

#include <Eigen/Eigenvalues>

namespace mixopt {

namespace {

GossipMatrix node_graph(const WorstInstanceSpec& spec) {
  if (spec.kappa_W) return path_for_kappa(*spec.kappa_W);
  return standard_topology(Topology::path, spec.n);
}

Mat psd_sqrt(const Mat& s) {
  Eigen::SelfAdjointEigenSolver<Mat> es(s);
  const Vec ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

// Group of node i for n nodes: 0 for V1, 1 for V2, 2 for V3.
int group_of(Index i, Index n) { return static_cast<int>(i / (n / 3)); }

}  // namespace

void WorstInstanceSpec::validate() const {
  if (truncation < 4) throw InvalidArgument("worst-case spec: truncation must be at least 4");
  if (!kappa_W && (n < 3 || n % 3 != 0)) throw InvalidArgument("worst-case spec: n must be a positive multiple of 3");
  if (!(kappa_f >= 1.0) || !(kappa_C >= 1.0) || !(kappa_A >= 1.0))
    throw InvalidArgument("worst-case spec: condition number targets must be at least 1");
  if (kappa_W && !(*kappa_W >= 1.0)) throw InvalidArgument("worst-case spec: kappa_W must be at least 1");
  if (!(mu_f > 0.0)) throw InvalidArgument("worst-case spec: mu_f must be positive");
}

NesterovMatrices nesterov_tridiagonal(Index T) {
  if (T < 2) throw InvalidArgument("nesterov_tridiagonal: T must be at least 2");
  NesterovMatrices out;
  out.E = Mat::Identity(T, T);
  for (Index k = 1; k < T; ++k) out.E(k, k - 1) = -1.0;
  out.M = out.E.transpose() * out.E;
  const Mat et = out.E.transpose();
  out.E1t = Mat::Zero(T, T);
  out.E2t = Mat::Zero(T, T);
  for (Index k = 0; k < T; ++k) (k % 2 == 0 ? out.E1t : out.E2t).row(k) = et.row(k);
  return out;
}

double nesterov_rho(double kappa_product) {
  if (!(kappa_product > 0.0)) throw InvalidArgument("nesterov_rho: kappa_product must be positive");
  const double s = std::sqrt(2.0 / 3.0 * kappa_product + 1.0);
  return (s - 1.0) / (s + 1.0);
}

Vec nesterov_dual_solution(double kappa_product, Index T) {
  if (T < 1) throw InvalidArgument("nesterov_dual_solution: T must be positive");
  const double rho = nesterov_rho(kappa_product);
  Vec z(T);
  double p = 1.0;
  for (Index k = 0; k < T; ++k) {
    p *= rho;
    z(k) = p;
  }
  return z;
}

WorstInstance build_worst_shared(const WorstInstanceSpec& spec) {
  spec.validate();
  const Index T = spec.truncation;
  const double mu_c = 1.0;
  const double l_c = spec.kappa_C * mu_c;
  // Calibrate L' and mu' so that the truncated family hits L_C and mu_C exactly:
  // 2L' + mu' = L_C and lambda_0 L' + mu' = 3 mu_C with lambda_0 = lambda_min(F F^T).
  const double lambda0 = 2.0 - 2.0 * std::cos(M_PI / static_cast<double>(T + 1));
  const double l_prime = (l_c - 3.0 * mu_c) / (2.0 - lambda0);
  const double mu_prime = 3.0 * mu_c - lambda0 * l_prime;
  if (!(l_prime > 0.0) || !(mu_prime > 0.0)) {
    throw InfeasibleError("build_worst_shared: kappa_C = " + std::to_string(spec.kappa_C) +
                          " is not reachable at truncation " + std::to_string(T) + " (L' = " +
                          std::to_string(l_prime) + ", mu' = " + std::to_string(mu_prime) + ")");
  }
  const GossipMatrix g = node_graph(spec);
  const Index n = g.n;
  if (n % 3 != 0) throw InvalidArgument("build_worst_shared: node count must be a multiple of 3");

  const Index dp = T + 1;
  const Index dim = dp + T;
  Mat ct = Mat::Zero(T, dim);
  for (Index k = 0; k < T; ++k) {
    ct(k, k) = -std::sqrt(l_prime);
    ct(k, k + 1) = std::sqrt(l_prime);
    ct(k, dp + k) = std::sqrt(mu_prime);
  }
  const double mu_f = spec.mu_f;
  const double l_f = spec.kappa_f * mu_f;
  Mat Q = Mat::Zero(dim, dim);
  Q.topLeftCorner(dp, dp).diagonal().setConstant(mu_f);
  Q.bottomRightCorner(T, T).diagonal().setConstant(l_f);
  Vec q = Vec::Zero(dim);
  q(dp) = l_f * l_prime / mu_f;

  WorstInstance out;
  MixedProblemData& d = out.data;
  d.n = n;
  d.W = g.W;
  d.shared_dim = dim;
  d.x_dims.assign(n, 0);
  for (Index i = 0; i < n; ++i) {
    d.f.push_back(quadratic_oracle(Q, q));
    Mat ci = Mat::Zero(T, dim);
    const int grp = group_of(i, n);
    for (Index k = 0; k < T; ++k) {
      if ((grp == 0 && k % 2 == 0) || (grp == 2 && k % 2 == 1)) ci.row(k) = ct.row(k);
    }
    d.C_tilde.push_back(ci);
    d.c_tilde.push_back(Vec::Zero(T));
  }
  out.L_prime = l_prime;
  out.mu_prime = mu_prime;
  const MatrixFamily fam(d.C_tilde);
  out.measured_L = max_block_lambda(fam, true);
  out.measured_mu = positive_eigen_range(interaction_matrix(fam, true)).lambda_min_plus;
  out.measured_kappa = mixed_condition_number(fam, true);
  // With s = t + (L'/mu_f) e_1 the optimality conditions read (F F^T + c I) s = c (L'/mu_f) e_1,
  // c = mu' mu_f / (L' L_f), whose decay rate solves rho + 1/rho = 2 + c.
  const double c = mu_prime * mu_f / (l_prime * l_f);
  out.kappa_product_eff = 6.0 / c;
  out.rho = nesterov_rho(out.kappa_product_eff);
  out.t_offset = dp;
  return out;
}

WorstInstance build_worst_coupled_local(const WorstInstanceSpec& spec) {
  spec.validate();
  if (spec.kappa_A < 9.0) throw InvalidArgument("build_worst_coupled_local: kappa_A must be at least 9");
  const Index T = spec.truncation;
  const double mu_ac = 1.0;
  const double l_a = spec.kappa_A * mu_ac;
  const double l_prime = 0.5 * l_a - 4.5 * mu_ac;
  const double mu_prime = 9.0 * mu_ac;
  if (!(l_prime > 0.0)) {
    throw InfeasibleError("build_worst_coupled_local: kappa_A = " + std::to_string(spec.kappa_A) +
                          " gives a nonpositive chain weight");
  }
  const GossipMatrix g = node_graph(spec);
  const Index n = g.n;
  if (n % 3 != 0) throw InvalidArgument("build_worst_coupled_local: node count must be a multiple of 3");
  const GossipMatrix wc = path_for_kappa(spec.kappa_C);
  const Index l = wc.n;

  // Chain blocks: E1 rows e_1, e_2 - e_3, 0, e_4 - e_5, ...; E2 rows e_1 - e_2, 0, e_3 - e_4, 0, ...
  Mat e1 = Mat::Zero(T, T), e2 = Mat::Zero(T, T);
  e1(0, 0) = 1.0;
  for (Index k = 1; k < T; k += 2) {
    e1(k, k) = 1.0;
    if (k + 1 < T) e1(k, k + 1) = -1.0;
  }
  for (Index k = 0; k < T; k += 2) {
    e2(k, k) = 1.0;
    if (k + 1 < T) e2(k, k + 1) = -1.0;
  }
  const Index block = l * T;
  const Index dim = 2 * block;
  const Mat root = psd_sqrt(wc.W);
  Mat s = Mat::Zero(block, block);
  for (Index a = 0; a < l; ++a) {
    for (Index b = 0; b < l; ++b) s.block(a * T, b * T, T, T).diagonal().setConstant(root(a, b));
  }
  Mat ci = Mat::Zero(dim, dim);
  ci.topLeftCorner(block, block) = s;
  ci.bottomRightCorner(block, block) = s;

  const double mu_f = spec.mu_f;
  const double l_f = spec.kappa_f * mu_f;
  const double ld = static_cast<double>(l);
  Mat Q = Mat::Zero(dim, dim);
  Q.topLeftCorner(block, block).diagonal().setConstant(mu_f / ld);
  Q.bottomRightCorner(block, block).diagonal().setConstant(l_f / ld);
  Vec q = Vec::Zero(dim);
  const double shift = std::sqrt(l_prime) / (2.0 * mu_f);
  for (Index j = 0; j < l; ++j) q(j * T) = mu_f / ld * shift;

  WorstInstance out;
  MixedProblemData& d = out.data;
  d.n = n;
  d.W = g.W;
  d.shared_dim = 0;
  d.x_dims.assign(n, dim);
  for (Index i = 0; i < n; ++i) {
    d.f.push_back(quadratic_oracle(Q, q));
    const int grp = group_of(i, n);
    Mat ai = Mat::Zero(block, dim);
    if (grp != 1) {
      const Mat& e = grp == 0 ? e1 : e2;
      // j in U1 for V1 nodes, j in U3 for V3 nodes.
      for (Index j = 0; j < l; ++j) {
        if (group_of(j, l) != grp) continue;
        ai.block(j * T, j * T, T, T) = std::sqrt(l_prime) * e.transpose();
        ai.block(j * T, block + j * T, T, T) = std::sqrt(mu_prime) * Mat::Identity(T, T);
      }
    }
    d.A.push_back(ai);
    d.b.push_back(Vec::Zero(block));
    d.C.push_back(ci);
    d.c.push_back(Vec::Zero(dim));
  }
  out.L_prime = l_prime;
  out.mu_prime = mu_prime;
  const MatrixFamily a_fam(d.A), c_fam(d.C);
  const ProjectedCondition pc = projected_condition_number(a_fam, c_fam);
  out.measured_L = max_block_lambda(a_fam);
  out.measured_mu = pc.mu_tilde;
  out.measured_kappa = pc.kappa_tilde;
  out.t_offset = block;
  out.l = l;
  return out;
}

WorstInstance build_worst(const WorstInstanceSpec& spec) {
  return spec.kind == WorstKind::shared_local ? build_worst_shared(spec) : build_worst_coupled_local(spec);
}

WorstKind parse_worst_kind(const std::string& name) {
  if (name == "shared_local" || name == "shared") return WorstKind::shared_local;
  if (name == "coupled_local") return WorstKind::coupled_local;
  throw InvalidArgument("unknown worst-case kind '" + name + "'");
}

}  // namespace mixopt
