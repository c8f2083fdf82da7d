// Copyright The mixopt Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>

#include <gtest/gtest.h>

#include "mixopt/solvers.hpp"
#include "mixopt/worstcase.hpp"
#include "oracles.hpp"

using namespace mixopt;

TEST(Nesterov, TwoByTwoChain) {
  const NesterovMatrices nm = nesterov_tridiagonal(2);
  Mat want(2, 2);
  want << 2, -1, -1, 1;  // the last diagonal entry is the truncation boundary
  EXPECT_EQ(nm.M, want);
  EXPECT_EQ(nm.E.transpose() * nm.E, nm.M);
}

TEST(Nesterov, InteriorIsTridiagonalTwoMinusOne) {
  const Index T = 8;
  const NesterovMatrices nm = nesterov_tridiagonal(T);
  EXPECT_EQ(nm.E.transpose() * nm.E, nm.M);
  for (Index i = 0; i + 1 < T; ++i) {
    EXPECT_EQ(nm.M(i, i), 2.0);
    EXPECT_EQ(nm.M(i, i + 1), -1.0);
    EXPECT_EQ(nm.M(i + 1, i), -1.0);
  }
  EXPECT_EQ(nm.M(T - 1, T - 1), 1.0);
  EXPECT_EQ((nm.M - Mat(nm.M.diagonal().asDiagonal())).cwiseAbs().sum(), 2.0 * (T - 1));
}

TEST(Nesterov, RowSplitRecombines) {
  const NesterovMatrices nm = nesterov_tridiagonal(7);
  EXPECT_EQ(nm.E1t + nm.E2t, Mat(nm.E.transpose()));
  for (Index k = 0; k < 7; ++k) {
    // Each row of E^T lands in exactly one of the two halves.
    const bool in1 = nm.E1t.row(k).cwiseAbs().sum() > 0.0;
    const bool in2 = nm.E2t.row(k).cwiseAbs().sum() > 0.0;
    EXPECT_NE(in1, in2);
    EXPECT_EQ(in1, k % 2 == 0);
  }
}

TEST(Nesterov, RhoFormulaPlugs) {
  EXPECT_NEAR(nesterov_rho(4.5), 1.0 / 3.0, 1e-15);
  const double s = std::sqrt(5.0 / 3.0);
  EXPECT_NEAR(nesterov_rho(1.0), (s - 1.0) / (s + 1.0), 1e-15);
  EXPECT_THROW(nesterov_rho(0.0), InvalidArgument);
}

TEST(Nesterov, DualSolutionMatchesTruncatedSolve) {
  // rho + 1/rho = 2 + c with c = 6 / kappa: the Toeplitz system (M + c I) z = e_1 has z_k = rho^k
  // up to the truncation boundary.
  for (double kappa : {4.5, 30.0, 300.0}) {
    const Index T = 40;
    Mat M = Mat::Zero(T, T);
    for (Index i = 0; i < T; ++i) {
      M(i, i) = 2.0 + 6.0 / kappa;
      if (i + 1 < T) M(i, i + 1) = M(i + 1, i) = -1.0;
    }
    const Vec z = M.ldlt().solve(Vec::Unit(T, 0));
    const Vec want = nesterov_dual_solution(kappa, T);
    const double rho = nesterov_rho(kappa);
    EXPECT_NEAR(want(0), rho, 1e-15);
    EXPECT_LE((z - want).cwiseAbs().maxCoeff(), std::pow(rho, T) + 1e-14);
  }
}

TEST(WorstShared, MeasuredConstantsHitTargets) {
  for (double kappa_c : {10.0, 100.0, 1000.0}) {
    WorstInstanceSpec spec;
    spec.kappa_C = kappa_c;
    spec.kappa_f = 10.0;
    const WorstInstance w = build_worst_shared(spec);
    EXPECT_NEAR(w.measured_L, 2.0 * w.L_prime + w.mu_prime, 1e-9 * kappa_c);
    EXPECT_NEAR(w.measured_L, kappa_c, 1e-9 * kappa_c);
    EXPECT_NEAR(w.measured_mu, 1.0, std::pow(w.rho, spec.truncation) + 1e-9);
    EXPECT_NEAR(w.measured_kappa, kappa_c, 1e-8 * kappa_c);
  }
}

TEST(WorstShared, SpecValidation) {
  WorstInstanceSpec spec;
  spec.n = 4;
  EXPECT_THROW(build_worst_shared(spec), InvalidArgument);
  spec.n = 3;
  spec.truncation = 3;
  EXPECT_THROW(build_worst_shared(spec), InvalidArgument);
  spec.truncation = 8;
  spec.kappa_C = 2.0;
  EXPECT_THROW(build_worst_shared(spec), InfeasibleError);
}

TEST(WorstShared, SolverReproducesGeometricDecay) {
  WorstInstanceSpec spec;
  spec.kappa_C = 10.0;
  spec.kappa_f = 10.0;
  spec.truncation = 24;
  const WorstInstance w = build_worst_shared(spec);
  const AffineProblem p = decentralized_problem(w.data, Regime::shared);
  ApapcOptions o;
  o.stop = StopRule::distance;
  o.tol = 1e-12;
  o.record_history = false;
  const SolveReport r = apapc(p, apapc_params(p.objective.mu, *p.objective.L, *p.bounds), Vec::Zero(p.dim()), o);
  ASSERT_TRUE(r.converged);
  const Index T = spec.truncation;
  // The clean geometric sequence lives in the shifted variable s = t + (L'/mu_f) e_1.
  Vec s = p.layout.x_tilde(r.final_point, 0).segment(w.t_offset, T);
  s(0) += w.L_prime / spec.mu_f;
  for (Index k = 0; k < T / 2; ++k) {
    const double ratio = s(k) / s(k + 1);
    EXPECT_LE(std::abs(ratio - 1.0 / w.rho), 10.0 * std::pow(w.rho, T - (k + 1))) << "k = " << k + 1;
  }
}

TEST(WorstShared, LargeInstanceKeepsItsSpectralGap) {
  // 579 x 387 shared block with a 65-dimensional kernel; a bad SVD here reports
  // spurious tiny singular values and a huge Chebyshev degree.
  WorstInstanceSpec spec;
  spec.kappa_C = 100.0;
  spec.truncation = 64;
  const WorstInstance w = build_worst_shared(spec);
  BuildOptions bo;
  bo.accelerate_gossip = true;
  AffineProblem p = build(w.data, Regime::shared, bo);
  ensure_bounds(p);
  const double kw = gossip_kappa(w.data.W);
  const double kh = w.measured_kappa;
  EXPECT_LE(p.bounds->kappa(), 2.0 * kh + 2.0 * (kh + 1.0) * kw * kw);
  EXPECT_EQ(p.bounds->rank, p.dim() - (spec.truncation + 1));
}

TEST(WorstCoupledLocal, LocalConstraintEncodesConsensus) {
  WorstInstanceSpec spec;
  spec.kind = WorstKind::coupled_local;
  spec.kappa_C = 10.0;
  spec.kappa_A = 50.0;
  spec.truncation = 4;
  const WorstInstance w = build_worst_coupled_local(spec);
  const Index T = spec.truncation, l = w.l;
  ASSERT_EQ(l % 3, 0);
  const Mat Z = oracle::null_basis(w.data.C[0]);
  ASSERT_EQ(Z.cols(), 2 * T);
  // Every kernel vector is constant across the l copies of p and of t.
  for (Index c = 0; c < Z.cols(); ++c) {
    for (Index j = 1; j < l; ++j) {
      EXPECT_LE((Z.col(c).segment(j * T, T) - Z.col(c).segment(0, T)).norm(), 1e-9);
      EXPECT_LE((Z.col(c).segment(l * T + j * T, T) - Z.col(c).segment(l * T, T)).norm(), 1e-9);
    }
  }
  const auto [hi, lo] = oracle::sq_sigma_range(w.data.C[0]);
  EXPECT_NEAR(hi / lo, spec.kappa_C, 1e-6 * spec.kappa_C);
}

TEST(WorstCoupledLocal, MeasuredConstants) {
  WorstInstanceSpec spec;
  spec.kind = WorstKind::coupled_local;
  spec.kappa_C = 10.0;
  spec.kappa_A = 100.0;
  spec.truncation = 8;
  const WorstInstance w = build_worst_coupled_local(spec);
  EXPECT_GE(w.measured_mu, w.mu_prime / 9.0 * (1.0 - 1e-9));
  EXPECT_LE(w.measured_L, spec.kappa_A * (1.0 + 1e-9));
}

TEST(WorstCoupledLocal, PresolvedInstanceIsThePureCoupledChain) {
  WorstInstanceSpec spec;
  spec.kind = WorstKind::coupled_local;
  spec.kappa_C = 10.0;
  spec.kappa_A = 60.0;
  spec.truncation = 5;
  const WorstInstance w = build_worst_coupled_local(spec);
  const Index T = spec.truncation, l = w.l, n = w.data.n;
  // Eliminate the local consensus: x_i = (1_l kron p, 1_l kron t).
  Mat Z = Mat::Zero(2 * l * T, 2 * T);
  for (Index j = 0; j < l; ++j) {
    Z.block(j * T, 0, T, T) = Mat::Identity(T, T);
    Z.block(l * T + j * T, T, T, T) = Mat::Identity(T, T);
  }
  const NesterovMatrices nm = nesterov_tridiagonal(T);
  // The chain blocks of the two active groups.
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
  // Together the two groups carry the full chain: Toeplitz (2, -1) without a truncation boundary.
  Mat full = nm.M;
  full(T - 1, T - 1) += 1.0;
  EXPECT_EQ(Mat(e1.transpose() * e1 + e2.transpose() * e2), full);
  for (Index i = 0; i < n; ++i) {
    const int grp = static_cast<int>(i / (n / 3));
    const Mat reduced = w.data.A[i] * Z;
    for (Index j = 0; j < l; ++j) {
      const int jgrp = static_cast<int>(j / (l / 3));
      Mat want = Mat::Zero(T, 2 * T);
      if (grp != 1 && jgrp == grp) {
        want.leftCols(T) = std::sqrt(w.L_prime) * (grp == 0 ? e1 : e2).transpose();
        want.rightCols(T) = std::sqrt(w.mu_prime) * Mat::Identity(T, T);
      }
      EXPECT_LE((reduced.middleRows(j * T, T) - want).norm(), 1e-12) << "node " << i << " copy " << j;
    }
    const auto& s = *w.data.f[i].spec;
    Mat q_red = Z.transpose() * s.Q * Z;
    Mat want_q = Mat::Zero(2 * T, 2 * T);
    want_q.topLeftCorner(T, T) = spec.mu_f * Mat::Identity(T, T);
    want_q.bottomRightCorner(T, T) = spec.kappa_f * spec.mu_f * Mat::Identity(T, T);
    EXPECT_LE((q_red - want_q).norm(), 1e-12);
  }
}

TEST(WorstCoupledLocal, RejectsSmallKappaA) {
  WorstInstanceSpec spec;
  spec.kind = WorstKind::coupled_local;
  spec.kappa_A = 5.0;
  EXPECT_THROW(build_worst_coupled_local(spec), InvalidArgument);
}
