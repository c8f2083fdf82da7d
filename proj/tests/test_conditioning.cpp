// Copyright The mixopt Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>

#include <gtest/gtest.h>

#include "mixopt/conditioning.hpp"
#include "oracles.hpp"
#include "spectral_checks.hpp"

using namespace mixopt;

namespace {

std::vector<Mat> coordinate_columns(Index n) {
  std::vector<Mat> out;
  for (Index i = 0; i < n; ++i) out.push_back(Mat::Identity(n, n).col(i));
  return out;
}

}  // namespace

TEST(InteractionMatrix, CoordinateColumns) {
  const Index n = 5;
  EXPECT_LE((interaction_matrix(MatrixFamily(coordinate_columns(n))) - Mat::Identity(n, n) / 5.0).norm(), 1e-15);
}

TEST(InteractionMatrix, IdenticalBlocks) {
  std::mt19937_64 rng(21);
  const Mat b = oracle::random_matrix(2, 4, rng);
  const MatrixFamily fam(std::vector<Mat>(3, b));
  EXPECT_LE((interaction_matrix(fam) - b * b.transpose()).norm(), 1e-12);
}

TEST(InteractionMatrix, RandomBlocksBruteForce) {
  std::mt19937_64 rng(22);
  const Mat b1 = oracle::random_matrix(2, 3, rng), b2 = oracle::random_matrix(2, 3, rng);
  const Mat want = 0.5 * (b1 * b1.transpose() + b2 * b2.transpose());
  EXPECT_LE((interaction_matrix(MatrixFamily({b1, b2})) - want).norm(), 1e-13);
  const Mat want_t = 0.5 * (b1.transpose() * b1 + b2.transpose() * b2);
  EXPECT_LE((interaction_matrix(MatrixFamily({b1, b2}), true) - want_t).norm(), 1e-13);
}

TEST(MixedConditionNumber, CoordinateColumnsTranspositionOrder) {
  for (Index n : {2, 3, 7}) {
    const MatrixFamily fam(coordinate_columns(n));
    EXPECT_EQ(mixed_condition_number(fam), static_cast<double>(n));
    EXPECT_EQ(mixed_condition_number(fam, true), 1.0);
  }
}

TEST(MixedConditionNumber, IdenticalBlocksReduceToKappa) {
  std::mt19937_64 rng(23);
  const Mat b = oracle::random_matrix(3, 5, rng);
  const auto [hi, lo] = oracle::sq_sigma_range(b);
  const MatrixFamily fam(std::vector<Mat>(4, b));
  EXPECT_NEAR(mixed_condition_number(fam), hi / lo, 1e-9 * hi / lo);
  EXPECT_NEAR(mixed_condition_number(fam, true), hi / lo, 1e-9 * hi / lo);
}

TEST(MixedConditionNumber, RandomBlocksBruteForce) {
  std::mt19937_64 rng(24);
  const Mat b1 = oracle::random_matrix(3, 2, rng), b2 = oracle::random_matrix(3, 2, rng);
  const double top = std::max(oracle::sym_eigenvalues(b1 * b1.transpose()).maxCoeff(),
                              oracle::sym_eigenvalues(b2 * b2.transpose()).maxCoeff());
  const double low = spectral_checks::lambda_min_plus(0.5 * (b1 * b1.transpose() + b2 * b2.transpose()));
  EXPECT_NEAR(mixed_condition_number(MatrixFamily({b1, b2})), top / low, 1e-9 * top / low);
}

TEST(MixedConditionNumber, ZeroFamilyIsDegenerate) {
  EXPECT_THROW(mixed_condition_number(MatrixFamily({Mat::Zero(2, 2), Mat::Zero(2, 2)})), DegenerateError);
}

TEST(ProjectedConditionNumber, ZeroDReducesToMixed) {
  std::mt19937_64 rng(25);
  std::vector<Mat> b, d;
  for (int i = 0; i < 3; ++i) {
    b.push_back(oracle::random_matrix(2, 3, rng));
    d.push_back(Mat::Zero(2, 3));
  }
  const auto pc = projected_condition_number(MatrixFamily(b), MatrixFamily(d));
  EXPECT_EQ(pc.kappa_tilde, mixed_condition_number(MatrixFamily(b)));
  const std::vector<Mat> coords = coordinate_columns(4);
  const auto pe = projected_condition_number(MatrixFamily(coords), MatrixFamily(std::vector<Mat>(4, Mat::Zero(1, 1))));
  EXPECT_EQ(pe.kappa_tilde, 4.0);
}

TEST(ProjectedConditionNumber, InvertibleDGivesOne) {
  std::mt19937_64 rng(26);
  std::vector<Mat> b, d;
  for (int i = 0; i < 3; ++i) {
    b.push_back(oracle::random_matrix(2, 3, rng));
    d.push_back(oracle::random_matrix(3, 3, rng));
  }
  const auto pc = projected_condition_number(MatrixFamily(b), MatrixFamily(d));
  EXPECT_EQ(pc.mu_tilde, 0.0);
  EXPECT_EQ(pc.kappa_tilde, 1.0);
}

TEST(ProjectedConditionNumber, RandomTwoNodeBruteForce) {
  std::mt19937_64 rng(27);
  const Mat b1 = oracle::random_matrix(3, 4, rng), b2 = oracle::random_matrix(3, 4, rng);
  const Mat d1 = oracle::random_matrix(2, 4, rng), d2 = oracle::random_matrix(1, 4, rng);
  Mat bp(3, 8);
  bp << b1, b2;
  const Mat D = oracle::block_diag({d1, d2});
  const Mat Z = oracle::null_basis(D);
  const Mat P = Z * Z.transpose();
  const double mu = oracle::sq_sigma_range(bp * P).second / 2.0;
  const double top = std::max(oracle::sq_sigma_range(b1).first, oracle::sq_sigma_range(b2).first);
  const auto pc = projected_condition_number(MatrixFamily({b1, b2}), MatrixFamily({d1, d2}));
  EXPECT_NEAR(pc.mu_tilde, mu, 1e-10 * top);
  EXPECT_NEAR(pc.kappa_tilde, top / mu, 1e-8 * top / mu);
}

TEST(Scaling, CoupledFormulaPlug) {
  EXPECT_DOUBLE_EQ(coupled_scaling(SpectralBounds{1.0, 1.0, -1}, 1.0, SpectralBounds{4.0, 2.0, -1}), 1.0);
}

TEST(Scaling, MixedFormulaPlugZeroMuTilde) {
  const SpectralBounds one{1.0, 1.0, -1};
  const auto sc = mixed_scaling(one, 0.0, 1.0, one, one);
  EXPECT_DOUBLE_EQ(sc.alpha_sq, 2.0);
  EXPECT_DOUBLE_EQ(sc.beta_sq, 3.0);
  EXPECT_EQ(sc.regime, ScalingRegime::coupled_local_mu_zero);
}

TEST(Scaling, IdenticalLocalFormulaPlug) {
  const SpectralBounds one{1.0, 1.0, -1};
  const auto sc = identical_local_scaling(MatrixFamily(std::vector<Mat>(3, Mat::Ones(1, 1))), one, one);
  EXPECT_DOUBLE_EQ(sc.alpha_sq, 2.0);
  EXPECT_DOUBLE_EQ(sc.beta_sq, 2.0);
  EXPECT_DOUBLE_EQ(*sc.gamma_sq, 1.0);
}

TEST(Scaling, SharedIdenticalReduction) {
  std::mt19937_64 rng(28);
  const Mat ct = oracle::random_matrix(2, 3, rng);
  const auto [hi, lo] = oracle::sq_sigma_range(ct);
  const SpectralBounds w{9.0, 2.0, -1};
  EXPECT_NEAR(shared_scaling(MatrixFamily(std::vector<Mat>(4, ct)), w), (lo + hi) / 2.0, 1e-10 * (lo + hi));
}

TEST(Scaling, SharedRejectsDisconnectedGraph) {
  const Mat w = oracle::laplacian(4, {{0, 1}, {2, 3}});
  EXPECT_THROW(shared_scaling(MatrixFamily(std::vector<Mat>(4, Mat::Ones(1, 2))), w), InvalidArgument);
}

TEST(ScalingLemmas, RandomizedCertification) {
  std::mt19937_64 rng(29);
  spectral_checks::Tally t;
  for (int k = 0; k < 15; ++k) {
    spectral_checks::coupled_lemma(t, rng);
    spectral_checks::mixed_lemma(t, rng, true);
    spectral_checks::mixed_lemma(t, rng, false);
    spectral_checks::identical_local_lemma(t, rng);
    spectral_checks::shared_lemma(t, rng);
  }
  EXPECT_EQ(t.violations, 0) << t.first_failure;
}

TEST(Chebyshev, IdentityOperatorReturnsRhsInOneStep) {
  const Vec b = (Vec(3) << 1, -2, 4).finished();
  const Vec v = (Vec(3) << 7, 0, -1).finished();
  const SpectralBounds sb{1.0, 1.0, 3};
  EXPECT_LE((chebyshev_apply<double>(v, identity_operator(3), b, sb) - b).norm(), 1e-15);
  EXPECT_EQ(chebyshev_plan(1.0, 1.0).degree, 1);
}

TEST(Chebyshev, HandTracedTwoSteps) {
  // B = diag(1, 2), v = 0, b = (1, 2): rho = 9/16, nu = 5/2, delta0 = -5/4,
  // p0 = (2/5, 8/5), beta0 = -9/20, delta1 = -41/20, p1 = (78/205, -168/205), v2 = (32/41, 32/41).
  const Mat B = Vec((Vec(2) << 1, 2).finished()).asDiagonal();
  const Vec b = (Vec(2) << 1, 2).finished();
  const SpectralBounds sb{4.0, 1.0, 2};
  const Vec got = chebyshev_apply<double>(Vec::Zero(2), dense_operator<double>(B), b, sb);
  EXPECT_NEAR(got(0), 32.0 / 41.0, 1e-15);
  EXPECT_NEAR(got(1), 32.0 / 41.0, 1e-15);
  EXPECT_EQ(chebyshev_plan(4.0, 1.0).degree, 2);
}

TEST(Chebyshev, DegreeIsCeilSqrtKappa) {
  EXPECT_EQ(chebyshev_plan(9.0, 1.0).degree, 3);
  EXPECT_EQ(chebyshev_plan(10.0, 1.0).degree, 4);
  EXPECT_EQ(chebyshev_plan(100.0, 1.0).degree, 10);
  EXPECT_EQ(chebyshev_plan(101.0, 1.0).degree, 11);
  EXPECT_EQ(chebyshev_plan(1e4, 1.0).degree, 100);
  std::mt19937_64 rng(30);
  for (int k = 0; k < 10; ++k) {
    const Mat B = oracle::random_matrix(3, 6, rng);
    const SpectralBounds sb = spectral_bounds<double>(B);
    const auto sys = chebyshev_operator<double>(dense_operator(B), Vec::Zero(3), sb);
    EXPECT_EQ(sys.degree, static_cast<Index>(std::ceil(std::sqrt(sb.sigma_max_sq / sb.sigma_min_plus_sq) - 1e-12)));
  }
}

TEST(Chebyshev, IdentityBIsScalarMultiple) {
  const auto sys = chebyshev_operator<double>(identity_operator(3), Vec::Ones(3), SpectralBounds{1.0, 1.0, 3});
  const Mat K = materialize(sys.K);
  EXPECT_LE((K - K(0, 0) * Mat::Identity(3, 3)).norm(), 1e-15);
  EXPECT_GT(K(0, 0), 0.0);
  EXPECT_LE((sys.K.apply(Vec::Ones(3)) - sys.b_prime).norm(), 1e-15);
}

TEST(Chebyshev, CompressionAndSolutionSet) {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> logk(1.0, 4.0);
  for (int k = 0; k < 10; ++k) {
    const double kappa = std::pow(10.0, logk(rng));
    const Mat u = oracle::null_basis(oracle::random_matrix(1, 5, rng)).leftCols(4);
    const Mat v = oracle::null_basis(oracle::random_matrix(1, 9, rng)).leftCols(4);
    Vec s(4);
    for (int i = 0; i < 4; ++i) s(i) = std::pow(kappa, -0.5 * i / 3.0);
    const Mat B = u * s.asDiagonal() * v.transpose();
    const SpectralBounds sb = spectral_bounds<double>(B);
    const Vec ustar = oracle::random_vector(9, rng);
    const Vec b = B * ustar;
    const auto sys = chebyshev_operator<double>(dense_operator(B), b, sb);
    const auto [hi, lo] = oracle::sq_sigma_range(materialize(sys.K));
    EXPECT_LE(hi / lo, 3.1);
    EXPECT_LE(std::sqrt(hi), 19.0 / 15.0);
    EXPECT_GE(std::sqrt(lo), 11.0 / 15.0);
    EXPECT_LE((sys.K.apply(ustar) - sys.b_prime).norm(), 1e-8);
  }
}

TEST(Chebyshev, RequiresPositiveSpectrum) {
  EXPECT_THROW(chebyshev_operator<double>(zero_operator<double>(2, 2), Vec::Zero(2), SpectralBounds{0.0, 0.0, 0}),
               DegenerateError);
}
