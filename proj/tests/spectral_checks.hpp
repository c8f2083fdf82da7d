// Copyright The mixopt Authors
// SPDX-License-Identifier: Apache-2.0

// Randomized checks of the scaling lemmas against dense SVDs of the assembled
// constraint matrices. Shared by the unit tests and the acceptance runner.

#pragma once

#include <algorithm>
#include <random>
#include <string>

#include "mixopt/conditioning.hpp"
#include "oracles.hpp"

namespace spectral_checks {

using mixopt::Index;
using mixopt::Mat;
using mixopt::MatrixFamily;
using mixopt::SpectralBounds;
using mixopt::Vec;

struct Tally {
  int trials = 0;
  int violations = 0;
  std::string first_failure;

  void check(bool ok, const std::string& what) {
    if (!ok) {
      ++violations;
      if (first_failure.empty()) first_failure = what;
    }
  }
};

constexpr double kRel = 1e-9;

// Random connected graph: a path through a random node order plus extra edges.
inline Mat random_gossip(Index n, std::mt19937_64& rng) {
  std::vector<Index> order(n);
  for (Index i = 0; i < n; ++i) order[i] = i;
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::pair<Index, Index>> edges;
  for (Index i = 0; i + 1 < n; ++i) edges.emplace_back(order[i], order[i + 1]);
  std::bernoulli_distribution extra(0.3);
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 2; j < n; ++j)
      if (extra(rng)) edges.emplace_back(i, j);
  return oracle::laplacian(n, edges);
}

inline Index uniform(Index lo, Index hi, std::mt19937_64& rng) {
  return std::uniform_int_distribution<Index>(lo, hi)(rng);
}

inline SpectralBounds bounds_of(const Mat& m) {
  const auto [hi, lo] = oracle::sq_sigma_range(m);
  return SpectralBounds{hi, lo, -1};
}

inline SpectralBounds family_bounds(const std::vector<Mat>& blocks) {
  SpectralBounds out{0.0, 0.0, -1};
  bool any = false;
  for (const Mat& b : blocks) {
    const auto [hi, lo] = oracle::sq_sigma_range(b);
    out.sigma_max_sq = std::max(out.sigma_max_sq, hi);
    if (lo > 0.0) {
      out.sigma_min_plus_sq = any ? std::min(out.sigma_min_plus_sq, lo) : lo;
      any = true;
    }
  }
  return out;
}

inline double lambda_min_plus(const Mat& sym) {
  const Vec ev = oracle::sym_eigenvalues(sym);
  const double top = ev.maxCoeff();
  double lo = top;
  for (Index i = 0; i < ev.size(); ++i)
    if (ev(i) > 1e-9 * top) lo = std::min(lo, ev(i));
  return lo;
}

// B = (A, beta W) with beta^2 = (lambda_min+(S_A) + sigma_max^2(A)) / sigma_min+^2(W).
inline void coupled_lemma(Tally& t, std::mt19937_64& rng) {
  ++t.trials;
  const Index n = uniform(2, 6, rng), m = uniform(1, 4, rng);
  const Mat W = random_gossip(n, rng);
  std::vector<Mat> a;
  Mat s_a = Mat::Zero(m, m);
  for (Index i = 0; i < n; ++i) {
    a.push_back(oracle::random_matrix(m, uniform(1, 4, rng), rng));
    s_a += a.back() * a.back().transpose() / static_cast<double>(n);
  }
  const double s_min = lambda_min_plus(s_a);
  const SpectralBounds ab = family_bounds(a);
  const SpectralBounds wb = bounds_of(W);
  const double beta_sq = mixopt::coupled_scaling(ab, s_min, wb);
  const Mat wk = oracle::kron(W, Mat::Identity(m, m));
  const Mat A = oracle::block_diag(a);
  Mat B(A.rows(), A.cols() + wk.cols());
  B << A, std::sqrt(beta_sq) * wk;
  const auto [hi, lo] = oracle::sq_sigma_range(B);
  const double kw = std::sqrt(wb.sigma_max_sq / wb.sigma_min_plus_sq);
  t.check(hi <= (ab.sigma_max_sq + (ab.sigma_max_sq + s_min) * kw * kw) * (1.0 + kRel), "coupled: sigma_max bound");
  t.check(lo >= 0.5 * s_min * (1.0 - kRel), "coupled: sigma_min+ bound");
}

// B = ((A, alpha W), (beta C, 0)) with the block scaling coefficients, in either regime.
inline void mixed_lemma(Tally& t, std::mt19937_64& rng, bool mu_positive) {
  ++t.trials;
  const Index n = uniform(2, 5, rng), m = uniform(1, 3, rng);
  const Mat W = random_gossip(n, rng);
  std::vector<Mat> a, c;
  for (Index i = 0; i < n; ++i) {
    const Index d = uniform(2, 4, rng);
    a.push_back(oracle::random_matrix(m, d, rng));
    // Square Gaussian blocks are invertible almost surely, which makes ker C trivial.
    c.push_back(oracle::random_matrix(mu_positive ? uniform(1, d - 1, rng) : d, d, rng));
  }
  const auto pc = mixopt::projected_condition_number(MatrixFamily(a), MatrixFamily(c));
  if (mu_positive != (pc.mu_tilde > 0.0)) {
    t.check(false, "mixed: unexpected mu_tilde regime");
    return;
  }
  Mat a_row(m, 0);
  for (const Mat& ai : a) {
    Mat next(m, a_row.cols() + ai.cols());
    next << a_row, ai;
    a_row = next;
  }
  const double l_s = oracle::sq_sigma_range(a_row).first / static_cast<double>(n);
  const SpectralBounds ab = family_bounds(a), cb = family_bounds(c), wb = bounds_of(W);
  const auto sc = mixopt::mixed_scaling(ab, pc.mu_tilde, l_s, cb, wb);
  const Mat A = oracle::block_diag(a), C = oracle::block_diag(c);
  const Mat wk = oracle::kron(W, Mat::Identity(m, m));
  Mat B = Mat::Zero(A.rows() + C.rows(), A.cols() + wk.cols());
  B.topLeftCorner(A.rows(), A.cols()) = A;
  B.topRightCorner(wk.rows(), wk.cols()) = std::sqrt(sc.alpha_sq) * wk;
  B.bottomLeftCorner(C.rows(), C.cols()) = std::sqrt(sc.beta_sq) * C;
  const auto [hi, lo] = oracle::sq_sigma_range(B);
  t.check(hi <= (ab.sigma_max_sq + sc.alpha_sq * wb.sigma_max_sq + sc.beta_sq * cb.sigma_max_sq) * (1.0 + kRel),
          "mixed: sigma_max bound");
  if (mu_positive)
    t.check(lo >= 0.25 * pc.mu_tilde * (1.0 - kRel), "mixed: sigma_min+ >= mu_tilde / 4");
  else
    t.check(lo >= ab.sigma_max_sq * (1.0 - kRel), "mixed: sigma_min+ >= L_A");
}

// B = diag(alpha (A, beta W), (I kron C~ ; gamma W)) with identical C~.
inline void identical_local_lemma(Tally& t, std::mt19937_64& rng) {
  ++t.trials;
  const Index n = uniform(2, 5, rng), m = uniform(1, 3, rng), dt = uniform(2, 4, rng);
  const Mat W = random_gossip(n, rng);
  std::vector<Mat> a;
  for (Index i = 0; i < n; ++i) a.push_back(oracle::random_matrix(m, uniform(1, 3, rng), rng));
  const Mat ct = oracle::random_matrix(uniform(1, dt, rng), dt, rng);
  const SpectralBounds cb = bounds_of(ct), wb = bounds_of(W);
  const auto sc = mixopt::identical_local_scaling(MatrixFamily(a), cb, wb);
  const Mat A = oracle::block_diag(a);
  const Mat wm = oracle::kron(W, Mat::Identity(m, m));
  Mat b1(A.rows(), A.cols() + wm.cols());
  b1 << A, std::sqrt(sc.beta_sq) * wm;
  const Mat wd = oracle::kron(W, Mat::Identity(dt, dt));
  Mat b2(n * ct.rows() + wd.rows(), wd.cols());
  b2 << oracle::kron(Mat::Identity(n, n), ct), std::sqrt(*sc.gamma_sq) * wd;
  const Mat B = oracle::block_diag({std::sqrt(sc.alpha_sq) * b1, b2});
  const auto [hi, lo] = oracle::sq_sigma_range(B);
  const double kappa_a = mixopt::mixed_condition_number(MatrixFamily(a));
  const double kw = std::sqrt(wb.sigma_max_sq / wb.sigma_min_plus_sq);
  t.check(lo >= cb.sigma_min_plus_sq * (1.0 - kRel), "identical local: sigma_min+ bound");
  t.check(hi <= 4.0 * (cb.sigma_max_sq + cb.sigma_min_plus_sq * kw * kw * (kappa_a + 1.0)) * (1.0 + kRel),
          "identical local: sigma_max bound");
}

// B~ = (C~ ; gamma W) with non-identical C~_i: kappa(B~) <= 2 kappa_hat + 2 (kappa_hat + 1) kappa_W^2.
inline void shared_lemma(Tally& t, std::mt19937_64& rng) {
  ++t.trials;
  const Index n = uniform(2, 5, rng), dt = uniform(2, 4, rng);
  const Mat W = random_gossip(n, rng);
  std::vector<Mat> ct;
  for (Index i = 0; i < n; ++i) ct.push_back(oracle::random_matrix(uniform(1, dt, rng), dt, rng));
  const double gamma_sq = mixopt::shared_scaling(MatrixFamily(ct), W);
  const Mat wd = oracle::kron(W, Mat::Identity(dt, dt));
  const Mat C = oracle::block_diag(ct);
  Mat B(C.rows() + wd.rows(), wd.cols());
  B << C, std::sqrt(gamma_sq) * wd;
  const auto [hi, lo] = oracle::sq_sigma_range(B);
  const double kh = mixopt::mixed_condition_number(MatrixFamily(ct), true);
  const SpectralBounds wb = bounds_of(W);
  const double kw = std::sqrt(wb.sigma_max_sq / wb.sigma_min_plus_sq);
  t.check(hi / lo <= (2.0 * kh + 2.0 * (kh + 1.0) * kw * kw) * (1.0 + kRel), "shared: kappa bound");
}

}  // namespace spectral_checks
