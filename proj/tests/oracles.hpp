// Copyright The mixopt Authors
// SPDX-License-Identifier: Apache-2.0

// Dense reference computations used as test oracles. They avoid the library's
// own solvers: SVDs are JacobiSVD, equality-constrained QPs use a null-space
// method, Kronecker products are assembled entry by entry.

#pragma once

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "mixopt/problems.hpp"

namespace oracle {

using mixopt::Index;
using mixopt::Mat;
using mixopt::Vec;

inline Mat random_matrix(Index rows, Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> nd;
  Mat m(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) m(i, j) = nd(rng);
  return m;
}

inline Vec random_vector(Index n, std::mt19937_64& rng) { return random_matrix(n, 1, rng).col(0); }

inline Mat kron(const Mat& a, const Mat& b) {
  Mat out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = 0; j < a.cols(); ++j) out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

inline Mat block_diag(const std::vector<Mat>& blocks) {
  Index r = 0, c = 0;
  for (const Mat& b : blocks) {
    r += b.rows();
    c += b.cols();
  }
  Mat out = Mat::Zero(r, c);
  r = c = 0;
  for (const Mat& b : blocks) {
    out.block(r, c, b.rows(), b.cols()) = b;
    r += b.rows();
    c += b.cols();
  }
  return out;
}

inline Mat laplacian(Index n, const std::vector<std::pair<Index, Index>>& edges) {
  Mat w = Mat::Zero(n, n);
  for (auto [i, j] : edges) {
    w(i, i) += 1.0;
    w(j, j) += 1.0;
    w(i, j) -= 1.0;
    w(j, i) -= 1.0;
  }
  return w;
}

inline Vec singular_values(const Mat& m) {
  if (m.size() == 0) return Vec(0);
  Eigen::JacobiSVD<Mat> svd(m);
  return svd.singularValues();
}

// (sigma_max^2, sigma_min+^2) with sigma <= tol * sigma_max treated as zero.
inline std::pair<double, double> sq_sigma_range(const Mat& m, double tol = 1e-9) {
  const Vec s = singular_values(m);
  if (s.size() == 0 || s(0) == 0.0) return {0.0, 0.0};
  double lo = s(0);
  for (Index i = 0; i < s.size(); ++i)
    if (s(i) > tol * s(0)) lo = std::min(lo, s(i));
  return {s(0) * s(0), lo * lo};
}

inline Vec sym_eigenvalues(const Mat& m) {
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (m + m.transpose()), Eigen::EigenvaluesOnly);
  return es.eigenvalues();
}

// Orthonormal basis of ker(m) and of range(m^T), from a full Jacobi SVD.
inline Mat null_basis(const Mat& m, double tol = 1e-9) {
  if (m.rows() == 0) return Mat::Identity(m.cols(), m.cols());
  Eigen::JacobiSVD<Mat> svd(m, Eigen::ComputeFullV);
  const Vec s = svd.singularValues();
  Index rank = 0;
  for (Index i = 0; i < s.size(); ++i)
    if (s(0) > 0.0 && s(i) > tol * s(0)) ++rank;
  return svd.matrixV().rightCols(m.cols() - rank);
}

inline Mat range_basis(const Mat& m, double tol = 1e-9) {
  Eigen::JacobiSVD<Mat> svd(m, Eigen::ComputeFullU);
  const Vec s = svd.singularValues();
  Index rank = 0;
  for (Index i = 0; i < s.size(); ++i)
    if (s(0) > 0.0 && s(i) > tol * s(0)) ++rank;
  return svd.matrixU().leftCols(rank);
}

// argmin 0.5 u^T H u + h^T u  s.t.  B u = b, by the null-space method.
inline Vec eq_qp(const Mat& H, const Vec& h, const Mat& B, const Vec& b) {
  Vec up = Vec::Zero(H.rows());
  if (B.rows() > 0) {
    Eigen::JacobiSVD<Mat> svd(B, Eigen::ComputeThinU | Eigen::ComputeThinV);
    svd.setThreshold(1e-12);
    up = svd.solve(b);
  }
  const Mat Z = null_basis(B);
  if (Z.cols() == 0) return up;
  const Mat red = Z.transpose() * H * Z;
  const Vec rhs = -Z.transpose() * (H * up + h);
  return up + Z * red.ldlt().solve(rhs);
}

// Solution of the original (undecomposed) problem: variables (x_1, ..., x_n, x_tilde),
// objective sum_i f_i(x_i, x_tilde), constraints sum_i A_i x_i = sum_i b_i,
// C_i x_i = c_i, C_tilde_i x_tilde = c_tilde_i. Objectives must be quadratic.
struct Centralized {
  std::vector<Vec> x;
  Vec x_tilde;
};

inline Centralized centralized_solution(const mixopt::MixedProblemData& d) {
  std::vector<Index> off{0};
  for (Index dx : d.x_dims) off.push_back(off.back() + dx);
  const Index nx = off.back();
  const Index dim = nx + d.shared_dim;
  Mat H = Mat::Zero(dim, dim);
  Vec h = Vec::Zero(dim);
  for (Index i = 0; i < d.n; ++i) {
    const auto& s = *d.f[i].spec;
    const Mat Q = s.Q + s.mu_shift * Mat::Identity(s.Q.rows(), s.Q.cols());
    std::vector<Index> idx;
    for (Index k = 0; k < d.x_dims[i]; ++k) idx.push_back(off[i] + k);
    for (Index k = 0; k < d.shared_dim; ++k) idx.push_back(nx + k);
    for (std::size_t a = 0; a < idx.size(); ++a) {
      h(idx[a]) += s.q(static_cast<Index>(a));
      for (std::size_t b = 0; b < idx.size(); ++b) H(idx[a], idx[b]) += Q(static_cast<Index>(a), static_cast<Index>(b));
    }
  }
  std::vector<Mat> rows;
  std::vector<Vec> rhs;
  if (d.has_coupled()) {
    Mat r = Mat::Zero(d.A[0].rows(), dim);
    Vec v = Vec::Zero(d.A[0].rows());
    for (Index i = 0; i < d.n; ++i) {
      r.block(0, off[i], d.A[i].rows(), d.x_dims[i]) = d.A[i];
      v += d.b[i];
    }
    rows.push_back(r);
    rhs.push_back(v);
  }
  for (Index i = 0; d.has_local() && i < d.n; ++i) {
    Mat r = Mat::Zero(d.C[i].rows(), dim);
    r.block(0, off[i], d.C[i].rows(), d.x_dims[i]) = d.C[i];
    rows.push_back(r);
    rhs.push_back(d.c[i]);
  }
  for (Index i = 0; d.has_shared_constraints() && i < d.n; ++i) {
    Mat r = Mat::Zero(d.C_tilde[i].rows(), dim);
    r.rightCols(d.shared_dim) = d.C_tilde[i];
    rows.push_back(r);
    rhs.push_back(d.c_tilde[i]);
  }
  Index total = 0;
  for (const Mat& r : rows) total += r.rows();
  Mat B(total, dim);
  Vec b(total);
  total = 0;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    B.middleRows(total, rows[k].rows()) = rows[k];
    b.segment(total, rows[k].rows()) = rhs[k];
    total += rows[k].rows();
  }
  const Vec u = eq_qp(H, h, B, b);
  Centralized out;
  for (Index i = 0; i < d.n; ++i) out.x.push_back(u.segment(off[i], d.x_dims[i]));
  out.x_tilde = u.tail(d.shared_dim);
  return out;
}

// Largest relative deviation of a decomposed solution u from the centralized one.
inline double relative_error(const mixopt::AffineProblem& p, const mixopt::MixedProblemData& d, const Vec& u) {
  const Centralized c = centralized_solution(d);
  Vec ref(d.total_x() + d.n * d.shared_dim), got(ref.size());
  Index k = 0;
  const Vec x = p.layout.x(u);
  Index xo = 0;
  for (Index i = 0; i < d.n; ++i) {
    ref.segment(k, d.x_dims[i]) = c.x[i];
    got.segment(k, d.x_dims[i]) = x.segment(xo, d.x_dims[i]);
    k += d.x_dims[i];
    xo += d.x_dims[i];
  }
  for (Index i = 0; i < d.n; ++i) {
    ref.segment(k, d.shared_dim) = c.x_tilde;
    got.segment(k, d.shared_dim) = p.layout.x_tilde(u, i);
    k += d.shared_dim;
  }
  return (got - ref).norm() / std::max(1e-12, ref.norm());
}

inline Vec fd_gradient(const std::function<double(const Vec&)>& f, const Vec& x, double h = 1e-6) {
  Vec g(x.size());
  for (Index i = 0; i < x.size(); ++i) {
    Vec a = x, b = x;
    a(i) += h;
    b(i) -= h;
    g(i) = (f(a) - f(b)) / (2.0 * h);
  }
  return g;
}

// Extreme eigenvalues of the restriction of symmetric H to span(basis), basis orthonormal.
inline std::pair<double, double> restricted_eigen_range(const Mat& H, const Mat& basis) {
  const Vec ev = sym_eigenvalues(basis.transpose() * H * basis);
  return {ev.minCoeff(), ev.maxCoeff()};
}

}  // namespace oracle
