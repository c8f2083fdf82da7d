// Copyright The mixopt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "mixopt/errors.hpp"

namespace mixopt {

using Index = Eigen::Index;
using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Oracle kinds that are counted separately. W applies are communication rounds.
enum class Tag { A, C, C_tilde, W, Other };
inline constexpr std::size_t kTagCount = 5;

constexpr std::string_view tag_name(Tag tag) {
  switch (tag) {
    case Tag::A: return "A";
    case Tag::C: return "C";
    case Tag::C_tilde: return "C_tilde";
    case Tag::W: return "W";
    default: return "other";
  }
}

// Per-solve oracle counters. Not thread safe; one instance per solve.
struct CounterSet {
  std::array<long long, kTagCount> forward{};
  std::array<long long, kTagCount> adjoint{};
  long long grad_calls = 0;
  // Applies of the solver-level constraint operator (B or its preconditioned form).
  long long outer_forward = 0;
  long long outer_adjoint = 0;

  void record(Tag tag, bool is_adjoint) {
    (is_adjoint ? adjoint : forward)[static_cast<std::size_t>(tag)] += 1;
  }
  long long forward_of(Tag tag) const { return forward[static_cast<std::size_t>(tag)]; }
  long long adjoint_of(Tag tag) const { return adjoint[static_cast<std::size_t>(tag)]; }
  long long total(Tag tag) const { return forward_of(tag) + adjoint_of(tag); }
  long long mul_A() const { return total(Tag::A); }
  long long mul_C() const { return total(Tag::C); }
  long long mul_C_tilde() const { return total(Tag::C_tilde); }
  long long communications() const { return total(Tag::W); }
  void reset() { *this = CounterSet{}; }
};

// Certified-side spectral bounds: sigma_max_sq bounds sigma_max^2 from above,
// sigma_min_plus_sq bounds the smallest positive sigma^2 from below.
struct SpectralBounds {
  double sigma_max_sq = 0.0;
  double sigma_min_plus_sq = 0.0;
  Index rank = -1;  // -1 when the bounds were not computed from a decomposition

  double kappa() const {
    if (sigma_min_plus_sq <= 0.0) throw DegenerateError("kappa of an operator with no positive spectrum");
    return sigma_max_sq / sigma_min_plus_sq;
  }
};

struct SpectralOptions {
  Index cap = 4000;        // largest allowed dense dimension max(rows, cols)
  double rank_tol = 1e-9;  // sigma <= rank_tol * sigma_max counts as zero
};

// Matrix-free linear operator with an adjoint.
//
// Counting: when apply() receives a CounterSet, an operator whose tag is not
// Other records one apply of its tag and evaluates its body without counters,
// so a tagged block-diagonal operator counts as one round for all nodes. An
// Other-tagged operator forwards the counters to its constituents.
template <typename Scalar>
class LinearOperator {
 public:
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using ConstRef = Eigen::Ref<const Vector>;
  using Kernel = std::function<Vector(const ConstRef&, CounterSet*)>;

  LinearOperator() = default;
  LinearOperator(Index rows, Index cols, Kernel forward, Kernel adjoint, Tag tag = Tag::Other)
      : impl_(std::make_shared<const Impl>(Impl{rows, cols, tag, std::move(forward), std::move(adjoint)})) {
    if (rows < 0 || cols < 0) throw InvalidArgument("operator dimensions must be nonnegative");
  }

  bool valid() const { return static_cast<bool>(impl_); }
  Index rows() const { return impl_->rows; }
  Index cols() const { return impl_->cols; }
  Tag tag() const { return impl_->tag; }

  Vector apply(const ConstRef& x, CounterSet* counters = nullptr) const {
    return dispatch(impl_->forward, impl_->cols, x, counters, false);
  }
  Vector adjoint_apply(const ConstRef& x, CounterSet* counters = nullptr) const {
    return dispatch(impl_->adjoint, impl_->rows, x, counters, true);
  }

  // Same operator under a different tag.
  LinearOperator retagged(Tag tag) const {
    return LinearOperator(rows(), cols(), impl_->forward, impl_->adjoint, tag);
  }

 private:
  struct Impl {
    Index rows;
    Index cols;
    Tag tag;
    Kernel forward;
    Kernel adjoint;
  };

  Vector dispatch(const Kernel& kernel, Index expected, const ConstRef& x, CounterSet* counters,
                  bool is_adjoint) const {
    if (!impl_) throw InvalidArgument("apply on an empty operator");
    if (x.size() != expected) {
      throw InvalidArgument("operator apply: expected length " + std::to_string(expected) + ", got " +
                            std::to_string(x.size()));
    }
    if (impl_->tag != Tag::Other) {
      if (counters) counters->record(impl_->tag, is_adjoint);
      return kernel(x, nullptr);
    }
    return kernel(x, counters);
  }

  std::shared_ptr<const Impl> impl_;
};

using Operator = LinearOperator<double>;

template <typename Scalar>
LinearOperator<Scalar> dense_operator(const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& m,
                                      Tag tag = Tag::Other) {
  using Op = LinearOperator<Scalar>;
  auto held = std::make_shared<const typename Op::Matrix>(m);
  return Op(
      m.rows(), m.cols(), [held](const typename Op::ConstRef& x, CounterSet*) -> typename Op::Vector { return *held * x; },
      [held](const typename Op::ConstRef& x, CounterSet*) -> typename Op::Vector { return held->transpose() * x; }, tag);
}

template <typename Scalar = double>
LinearOperator<Scalar> identity_operator(Index n) {
  using Op = LinearOperator<Scalar>;
  auto id = [](const typename Op::ConstRef& x, CounterSet*) -> typename Op::Vector { return x; };
  return Op(n, n, id, id);
}

template <typename Scalar = double>
LinearOperator<Scalar> zero_operator(Index rows, Index cols) {
  using Op = LinearOperator<Scalar>;
  return Op(
      rows, cols, [rows](const typename Op::ConstRef&, CounterSet*) -> typename Op::Vector { return Op::Vector::Zero(rows); },
      [cols](const typename Op::ConstRef&, CounterSet*) -> typename Op::Vector { return Op::Vector::Zero(cols); });
}

template <typename Scalar>
LinearOperator<Scalar> scaled(const LinearOperator<Scalar>& op, Scalar s) {
  using Op = LinearOperator<Scalar>;
  return Op(
      op.rows(), op.cols(),
      [op, s](const typename Op::ConstRef& x, CounterSet* c) -> typename Op::Vector { return s * op.apply(x, c); },
      [op, s](const typename Op::ConstRef& x, CounterSet* c) -> typename Op::Vector { return s * op.adjoint_apply(x, c); });
}

// a * b
template <typename Scalar>
LinearOperator<Scalar> compose(const LinearOperator<Scalar>& a, const LinearOperator<Scalar>& b) {
  using Op = LinearOperator<Scalar>;
  if (a.cols() != b.rows()) throw InvalidArgument("compose: inner dimensions differ");
  return Op(
      a.rows(), b.cols(),
      [a, b](const typename Op::ConstRef& x, CounterSet* c) -> typename Op::Vector { return a.apply(b.apply(x, c), c); },
      [a, b](const typename Op::ConstRef& x, CounterSet* c) -> typename Op::Vector {
        return b.adjoint_apply(a.adjoint_apply(x, c), c);
      });
}

template <typename Scalar>
LinearOperator<Scalar> transpose(const LinearOperator<Scalar>& op) {
  using Op = LinearOperator<Scalar>;
  return Op(
      op.cols(), op.rows(),
      [op](const typename Op::ConstRef& x, CounterSet* c) -> typename Op::Vector { return op.adjoint_apply(x, c); },
      [op](const typename Op::ConstRef& x, CounterSet* c) -> typename Op::Vector { return op.apply(x, c); }, op.tag());
}

template <typename Scalar>
LinearOperator<Scalar> block_diag(const std::vector<LinearOperator<Scalar>>& ops, Tag tag = Tag::Other) {
  using Op = LinearOperator<Scalar>;
  if (ops.empty()) throw InvalidArgument("block_diag: empty operator list");
  std::vector<Index> row_off{0}, col_off{0};
  for (const auto& op : ops) {
    row_off.push_back(row_off.back() + op.rows());
    col_off.push_back(col_off.back() + op.cols());
  }
  auto run = [ops, row_off, col_off](bool adj) {
    return [ops, row_off, col_off, adj](const typename Op::ConstRef& x, CounterSet* c) -> typename Op::Vector {
      const auto& in = adj ? row_off : col_off;
      const auto& out = adj ? col_off : row_off;
      typename Op::Vector y(out.back());
      for (std::size_t i = 0; i < ops.size(); ++i) {
        auto xi = x.segment(in[i], in[i + 1] - in[i]);
        y.segment(out[i], out[i + 1] - out[i]) = adj ? ops[i].adjoint_apply(xi, c) : ops[i].apply(xi, c);
      }
      return y;
    };
  };
  return Op(row_off.back(), col_off.back(), run(false), run(true), tag);
}

// Grid of optional blocks; an absent cell is a zero block. scales[i][j]
// multiplies cell (i, j); an empty scales argument means all ones.
template <typename Scalar>
using BlockGrid = std::vector<std::vector<std::optional<LinearOperator<Scalar>>>>;

template <typename Scalar>
LinearOperator<Scalar> block_stack(const BlockGrid<Scalar>& grid, std::vector<std::vector<Scalar>> scales = {}) {
  using Op = LinearOperator<Scalar>;
  const std::size_t nr = grid.size();
  if (nr == 0 || grid[0].empty()) throw InvalidArgument("block_stack: empty layout");
  const std::size_t nc = grid[0].size();
  for (const auto& row : grid) {
    if (row.size() != nc) throw InvalidArgument("block_stack: ragged layout");
  }
  if (scales.empty()) scales.assign(nr, std::vector<Scalar>(nc, Scalar(1)));
  if (scales.size() != nr) throw InvalidArgument("block_stack: scales shape differs from layout");
  for (const auto& row : scales) {
    if (row.size() != nc) throw InvalidArgument("block_stack: scales shape differs from layout");
  }
  std::vector<Index> heights(nr, -1), widths(nc, -1);
  for (std::size_t i = 0; i < nr; ++i) {
    for (std::size_t j = 0; j < nc; ++j) {
      if (!grid[i][j]) continue;
      const auto& op = *grid[i][j];
      if (heights[i] >= 0 && heights[i] != op.rows())
        throw InvalidArgument("block_stack: row " + std::to_string(i) + " has inconsistent heights");
      if (widths[j] >= 0 && widths[j] != op.cols())
        throw InvalidArgument("block_stack: column " + std::to_string(j) + " has inconsistent widths");
      heights[i] = op.rows();
      widths[j] = op.cols();
    }
  }
  for (auto h : heights) {
    if (h < 0) throw InvalidArgument("block_stack: a block row has no operator to fix its height");
  }
  for (auto w : widths) {
    if (w < 0) throw InvalidArgument("block_stack: a block column has no operator to fix its width");
  }
  std::vector<Index> row_off{0}, col_off{0};
  for (auto h : heights) row_off.push_back(row_off.back() + h);
  for (auto w : widths) col_off.push_back(col_off.back() + w);

  auto forward = [grid, scales, row_off, col_off, nr, nc](const typename Op::ConstRef& x,
                                                          CounterSet* c) -> typename Op::Vector {
    typename Op::Vector y = Op::Vector::Zero(row_off.back());
    for (std::size_t i = 0; i < nr; ++i) {
      for (std::size_t j = 0; j < nc; ++j) {
        if (!grid[i][j]) continue;
        y.segment(row_off[i], row_off[i + 1] - row_off[i]) +=
            scales[i][j] * grid[i][j]->apply(x.segment(col_off[j], col_off[j + 1] - col_off[j]), c);
      }
    }
    return y;
  };
  auto adjoint = [grid, scales, row_off, col_off, nr, nc](const typename Op::ConstRef& x,
                                                          CounterSet* c) -> typename Op::Vector {
    typename Op::Vector y = Op::Vector::Zero(col_off.back());
    for (std::size_t i = 0; i < nr; ++i) {
      for (std::size_t j = 0; j < nc; ++j) {
        if (!grid[i][j]) continue;
        y.segment(col_off[j], col_off[j + 1] - col_off[j]) +=
            scales[i][j] * grid[i][j]->adjoint_apply(x.segment(row_off[i], row_off[i + 1] - row_off[i]), c);
      }
    }
    return y;
  };
  return Op(row_off.back(), col_off.back(), forward, adjoint);
}

// (W kron I_block_dim) applied through a reshape; x stacks the per-node blocks.
template <typename Scalar>
LinearOperator<Scalar> kron_gossip(const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& w, Index block_dim) {
  using Op = LinearOperator<Scalar>;
  using Matrix = typename Op::Matrix;
  if (w.rows() != w.cols()) throw InvalidArgument("kron_gossip: W must be square");
  if (block_dim < 1) throw InvalidArgument("kron_gossip: block_dim must be positive");
  if ((w - w.transpose()).cwiseAbs().maxCoeff() > Scalar(1e-12)) throw InvalidArgument("kron_gossip: W is not symmetric");
  auto held = std::make_shared<const Matrix>(w);
  const Index n = w.rows();
  auto body = [held, n, block_dim](const typename Op::ConstRef& x, CounterSet*) -> typename Op::Vector {
    typename Op::Vector y(n * block_dim);
    Eigen::Map<const Matrix> xs(x.data(), block_dim, n);
    Eigen::Map<Matrix> ys(y.data(), block_dim, n);
    ys.noalias() = xs * held->transpose();
    return y;
  };
  return Op(n * block_dim, n * block_dim, body, body, Tag::W);
}

// Dense form, built column by column without counting.
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> materialize(const LinearOperator<Scalar>& op) {
  using Op = LinearOperator<Scalar>;
  typename Op::Matrix m(op.rows(), op.cols());
  typename Op::Vector e = Op::Vector::Zero(op.cols());
  for (Index j = 0; j < op.cols(); ++j) {
    e(j) = Scalar(1);
    m.col(j) = op.apply(e);
    e(j) = Scalar(0);
  }
  return m;
}

template <typename Scalar>
void check_capacity(const LinearOperator<Scalar>& op, const SpectralOptions& opts) {
  if (std::max(op.rows(), op.cols()) > opts.cap) {
    throw CapacityError("dense spectral work on a " + std::to_string(op.rows()) + "x" + std::to_string(op.cols()) +
                        " operator exceeds the cap " + std::to_string(opts.cap) + "; supply bounds explicitly");
  }
}

template <typename Scalar>
SpectralBounds singular_value_bounds(const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& sv, double rank_tol) {
  SpectralBounds out;
  out.rank = 0;
  if (sv.size() == 0) return out;
  const double smax = static_cast<double>(sv.maxCoeff());
  out.sigma_max_sq = smax * smax;
  double smin = smax;
  for (Index i = 0; i < sv.size(); ++i) {
    const double s = static_cast<double>(sv(i));
    if (s > rank_tol * smax && smax > 0.0) {
      ++out.rank;
      smin = std::min(smin, s);
    }
  }
  out.sigma_min_plus_sq = out.rank > 0 ? smin * smin : 0.0;
  return out;
}

template <typename Scalar>
SpectralBounds spectral_bounds(const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& m,
                               const SpectralOptions& opts = {}) {
  if (std::max(m.rows(), m.cols()) > opts.cap) throw CapacityError("dense matrix exceeds the spectral cap");
  if (m.size() == 0) return SpectralBounds{0.0, 0.0, 0};
  // JacobiSVD: Eigen 3.4 BDCSVD returns wrong small singular values on some rank-deficient stacks.
  Eigen::JacobiSVD<Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>> svd(m);
  return singular_value_bounds<Scalar>(svd.singularValues(), opts.rank_tol);
}

template <typename Scalar>
SpectralBounds spectral_bounds(const LinearOperator<Scalar>& op, const SpectralOptions& opts = {}) {
  check_capacity(op, opts);
  return spectral_bounds<Scalar>(materialize(op), opts);
}

// Orthonormal basis of ker(m), one column per null direction.
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> kernel_basis(
    const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& m, double rank_tol = 1e-9) {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  const Index n = m.cols();
  if (m.rows() == 0 || n == 0) return Matrix::Identity(n, n);
  Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  const double smax = sv.size() ? static_cast<double>(sv.maxCoeff()) : 0.0;
  Index rank = 0;
  for (Index i = 0; i < sv.size(); ++i) {
    if (smax > 0.0 && static_cast<double>(sv(i)) > rank_tol * smax) ++rank;
  }
  return svd.matrixV().rightCols(n - rank);
}

template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> kernel_projector_matrix(
    const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& m, double rank_tol = 1e-9) {
  const auto basis = kernel_basis<Scalar>(m, rank_tol);
  return basis * basis.transpose();
}

template <typename Scalar>
LinearOperator<Scalar> kernel_projector(const LinearOperator<Scalar>& op, const SpectralOptions& opts = {}) {
  check_capacity(op, opts);
  return dense_operator<Scalar>(kernel_projector_matrix<Scalar>(materialize(op), opts.rank_tol));
}

// Binds a counter set: every apply of the result counts into `counters`
// whatever the caller passes.
template <typename Scalar>
LinearOperator<Scalar> instrumented(const LinearOperator<Scalar>& op, std::shared_ptr<CounterSet> counters) {
  using Op = LinearOperator<Scalar>;
  if (!counters) throw InvalidArgument("instrumented: null counter set");
  return Op(
      op.rows(), op.cols(),
      [op, counters](const typename Op::ConstRef& x, CounterSet*) -> typename Op::Vector {
        return op.apply(x, counters.get());
      },
      [op, counters](const typename Op::ConstRef& x, CounterSet*) -> typename Op::Vector {
        return op.adjoint_apply(x, counters.get());
      });
}

// CSV fixtures: one matrix row per line, comma separated, round-trip precision.
Mat read_csv(const std::string& path);
void write_csv(const std::string& path, const Mat& m);

}  // namespace mixopt
