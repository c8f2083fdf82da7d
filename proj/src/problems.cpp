// Copyright The mixopt Authors
// SPDX-License-Identifier: Apache-2.0

#include "mixopt/problems.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Eigenvalues>

namespace mixopt {

namespace {

Vec sign_of(const Vec& v) {
  return v.unaryExpr([](double t) { return t > 0.0 ? 1.0 : (t < 0.0 ? -1.0 : 0.0); });
}

Operator node_blocks(const std::vector<Mat>& mats, Tag tag) {
  std::vector<Operator> ops;
  ops.reserve(mats.size());
  for (const Mat& m : mats) ops.push_back(dense_operator<double>(m));
  return block_diag(ops, tag);
}

Vec stack(const std::vector<Vec>& vs) {
  Index len = 0;
  for (const Vec& v : vs) len += v.size();
  Vec out(len);
  len = 0;
  for (const Vec& v : vs) {
    out.segment(len, v.size()) = v;
    len += v.size();
  }
  return out;
}

bool all_zero(const std::vector<Mat>& mats) {
  for (const Mat& m : mats) {
    if (m.size() > 0 && m.cwiseAbs().maxCoeff() != 0.0) return false;
  }
  return true;
}

// sigma bounds of diag(M_1, ..., M_n) from its blocks.
SpectralBounds block_bounds(const std::vector<Mat>& mats, const SpectralOptions& opts) {
  SpectralBounds out{0.0, 0.0, 0};
  double lo = 0.0;
  bool any = false;
  for (const Mat& m : mats) {
    const SpectralBounds s = spectral_bounds<double>(m, opts);
    out.sigma_max_sq = std::max(out.sigma_max_sq, s.sigma_max_sq);
    out.rank += s.rank;
    if (s.rank > 0) {
      lo = any ? std::min(lo, s.sigma_min_plus_sq) : s.sigma_min_plus_sq;
      any = true;
    }
  }
  out.sigma_min_plus_sq = lo;
  return out;
}

struct Part {
  Operator op;
  Vec rhs;
  SpectralBounds bounds;
  Index degree = 0;
};

// W kron I_block, or P(W) kron I_block when accelerated. Bounds are in sigma^2 terms.
Part gossip_part(const Mat& w, Index block_dim, bool accelerate) {
  const EigenRange range = positive_eigen_range(w);
  Part p;
  if (!accelerate || range.lambda_min_plus <= 0.0) {
    p.op = kron_gossip<double>(w, block_dim);
    p.bounds = SpectralBounds{range.lambda_max * range.lambda_max, range.lambda_min_plus * range.lambda_min_plus, -1};
    return p;
  }
  const auto sys = chebyshev_psd_operator<double>(kron_gossip<double>(w, block_dim), range);
  p.op = sys.K;
  p.degree = sys.degree;
  // The n x n polynomial has the same singular values as its Kronecker lift.
  p.bounds = spectral_bounds<double>(chebyshev_psd_operator<double>(dense_operator<double>(w), range).K);
  return p;
}

// diag(C_i) with rhs c, or P(C^T C) with c' = Cheb(0, C, c) when accelerated.
Part local_part(const std::vector<Mat>& c_mats, const std::vector<Vec>& c_vecs, bool accelerate,
                const SpectralOptions& opts) {
  Part p;
  p.op = node_blocks(c_mats, Tag::C);
  p.rhs = stack(c_vecs);
  p.bounds = block_bounds(c_mats, opts);
  if (!accelerate || p.bounds.sigma_min_plus_sq <= 0.0) return p;
  const auto sys = chebyshev_operator<double>(p.op, p.rhs, p.bounds);
  p.op = sys.K;
  p.rhs = sys.b_prime;
  p.degree = sys.degree;
  p.bounds = spectral_bounds<double>(sys.K, opts);
  return p;
}

void check_gossip(const MixedProblemData& d) {
  if (d.n < 2) return;
  GossipMatrix g;
  g.n = d.n;
  g.W = d.W;
  for (Index i = 0; i < d.n; ++i) {
    for (Index j = i + 1; j < d.n; ++j) {
      if (d.W(i, j) != 0.0) g.edges.emplace_back(i, j);
    }
  }
  const Assumption4Report rep = check_assumption4(g);
  if (!rep.ok()) throw InvalidArgument("gossip matrix violates the kernel assumption: " + rep.message);
}

// Dense system of the original constraints over (x, x_tilde) with x_tilde shared.
void original_constraints(const MixedProblemData& d, Mat& m, Vec& rhs) {
  const Index dx = d.total_x();
  const Index dt = d.shared_dim;
  std::vector<Mat> rows;
  std::vector<Vec> rhss;
  if (d.has_coupled()) {
    Mat a = Mat::Zero(d.coupled_rows(), dx + dt);
    Vec s = Vec::Zero(d.coupled_rows());
    Index off = 0;
    for (Index i = 0; i < d.n; ++i) {
      a.block(0, off, d.coupled_rows(), d.x_dims[i]) = d.A[i];
      s += d.b[i];
      off += d.x_dims[i];
    }
    rows.push_back(a);
    rhss.push_back(s);
  }
  if (d.has_local()) {
    Index off = 0;
    for (Index i = 0; i < d.n; ++i) {
      Mat c = Mat::Zero(d.C[i].rows(), dx + dt);
      c.block(0, off, d.C[i].rows(), d.x_dims[i]) = d.C[i];
      rows.push_back(c);
      rhss.push_back(d.c[i]);
      off += d.x_dims[i];
    }
  }
  if (d.has_shared_constraints()) {
    for (Index i = 0; i < d.n; ++i) {
      Mat c = Mat::Zero(d.C_tilde[i].rows(), dx + dt);
      c.rightCols(dt) = d.C_tilde[i];
      rows.push_back(c);
      rhss.push_back(d.c_tilde[i]);
    }
  }
  Index total = 0;
  for (const Mat& r : rows) total += r.rows();
  m = Mat::Zero(total, dx + dt);
  total = 0;
  for (const Mat& r : rows) {
    m.middleRows(total, r.rows()) = r;
    total += r.rows();
  }
  rhs = stack(rhss);
}

void check_feasible(const MixedProblemData& d) {
  Mat m;
  Vec rhs;
  original_constraints(d, m, rhs);
  if (m.rows() == 0) return;
  const Vec sol = m.completeOrthogonalDecomposition().solve(rhs);
  const double res = (m * sol - rhs).norm();
  if (res > 1e-8 * std::max(1.0, rhs.norm()))
    throw InfeasibleError("constraints admit no feasible point (least-squares residual " + std::to_string(res) + ")");
}

// F(u) = sum_i f_i(x_i, x_tilde_i) on u = (x, y, x_tilde copies); y does not enter F.
ObjectiveOracle node_objective(const MixedProblemData& d, const ProblemLayout& lay) {
  std::vector<std::vector<Index>> index(d.n);
  Index xo = lay.x_offset;
  for (Index i = 0; i < d.n; ++i) {
    for (Index k = 0; k < d.x_dims[i]; ++k) index[i].push_back(xo + k);
    xo += d.x_dims[i];
    for (Index k = 0; k < d.shared_dim; ++k) index[i].push_back(lay.xt_offset + i * d.shared_dim + k);
  }
  const auto fs = d.f;
  const Index dim = lay.total();
  auto gather = [](const Vec& u, const std::vector<Index>& idx) {
    Vec out(static_cast<Index>(idx.size()));
    for (std::size_t k = 0; k < idx.size(); ++k) out(static_cast<Index>(k)) = u(idx[k]);
    return out;
  };
  ObjectiveOracle o;
  o.dim = dim;
  o.value_fn = [fs, index, gather](const Vec& u, CounterSet* c) {
    double v = 0.0;
    for (std::size_t i = 0; i < fs.size(); ++i) v += fs[i].value(gather(u, index[i]), c);
    return v;
  };
  o.gradient_fn = [fs, index, gather, dim](const Vec& u, CounterSet* c) {
    Vec g = Vec::Zero(dim);
    for (std::size_t i = 0; i < fs.size(); ++i) {
      const Vec gi = fs[i].gradient(gather(u, index[i]), c);
      for (std::size_t k = 0; k < index[i].size(); ++k) g(index[i][k]) += gi(static_cast<Index>(k));
    }
    return g;
  };
  o.mu = fs.empty() ? 0.0 : fs[0].mu;
  bool have_l = true, have_m = true, all_smooth = true, all_quad = true;
  double l = 0.0, m2 = 0.0;
  for (const auto& f : fs) {
    o.mu = std::min(o.mu, f.mu);
    if (f.L) l = std::max(l, *f.L); else have_l = false;
    if (f.M) m2 += (*f.M) * (*f.M); else have_m = false;
    all_smooth = all_smooth && f.smooth;
    all_quad = all_quad && f.quadratic.has_value();
  }
  if (have_l) o.L = l;
  if (have_m) o.M = std::sqrt(m2);
  o.smooth = all_smooth;
  if (all_quad) {
    QuadraticForm qf{Mat::Zero(dim, dim), Vec::Zero(dim), 0.0};
    for (std::size_t i = 0; i < fs.size(); ++i) {
      const auto& fq = *fs[i].quadratic;
      for (std::size_t a = 0; a < index[i].size(); ++a) {
        qf.h(index[i][a]) += fq.h(static_cast<Index>(a));
        for (std::size_t b = 0; b < index[i].size(); ++b)
          qf.H(index[i][a], index[i][b]) += fq.H(static_cast<Index>(a), static_cast<Index>(b));
      }
      qf.c += fq.c;
    }
    o.quadratic = qf;
  }
  return o;
}

ProblemLayout make_layout(const MixedProblemData& d) {
  ProblemLayout lay;
  lay.n = d.n;
  lay.x_dims = d.x_dims;
  lay.x_offset = 0;
  lay.x_size = d.total_x();
  lay.m = d.coupled_rows();
  lay.y_offset = lay.x_size;
  lay.y_size = d.has_coupled() ? d.n * lay.m : 0;
  lay.shared_dim = d.shared_dim;
  lay.xt_offset = lay.x_size + lay.y_size;
  lay.xt_size = d.n * d.shared_dim;
  return lay;
}

AffineProblem assemble(const MixedProblemData& d, const BuildOptions& opts, const std::string& regime) {
  d.validate();
  check_gossip(d);
  check_feasible(d);

  AffineProblem p;
  p.regime = regime;
  p.layout = make_layout(d);
  const ProblemLayout& lay = p.layout;
  ObjectiveOracle F = node_objective(d, lay);
  const double mu_f = F.mu;

  std::vector<ConstraintBlock> blocks;
  const bool local_nonzero = d.has_local() && !all_zero(d.C);

  if (lay.x_size > 0) {
    ConstraintBlock blk;
    blk.col_offset = 0;
    if (d.has_coupled()) {
      blk.name = local_nonzero ? "coupled_local" : "coupled";
      if (!(mu_f > 0.0))
        throw InvalidArgument("coupled reformulation needs mu_f > 0; use the regularized path for convex objectives");
      const Operator a_op = node_blocks(d.A, Tag::A);
      const SpectralBounds a_bounds = block_bounds(d.A, opts.spectral);
      const MatrixFamily a_fam(d.A);
      const EigenRange s_a = positive_eigen_range(interaction_matrix(a_fam));
      const Part g = gossip_part(d.W, lay.m, opts.accelerate_gossip);
      p.gossip_degree = std::max(p.gossip_degree, g.degree);
      double scale_w = 0.0;
      if (!local_nonzero) {
        scale_w = std::sqrt(coupled_scaling(a_bounds, s_a.lambda_min_plus, g.bounds));
        blk.op = block_stack<double>({{a_op, g.op}}, {{1.0, scale_w}});
        blk.rhs = stack(d.b);
      } else {
        const ProjectedCondition pc = projected_condition_number(a_fam, MatrixFamily(d.C));
        const Part loc = local_part(d.C, d.c, opts.accelerate_local, opts.spectral);
        p.local_degree = loc.degree;
        const ScalingCoefficients sc = mixed_scaling(a_bounds, pc.mu_tilde, s_a.lambda_max, loc.bounds, g.bounds);
        scale_w = std::sqrt(sc.alpha_sq);
        const double beta = std::sqrt(sc.beta_sq);
        blk.op = block_stack<double>({{a_op, g.op}, {loc.op, std::nullopt}}, {{1.0, scale_w}, {beta, 0.0}});
        Vec rhs(lay.n * lay.m + loc.rhs.size());
        rhs << stack(d.b), beta * loc.rhs;
        blk.rhs = rhs;
      }
      // Penalty on the coupled row, r = mu_f / (2 L_A).
      const double l_a = a_bounds.sigma_max_sq;
      if (!(l_a > 0.0)) throw DegenerateError("coupled constraint matrix A is zero");
      const double r = mu_f / (2.0 * l_a);
      BlockGrid<double> row{{a_op, g.op}};
      std::vector<std::vector<double>> row_scale{{1.0, scale_w}};
      if (lay.xt_size > 0) {
        row[0].push_back(zero_operator<double>(lay.n * lay.m, lay.xt_size));
        row_scale[0].push_back(0.0);
      }
      const Operator coupled_row = block_stack<double>(row, row_scale);
      const double l_row = l_a + scale_w * scale_w * g.bounds.sigma_max_sq;
      ObjectiveOracle G = penalize(F, coupled_row, stack(d.b), r, SpectralBounds{l_row, 0.0, -1});
      G.mu = mu_f / 4.0;
      if (F.L) G.L = *F.L + r * l_row;
      F = G;
    } else if (local_nonzero) {
      blk.name = "local";
      const Part loc = local_part(d.C, d.c, opts.accelerate_local, opts.spectral);
      p.local_degree = loc.degree;
      blk.op = loc.op;
      blk.rhs = loc.rhs;
    } else {
      blk.name = "free";
      blk.op = zero_operator<double>(0, lay.x_size);
      blk.rhs = Vec(0);
    }
    blocks.push_back(blk);
  }

  if (lay.xt_size > 0) {
    ConstraintBlock blk;
    blk.col_offset = lay.xt_offset;
    const Part g = gossip_part(d.W, d.shared_dim, opts.accelerate_gossip);
    p.gossip_degree = std::max(p.gossip_degree, g.degree);
    if (d.has_shared_constraints() && !all_zero(d.C_tilde)) {
      blk.name = "shared";
      const double gamma = std::sqrt(shared_scaling(MatrixFamily(d.C_tilde), g.bounds));
      const Operator ct = node_blocks(d.C_tilde, Tag::C_tilde);
      blk.op = block_stack<double>({{ct}, {g.op}}, {{1.0}, {gamma}});
      Vec rhs = Vec::Zero(ct.rows() + g.op.rows());
      rhs.head(ct.rows()) = stack(d.c_tilde);
      blk.rhs = rhs;
    } else {
      blk.name = "consensus";
      blk.op = g.op;
      blk.rhs = Vec::Zero(g.op.rows());
    }
    blocks.push_back(blk);
  }

  if (blocks.empty()) throw InvalidArgument("problem has no variables");
  if (blocks.size() == 1 && blocks[0].col_offset == 0 && blocks[0].op.cols() == lay.total()) {
    p.B = blocks[0].op;
    p.b = blocks[0].rhs;
  } else {
    std::vector<Operator> ops;
    std::vector<Vec> rhs;
    for (const auto& blk : blocks) {
      ops.push_back(blk.op);
      rhs.push_back(blk.rhs);
    }
    p.B = block_diag(ops);
    p.b = stack(rhs);
  }
  p.blocks = blocks;
  p.objective = F;
  p.degenerate = d.n == 1 && !d.has_coupled() && !local_nonzero && !d.has_shared_constraints();
  return p;
}

}  // namespace

Index MixedProblemData::total_x() const { return std::accumulate(x_dims.begin(), x_dims.end(), Index{0}); }

void MixedProblemData::validate() const {
  if (n < 1) throw InvalidArgument("instance: n must be at least 1");
  if (static_cast<Index>(f.size()) != n) throw InvalidArgument("instance: one objective per node required");
  if (static_cast<Index>(x_dims.size()) != n) throw InvalidArgument("instance: x_dims must have n entries");
  if (W.rows() != n || W.cols() != n) throw InvalidArgument("instance: W must be n x n");
  for (Index i = 0; i < n; ++i) {
    if (f[i].dim != x_dims[i] + shared_dim)
      throw InvalidArgument("instance: objective " + std::to_string(i) + " has the wrong dimension");
  }
  auto check_group = [&](const std::vector<Mat>& mats, const std::vector<Vec>& vecs, const char* name, bool shared) {
    if (mats.empty() && vecs.empty()) return;
    if (static_cast<Index>(mats.size()) != n || static_cast<Index>(vecs.size()) != n)
      throw InvalidArgument(std::string("instance: ") + name + " needs one block per node");
    for (Index i = 0; i < n; ++i) {
      const Index cols = shared ? shared_dim : x_dims[i];
      if (mats[i].cols() != cols)
        throw InvalidArgument(std::string("instance: ") + name + " block " + std::to_string(i) + " has wrong width");
      if (mats[i].rows() != vecs[i].size())
        throw InvalidArgument(std::string("instance: ") + name + " rhs " + std::to_string(i) + " has wrong length");
    }
  };
  check_group(A, b, "A", false);
  check_group(C, c, "C", false);
  check_group(C_tilde, c_tilde, "C_tilde", true);
  if (has_coupled()) {
    for (const Mat& a : A) {
      if (a.rows() != A[0].rows()) throw InvalidArgument("instance: A blocks differ in row count");
    }
  }
}

ObjectiveOracle quadratic_oracle(const Mat& Q, const Vec& q, double mu_shift) {
  if (Q.rows() != Q.cols()) throw InvalidArgument("quadratic_oracle: Q must be square");
  if (q.size() != Q.rows()) throw InvalidArgument("quadratic_oracle: q has the wrong length");
  const double scale = Q.size() ? std::max(1.0, Q.cwiseAbs().maxCoeff()) : 1.0;
  if (Q.size() && (Q - Q.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
    throw InvalidArgument("quadratic_oracle: Q is not symmetric");
  double lmin = 0.0, lmax = 0.0;
  if (Q.size()) {
    Eigen::SelfAdjointEigenSolver<Mat> es(Q, Eigen::EigenvaluesOnly);
    lmin = es.eigenvalues().minCoeff();
    lmax = es.eigenvalues().maxCoeff();
    if (lmin < -1e-10 * scale) throw InvalidArgument("quadratic_oracle: Q is not positive semidefinite");
    // Same rank gate as the spectral bounds: rounding noise in a singular Q is not curvature.
    if (lmin <= 1e-9 * lmax) lmin = 0.0;
  }
  const Index dim = Q.rows();
  QuadraticForm qf{Q + mu_shift * Mat::Identity(dim, dim), q, 0.0};
  auto H = std::make_shared<const Mat>(qf.H);
  auto h = std::make_shared<const Vec>(q);
  ObjectiveOracle o;
  o.dim = dim;
  o.value_fn = [H, h](const Vec& x, CounterSet*) { return 0.5 * x.dot(*H * x) + h->dot(x); };
  o.gradient_fn = [H, h](const Vec& x, CounterSet*) -> Vec { return *H * x + *h; };
  o.mu = std::max(0.0, lmin + mu_shift);
  o.L = std::max(0.0, lmax + mu_shift);
  o.smooth = true;
  o.quadratic = qf;
  o.spec = QuadraticSpec{Q, q, mu_shift};
  return o;
}

ObjectiveOracle l1_oracle(const Vec& g, double weight, std::optional<Box> domain) {
  if (!(weight > 0.0)) throw InvalidArgument("l1_oracle: weight must be positive");
  ObjectiveOracle o;
  o.dim = g.size();
  o.value_fn = [g, weight](const Vec& x, CounterSet*) { return weight * (x - g).lpNorm<1>(); };
  o.gradient_fn = [g, weight](const Vec& x, CounterSet*) -> Vec { return weight * sign_of(x - g); };
  o.mu = 0.0;
  o.M = weight * std::sqrt(static_cast<double>(g.size()));
  o.smooth = false;
  o.domain = std::move(domain);
  return o;
}

ObjectiveOracle strongly_convex_l1_oracle(const Vec& g, double mu, const Box& domain) {
  if (!(mu > 0.0)) throw InvalidArgument("strongly_convex_l1_oracle: mu must be positive");
  if (domain.lo.size() != g.size() || domain.hi.size() != g.size())
    throw InvalidArgument("strongly_convex_l1_oracle: box has the wrong dimension");
  ObjectiveOracle o;
  o.dim = g.size();
  o.value_fn = [g, mu](const Vec& x, CounterSet*) { return (x - g).lpNorm<1>() + 0.5 * mu * x.squaredNorm(); };
  o.gradient_fn = [g, mu](const Vec& x, CounterSet*) -> Vec { return sign_of(x - g) + mu * x; };
  o.mu = mu;
  o.M = std::sqrt(static_cast<double>(g.size())) + mu * domain.lo.cwiseAbs().cwiseMax(domain.hi.cwiseAbs()).norm();
  o.smooth = false;
  o.domain = domain;
  return o;
}

ObjectiveOracle separable_sum(const std::vector<ObjectiveOracle>& parts) {
  if (parts.empty()) throw InvalidArgument("separable_sum: no parts");
  std::vector<Index> off{0};
  for (const auto& p : parts) off.push_back(off.back() + p.dim);
  ObjectiveOracle o;
  o.dim = off.back();
  o.value_fn = [parts, off](const Vec& x, CounterSet* c) {
    double v = 0.0;
    for (std::size_t i = 0; i < parts.size(); ++i) v += parts[i].value(x.segment(off[i], parts[i].dim), c);
    return v;
  };
  o.gradient_fn = [parts, off](const Vec& x, CounterSet* c) -> Vec {
    Vec g(off.back());
    for (std::size_t i = 0; i < parts.size(); ++i)
      g.segment(off[i], parts[i].dim) = parts[i].gradient(x.segment(off[i], parts[i].dim), c);
    return g;
  };
  o.mu = parts[0].mu;
  bool have_l = true, have_m = true, quad = true, boxed = true;
  double l = 0.0, m2 = 0.0;
  for (const auto& p : parts) {
    o.mu = std::min(o.mu, p.mu);
    if (p.L) l = std::max(l, *p.L); else have_l = false;
    if (p.M) m2 += (*p.M) * (*p.M); else have_m = false;
    quad = quad && p.quadratic.has_value();
    boxed = boxed && p.domain.has_value();
    o.smooth = o.smooth && p.smooth;
  }
  if (have_l) o.L = l;
  if (have_m) o.M = std::sqrt(m2);
  if (quad) {
    QuadraticForm qf{Mat::Zero(o.dim, o.dim), Vec::Zero(o.dim), 0.0};
    for (std::size_t i = 0; i < parts.size(); ++i) {
      qf.H.block(off[i], off[i], parts[i].dim, parts[i].dim) = parts[i].quadratic->H;
      qf.h.segment(off[i], parts[i].dim) = parts[i].quadratic->h;
      qf.c += parts[i].quadratic->c;
    }
    o.quadratic = qf;
  }
  if (boxed) {
    Box b{Vec(o.dim), Vec(o.dim)};
    for (std::size_t i = 0; i < parts.size(); ++i) {
      b.lo.segment(off[i], parts[i].dim) = parts[i].domain->lo;
      b.hi.segment(off[i], parts[i].dim) = parts[i].domain->hi;
    }
    o.domain = b;
  }
  return o;
}

ObjectiveOracle regularize(const ObjectiveOracle& oracle, const Vec& u0, double nu) {
  if (!(nu > 0.0)) throw InvalidArgument("regularize: nu must be positive");
  if (u0.size() != oracle.dim) throw InvalidArgument("regularize: u0 has the wrong length");
  ObjectiveOracle o = oracle;
  const auto base_v = oracle.value_fn;
  const auto base_g = oracle.gradient_fn;
  o.value_fn = [base_v, u0, nu](const Vec& x, CounterSet* c) { return base_v(x, c) + 0.5 * nu * (u0 - x).squaredNorm(); };
  o.gradient_fn = [base_g, u0, nu](const Vec& x, CounterSet* c) -> Vec { return base_g(x, c) + nu * (x - u0); };
  o.mu = oracle.mu + nu;
  if (oracle.L) o.L = *oracle.L + nu;
  o.M.reset();
  if (oracle.M && oracle.domain) {
    const Vec far = (oracle.domain->lo - u0).cwiseAbs().cwiseMax((oracle.domain->hi - u0).cwiseAbs());
    o.M = *oracle.M + nu * far.norm();
  }
  if (oracle.quadratic) {
    QuadraticForm qf = *oracle.quadratic;
    qf.H += nu * Mat::Identity(oracle.dim, oracle.dim);
    qf.h -= nu * u0;
    qf.c += 0.5 * nu * u0.squaredNorm();
    o.quadratic = qf;
  }
  o.spec.reset();
  return o;
}

ObjectiveOracle penalize(const ObjectiveOracle& oracle, const Operator& B, const Vec& b, double r,
                         std::optional<SpectralBounds> bounds) {
  if (!(r > 0.0)) throw InvalidArgument("penalize: r must be positive");
  if (B.cols() != oracle.dim || B.rows() != b.size()) throw InvalidArgument("penalize: shape mismatch");
  if (!bounds) bounds = spectral_bounds<double>(B);
  ObjectiveOracle o = oracle;
  const auto base_v = oracle.value_fn;
  const auto base_g = oracle.gradient_fn;
  o.value_fn = [base_v, B, b, r](const Vec& x, CounterSet* c) {
    return base_v(x, c) + 0.5 * r * (B.apply(x, c) - b).squaredNorm();
  };
  o.gradient_fn = [base_g, B, b, r](const Vec& x, CounterSet* c) -> Vec {
    return base_g(x, c) + r * B.adjoint_apply(B.apply(x, c) - b, c);
  };
  if (oracle.L) o.L = *oracle.L + r * bounds->sigma_max_sq;
  o.M.reset();
  if (oracle.quadratic && std::max(B.rows(), B.cols()) <= SpectralOptions{}.cap) {
    const Mat bd = materialize(B);
    QuadraticForm qf = *oracle.quadratic;
    qf.H += r * bd.transpose() * bd;
    qf.h -= r * bd.transpose() * b;
    qf.c += 0.5 * r * b.squaredNorm();
    o.quadratic = qf;
  } else {
    o.quadratic.reset();
  }
  o.spec.reset();
  return o;
}

double sliding_penalty(double M, const SpectralBounds& bounds, double eps) {
  if (!(eps > 0.0)) throw InvalidArgument("sliding_penalty: eps must be positive");
  if (!(bounds.sigma_min_plus_sq > 0.0)) throw DegenerateError("sliding_penalty: sigma_min+(B) is zero");
  const double r_dual_sq = M * M / bounds.sigma_min_plus_sq;
  return 2.0 * r_dual_sq / eps;
}

double nonsmooth_penalty_alpha_sq(const SpectralBounds& a, const SpectralBounds& w) {
  if (!(w.sigma_min_plus_sq > 0.0)) throw InvalidArgument("nonsmooth penalty: mu_W must be positive");
  return (a.sigma_min_plus_sq + a.sigma_max_sq) / w.sigma_min_plus_sq;
}

NonsmoothPenaltyConfig nonsmooth_strongly_convex_penalty_config(double M, double mu_f, const SpectralBounds& a,
                                                                const SpectralBounds& w,
                                                                const SpectralBounds& b_assembled, double eps) {
  if (!(mu_f > 0.0)) throw InvalidArgument("nonsmooth penalty: mu_f must be positive");
  if (!(a.sigma_min_plus_sq > 0.0)) throw InvalidArgument("nonsmooth penalty: mu_A must be positive");
  if (!(b_assembled.sigma_min_plus_sq > 0.0)) throw InvalidArgument("nonsmooth penalty: sigma_min+(B) is zero");
  if (!(eps > 0.0)) throw InvalidArgument("nonsmooth penalty: eps must be positive");
  NonsmoothPenaltyConfig out;
  out.alpha_sq = nonsmooth_penalty_alpha_sq(a, w);
  out.r = M / std::sqrt(b_assembled.sigma_min_plus_sq);
  const double cap = 4.0 * out.r * out.r * a.sigma_min_plus_sq / mu_f;
  out.eps_checked = std::min(eps, cap);
  out.clipped = eps > cap;
  return out;
}

AffineProblem build_consensus(const MixedProblemData& data, const BuildOptions& opts) {
  if (data.has_coupled() || data.has_local() || data.has_shared_constraints() || data.total_x() > 0)
    throw InvalidArgument("build_consensus: coupled, local or shared constraint data present; use build_mixed");
  return assemble(data, opts, "consensus");
}

AffineProblem build_shared(const MixedProblemData& data, const BuildOptions& opts) {
  if (data.has_coupled() || data.has_local() || data.total_x() > 0)
    throw InvalidArgument("build_shared: only shared-variable constraints are allowed");
  if (!data.has_shared_constraints()) throw InvalidArgument("build_shared: no shared-variable constraints");
  return assemble(data, opts, "shared");
}

AffineProblem build_coupled(const MixedProblemData& data, const BuildOptions& opts) {
  if (!data.has_coupled()) throw InvalidArgument("build_coupled: no coupled constraints");
  if ((data.has_local() && !all_zero(data.C)) || data.has_shared_constraints() || data.shared_dim > 0)
    throw InvalidArgument("build_coupled: local or shared data present; use build_coupled_local or build_mixed");
  return assemble(data, opts, "coupled");
}

AffineProblem build_coupled_local(const MixedProblemData& data, const BuildOptions& opts) {
  if (!data.has_coupled() || !data.has_local())
    throw InvalidArgument("build_coupled_local: needs coupled and local constraints");
  if (data.has_shared_constraints() || data.shared_dim > 0)
    throw InvalidArgument("build_coupled_local: shared variable present; use build_mixed");
  return assemble(data, opts, all_zero(data.C) ? "coupled" : "coupled_local");
}

AffineProblem build_mixed(const MixedProblemData& data, const BuildOptions& opts) {
  return assemble(data, opts, "mixed");
}

void ensure_bounds(AffineProblem& problem, const SpectralOptions& opts) {
  if (problem.bounds) return;
  if (problem.blocks.empty()) {
    problem.bounds = spectral_bounds(problem.B, opts);
    return;
  }
  SpectralBounds out{0.0, 0.0, 0};
  bool any = false;
  for (auto& blk : problem.blocks) {
    if (!blk.bounds) blk.bounds = spectral_bounds(blk.op, opts);
    out.sigma_max_sq = std::max(out.sigma_max_sq, blk.bounds->sigma_max_sq);
    out.rank += std::max<Index>(0, blk.bounds->rank);
    if (blk.bounds->sigma_min_plus_sq > 0.0) {
      out.sigma_min_plus_sq = any ? std::min(out.sigma_min_plus_sq, blk.bounds->sigma_min_plus_sq)
                                  : blk.bounds->sigma_min_plus_sq;
      any = true;
    }
  }
  problem.bounds = out;
}

AffineProblem precondition(const AffineProblem& problem, const SpectralOptions& opts) {
  AffineProblem out = problem;
  std::vector<ConstraintBlock> blocks = problem.blocks;
  if (blocks.empty()) blocks.push_back(ConstraintBlock{problem.B, problem.b, 0, "all", problem.bounds});
  out.degrees.clear();
  std::vector<Operator> ops;
  std::vector<Vec> rhs;
  for (auto& blk : blocks) {
    if (!blk.bounds) blk.bounds = spectral_bounds(blk.op, opts);
    if (blk.bounds->sigma_min_plus_sq > 0.0) {
      const auto sys = chebyshev_operator<double>(blk.op, blk.rhs, *blk.bounds);
      blk.op = sys.K;
      blk.rhs = sys.b_prime;
      blk.bounds = sys.bounds;
      out.degrees.push_back(sys.degree);
    } else {
      out.degrees.push_back(0);
    }
    ops.push_back(blk.op);
    rhs.push_back(blk.rhs);
  }
  if (ops.size() == 1) {
    out.B = ops[0];
    out.b = rhs[0];
  } else {
    out.B = block_diag(ops);
    out.b = stack(rhs);
  }
  out.blocks = problem.blocks.empty() ? std::vector<ConstraintBlock>{} : blocks;
  out.bounds.reset();
  if (out.blocks.empty()) {
    out.bounds = blocks[0].bounds;
  } else {
    ensure_bounds(out, opts);
  }
  return out;
}

Vec dense_canonical_solution(const AffineProblem& problem) {
  if (!problem.objective.quadratic) throw InvalidArgument("dense_canonical_solution: objective is not quadratic");
  const auto& qf = *problem.objective.quadratic;
  const Mat bd = materialize(problem.B);
  const Index n = qf.H.rows();
  const Index m = bd.rows();
  Mat kkt = Mat::Zero(n + m, n + m);
  kkt.topLeftCorner(n, n) = qf.H;
  kkt.topRightCorner(n, m) = bd.transpose();
  kkt.bottomLeftCorner(m, n) = bd;
  Vec rhs(n + m);
  rhs << -qf.h, problem.b;
  const Vec sol = kkt.completeOrthogonalDecomposition().solve(rhs);
  return sol.head(n);
}

std::string regime_name(Regime r) {
  switch (r) {
    case Regime::consensus: return "consensus";
    case Regime::shared: return "shared";
    case Regime::coupled: return "coupled";
    case Regime::coupled_local: return "coupled_local";
    default: return "mixed";
  }
}

Regime parse_regime(const std::string& name) {
  if (name == "consensus") return Regime::consensus;
  if (name == "shared") return Regime::shared;
  if (name == "coupled") return Regime::coupled;
  if (name == "coupled_local") return Regime::coupled_local;
  if (name == "mixed") return Regime::mixed;
  throw InvalidArgument("unknown regime '" + name + "'");
}

Regime detect_regime(const MixedProblemData& data) {
  const bool x = data.total_x() > 0;
  const bool xt = data.shared_dim > 0;
  if (!x && xt) return data.has_shared_constraints() ? Regime::shared : Regime::consensus;
  if (x && !xt && data.has_coupled()) return data.has_local() ? Regime::coupled_local : Regime::coupled;
  return Regime::mixed;
}

AffineProblem build(const MixedProblemData& data, Regime regime, const BuildOptions& opts) {
  switch (regime) {
    case Regime::consensus: return build_consensus(data, opts);
    case Regime::shared: return build_shared(data, opts);
    case Regime::coupled: return build_coupled(data, opts);
    case Regime::coupled_local: return build_coupled_local(data, opts);
    default: return build_mixed(data, opts);
  }
}

AffineProblem decentralized_problem(const MixedProblemData& data, Regime regime, const PipelineOptions& opts) {
  BuildOptions bo;
  bo.accelerate_gossip = opts.accelerate_gossip;
  bo.accelerate_local = opts.accelerate_local;
  bo.spectral = opts.spectral;
  AffineProblem p = build(data, regime, bo);
  if (opts.solution_hint && p.objective.quadratic) p.solution_hint = dense_canonical_solution(p);
  if (opts.precondition && !p.degenerate) p = precondition(p, opts.spectral);
  ensure_bounds(p, opts.spectral);
  return p;
}

}  // namespace mixopt
