// Copyright The mixopt Authors
// SPDX-License-Identifier: Apache-2.0

#include "mixopt/experiments.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <Eigen/QR>

#include "json.hpp"
#include "mixopt/instance_io.hpp"

namespace mixopt {

namespace {

using json = nlohmann::json;

Mat orthonormal_columns(Index rows, Index cols, Rng& rng) {
  const Mat g = random_gaussian(rows, std::max(rows, cols), rng);
  Eigen::HouseholderQR<Mat> qr(g);
  return Mat(qr.householderQ()).leftCols(cols);
}

Vec spread(Index k, double lo, double hi) {
  Vec v(k);
  if (k == 1) {
    v(0) = lo;
    return v;
  }
  for (Index i = 0; i < k; ++i) {
    const double t = static_cast<double>(i) / static_cast<double>(k - 1);
    v(i) = lo > 0.0 ? lo * std::pow(hi / lo, t) : lo + (hi - lo) * t;
  }
  v(0) = lo;
  v(k - 1) = hi;
  return v;
}

Vec gaussian_vec(Index n, Rng& rng) {
  std::normal_distribution<double> nd;
  Vec v(n);
  for (Index i = 0; i < n; ++i) v(i) = nd(rng);
  return v;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string fmt_opt(const std::optional<double>& v) { return v ? fmt(*v) : std::string(); }

template <typename T>
void read_opt(const json& j, const char* key, std::optional<T>& out) {
  if (j.contains(key) && !j[key].is_null()) out = j[key].get<T>();
}

template <typename T>
void read_val(const json& j, const char* key, T& out) {
  if (j.contains(key) && !j[key].is_null()) out = j[key].get<T>();
}

json parse_json(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw IoError(what + ": malformed JSON: " + e.what());
  }
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

WorstInstanceSpec worst_spec_from(const json& inst, const std::string& param, std::optional<double> value) {
  WorstInstanceSpec s;
  if (inst.contains("kind")) s.kind = parse_worst_kind(inst["kind"].get<std::string>());
  read_val(inst, "kappa_f", s.kappa_f);
  read_val(inst, "kappa_C", s.kappa_C);
  read_val(inst, "kappa_A", s.kappa_A);
  read_opt(inst, "kappa_W", s.kappa_W);
  read_val(inst, "truncation", s.truncation);
  read_val(inst, "n", s.n);
  if (value) {
    if (param == "kappa_f") s.kappa_f = *value;
    if (param == "kappa_C") s.kappa_C = *value;
    if (param == "kappa_W") s.kappa_W = *value;
    if (param == "kappa_AC_tilde" || param == "kappa_A_hat") s.kappa_A = *value;
  }
  return s;
}

}  // namespace

Mat random_gaussian(Index rows, Index cols, Rng& rng) {
  std::normal_distribution<double> nd;
  Mat m(rows, cols);
  for (Index j = 0; j < cols; ++j) {
    for (Index i = 0; i < rows; ++i) m(i, j) = nd(rng);
  }
  return m;
}

Mat random_spd(Index dim, double lo, double hi, Rng& rng) {
  if (dim == 0) return Mat(0, 0);
  const Mat u = orthonormal_columns(dim, dim, rng);
  const Mat q = u * spread(dim, lo, hi).asDiagonal() * u.transpose();
  return 0.5 * (q + q.transpose());
}

Mat random_conditioned(Index rows, Index cols, double s_lo, double s_hi, Rng& rng) {
  const Index r = std::min(rows, cols);
  if (r == 0) return Mat::Zero(rows, cols);
  const Mat u = orthonormal_columns(rows, r, rng);
  const Mat v = orthonormal_columns(cols, r, rng);
  return u * spread(r, s_lo, s_hi).asDiagonal() * v.transpose();
}

MixedProblemData random_instance(const RandomInstanceSpec& spec, Rng& rng) {
  if (!(spec.mu >= 0.0) || !(spec.L > 0.0) || (!spec.convex && !(spec.mu > 0.0)) || spec.L < spec.mu)
    throw InvalidArgument("random_instance: need 0 < mu <= L (or convex with L > 0)");
  MixedProblemData d;
  if (spec.kappa_W) {
    const GossipMatrix g = path_for_kappa(*spec.kappa_W);
    d.n = g.n;
    d.W = g.W;
  } else if (spec.n == 1) {
    d.n = 1;
    d.W = Mat::Zero(1, 1);
  } else {
    const GossipMatrix g = standard_topology(spec.topology, spec.n);
    d.n = g.n;
    d.W = g.W;
  }
  const Regime r = spec.regime;
  const bool has_x = r == Regime::coupled || r == Regime::coupled_local || r == Regime::mixed;
  const bool has_xt = r == Regime::consensus || r == Regime::shared || r == Regime::mixed;
  const bool coupled = has_x;
  const bool local = r == Regime::coupled_local || r == Regime::mixed;
  const bool shared = r == Regime::shared || r == Regime::mixed;
  const Index dx = has_x ? spec.x_dim : 0;
  const Index dt = has_xt ? spec.shared_dim : 0;
  d.shared_dim = dt;
  d.x_dims.assign(d.n, dx);

  const Mat p_left = orthonormal_columns(spec.coupled_rows, spec.coupled_rows, rng);
  const Vec xt_star = gaussian_vec(dt, rng);
  for (Index i = 0; i < d.n; ++i) {
    Mat Q = Mat::Zero(dx + dt, dx + dt);
    if (spec.convex) {
      // Half of the spectrum at zero, the rest over [L/10, L].
      const Index dim = dx + dt;
      const Mat u = orthonormal_columns(dim, dim, rng);
      Vec ev = Vec::Zero(dim);
      const Index pos = std::max<Index>(1, dim / 2);
      ev.tail(pos) = spread(pos, spec.L / 10.0, spec.L);
      Q = u * ev.asDiagonal() * u.transpose();
      Q = 0.5 * (Q + Q.transpose());
      const Vec q = Q * gaussian_vec(dim, rng);
      d.f.push_back(quadratic_oracle(Q, q));
    } else {
      if (dx > 0) Q.topLeftCorner(dx, dx) = random_spd(dx, spec.mu, spec.L, rng);
      if (dt > 0) Q.bottomRightCorner(dt, dt) = random_spd(dt, spec.mu, spec.L, rng);
      d.f.push_back(quadratic_oracle(Q, gaussian_vec(dx + dt, rng)));
    }
    const Vec x_star = gaussian_vec(dx, rng);
    if (coupled) {
      Mat a;
      if (spec.kappa_A_hat) {
        if (dx < spec.coupled_rows) throw InvalidArgument("random_instance: kappa_A_hat needs x_dim >= coupled_rows");
        Vec sv = Vec::Ones(spec.coupled_rows);
        sv(spec.coupled_rows - 1) = 1.0 / std::sqrt(*spec.kappa_A_hat);
        a = p_left * sv.asDiagonal() * orthonormal_columns(dx, spec.coupled_rows, rng).transpose();
      } else {
        a = random_gaussian(spec.coupled_rows, dx, rng);
      }
      d.A.push_back(a);
      d.b.push_back(a * x_star);
    }
    if (local) {
      const Mat c = spec.kappa_C ? random_conditioned(spec.local_rows, dx, 1.0 / std::sqrt(*spec.kappa_C), 1.0, rng)
                                 : random_gaussian(spec.local_rows, dx, rng);
      d.C.push_back(c);
      d.c.push_back(c * x_star);
    }
    if (shared) {
      const Mat ct = random_gaussian(spec.shared_rows, dt, rng);
      d.C_tilde.push_back(ct);
      d.c_tilde.push_back(ct * xt_star);
    }
  }
  return d;
}

AffineProblem nonsmooth_problem(const NonsmoothSpec& spec, Rng& rng) {
  if (spec.rows < 1 || spec.rows > spec.dim) throw InvalidArgument("nonsmooth_problem: need 1 <= rows <= dim");
  if (!(spec.box > 0.0)) throw InvalidArgument("nonsmooth_problem: box half-width must be positive");
  std::uniform_real_distribution<double> ud(-1.0, 1.0);
  const Box box{Vec::Constant(spec.dim, -spec.box), Vec::Constant(spec.dim, spec.box)};
  Vec g(spec.dim), planted(spec.dim);
  for (Index i = 0; i < spec.dim; ++i) {
    g(i) = spec.box * ud(rng);
    planted(i) = 0.5 * spec.box * ud(rng);
  }
  const Mat B = random_conditioned(spec.rows, spec.dim, 0.5, 1.0, rng);
  AffineProblem p;
  p.objective = spec.mu ? strongly_convex_l1_oracle(g, *spec.mu, box) : l1_oracle(g, 1.0, box);
  p.B = dense_operator<double>(B, Tag::A);
  p.b = B * planted;
  p.regime = "nonsmooth";
  p.layout.n = 1;
  p.layout.x_dims = {spec.dim};
  p.layout.x_size = spec.dim;
  if (spec.precondition) p = precondition(p);
  ensure_bounds(p);
  return p;
}

SlopeFit fit_loglog(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw InvalidArgument("fit_loglog: x and y differ in length");
  if (x.size() < 4) throw FitError("slope fit needs at least 4 points, got " + std::to_string(x.size()));
  const std::size_t n = x.size();
  std::vector<double> lx(n), ly(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) throw FitError("slope fit needs positive data");
    lx[i] = std::log(x[i]);
    ly[i] = std::log(y[i]);
  }
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += lx[i];
    my += ly[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
  }
  if (!(sxx > 0.0)) throw FitError("slope fit needs distinct x values");
  SlopeFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double ssr = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double e = ly[i] - fit.intercept - fit.slope * lx[i];
    ssr += e * e;
  }
  fit.stderr_ = std::sqrt(ssr / static_cast<double>(n - 2) / sxx);
  fit.points = static_cast<Index>(n);
  return fit;
}

void ExperimentConfig::validate() const {
  if (instance_json.empty()) throw InvalidArgument("config: missing instance section");
  if (method != "apapc" && method != "apapc_regularized" && method != "sliding" && method != "sliding_restart")
    throw InvalidArgument("config: unknown solver method '" + method + "'");
  if (!(target_accuracy > 0.0)) throw InvalidArgument("config: target_accuracy must be positive");
  if (!sweep_parameter.empty()) {
    static const std::vector<std::string> known{"kappa_f", "kappa_W", "kappa_A_hat", "kappa_C", "kappa_AC_tilde", "eps"};
    if (std::find(known.begin(), known.end(), sweep_parameter) == known.end())
      throw InvalidArgument("config: unknown sweep parameter '" + sweep_parameter + "'");
    if (sweep_grid.size() < 4) throw InvalidArgument("config: sweep grid needs at least 4 points");
    for (std::size_t i = 1; i < sweep_grid.size(); ++i) {
      if (!(sweep_grid[i] > sweep_grid[i - 1])) throw InvalidArgument("config: sweep grid must be strictly increasing");
    }
  }
}

ExperimentConfig config_from_json(const std::string& text) {
  const json doc = parse_json(text, "config");
  ExperimentConfig c;
  try {
    if (!doc.is_object()) throw IoError("config: expected a JSON object");
    if (doc.contains("instance")) c.instance_json = doc["instance"].dump();
    if (doc.contains("solver")) {
      const json& s = doc["solver"];
      read_val(s, "method", c.method);
      read_opt(s, "eps", c.eps);
      read_opt(s, "R", c.R);
      read_val(s, "max_iters", c.max_iters);
      read_val(s, "tol", c.tol);
      if (s.contains("schedule_overrides")) {
        const json& o = s["schedule_overrides"];
        read_opt(o, "d_tilde_factor", c.d_tilde_factor);
        read_opt(o, "n_factor", c.n_factor);
        read_opt(o, "stage_divisor", c.stage_divisor);
      }
    }
    if (doc.contains("pipeline")) {
      const json& p = doc["pipeline"];
      read_val(p, "accelerate_gossip", c.pipeline.accelerate_gossip);
      read_val(p, "accelerate_local", c.pipeline.accelerate_local);
      read_val(p, "precondition", c.pipeline.precondition);
    }
    if (doc.contains("sweep")) {
      const json& s = doc["sweep"];
      read_val(s, "parameter", c.sweep_parameter);
      read_val(s, "grid", c.sweep_grid);
      read_val(s, "counter", c.sweep_counter);
    }
    read_val(doc, "target_accuracy", c.target_accuracy);
    read_val(doc, "seed", c.seed);
    read_val(doc, "output", c.output);
    read_val(doc, "timing", c.timing);
  } catch (const json::exception& e) {
    throw IoError(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

ExperimentConfig read_config(const std::string& path) { return config_from_json(read_file(path)); }

ConditionReport measure_conditions(const MixedProblemData& data) {
  ConditionReport r;
  double mu = 0.0, L = 0.0;
  bool have = !data.f.empty();
  for (std::size_t i = 0; i < data.f.size(); ++i) {
    const auto& f = data.f[i];
    if (!f.L) have = false;
    mu = i == 0 ? f.mu : std::min(mu, f.mu);
    if (f.L) L = std::max(L, *f.L);
  }
  if (have && mu > 0.0) r.kappa_f = L / mu;
  if (data.n >= 2) r.kappa_W = gossip_kappa(data.W);
  if (data.has_coupled()) {
    try {
      r.kappa_A_hat = mixed_condition_number(MatrixFamily(data.A));
    } catch (const DegenerateError&) {
    }
  }
  if (data.has_coupled() && data.has_local())
    r.kappa_AC_tilde = projected_condition_number(MatrixFamily(data.A), MatrixFamily(data.C)).kappa_tilde;
  if (data.has_shared_constraints()) {
    try {
      r.kappa_Ct_hat = mixed_condition_number(MatrixFamily(data.C_tilde), true);
    } catch (const DegenerateError&) {
    }
  }
  return r;
}

std::optional<InstanceBuild> build_instance(const ExperimentConfig& config, std::optional<double> value) {
  const json inst = parse_json(config.instance_json, "instance");
  const std::string& param = config.sweep_parameter;
  Rng rng(config.seed);
  InstanceBuild out;
  try {
    if (inst.contains("file")) {
      out.data = read_instance(inst["file"].get<std::string>());
      out.regime = inst.contains("regime") ? parse_regime(inst["regime"].get<std::string>()) : detect_regime(out.data);
      return out;
    }
    const std::string gen = inst.value("generator", std::string());
    if (gen == "random") {
      RandomInstanceSpec s;
      if (inst.contains("regime")) s.regime = parse_regime(inst["regime"].get<std::string>());
      read_val(inst, "n", s.n);
      read_val(inst, "x_dim", s.x_dim);
      read_val(inst, "shared_dim", s.shared_dim);
      read_val(inst, "coupled_rows", s.coupled_rows);
      read_val(inst, "local_rows", s.local_rows);
      read_val(inst, "shared_rows", s.shared_rows);
      read_val(inst, "mu", s.mu);
      read_val(inst, "L", s.L);
      read_val(inst, "convex", s.convex);
      if (inst.contains("kappa_f")) s.L = inst["kappa_f"].get<double>() * s.mu;
      if (inst.contains("topology")) s.topology = parse_topology(inst["topology"].get<std::string>());
      read_opt(inst, "kappa_W", s.kappa_W);
      read_opt(inst, "kappa_A_hat", s.kappa_A_hat);
      read_opt(inst, "kappa_C", s.kappa_C);
      if (value) {
        if (param == "kappa_f") s.L = *value * s.mu;
        if (param == "kappa_W") s.kappa_W = *value;
        if (param == "kappa_A_hat") s.kappa_A_hat = *value;
        if (param == "kappa_C") s.kappa_C = *value;
        if (param == "kappa_AC_tilde") throw InvalidArgument("kappa_AC_tilde sweeps need the worst-case generator");
      }
      out.regime = s.regime;
      out.data = random_instance(s, rng);
      return out;
    }
    if (gen == "worst") {
      const WorstInstanceSpec s = worst_spec_from(inst, param, value);
      out.regime = s.kind == WorstKind::shared_local ? Regime::shared : Regime::coupled_local;
      out.data = build_worst(s).data;
      return out;
    }
    if (gen == "nonsmooth") return std::nullopt;
    throw IoError("instance: expected a file or a generator (random, worst, nonsmooth)");
  } catch (const json::exception& e) {
    throw IoError(std::string("instance: ") + e.what());
  }
}

AffineProblem build_problem(const ExperimentConfig& config, std::optional<double> value, ConditionReport* conditions,
                            std::string* regime) {
  const std::optional<InstanceBuild> inst = build_instance(config, value);
  if (!inst) {
    const json j = parse_json(config.instance_json, "instance");
    NonsmoothSpec s;
    try {
      read_val(j, "dim", s.dim);
      read_val(j, "rows", s.rows);
      read_val(j, "box", s.box);
      read_opt(j, "mu", s.mu);
      read_val(j, "precondition", s.precondition);
    } catch (const json::exception& e) {
      throw IoError(std::string("instance: ") + e.what());
    }
    Rng rng(config.seed);
    AffineProblem p = nonsmooth_problem(s, rng);
    if (regime) *regime = "nonsmooth";
    if (conditions) {
      *conditions = ConditionReport{};
      if (p.bounds && p.bounds->sigma_min_plus_sq > 0.0) conditions->kappa_B = p.bounds->kappa();
    }
    return p;
  }
  AffineProblem p = decentralized_problem(inst->data, inst->regime, config.pipeline);
  if (conditions) {
    *conditions = measure_conditions(inst->data);
    if (p.bounds && p.bounds->sigma_min_plus_sq > 0.0) conditions->kappa_B = p.bounds->kappa();
  }
  if (regime) *regime = regime_name(inst->regime);
  return p;
}

SolveOutcome run_solve(const ExperimentConfig& config, std::optional<double> value) {
  SolveOutcome out;
  out.problem = build_problem(config, value, &out.conditions, &out.regime);
  const AffineProblem& p = out.problem;
  const Vec u0 = Vec::Zero(p.dim());
  double eps = config.eps ? *config.eps : config.target_accuracy;
  if (value && config.sweep_parameter == "eps") eps = *value;
  std::optional<double> R = config.R;
  if (!R && p.solution_hint) R = std::max((*p.solution_hint - u0).norm(), 1e-12);

  if (config.method == "apapc") {
    if (!p.objective.L) throw InvalidArgument("apapc: objective has no smoothness constant");
    ApapcParams params = apapc_params(p.objective.mu, *p.objective.L, *p.bounds);
    ApapcOptions opts;
    opts.record_history = false;
    opts.max_iters = config.max_iters;
    opts.stop = p.solution_hint ? StopRule::distance : StopRule::fixed_point;
    opts.tol = p.solution_hint ? eps : config.tol;
    out.report = apapc(p, params, u0, opts);
  } else if (config.method == "apapc_regularized") {
    if (!R) throw InvalidArgument("apapc_regularized: R is required when the instance has no known solution");
    RegularizedOptions opts;
    opts.max_iters = config.max_iters;
    out.report = solve_convex_regularized(p, eps, *R, u0, opts);
  } else if (config.method == "sliding") {
    SlidingOptions opts;
    if (config.d_tilde_factor) opts.schedule.d_tilde_factor = *config.d_tilde_factor;
    if (config.n_factor) opts.schedule.n_factor = *config.n_factor;
    if (!R && p.objective.domain) {
      const Box& b = *p.objective.domain;
      R = (b.lo - u0).cwiseAbs().cwiseMax((b.hi - u0).cwiseAbs()).norm();
    }
    if (!R) throw InvalidArgument("sliding: R is required (config R, a solution hint or a box domain)");
    out.report = gradient_sliding(p, eps, *R, u0, opts);
  } else {
    RestartOptions opts;
    if (config.d_tilde_factor) opts.sliding.schedule.d_tilde_factor = *config.d_tilde_factor;
    if (config.n_factor) opts.sliding.schedule.n_factor = *config.n_factor;
    if (config.stage_divisor) opts.stage_divisor = *config.stage_divisor;
    opts.R = config.R;
    out.report = restarted_sliding(p, eps, p.objective.mu, u0, opts);
  }
  if (p.solution_hint) out.final_distance = (out.report.final_point - *p.solution_hint).norm();
  out.final_residual = (p.B.apply(out.report.final_point) - p.b).norm();
  return out;
}

std::string csv_header(bool timing) {
  std::string h =
      "parameter,value,seed,regime,method,n,dim,kappa_f,kappa_W,kappa_A_hat,kappa_AC_tilde,kappa_Ct_hat,kappa_B,"
      "degree_gossip,degree_local,degree_outer,iterations,grad_calls,mul_A,mul_C,mul_C_tilde,communications,outer_B,"
      "converged,final_distance,final_residual";
  if (timing) h += ",wall_time";
  return h;
}

long long counter_value(const SolveReport& report, const std::string& name) {
  const CounterSet& c = report.counters;
  if (name == "grad_calls") return c.grad_calls;
  if (name == "mul_A") return c.mul_A();
  if (name == "mul_C") return c.mul_C();
  if (name == "mul_C_tilde") return c.mul_C_tilde();
  if (name == "communications") return c.communications();
  if (name == "outer_B") return c.outer_forward + c.outer_adjoint;
  if (name == "iterations") return report.iterations;
  throw InvalidArgument("unknown counter '" + name + "'");
}

std::string csv_row(const ExperimentConfig& config, const SolveOutcome& out, std::optional<double> value) {
  const SolveReport& r = out.report;
  const ConditionReport& k = out.conditions;
  Index outer = 0;
  for (Index d : out.problem.degrees) outer = std::max(outer, d);
  std::ostringstream os;
  os << (config.sweep_parameter.empty() ? "none" : config.sweep_parameter) << ',' << (value ? fmt(*value) : "") << ','
     << config.seed << ',' << out.regime << ',' << config.method << ',' << out.problem.layout.n << ','
     << out.problem.dim() << ',' << fmt_opt(k.kappa_f) << ',' << fmt_opt(k.kappa_W) << ',' << fmt_opt(k.kappa_A_hat)
     << ',' << fmt_opt(k.kappa_AC_tilde) << ',' << fmt_opt(k.kappa_Ct_hat) << ',' << fmt_opt(k.kappa_B) << ','
     << out.problem.gossip_degree << ',' << out.problem.local_degree << ',' << outer << ',' << r.iterations << ','
     << r.counters.grad_calls << ',' << r.counters.mul_A() << ',' << r.counters.mul_C() << ','
     << r.counters.mul_C_tilde() << ',' << r.counters.communications() << ','
     << r.counters.outer_forward + r.counters.outer_adjoint << ',' << (r.converged ? 1 : 0) << ','
     << (out.final_distance >= 0.0 ? fmt(out.final_distance) : "") << ',' << fmt(out.final_residual);
  if (config.timing) os << ',' << fmt(r.wall_time);
  return os.str();
}

SweepResult run_sweep(const ExperimentConfig& config) {
  if (config.sweep_parameter.empty()) throw InvalidArgument("sweep: config has no sweep section");
  config.validate();
  SweepResult res;
  std::ostringstream csv;
  csv << csv_header(config.timing) << '\n';
  std::vector<double> xs, ys;
  for (double v : config.sweep_grid) {
    SolveOutcome out;
    try {
      out = run_solve(config, v);
    } catch (const DivergenceError&) {
      continue;
    } catch (const DegenerateError&) {
      continue;
    }
    csv << csv_row(config, out, v) << '\n';
    if (out.report.converged) {
      xs.push_back(v);
      ys.push_back(static_cast<double>(counter_value(out.report, config.sweep_counter)));
    }
    res.grid.push_back(v);
    res.outcomes.push_back(std::move(out));
  }
  res.csv = csv.str();
  res.fit = fit_loglog(xs, ys);
  return res;
}

std::vector<CheckResult> run_invariant_checks(std::uint64_t seed) {
  std::vector<CheckResult> out;
  auto add = [&](const std::string& name, auto&& fn) {
    CheckResult r;
    r.name = name;
    try {
      r.detail = fn(r.ok);
    } catch (const std::exception& e) {
      r.ok = false;
      r.detail = e.what();
    }
    out.push_back(r);
  };
  Rng rng(seed);

  add("gossip matrices satisfy the kernel assumption", [&](bool& ok) {
    ok = true;
    for (Topology t : {Topology::path, Topology::cycle, Topology::star, Topology::complete})
      ok = ok && check_assumption4(standard_topology(t, 6)).ok();
    ok = ok && check_assumption4(path_for_kappa(50.0)).ok();
    return std::string("path, cycle, star, complete (n = 6) and a weighted path");
  });

  add("path_for_kappa hits its target", [&](bool& ok) {
    const double k = gossip_kappa(path_for_kappa(100.0).W);
    ok = std::abs(k - 100.0) <= 1e-6 * 100.0;
    return "kappa = " + fmt(k);
  });

  add("Chebyshev compression bounds", [&](bool& ok) {
    const Mat b = random_conditioned(6, 10, 1e-2, 1.0, rng);
    const SpectralBounds sb = spectral_bounds<double>(b);
    const auto sys = chebyshev_operator<double>(dense_operator<double>(b), Vec::Zero(6), sb);
    const SpectralBounds kb = spectral_bounds<double>(sys.K);
    const double smax = std::sqrt(kb.sigma_max_sq), smin = std::sqrt(kb.sigma_min_plus_sq);
    ok = smax <= 19.0 / 15.0 && smin >= 11.0 / 15.0 &&
         sys.degree == static_cast<Index>(std::ceil(std::sqrt(sb.kappa()) * (1.0 - 1e-12)));
    return "sigma in [" + fmt(smin) + ", " + fmt(smax) + "], degree " + std::to_string(sys.degree);
  });

  for (Regime reg : {Regime::consensus, Regime::shared, Regime::coupled, Regime::coupled_local, Regime::mixed}) {
    add("APAPC matches the dense KKT solution (" + regime_name(reg) + ")", [&](bool& ok) {
      RandomInstanceSpec s;
      s.regime = reg;
      s.n = 3;
      const AffineProblem p = decentralized_problem(random_instance(s, rng), reg);
      ApapcOptions o;
      o.stop = StopRule::distance;
      o.tol = 1e-8;
      o.record_history = false;
      o.max_iters = 200000;
      const SolveReport r = apapc(p, apapc_params(p.objective.mu, *p.objective.L, *p.bounds), Vec::Zero(p.dim()), o);
      const double rel = (r.final_point - *p.solution_hint).norm() / std::max(1e-300, p.solution_hint->norm());
      ok = r.converged && rel <= 1e-6;
      return "relative error " + fmt(rel) + " after " + std::to_string(r.iterations) + " iterations";
    });
  }

  add("APAPC oracle accounting", [&](bool& ok) {
    RandomInstanceSpec s;
    s.regime = Regime::consensus;
    const AffineProblem p = decentralized_problem(random_instance(s, rng), Regime::consensus);
    ApapcParams params = apapc_params(p.objective.mu, *p.objective.L, *p.bounds);
    params.N = 25;
    ApapcOptions o;
    o.record_history = false;
    const SolveReport r = apapc(p, params, Vec::Zero(p.dim()), o);
    ok = r.counters.grad_calls == 25 && r.counters.outer_forward == 25 && r.counters.outer_adjoint == 25;
    return "grad " + std::to_string(r.counters.grad_calls) + ", B " + std::to_string(r.counters.outer_forward) +
           ", B^T " + std::to_string(r.counters.outer_adjoint);
  });
  return out;
}

std::string spectrum_report(const MixedProblemData& data) {
  std::ostringstream os;
  const ConditionReport k = measure_conditions(data);
  os << "n = " << data.n << ", total x dim = " << data.total_x() << ", shared dim = " << data.shared_dim << '\n';
  auto line = [&](const char* name, const std::optional<double>& v) {
    if (v) os << name << " = " << fmt(*v) << '\n';
  };
  line("kappa_f", k.kappa_f);
  line("kappa_W", k.kappa_W);
  line("kappa_A_hat", k.kappa_A_hat);
  line("kappa_AC_tilde", k.kappa_AC_tilde);
  line("kappa_Ct_hat", k.kappa_Ct_hat);
  if (data.n >= 2) {
    const EigenRange w = positive_eigen_range(data.W);
    os << "W: lambda_max = " << fmt(w.lambda_max) << ", lambda_min+ = " << fmt(w.lambda_min_plus) << '\n';
  }
  const Regime reg = detect_regime(data);
  PipelineOptions raw;
  raw.accelerate_gossip = raw.accelerate_local = raw.precondition = false;
  raw.solution_hint = false;
  const AffineProblem plain = decentralized_problem(data, reg, raw);
  os << "regime = " << regime_name(reg) << '\n';
  os << "B: sigma_max^2 = " << fmt(plain.bounds->sigma_max_sq) << ", sigma_min+^2 = " << fmt(plain.bounds->sigma_min_plus_sq)
     << '\n';
  PipelineOptions full;
  full.solution_hint = false;
  const AffineProblem pre = decentralized_problem(data, reg, full);
  os << "preconditioned: sigma_max^2 = " << fmt(pre.bounds->sigma_max_sq)
     << ", sigma_min+^2 = " << fmt(pre.bounds->sigma_min_plus_sq) << ", gossip degree = " << pre.gossip_degree
     << ", local degree = " << pre.local_degree << '\n';
  return os.str();
}

}  // namespace mixopt
