// Copyright The mixopt Authors
// SPDX-License-Identifier: Apache-2.0

// Experiment runner: solve, sweep, spectrum, worstcase, check.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "mixopt/experiments.hpp"
#include "mixopt/instance_io.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kSolverFailure = 1;
constexpr int kIoError = 2;

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::optional<double> eps;
};

mixopt::ExperimentConfig load(const Flags& f) {
  mixopt::ExperimentConfig c = mixopt::read_config(f.config);
  if (f.seed) c.seed = *f.seed;
  if (f.eps) c.eps = *f.eps;
  if (!f.out.empty()) c.output = f.out;
  return c;
}

void emit(const std::string& text, const std::string& path) {
  if (path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(path);
  if (!out) throw mixopt::IoError("cannot write '" + path + "'");
  out << text;
  if (!out) throw mixopt::IoError("failed writing '" + path + "'");
}

int cmd_solve(const Flags& f) {
  const mixopt::ExperimentConfig c = load(f);
  const mixopt::SolveOutcome out = mixopt::run_solve(c);
  emit(mixopt::csv_header(c.timing) + "\n" + mixopt::csv_row(c, out, std::nullopt) + "\n", c.output);
  return out.report.converged ? kOk : kSolverFailure;
}

int cmd_sweep(const Flags& f) {
  const mixopt::ExperimentConfig c = load(f);
  const mixopt::SweepResult r = mixopt::run_sweep(c);
  emit(r.csv, c.output);
  std::fprintf(stderr, "slope of log(%s) vs log(%s): %.4f +- %.4f over %lld points\n", c.sweep_counter.c_str(),
               c.sweep_parameter.c_str(), r.fit.slope, r.fit.stderr_, static_cast<long long>(r.fit.points));
  return kOk;
}

int cmd_spectrum(const Flags& f) {
  const mixopt::ExperimentConfig c = load(f);
  const auto inst = mixopt::build_instance(c, std::nullopt);
  if (!inst) {
    const mixopt::AffineProblem p = mixopt::build_problem(c, std::nullopt, nullptr, nullptr);
    char buf[160];
    std::snprintf(buf, sizeof buf, "B: sigma_max^2 = %.10g, sigma_min+^2 = %.10g\n", p.bounds->sigma_max_sq,
                  p.bounds->sigma_min_plus_sq);
    emit(buf, c.output);
    return kOk;
  }
  emit(mixopt::spectrum_report(inst->data), c.output);
  return kOk;
}

int cmd_worstcase(const Flags& f, const mixopt::WorstInstanceSpec& spec) {
  const mixopt::WorstInstance w = mixopt::build_worst(spec);
  emit(mixopt::instance_to_json(w.data) + "\n", f.out);
  std::fprintf(stderr, "L' = %.10g, mu' = %.10g, measured L = %.10g, mu = %.10g, kappa = %.10g", w.L_prime, w.mu_prime,
               w.measured_L, w.measured_mu, w.measured_kappa);
  if (w.rho > 0.0) std::fprintf(stderr, ", rho = %.10g", w.rho);
  std::fprintf(stderr, "\n");
  return kOk;
}

int cmd_check(const Flags& f) {
  const auto results = mixopt::run_invariant_checks(f.seed.value_or(1));
  std::string text;
  bool ok = true;
  for (const auto& r : results) {
    text += (r.ok ? "PASS " : "FAIL ") + r.name + ": " + r.detail + "\n";
    ok = ok && r.ok;
  }
  emit(text, f.out);
  return ok ? kOk : kSolverFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Decentralized optimization under mixed affine constraints: experiment runner"};
  app.require_subcommand(1);
  Flags flags;
  auto add_common = [&](CLI::App* sub, bool need_config) {
    auto* opt = sub->add_option("--config", flags.config, "experiment config (JSON)");
    if (need_config) opt->required();
    sub->add_option("--seed", flags.seed, "random seed, overrides the config");
    sub->add_option("--out", flags.out, "output path (default stdout)");
    sub->add_option("--eps", flags.eps, "target accuracy for the sliding and regularized methods");
  };
  CLI::App* solve = app.add_subcommand("solve", "run one solve and print a CSV row");
  add_common(solve, true);
  CLI::App* sweep = app.add_subcommand("sweep", "sweep a condition number and fit a log-log slope");
  add_common(sweep, true);
  CLI::App* spectrum = app.add_subcommand("spectrum", "print spectral bounds and condition numbers of an instance");
  add_common(spectrum, true);
  CLI::App* check = app.add_subcommand("check", "run the invariant suite");
  add_common(check, false);

  CLI::App* worst = app.add_subcommand("worstcase", "emit a lower-bound instance as JSON");
  add_common(worst, false);
  mixopt::WorstInstanceSpec wspec;
  std::string kind = "shared_local";
  std::optional<double> kappa_w;
  worst->add_option("--kind", kind, "shared_local or coupled_local");
  worst->add_option("--kappa-f", wspec.kappa_f);
  worst->add_option("--kappa-C", wspec.kappa_C);
  worst->add_option("--kappa-A", wspec.kappa_A);
  worst->add_option("--kappa-W", kappa_w);
  worst->add_option("--truncation", wspec.truncation);
  worst->add_option("--nodes", wspec.n);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kIoError;
  }

  try {
    if (*solve) return cmd_solve(flags);
    if (*sweep) return cmd_sweep(flags);
    if (*spectrum) return cmd_spectrum(flags);
    if (*check) return cmd_check(flags);
    wspec.kind = mixopt::parse_worst_kind(kind);
    wspec.kappa_W = kappa_w;
    return cmd_worstcase(flags, wspec);
  } catch (const mixopt::IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kIoError;
  } catch (const mixopt::InvalidArgument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kIoError;
  } catch (const std::exception& e) {
    std::cerr << "solver failure: " << e.what() << '\n';
    return kSolverFailure;
  }
}
