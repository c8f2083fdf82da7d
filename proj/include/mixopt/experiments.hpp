// Copyright The mixopt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "mixopt/problems.hpp"
#include "mixopt/solvers.hpp"
#include "mixopt/worstcase.hpp"

namespace mixopt {

using Rng = std::mt19937_64;

// Symmetric matrix with eigenvalues spread over [lo, hi], both ends included.
Mat random_spd(Index dim, double lo, double hi, Rng& rng);
Mat random_gaussian(Index rows, Index cols, Rng& rng);
// rows x cols matrix with singular values spread over [s_lo, s_hi].
Mat random_conditioned(Index rows, Index cols, double s_lo, double s_hi, Rng& rng);

// Random feasible Problem (P) instance. Right-hand sides come from a planted point.
struct RandomInstanceSpec {
  Regime regime = Regime::mixed;
  Index n = 3;
  Index x_dim = 3;        // d_i, coupled and local regimes
  Index shared_dim = 3;   // shared and consensus regimes
  Index coupled_rows = 2;
  Index local_rows = 1;
  Index shared_rows = 1;
  double mu = 1.0;
  double L = 10.0;
  bool convex = false;     // mu = 0: rank-deficient Hessians
  Topology topology = Topology::path;
  std::optional<double> kappa_W;      // path_for_kappa; overrides n and topology
  std::optional<double> kappa_A_hat;  // A_i = blocks with kappa_hat_A equal to the target
  std::optional<double> kappa_C;      // C_i singular values spread over a kappa_C range
};

MixedProblemData random_instance(const RandomInstanceSpec& spec, Rng& rng);

// Nonsmooth instances for the sliding path: G(u) = ||u - g||_1 (convex) or
// ||u - g||_1 + (mu/2)||u||^2 (strongly convex) on a box, with Bu = b, B rows x dim.
struct NonsmoothSpec {
  Index dim = 8;
  Index rows = 3;
  double box = 2.0;
  std::optional<double> mu;
  bool precondition = false;
};

AffineProblem nonsmooth_problem(const NonsmoothSpec& spec, Rng& rng);

// Least-squares slope of log(y) against log(x) with its standard error.
struct SlopeFit {
  double slope = 0.0;
  double intercept = 0.0;
  double stderr_ = 0.0;
  Index points = 0;
};

// Throws FitError with fewer than 4 points or nonpositive data.
SlopeFit fit_loglog(const std::vector<double>& x, const std::vector<double>& y);

// Experiment configuration, read from JSON:
// {"instance": {"file": path} | {"generator": "random"|"worst"|"nonsmooth", ...},
//  "solver": {"method": "apapc"|"apapc_regularized"|"sliding"|"sliding_restart",
//             "eps", "R", "max_iters", "tol", "schedule_overrides": {...}},
//  "pipeline": {"accelerate_gossip", "accelerate_local", "precondition"},
//  "sweep": {"parameter", "grid": [...], "counter"},
//  "target_accuracy", "seed", "output", "timing"}
struct ExperimentConfig {
  std::string instance_json;  // the "instance" object, kept as text
  std::string method = "apapc";
  std::optional<double> eps;
  std::optional<double> R;
  Index max_iters = 1000000;
  double tol = 1e-8;
  std::optional<double> d_tilde_factor;
  std::optional<double> n_factor;
  std::optional<double> stage_divisor;
  PipelineOptions pipeline;
  std::string sweep_parameter;
  std::vector<double> sweep_grid;
  std::string sweep_counter = "grad_calls";
  double target_accuracy = 1e-8;
  std::uint64_t seed = 1;
  std::string output;
  bool timing = false;  // wall time breaks byte-identical output, so it is opt-in

  void validate() const;
};

ExperimentConfig config_from_json(const std::string& text);
ExperimentConfig read_config(const std::string& path);

// Measured conditioning of an instance; absent groups stay empty.
struct ConditionReport {
  std::optional<double> kappa_f;
  std::optional<double> kappa_W;
  std::optional<double> kappa_A_hat;
  std::optional<double> kappa_AC_tilde;
  std::optional<double> kappa_Ct_hat;
  std::optional<double> kappa_B;
};

ConditionReport measure_conditions(const MixedProblemData& data);

struct SolveOutcome {
  SolveReport report;
  AffineProblem problem;
  ConditionReport conditions;
  std::string regime;
  double final_distance = -1.0;  // -1 without a solution hint
  double final_residual = 0.0;
};

struct InstanceBuild {
  MixedProblemData data;
  Regime regime = Regime::mixed;
};

// The decentralized instance named by the config; empty for the nonsmooth generator,
// which builds an AffineProblem directly.
std::optional<InstanceBuild> build_instance(const ExperimentConfig& config, std::optional<double> value);

// Builds the instance named by the config, with the swept parameter (if any) set to value.
AffineProblem build_problem(const ExperimentConfig& config, std::optional<double> value, ConditionReport* conditions,
                            std::string* regime);

SolveOutcome run_solve(const ExperimentConfig& config, std::optional<double> value = std::nullopt);

std::string csv_header(bool timing);
std::string csv_row(const ExperimentConfig& config, const SolveOutcome& out, std::optional<double> value);

long long counter_value(const SolveReport& report, const std::string& name);

struct SweepResult {
  std::vector<SolveOutcome> outcomes;
  std::vector<double> grid;
  std::string csv;
  SlopeFit fit;
};

SweepResult run_sweep(const ExperimentConfig& config);

// Quick invariant suite for the `check` subcommand.
struct CheckResult {
  std::string name;
  bool ok = false;
  std::string detail;
};

std::vector<CheckResult> run_invariant_checks(std::uint64_t seed);

// Spectral summary of an instance for the `spectrum` subcommand.
std::string spectrum_report(const MixedProblemData& data);

}  // namespace mixopt
