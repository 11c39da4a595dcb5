#pragma once

#include "lqrl/algorithms.hpp"
#include "lqrl/lq_model.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace lqrl {

enum class Experiment {
  RiccatiConvergence,
  GapScaling,
  EstimationScaling,
  Identifiability,
  Regret,
  Sanity,
};

/// "riccati-convergence", "gap-scaling", ... Throws ConfigError.
Experiment parse_experiment(const std::string& name);
std::string experiment_name(Experiment e);

enum class RegretVariant { Continuous, Discrete, All };

struct ExperimentSpec {
  Experiment experiment = Experiment::Sanity;
  std::string problem = "planar";  // built-in name or config path
  std::uint64_t seed = 0;
  std::filesystem::path out = ".";
  std::optional<int> phases;
  std::optional<double> C;
  std::optional<double> delta;
  std::optional<std::string> n_schedule;  // "fixed:N" / "geo:N"
  std::optional<double> h_sim;
  std::optional<int> seeds;
  RegretVariant algorithm = RegretVariant::All;
  bool inject_fault = false;
  bool export_trajectory = false;
};

/// Everything an experiment needs after the spec has been checked.
struct ResolvedSpec {
  ExperimentSpec spec;
  LqProblem problem;
  ScheduleConfig schedule;
  NSchedule n_schedule;
  double h_sim = 1e-3;
};

/// Resolves the problem and type-checks every override without computing
/// anything. Throws ConfigError.
ResolvedSpec resolve_spec(const ExperimentSpec& spec);

struct CheckResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

struct ExperimentOutcome {
  std::vector<CheckResult> checks;
  bool ok() const;
};

// ---- Riccati convergence -------------------------------------------------

struct RiccatiErrorRow {
  int N = 0;
  double sup_error_P = 0.0;
  double sup_error_K = 0.0;
  double error() const { return sup_error_P + sup_error_K; }
};

/// Sup over reference nodes t in [t_i, t_{i+1}) of |P_t - P_i|_2 and
/// |K_t - K_i|_2, against a continuous solve with `reference_steps` steps.
/// Each N must divide reference_steps.
std::vector<RiccatiErrorRow> riccati_convergence_study(const LqProblem& problem,
                                                       const std::vector<int>& Ns,
                                                       int reference_steps = 10000);

/// e(N)/e(2N) for consecutive rows.
std::vector<double> error_ratios(const std::vector<RiccatiErrorRow>& rows);

// ---- Performance gap -----------------------------------------------------

struct GapPoint {
  double x = 0.0;  // epsilon or N
  double gap = 0.0;
};

/// Random direction with unit Frobenius norm drawn from the auxiliary stream.
ModelTheta random_direction(const LqProblem& problem, std::uint64_t seed);

/// g(eps) = J(K^{theta* + eps Delta}) - J* for each eps.
std::vector<GapPoint> epsilon_gap_sweep(const LqProblem& problem, const ModelTheta& direction,
                                        const std::vector<double>& epsilons, int steps = 2000);

/// h(N) = J(K^{theta*, T/N}) - J*.
std::vector<GapPoint> stepsize_gap_sweep(const LqProblem& problem, const std::vector<int>& Ns,
                                         int steps = 10000);

// ---- Estimation ----------------------------------------------------------

struct EstimationRow {
  long long m = 0;
  double rms_error = 0.0;
};

struct EstimationSweep {
  std::vector<EstimationRow> rows;
  double worst_certificate = 0.0;
};

/// RMS over `seeds` master seeds of |ls_estimate - theta*| with the optimal
/// continuous feedback of `theta`. Seed k simulates max(ms) episodes once
/// (phase 0, master seed base_seed + k) and uses prefixes for smaller m.
EstimationSweep estimation_m_sweep(const LqProblem& problem, const ModelTheta& theta,
                                   const std::vector<long long>& ms, int seeds,
                                   std::uint64_t base_seed, double h_sim);

struct BiasRow {
  int N = 0;
  double bias = 0.0;
  double certificate = 0.0;
};

/// |ls_estimate - theta*| on population discrete statistics with m episodes
/// under the discrete optimal gain of theta*.
std::vector<BiasRow> discrete_bias_sweep(const LqProblem& problem, const std::vector<int>& Ns,
                                         long long m = 100000, int steps = 10000);

// ---- Identifiability -----------------------------------------------------

struct IdentifiabilityRow {
  std::string instance;
  bool full_rank = false;
  double min_eigenvalue = 0.0;
};

/// n = 1, d = 2, B* = [1, 1]: control columns are linearly dependent.
LqProblem rank_deficient_problem();

/// Smallest eigenvalue of the continuous population V under K^{theta*}.
double population_min_eigenvalue(const LqProblem& problem, int steps = 1000);

// ---- Regret --------------------------------------------------------------

struct SeedRegret {
  std::uint64_t seed = 0;
  bool failed = false;
  std::string failure;
  double late_exponent = 0.0;
  double ratio_spread = 0.0;
  double theta0_distance = 0.0;
  double max_distance = 0.0;
  double worst_certificate = 0.0;
};

struct RegretStudy {
  std::string label;  // "continuous", "fixed10", "geo10"
  std::vector<SeedRegret> seeds;
  std::vector<RunRecord> records;

  double failed_fraction() const;
  double median_exponent() const;
  double median_spread() const;
  double worst_certificate() const;
  /// max over seeds of max_l dist(theta_l, theta*) / dist(theta_0, theta*).
  double worst_growth() const;
};

/// Runs one algorithm variant (`n_schedule` empty = Algorithm 1) over master
/// seeds base_seed .. base_seed + seeds - 1 from default_initial_theta.
RegretStudy regret_study(const LqProblem& problem, ScheduleConfig schedule,
                         std::optional<NSchedule> n_schedule, int seeds, std::uint64_t base_seed,
                         double h_sim);

// ---- Sanity --------------------------------------------------------------

/// |Gamma(P)| and Lipschitz bounds on `draws` random (P, theta, tau) draws.
/// With `inject_fault` the correction term of Gamma changes sign.
CheckResult gamma_bound_check(std::uint64_t seed, int draws = 200, bool inject_fault = false);

/// Driftless scalar episodes (A* = 0, K = 0): X_T moments, realized cost and
/// the Ito statistic sum W_k dW_k.
std::vector<CheckResult> driftless_checks(std::uint64_t seed, int m = 10000);

/// Optimal cost against the Lyapunov cost of K^{theta*} on `count` random
/// instances with n, d <= 3.
CheckResult oracle_agreement_check(std::uint64_t seed, int count = 50);

std::vector<CheckResult> sanity_checks(std::uint64_t seed, bool inject_fault);

// ---- Driver --------------------------------------------------------------

/// Runs the experiment, writes its files under spec.out and a pass/fail table
/// to `log`.
ExperimentOutcome run_experiment(const ResolvedSpec& spec, std::ostream& log);

}  // namespace lqrl
