#pragma once

#include "lqrl/estimation.hpp"
#include "lqrl/lq_model.hpp"
#include "lqrl/sde_sim.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace lqrl {

enum class NScheduleKind { Fixed, Geometric };

/// Intervention-point schedule of the discrete algorithm:
/// Fixed keeps N0; Geometric uses N_l = ceil(sqrt(2)^l * N0).
struct NSchedule {
  NScheduleKind kind = NScheduleKind::Fixed;
  int N0 = 10;

  /// "fixed:N" or "geo:N". Throws std::invalid_argument.
  static NSchedule parse(const std::string& text);
  std::string label() const;
};

struct ScheduleConfig {
  double C = 10.0;
  double delta = 0.1;
  int phases = 10;
  std::optional<NSchedule> n_schedule;
  int n_floor = 10;
  /// Keep theta_0 for every phase instead of re-estimating (test harness).
  bool freeze_estimate = false;

  /// m_0 = ceil(C ln(1/delta)).
  long long m0() const;
  /// m_l = 2^l m_0.
  long long episodes(int phase) const;
  /// N_l, floored at n_floor. Requires n_schedule.
  int intervals(int phase) const;
  /// Throws std::invalid_argument when an invariant is violated.
  void validate() const;
};

struct PhaseRecord {
  ModelTheta theta;  // estimate entering the phase
  GainPath gain;
  int intervals = 0;          // N_l, 0 for the continuous algorithm
  double h_sim = 0.0;         // fine step actually used
  long long episodes = 0;     // m_l
  double expected_cost = 0.0; // J(U^{psi_l}) from the Lyapunov oracle
  std::vector<double> realized_costs;
  ModelTheta estimate;        // theta_{l+1}
  double gradient_certificate = 0.0;
};

struct RunRecord {
  std::string algorithm;  // "continuous" or "discrete:<schedule>"
  std::uint64_t seed = 0;
  double optimal_cost = 0.0;
  ModelTheta theta0;
  std::vector<PhaseRecord> phases;
  std::vector<std::string> warnings;
  bool failed = false;
  std::string failure;

  long long total_episodes() const;
};

struct RegretPoint {
  long long M = 0;
  double regret = 0.0;
};

enum class RegretMode { Expected, Realized };

/// Grid resolution shared by the Riccati solves and the Lyapunov oracle.
inline constexpr int kDefaultRiccatiSteps = 1000;

/// Continuous-time least-squares algorithm.
RunRecord run_algorithm1(const LqProblem& problem, const ModelTheta& theta0,
                         const ScheduleConfig& sched, const SimConfig& sim,
                         int riccati_steps = kDefaultRiccatiSteps);

/// Discrete-time least-squares algorithm. The fine grid of phase l refines
/// the coarse grid T/N_l into max(50, ceil(tau_l / h_sim)) sub-steps.
RunRecord run_algorithm2(const LqProblem& problem, const ModelTheta& theta0,
                         const ScheduleConfig& sched, const SimConfig& sim,
                         int riccati_steps = kDefaultRiccatiSteps);

/// Fine step used by the discrete algorithm for N coarse intervals.
double discrete_phase_step(double T, int N, double h_sim);

/// theta* with every entry perturbed by an independent uniform(-0.5, 0.5)
/// draw; resampled (up to 10 tries) until B_0 has full column rank.
ModelTheta default_initial_theta(const LqProblem& problem, std::uint64_t seed);

/// Regret at every phase boundary plus the requested extra M values, sorted
/// by M. Throws std::out_of_range for M beyond the recorded episodes.
std::vector<RegretPoint> regret_curve(const RunRecord& record, RegretMode mode,
                                      const std::vector<long long>& extra_M = {});

/// Log-log OLS slope of R(M) over the last `count` phase boundaries.
double late_exponent(const std::vector<RegretPoint>& boundaries, int count = 5);

/// max/min of R(M) / (ln M ln ln M) over the last `count` phase boundaries.
double ratio_spread(const std::vector<RegretPoint>& boundaries, int count = 4);

nlohmann::json to_json(const RunRecord& record);

/// Columns M,R_expected,R_realized at every phase boundary.
void write_regret_csv(std::ostream& out, const RunRecord& record);

}  // namespace lqrl
