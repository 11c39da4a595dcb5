#include "lqrl/algorithms.hpp"

#include "lqrl/fit.hpp"
#include "lqrl/riccati.hpp"
#include "lqrl/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>
#include <stdexcept>

namespace lqrl {

namespace {

constexpr int kMinSubsteps = 50;
constexpr int kInitialThetaAttempts = 10;

nlohmann::json matrix_json(const Matrix& m) {
  auto rows = nlohmann::json::array();
  for (int i = 0; i < m.rows(); ++i) {
    auto row = nlohmann::json::array();
    for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

nlohmann::json theta_json(const ModelTheta& th) {
  return {{"A", matrix_json(th.A)}, {"B", matrix_json(th.B)}};
}

RunRecord run_impl(const LqProblem& problem, const ModelTheta& theta0, const ScheduleConfig& sched,
                   const SimConfig& sim, int riccati_steps, bool discrete) {
  require_valid(problem);
  sched.validate();
  fine_step_count(sim, problem.T);
  if (discrete && !sched.n_schedule) {
    throw std::invalid_argument("run_algorithm2: schedule has no N schedule");
  }
  if (theta0.A.rows() != problem.n || theta0.A.cols() != problem.n ||
      theta0.B.rows() != problem.n || theta0.B.cols() != problem.d) {
    throw std::invalid_argument("run_algorithm: theta0 has wrong shape");
  }

  RunRecord record;
  record.algorithm = discrete ? "discrete:" + sched.n_schedule->label() : "continuous";
  record.seed = sim.master_seed;
  record.theta0 = theta0;
  if (!has_full_column_rank(theta0.B)) {
    record.warnings.push_back("B block of theta0 is not full column rank");
  }
  record.optimal_cost = optimal_cost(problem, riccati_steps);

  const Regime regime = discrete ? Regime::Discrete : Regime::Continuous;
  ModelTheta theta = theta0;
  for (int l = 0; l < sched.phases; ++l) {
    try {
      const long long m = sched.episodes(l);
      const int N = discrete ? sched.intervals(l) : 0;
      GainPath gain = discrete
                          ? solve_riccati_discrete(theta, problem.cost, problem.T, N).gain
                          : optimal_gain(theta, problem.cost, problem.T, riccati_steps);
      const SimConfig phase_sim{discrete ? discrete_phase_step(problem.T, N, sim.h_sim) : sim.h_sim,
                                sim.master_seed};
      const double expected = lyapunov_cost(problem.theta_star, problem.cost, gain, problem.x0,
                                            problem.T, riccati_steps);
      const auto summaries = batch_summarize(problem, gain, phase_sim, static_cast<std::uint32_t>(l),
                                             static_cast<int>(m), N);
      const SufficientStats stats = stats_from_summaries(summaries, regime);
      ModelTheta estimate = ls_estimate(stats);

      PhaseRecord ph{theta, std::move(gain), 0, 0.0, 0, 0.0, {}, {}, 0.0};
      ph.intervals = N;
      ph.h_sim = phase_sim.h_sim;
      ph.episodes = m;
      ph.expected_cost = expected;
      ph.realized_costs.reserve(summaries.size());
      for (const auto& s : summaries) ph.realized_costs.push_back(s.realized_cost);
      ph.gradient_certificate =
          ridge_certificate(ridge_gradient_from_stats(estimate, stats), stats);
      ph.estimate = estimate;
      record.phases.push_back(std::move(ph));
      if (!sched.freeze_estimate) theta = std::move(estimate);
    } catch (const NumericalBlowup& e) {
      record.failed = true;
      record.failure = "phase " + std::to_string(l) + ": " + e.what();
      break;
    }
  }
  return record;
}

}  // namespace

NSchedule NSchedule::parse(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) {
    throw std::invalid_argument("N schedule must look like fixed:N or geo:N");
  }
  const std::string kind = text.substr(0, colon);
  NSchedule s;
  if (kind == "fixed") {
    s.kind = NScheduleKind::Fixed;
  } else if (kind == "geo") {
    s.kind = NScheduleKind::Geometric;
  } else {
    throw std::invalid_argument("unknown N schedule kind '" + kind + "'");
  }
  std::size_t used = 0;
  try {
    s.N0 = std::stoi(text.substr(colon + 1), &used);
  } catch (const std::exception&) {
    throw std::invalid_argument("N schedule: cannot parse N0 in '" + text + "'");
  }
  if (used != text.size() - colon - 1 || s.N0 < 2) {
    throw std::invalid_argument("N schedule: N0 must be an integer >= 2");
  }
  return s;
}

std::string NSchedule::label() const {
  return (kind == NScheduleKind::Fixed ? "fixed:" : "geo:") + std::to_string(N0);
}

long long ScheduleConfig::m0() const {
  return static_cast<long long>(std::ceil(C * std::log(1.0 / delta) - 1e-9));
}

long long ScheduleConfig::episodes(int phase) const { return (1LL << phase) * m0(); }

int ScheduleConfig::intervals(int phase) const {
  if (!n_schedule) throw std::invalid_argument("ScheduleConfig: no N schedule");
  int N = n_schedule->N0;
  if (n_schedule->kind == NScheduleKind::Geometric) {
    // sqrt(2)^l N0, with the rounding slack keeping sqrt(2)^2 * 10 at 20.
    N = static_cast<int>(std::ceil(std::pow(std::sqrt(2.0), phase) * n_schedule->N0 - 1e-9));
  }
  return std::max(N, n_floor);
}

void ScheduleConfig::validate() const {
  if (!(C > 0.0)) throw std::invalid_argument("schedule: C must be positive");
  if (!(delta > 0.0) || delta >= 3.0 / (std::numbers::pi * std::numbers::pi)) {
    throw std::invalid_argument("schedule: delta must lie in (0, 3/pi^2)");
  }
  if (phases < 1 || phases > 30) throw std::invalid_argument("schedule: phases must be in [1, 30]");
  if (m0() < 1) throw std::invalid_argument("schedule: m0 must be >= 1");
  if (n_schedule && n_schedule->N0 < 2) throw std::invalid_argument("schedule: N0 must be >= 2");
  if (episodes(phases - 1) > 0xFFFFFFFFLL) throw std::invalid_argument("schedule: too many episodes");
}

long long RunRecord::total_episodes() const {
  long long total = 0;
  for (const auto& p : phases) total += p.episodes;
  return total;
}

double discrete_phase_step(double T, int N, double h_sim) {
  const double tau = T / N;
  const int sub = std::max(kMinSubsteps, static_cast<int>(std::ceil(tau / h_sim - 1e-9)));
  return tau / sub;
}

RunRecord run_algorithm1(const LqProblem& problem, const ModelTheta& theta0,
                         const ScheduleConfig& sched, const SimConfig& sim, int riccati_steps) {
  return run_impl(problem, theta0, sched, sim, riccati_steps, false);
}

RunRecord run_algorithm2(const LqProblem& problem, const ModelTheta& theta0,
                         const ScheduleConfig& sched, const SimConfig& sim, int riccati_steps) {
  return run_impl(problem, theta0, sched, sim, riccati_steps, true);
}

ModelTheta default_initial_theta(const LqProblem& problem, std::uint64_t seed) {
  for (int attempt = 0; attempt < kInitialThetaAttempts; ++attempt) {
    SubstreamRng rng(seed, kAuxiliaryPhase, static_cast<std::uint32_t>(attempt));
    ModelTheta th = problem.theta_star;
    for (Eigen::Index j = 0; j < th.A.cols(); ++j)
      for (Eigen::Index i = 0; i < th.A.rows(); ++i) th.A(i, j) += rng.uniform() - 0.5;
    for (Eigen::Index j = 0; j < th.B.cols(); ++j)
      for (Eigen::Index i = 0; i < th.B.rows(); ++i) th.B(i, j) += rng.uniform() - 0.5;
    if (has_full_column_rank(th.B)) return th;
  }
  throw std::runtime_error("default_initial_theta: no full-column-rank B_0 after 10 draws");
}

std::vector<RegretPoint> regret_curve(const RunRecord& record, RegretMode mode,
                                      const std::vector<long long>& extra_M) {
  const long long total = record.total_episodes();
  std::vector<long long> Ms;
  long long boundary = 0;
  for (const auto& p : record.phases) {
    boundary += p.episodes;
    Ms.push_back(boundary);
  }
  for (long long M : extra_M) {
    if (M < 0 || M > total) {
      throw std::out_of_range("regret_curve: M = " + std::to_string(M) + " exceeds " +
                              std::to_string(total) + " recorded episodes");
    }
    Ms.push_back(M);
  }
  std::sort(Ms.begin(), Ms.end());
  Ms.erase(std::unique(Ms.begin(), Ms.end()), Ms.end());

  std::vector<RegretPoint> curve;
  curve.reserve(Ms.size());
  double regret = 0.0;
  long long done = 0;  // episodes already summed into `regret`
  std::size_t phase = 0;
  long long phase_start = 0;
  for (long long M : Ms) {
    while (done < M) {
      while (done >= phase_start + record.phases[phase].episodes) {
        phase_start += record.phases[phase].episodes;
        ++phase;
      }
      const auto& p = record.phases[phase];
      const long long upto = std::min(M, phase_start + p.episodes);
      if (mode == RegretMode::Expected) {
        regret += static_cast<double>(upto - done) * (p.expected_cost - record.optimal_cost);
      } else {
        for (long long i = done; i < upto; ++i) {
          regret += p.realized_costs[static_cast<std::size_t>(i - phase_start)] - record.optimal_cost;
        }
      }
      done = upto;
    }
    curve.push_back({M, regret});
  }
  return curve;
}

double late_exponent(const std::vector<RegretPoint>& boundaries, int count) {
  const std::size_t k = std::min<std::size_t>(boundaries.size(), static_cast<std::size_t>(count));
  if (k < 2) throw std::invalid_argument("late_exponent: need two or more boundaries");
  std::vector<double> x, y;
  for (std::size_t i = boundaries.size() - k; i < boundaries.size(); ++i) {
    x.push_back(static_cast<double>(boundaries[i].M));
    y.push_back(boundaries[i].regret);
  }
  return loglog_slope(x, y);
}

double ratio_spread(const std::vector<RegretPoint>& boundaries, int count) {
  const std::size_t k = std::min<std::size_t>(boundaries.size(), static_cast<std::size_t>(count));
  if (k < 1) throw std::invalid_argument("ratio_spread: no boundaries");
  double lo = INFINITY, hi = -INFINITY;
  for (std::size_t i = boundaries.size() - k; i < boundaries.size(); ++i) {
    const double M = static_cast<double>(boundaries[i].M);
    if (M <= std::exp(1.0)) throw std::invalid_argument("ratio_spread: M must exceed e");
    const double r = boundaries[i].regret / (std::log(M) * std::log(std::log(M)));
    lo = std::min(lo, r);
    hi = std::max(hi, r);
  }
  if (!(lo > 0.0)) throw std::invalid_argument("ratio_spread: regret must be positive");
  return hi / lo;
}

nlohmann::json to_json(const RunRecord& record) {
  const auto expected = regret_curve(record, RegretMode::Expected);
  const auto realized = regret_curve(record, RegretMode::Realized);
  nlohmann::json phases = nlohmann::json::array();
  for (std::size_t l = 0; l < record.phases.size(); ++l) {
    const auto& p = record.phases[l];
    double mean = 0.0;
    for (double c : p.realized_costs) mean += c;
    mean /= static_cast<double>(std::max<std::size_t>(1, p.realized_costs.size()));
    phases.push_back({{"phase", l},
                      {"theta", theta_json(p.theta)},
                      {"episodes", p.episodes},
                      {"intervals", p.intervals},
                      {"h_sim", p.h_sim},
                      {"expected_cost", p.expected_cost},
                      {"expected_gap", p.expected_cost - record.optimal_cost},
                      {"realized_cost_mean", mean},
                      {"estimate", theta_json(p.estimate)},
                      {"gradient_certificate", p.gradient_certificate},
                      {"M", expected[l].M},
                      {"regret_expected", expected[l].regret},
                      {"regret_realized", realized[l].regret}});
  }
  return {{"algorithm", record.algorithm},
          {"seed", record.seed},
          {"optimal_cost", record.optimal_cost},
          {"theta0", theta_json(record.theta0)},
          {"failed", record.failed},
          {"failure", record.failure},
          {"warnings", record.warnings},
          {"phases", std::move(phases)}};
}

void write_regret_csv(std::ostream& out, const RunRecord& record) {
  const auto expected = regret_curve(record, RegretMode::Expected);
  const auto realized = regret_curve(record, RegretMode::Realized);
  const auto old_precision = out.precision(17);
  out << "M,R_expected,R_realized\n";
  for (std::size_t i = 0; i < expected.size(); ++i) {
    out << expected[i].M << ',' << expected[i].regret << ',' << realized[i].regret << '\n';
  }
  out.precision(old_precision);
}

}  // namespace lqrl
