#include "lqrl/experiments.hpp"

#include "lqrl/estimation.hpp"
#include "lqrl/fit.hpp"
#include "lqrl/parallel.hpp"
#include "lqrl/problem_io.hpp"
#include "lqrl/riccati.hpp"
#include "lqrl/rng.hpp"
#include "lqrl/sde_sim.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace lqrl {

namespace {

// Episode indices of the auxiliary stream, kept clear of default_initial_theta.
constexpr std::uint32_t kDirectionStream = 0x100;
constexpr std::uint32_t kGammaStream = 0x200;
constexpr std::uint32_t kOracleStream = 0x300;

const std::vector<int> kRiccatiNs{25, 50, 100, 200, 400};
const std::vector<double> kEpsilons{0.0, 0.2, 0.1, 0.05, 0.025};
const std::vector<int> kGapNs{25, 50, 100, 200};
const std::vector<long long> kEstimationMs{250, 1000, 4000};
const std::vector<int> kBiasNs{10, 20, 40, 80};

constexpr double kCertificateTolerance = 1e-8;

double median(std::vector<double> v) {
  if (v.empty()) return std::nan("");
  std::sort(v.begin(), v.end());
  const std::size_t k = v.size() / 2;
  return v.size() % 2 ? v[k] : 0.5 * (v[k - 1] + v[k]);
}

std::string fmt(double x) {
  std::ostringstream os;
  os << std::setprecision(6) << x;
  return os.str();
}

CheckResult check(std::string name, bool pass, std::string detail) {
  return {std::move(name), pass, std::move(detail)};
}

std::ofstream open_csv(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << std::setprecision(17);
  return out;
}

Matrix random_normal(SubstreamRng& rng, int rows, int cols) {
  Matrix m(rows, cols);
  for (int j = 0; j < cols; ++j)
    for (int i = 0; i < rows; ++i) m(i, j) = rng.normal();
  return m;
}

Matrix random_spd(SubstreamRng& rng, int k, double floor) {
  const Matrix G = random_normal(rng, k, k);
  return G * G.transpose() / k + floor * Matrix::Identity(k, k);
}

LqProblem driftless_scalar() {
  LqProblem p = builtin_problem("scalar-canonical");
  p.theta_star.A.setZero();
  return p;
}

double slope_of(const std::vector<GapPoint>& pts) {
  std::vector<double> x, y;
  for (const auto& p : pts) {
    if (p.x > 0.0) {
      x.push_back(p.x);
      y.push_back(p.gap);
    }
  }
  return loglog_slope(x, y);
}

bool in_bracket(double v, double lo, double hi) { return v >= lo && v <= hi; }

std::string variant_label(const std::optional<NSchedule>& s) {
  if (!s) return "continuous";
  return (s->kind == NScheduleKind::Fixed ? "fixed" : "geo") + std::to_string(s->N0);
}

// ---- per-experiment drivers --------------------------------------------

void run_riccati(const ResolvedSpec& rs, ExperimentOutcome& outcome) {
  const auto rows = riccati_convergence_study(rs.problem, kRiccatiNs);
  const auto ratios = error_ratios(rows);
  auto out = open_csv(rs.spec.out / "riccati_convergence.csv");
  out << "N,sup_error_P,sup_error_K,observed_order\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out << rows[i].N << ',' << rows[i].sup_error_P << ',' << rows[i].sup_error_K << ',';
    if (i < ratios.size()) out << std::log2(ratios[i]);
    out << '\n';
  }
  for (std::size_t i = 0; i < ratios.size(); ++i) {
    outcome.checks.push_back(check("ratio e(" + std::to_string(rows[i].N) + ")/e(" +
                                       std::to_string(rows[i + 1].N) + ")",
                                   in_bracket(ratios[i], 1.6, 2.4), fmt(ratios[i])));
  }
}

void run_gap(const ResolvedSpec& rs, ExperimentOutcome& outcome) {
  const ModelTheta dir = random_direction(rs.problem, rs.spec.seed);
  const auto eps = epsilon_gap_sweep(rs.problem, dir, kEpsilons);
  const auto steps = stepsize_gap_sweep(rs.problem, kGapNs);
  const double eps_slope = slope_of(eps);
  const double n_slope = slope_of(steps);

  auto write = [&](const char* name, const std::vector<GapPoint>& pts, double slope) {
    auto out = open_csv(rs.spec.out / name);
    out << "epsilon_or_N,gap,fitted_slope\n";
    for (const auto& p : pts) out << p.x << ',' << p.gap << ',' << slope << '\n';
  };
  write("gap_epsilon.csv", eps, eps_slope);
  write("gap_stepsize.csv", steps, n_slope);

  outcome.checks.push_back(check("gap at eps = 0", std::abs(eps.front().gap) <= 1e-8, fmt(eps.front().gap)));
  outcome.checks.push_back(check("gap slope in eps", in_bracket(eps_slope, 1.7, 2.3), fmt(eps_slope)));
  outcome.checks.push_back(check("gap slope in N", in_bracket(n_slope, -2.3, -1.7), fmt(n_slope)));
}

void run_estimation(const ResolvedSpec& rs, ExperimentOutcome& outcome) {
  const LqProblem& p = rs.problem;
  const ModelTheta dir = random_direction(p, rs.spec.seed);
  ModelTheta theta{p.theta_star.A + 0.1 * dir.A, p.theta_star.B + 0.1 * dir.B};
  const auto sweep = estimation_m_sweep(p, theta, kEstimationMs, rs.spec.seeds.value_or(50),
                                        rs.spec.seed, rs.h_sim);
  std::vector<double> ms, rms;
  for (const auto& r : sweep.rows) {
    ms.push_back(static_cast<double>(r.m));
    rms.push_back(r.rms_error);
  }
  const double m_slope = loglog_slope(ms, rms);
  {
    auto out = open_csv(rs.spec.out / "estimation_m.csv");
    out << "m,rms_error,fitted_slope\n";
    for (const auto& r : sweep.rows) out << r.m << ',' << r.rms_error << ',' << m_slope << '\n';
  }

  const auto bias = discrete_bias_sweep(p, kBiasNs);
  std::vector<double> ns, bs;
  double bias_cert = 0.0;
  for (const auto& b : bias) {
    ns.push_back(b.N);
    bs.push_back(b.bias);
    bias_cert = std::max(bias_cert, b.certificate);
  }
  const double n_slope = loglog_slope(ns, bs);
  {
    auto out = open_csv(rs.spec.out / "estimation_bias.csv");
    out << "N,bias\n";
    for (const auto& b : bias) out << b.N << ',' << b.bias << '\n';
  }

  bool monotone = true;
  for (std::size_t i = 1; i < rms.size(); ++i) monotone = monotone && rms[i] < rms[i - 1];
  outcome.checks.push_back(check("rms slope in m", in_bracket(m_slope, -0.6, -0.4), fmt(m_slope)));
  outcome.checks.push_back(check("rms decreasing in m", monotone, ""));
  outcome.checks.push_back(check("discrete bias slope in N", in_bracket(n_slope, -1.3, -0.7), fmt(n_slope)));
  const double cert = std::max(sweep.worst_certificate, bias_cert);
  outcome.checks.push_back(check("ridge certificate", cert <= kCertificateTolerance, fmt(cert)));
}

void run_identifiability(const ResolvedSpec& rs, ExperimentOutcome& outcome) {
  std::vector<std::pair<std::string, LqProblem>> instances{
      {"scalar-canonical", builtin_problem("scalar-canonical")},
      {"planar", builtin_problem("planar")},
      {"rank-deficient", rank_deficient_problem()},
  };
  if (!is_builtin_problem(rs.spec.problem)) instances.emplace_back(rs.spec.problem, rs.problem);

  auto out = open_csv(rs.spec.out / "identifiability.csv");
  out << "instance,min_eigenvalue_V\n";
  for (const auto& [name, problem] : instances) {
    const double lam = population_min_eigenvalue(problem);
    const bool full = has_full_column_rank(problem.theta_star.B);
    out << name << ',' << lam << '\n';
    outcome.checks.push_back(check(name + (full ? " min eig > 1e-4" : " min eig < 1e-8"),
                                   full ? lam > 1e-4 : lam < 1e-8, fmt(lam)));
  }
}

void run_regret(const ResolvedSpec& rs, ExperimentOutcome& outcome) {
  std::vector<std::optional<NSchedule>> variants;
  if (rs.spec.algorithm != RegretVariant::Discrete) variants.push_back(std::nullopt);
  if (rs.spec.algorithm == RegretVariant::Discrete) variants.push_back(rs.n_schedule);
  if (rs.spec.algorithm == RegretVariant::All) {
    variants.push_back(NSchedule{NScheduleKind::Fixed, rs.n_schedule.N0});
    variants.push_back(NSchedule{NScheduleKind::Geometric, rs.n_schedule.N0});
  }

  for (const auto& v : variants) {
    const RegretStudy study = regret_study(rs.problem, rs.schedule, v, rs.spec.seeds.value_or(20),
                                           rs.spec.seed, rs.h_sim);
    for (std::size_t k = 0; k < study.records.size(); ++k) {
      const auto& rec = study.records[k];
      const std::string stem = "regret_" + study.label + "_seed" + std::to_string(rec.seed);
      {
        std::ofstream js(rs.spec.out / (stem + ".json"));
        js << std::setw(2) << to_json(rec) << '\n';
      }
      {
        auto csv = open_csv(rs.spec.out / (stem + ".csv"));
        write_regret_csv(csv, rec);
      }
      if (rs.spec.export_trajectory && !rec.phases.empty()) {
        const auto& last = rec.phases.back();
        const auto traj = simulate_episode(rs.problem, last.gain, SimConfig{last.h_sim, rec.seed},
                                           static_cast<std::uint32_t>(rec.phases.size() - 1), 0);
        auto csv = open_csv(rs.spec.out / ("trajectory_" + study.label + "_seed" +
                                           std::to_string(rec.seed) + ".csv"));
        write_trajectory_csv(csv, traj);
      }
    }
    {
      auto csv = open_csv(rs.spec.out / ("summary_" + study.label + ".csv"));
      csv << "seed,late_exponent,ratio_spread\n";
      for (const auto& s : study.seeds) {
        csv << s.seed << ',';
        if (s.failed) {
          csv << "failed,failed\n";
        } else {
          csv << s.late_exponent << ',' << s.ratio_spread << '\n';
        }
      }
    }

    const std::string& L = study.label;
    const double failed = study.failed_fraction();
    outcome.checks.push_back(check(L + " failed seeds <= 20%", failed <= 0.2, fmt(failed)));
    const double e = study.median_exponent();
    if (!v) {
      outcome.checks.push_back(check(L + " median late exponent <= 0.35", e <= 0.35, fmt(e)));
      const double spread = study.median_spread();
      outcome.checks.push_back(check(L + " median ratio spread <= 3", spread <= 3.0, fmt(spread)));
    } else if (v->kind == NScheduleKind::Fixed) {
      outcome.checks.push_back(check(L + " median late exponent in [0.8, 1.1]", in_bracket(e, 0.8, 1.1), fmt(e)));
    } else {
      outcome.checks.push_back(check(L + " median late exponent <= 0.45", e <= 0.45, fmt(e)));
    }
    const double growth = study.worst_growth();
    outcome.checks.push_back(check(L + " estimates bounded", growth <= 10.0, fmt(growth)));
    const double cert = study.worst_certificate();
    outcome.checks.push_back(check(L + " ridge certificate", cert <= kCertificateTolerance, fmt(cert)));
  }
}

void run_sanity(const ResolvedSpec& rs, ExperimentOutcome& outcome) {
  outcome.checks = sanity_checks(rs.spec.seed, rs.spec.inject_fault);
  auto out = open_csv(rs.spec.out / "sanity.csv");
  out << "check,result,detail\n";
  for (const auto& c : outcome.checks) {
    out << '"' << c.name << "\"," << (c.pass ? "PASS" : "FAIL") << ",\"" << c.detail << "\"\n";
  }
}

}  // namespace

// ---- spec handling -------------------------------------------------------

Experiment parse_experiment(const std::string& name) {
  if (name == "riccati-convergence") return Experiment::RiccatiConvergence;
  if (name == "gap-scaling") return Experiment::GapScaling;
  if (name == "estimation-scaling") return Experiment::EstimationScaling;
  if (name == "identifiability") return Experiment::Identifiability;
  if (name == "regret") return Experiment::Regret;
  if (name == "sanity") return Experiment::Sanity;
  throw ConfigError("unknown experiment '" + name + "'");
}

std::string experiment_name(Experiment e) {
  switch (e) {
    case Experiment::RiccatiConvergence: return "riccati-convergence";
    case Experiment::GapScaling: return "gap-scaling";
    case Experiment::EstimationScaling: return "estimation-scaling";
    case Experiment::Identifiability: return "identifiability";
    case Experiment::Regret: return "regret";
    case Experiment::Sanity: return "sanity";
  }
  return "?";
}

ResolvedSpec resolve_spec(const ExperimentSpec& spec) {
  ResolvedSpec rs;
  rs.spec = spec;
  rs.problem = resolve_problem(spec.problem);
  if (spec.phases) rs.schedule.phases = *spec.phases;
  if (spec.C) rs.schedule.C = *spec.C;
  if (spec.delta) rs.schedule.delta = *spec.delta;
  try {
    if (spec.n_schedule) rs.n_schedule = NSchedule::parse(*spec.n_schedule);
    rs.schedule.validate();
    if (spec.h_sim) rs.h_sim = *spec.h_sim;
    fine_step_count(SimConfig{rs.h_sim, spec.seed}, rs.problem.T);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (spec.seeds && *spec.seeds < 1) throw ConfigError("--seeds must be >= 1");
  return rs;
}

bool ExperimentOutcome::ok() const {
  return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.pass; });
}

// ---- Riccati convergence -------------------------------------------------

std::vector<RiccatiErrorRow> riccati_convergence_study(const LqProblem& problem,
                                                       const std::vector<int>& Ns,
                                                       int reference_steps) {
  const auto ref = solve_riccati_continuous(problem.theta_star, problem.cost, problem.T, reference_steps);
  const auto ref_gain = gain_from_riccati(problem.theta_star, problem.cost, ref);
  std::vector<RiccatiErrorRow> rows;
  for (int N : Ns) {
    if (N < 1 || reference_steps % N != 0) {
      throw std::invalid_argument("riccati_convergence_study: N must divide the reference grid");
    }
    const auto disc = solve_riccati_discrete(problem.theta_star, problem.cost, problem.T, N);
    const int per = reference_steps / N;
    RiccatiErrorRow row;
    row.N = N;
    for (int k = 0; k < reference_steps; ++k) {
      const int i = k / per;
      row.sup_error_P = std::max(row.sup_error_P,
                                 spectral_norm(ref.values[k] - disc.path.values[i]));
      row.sup_error_K = std::max(row.sup_error_K,
                                 spectral_norm(ref_gain.values()[k] - disc.gain.values()[i]));
    }
    rows.push_back(row);
  }
  return rows;
}

std::vector<double> error_ratios(const std::vector<RiccatiErrorRow>& rows) {
  std::vector<double> r;
  for (std::size_t i = 0; i + 1 < rows.size(); ++i) r.push_back(rows[i].error() / rows[i + 1].error());
  return r;
}

// ---- Performance gap -----------------------------------------------------

ModelTheta random_direction(const LqProblem& problem, std::uint64_t seed) {
  SubstreamRng rng(seed, kAuxiliaryPhase, kDirectionStream);
  ModelTheta dir{random_normal(rng, problem.n, problem.n), random_normal(rng, problem.n, problem.d)};
  const double norm = stack_theta(dir).norm();
  dir.A /= norm;
  dir.B /= norm;
  return dir;
}

std::vector<GapPoint> epsilon_gap_sweep(const LqProblem& problem, const ModelTheta& direction,
                                        const std::vector<double>& epsilons, int steps) {
  const double J = optimal_cost(problem, steps);
  std::vector<GapPoint> pts;
  for (double eps : epsilons) {
    const ModelTheta th{problem.theta_star.A + eps * direction.A,
                        problem.theta_star.B + eps * direction.B};
    const auto K = optimal_gain(th, problem.cost, problem.T, steps);
    pts.push_back({eps, lyapunov_cost(problem.theta_star, problem.cost, K, problem.x0, problem.T, steps) - J});
  }
  return pts;
}

std::vector<GapPoint> stepsize_gap_sweep(const LqProblem& problem, const std::vector<int>& Ns,
                                         int steps) {
  const double J = optimal_cost(problem, steps);
  std::vector<GapPoint> pts;
  for (int N : Ns) {
    const auto K = solve_riccati_discrete(problem.theta_star, problem.cost, problem.T, N).gain;
    pts.push_back({static_cast<double>(N),
                   lyapunov_cost(problem.theta_star, problem.cost, K, problem.x0, problem.T, steps) - J});
  }
  return pts;
}

// ---- Estimation ----------------------------------------------------------

EstimationSweep estimation_m_sweep(const LqProblem& problem, const ModelTheta& theta,
                                   const std::vector<long long>& ms, int seeds,
                                   std::uint64_t base_seed, double h_sim) {
  if (ms.empty() || seeds < 1) throw std::invalid_argument("estimation_m_sweep: empty sweep");
  const long long max_m = *std::max_element(ms.begin(), ms.end());
  const auto K = optimal_gain(theta, problem.cost, problem.T, kDefaultRiccatiSteps);
  std::vector<double> sq(ms.size(), 0.0);
  EstimationSweep sweep;
  for (int k = 0; k < seeds; ++k) {
    const SimConfig cfg{h_sim, base_seed + static_cast<std::uint64_t>(k)};
    const auto trajs = batch_simulate(problem, K, cfg, 0, static_cast<int>(max_m));
    for (std::size_t i = 0; i < ms.size(); ++i) {
      const std::span<const EpisodeTrajectory> prefix(trajs.data(), static_cast<std::size_t>(ms[i]));
      const auto stats = accumulate_stats_continuous(prefix);
      const auto est = ls_estimate(stats);
      const double dist = theta_distance(est, problem.theta_star);
      sq[i] += dist * dist;
      const auto grad = ridge_objective_gradient(est, prefix, Regime::Continuous);
      sweep.worst_certificate = std::max(sweep.worst_certificate, ridge_certificate(grad, stats));
    }
  }
  for (std::size_t i = 0; i < ms.size(); ++i) sweep.rows.push_back({ms[i], std::sqrt(sq[i] / seeds)});
  return sweep;
}

std::vector<BiasRow> discrete_bias_sweep(const LqProblem& problem, const std::vector<int>& Ns,
                                         long long m, int steps) {
  std::vector<BiasRow> rows;
  for (int N : Ns) {
    const auto K = solve_riccati_discrete(problem.theta_star, problem.cost, problem.T, N).gain;
    const auto pop = population_stats(problem, K, Regime::Discrete, N, steps);
    const SufficientStats stats{pop.V, pop.Y, m};
    const auto est = ls_estimate(stats);
    rows.push_back({N, theta_distance(est, problem.theta_star),
                    ridge_certificate(ridge_gradient_from_stats(est, stats), stats)});
  }
  return rows;
}

// ---- Identifiability -----------------------------------------------------

LqProblem rank_deficient_problem() {
  LqProblem p;
  p.n = 1;
  p.d = 2;
  p.T = 1.0;
  p.x0 = Vector::Ones(1);
  p.theta_star.A = Matrix::Zero(1, 1);
  p.theta_star.B = Matrix::Ones(1, 2);
  p.cost.Q = Matrix::Identity(1, 1);
  p.cost.R = Matrix::Identity(2, 2);
  return p;
}

double population_min_eigenvalue(const LqProblem& problem, int steps) {
  const auto K = optimal_gain(problem.theta_star, problem.cost, problem.T, steps);
  return min_eigenvalue(population_stats(problem, K, Regime::Continuous, 0, steps).V);
}

// ---- Regret --------------------------------------------------------------

double RegretStudy::failed_fraction() const {
  if (seeds.empty()) return 0.0;
  const auto failed = std::count_if(seeds.begin(), seeds.end(), [](const SeedRegret& s) { return s.failed; });
  return static_cast<double>(failed) / static_cast<double>(seeds.size());
}

double RegretStudy::median_exponent() const {
  std::vector<double> v;
  for (const auto& s : seeds)
    if (!s.failed) v.push_back(s.late_exponent);
  return median(v);
}

double RegretStudy::median_spread() const {
  std::vector<double> v;
  for (const auto& s : seeds)
    if (!s.failed) v.push_back(s.ratio_spread);
  return median(v);
}

double RegretStudy::worst_certificate() const {
  double w = 0.0;
  for (const auto& s : seeds) w = std::max(w, s.worst_certificate);
  return w;
}

double RegretStudy::worst_growth() const {
  double w = 0.0;
  for (const auto& s : seeds) {
    if (s.theta0_distance > 0.0) w = std::max(w, s.max_distance / s.theta0_distance);
  }
  return w;
}

RegretStudy regret_study(const LqProblem& problem, ScheduleConfig schedule,
                         std::optional<NSchedule> n_schedule, int seeds, std::uint64_t base_seed,
                         double h_sim) {
  schedule.n_schedule = n_schedule;
  RegretStudy study;
  study.label = variant_label(n_schedule);
  for (int k = 0; k < seeds; ++k) {
    const std::uint64_t seed = base_seed + static_cast<std::uint64_t>(k);
    const ModelTheta theta0 = default_initial_theta(problem, seed);
    const SimConfig sim{h_sim, seed};
    RunRecord rec = n_schedule ? run_algorithm2(problem, theta0, schedule, sim)
                               : run_algorithm1(problem, theta0, schedule, sim);
    SeedRegret s;
    s.seed = seed;
    s.failed = rec.failed;
    s.failure = rec.failure;
    s.theta0_distance = theta_distance(theta0, problem.theta_star);
    for (const auto& ph : rec.phases) {
      s.max_distance = std::max({s.max_distance, theta_distance(ph.theta, problem.theta_star),
                                 theta_distance(ph.estimate, problem.theta_star)});
      s.worst_certificate = std::max(s.worst_certificate, ph.gradient_certificate);
    }
    if (!s.failed) {
      const auto curve = regret_curve(rec, RegretMode::Expected);
      try {
        s.late_exponent = late_exponent(curve);
        s.ratio_spread = ratio_spread(curve);
      } catch (const std::invalid_argument& e) {
        s.failed = true;
        s.failure = e.what();
      }
    }
    study.seeds.push_back(s);
    study.records.push_back(std::move(rec));
  }
  return study;
}

// ---- Sanity --------------------------------------------------------------

CheckResult gamma_bound_check(std::uint64_t seed, int draws, bool inject_fault) {
  const double sign = inject_fault ? -1.0 : 1.0;
  // Floating-point slack on an inequality whose sides are both O(1).
  constexpr double kSlack = 1e-12;
  int bad_norm = 0;
  int bad_lipschitz = 0;
  double worst = 0.0;
  for (int k = 0; k < draws; ++k) {
    SubstreamRng rng(seed, kAuxiliaryPhase, kGammaStream + static_cast<std::uint32_t>(k));
    const int n = 1 + static_cast<int>(rng.uniform() * 3);
    const int d = 1 + static_cast<int>(rng.uniform() * 3);
    const bool flat = k % 4 == 0;  // A = 0 and Q small: the norm bound is tight
    ModelTheta th{flat ? Matrix::Zero(n, n) : random_normal(rng, n, n), random_normal(rng, n, d)};
    CostSpec cost{flat ? 1e-2 * Matrix::Identity(n, n) : random_spd(rng, n, 0.1), random_spd(rng, d, 0.1)};
    const double tau = 0.5 * rng.uniform();
    const Matrix Gp = random_normal(rng, n, n);
    const Matrix Gq = random_normal(rng, n, n);
    const Matrix P = Gp * Gp.transpose();
    const Matrix P2 = Gq * Gq.transpose();

    const Matrix gP = detail::riccati_step_gamma_signed(P, th, cost, tau, sign);
    const Matrix gP2 = detail::riccati_step_gamma_signed(P2, th, cost, tau, sign);
    const double a = spectral_norm(th.A);
    const double growth = (1.0 + tau * a) * (1.0 + tau * a);

    const double lhs1 = spectral_norm(gP);
    const double rhs1 = tau * spectral_norm(cost.Q) + growth * spectral_norm(P);
    if (lhs1 > rhs1 * (1.0 + kSlack)) ++bad_norm;
    worst = std::max(worst, lhs1 / rhs1);

    const double rinv = 1.0 / min_eigenvalue(cost.R);
    const double b = spectral_norm(th.B);
    const double inner = 1.0 + tau * rinv * b * b * std::max(spectral_norm(P), spectral_norm(P2));
    const double lhs2 = spectral_norm(gP - gP2);
    const double rhs2 = inner * inner * growth * spectral_norm(P - P2);
    if (lhs2 > rhs2 * (1.0 + kSlack)) ++bad_lipschitz;
  }
  return check("Gamma bounds on " + std::to_string(draws) + " draws", bad_norm == 0 && bad_lipschitz == 0,
               "norm violations " + std::to_string(bad_norm) + ", Lipschitz violations " +
                   std::to_string(bad_lipschitz) + ", worst norm ratio " + fmt(worst));
}

std::vector<CheckResult> driftless_checks(std::uint64_t seed, int m) {
  const LqProblem p = driftless_scalar();
  const GainPath K = GainPath::zero(1, 1, p.T);
  const SimConfig cfg{1e-3, seed};
  const EpisodeSimulator sim(p, K, cfg);
  std::vector<double> xT(m), cost(m), ito(m);
  parallel_for(static_cast<std::size_t>(m), [&](std::size_t j) {
    const auto traj = sim.trajectory(0, static_cast<std::uint32_t>(j));
    xT[j] = traj.states(0, traj.states.cols() - 1);
    cost[j] = realized_cost(traj, p.cost);
    double w = 0.0, s = 0.0;
    for (Eigen::Index k = 0; k < traj.increments.cols(); ++k) {
      s += w * traj.increments(0, k);
      w += traj.increments(0, k);
    }
    ito[j] = s;
  });

  auto mean = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
  };
  auto var = [&](const std::vector<double>& v) {
    const double mu = mean(v);
    double s = 0.0;
    for (double x : v) s += (x - mu) * (x - mu);
    return s / static_cast<double>(v.size() - 1);
  };
  const double md = static_cast<double>(m);
  const double T = p.T;
  const double x0 = p.x0(0);

  std::vector<CheckResult> out;
  const double mx = mean(xT);
  out.push_back(check("driftless mean X_T", std::abs(mx - x0) <= 3.0 * std::sqrt(T / md), fmt(mx)));
  const double vx = var(xT);
  out.push_back(check("driftless var X_T", std::abs(vx - T) <= 0.1 * T, fmt(vx)));
  const double mc = mean(cost);
  const double exact_cost = x0 * x0 * T + T * T / 2.0;
  out.push_back(check("driftless realized cost", std::abs(mc - exact_cost) <= 0.02 * exact_cost, fmt(mc)));
  const double mi = mean(ito);
  const double vi = var(ito);
  out.push_back(check("Ito statistic mean", std::abs(mi) <= 3.0 * std::sqrt(vi / md), fmt(mi)));
  out.push_back(check("Ito statistic variance", std::abs(vi - T * T / 2.0) <= 0.1 * T * T / 2.0, fmt(vi)));

  double sxy = 0.0;
  for (int j = 0; j + 1 < m; ++j) sxy += (xT[j] - mx) * (xT[j + 1] - mx);
  const double rho = sxy / (static_cast<double>(m - 1) * vx);
  out.push_back(check("episode independence", std::abs(rho) < 0.05, fmt(rho)));
  return out;
}

CheckResult oracle_agreement_check(std::uint64_t seed, int count) {
  int bad = 0;
  double worst = 0.0;
  for (int k = 0; k < count; ++k) {
    SubstreamRng rng(seed, kAuxiliaryPhase, kOracleStream + static_cast<std::uint32_t>(k));
    LqProblem p;
    p.n = 1 + static_cast<int>(rng.uniform() * 3);
    p.d = 1 + static_cast<int>(rng.uniform() * 3);
    p.T = 0.5 + 1.5 * rng.uniform();
    p.x0 = random_normal(rng, p.n, 1);
    p.theta_star.A = 0.5 * random_normal(rng, p.n, p.n);
    p.theta_star.B = random_normal(rng, p.n, p.d);
    p.cost.Q = random_spd(rng, p.n, 0.5);
    p.cost.R = random_spd(rng, p.d, 0.5);
    const double J = optimal_cost(p, 1000);
    const auto K = optimal_gain(p.theta_star, p.cost, p.T, 1000);
    const double L = lyapunov_cost(p.theta_star, p.cost, K, p.x0, p.T, 1000);
    const double rel = std::abs(J - L) / (1.0 + J);
    worst = std::max(worst, rel);
    if (!(rel <= 1e-8)) ++bad;
  }
  return check("optimal cost vs Lyapunov oracle on " + std::to_string(count) + " instances", bad == 0,
               "worst relative gap " + fmt(worst));
}

std::vector<CheckResult> sanity_checks(std::uint64_t seed, bool inject_fault) {
  std::vector<CheckResult> out;
  out.push_back(gamma_bound_check(seed, 200, inject_fault));

  const LqProblem scalar = builtin_problem("scalar-canonical");
  const auto path = solve_riccati_continuous(scalar.theta_star, scalar.cost, scalar.T, 1000);
  const double p0 = path.values.front()(0, 0);
  out.push_back(check("scalar P(0) = tanh(1)", std::abs(p0 - std::tanh(1.0)) <= 1e-6, fmt(p0)));
  const double J = optimal_cost(scalar, 1000);
  const double J_exact = std::tanh(1.0) + std::log(std::cosh(1.0));
  out.push_back(check("scalar optimal cost", std::abs(J - J_exact) <= 1e-5, fmt(J)));

  out.push_back(oracle_agreement_check(seed, 50));

  const LqProblem flat = driftless_scalar();
  const double c0 = lyapunov_cost(flat.theta_star, flat.cost, GainPath::zero(1, 1, 1.0), flat.x0, 1.0, 1000);
  out.push_back(check("Lyapunov cost, zero gain", std::abs(c0 - 1.5) <= 1e-10, fmt(c0)));
  const double k = 2.0;
  const Matrix Kc = Matrix::Constant(1, 1, -k);
  const GainPath constant(GainKind::ContinuousGrid, {0.0, 1.0}, {Kc, Kc});
  const double ck = lyapunov_cost(flat.theta_star, flat.cost, constant, flat.x0, 1.0, 1000);
  const double e = std::exp(-2.0 * k);
  const double ck_exact = (1.0 + k * k) * ((1.0 - e) / (2.0 * k) + 1.0 / (2.0 * k) - (1.0 - e) / (4.0 * k * k));
  // The time integral is a trapezoid sum, second order in the step.
  out.push_back(check("Lyapunov cost, constant gain", std::abs(ck - ck_exact) <= 1e-6,
                      "error " + fmt(ck - ck_exact)));

  // Y - V theta* has mean zero under any fixed feedback.
  {
    const int m = 10000;
    const auto K = optimal_gain(scalar.theta_star, scalar.cost, scalar.T, 1000);
    const auto sums = batch_summarize(scalar, K, SimConfig{1e-3, seed}, 0, m, 0);
    const Matrix th = stack_theta(scalar.theta_star);
    Matrix s1 = Matrix::Zero(th.rows(), th.cols());
    Matrix s2 = s1;
    for (const auto& s : sums) {
      const Matrix D = s.Y_continuous - s.V_continuous * th;
      s1 += D;
      s2 += D.cwiseProduct(D);
    }
    bool pass = true;
    double worst = 0.0;
    for (Eigen::Index i = 0; i < s1.size(); ++i) {
      const double mu = s1(i) / m;
      const double sd = std::sqrt(std::max(0.0, (s2(i) - m * mu * mu) / (m - 1)));
      pass = pass && std::abs(mu) <= 4.0 * sd / std::sqrt(static_cast<double>(m));
      worst = std::max(worst, std::abs(mu) / (sd / std::sqrt(static_cast<double>(m))));
    }
    out.push_back(check("martingale Y - V theta*", pass, "worst |mean|/se " + fmt(worst)));
  }

  for (auto& c : driftless_checks(seed, 10000)) out.push_back(std::move(c));
  return out;
}

// ---- Driver --------------------------------------------------------------

ExperimentOutcome run_experiment(const ResolvedSpec& rs, std::ostream& log) {
  std::filesystem::create_directories(rs.spec.out);
  ExperimentOutcome outcome;
  switch (rs.spec.experiment) {
    case Experiment::RiccatiConvergence: run_riccati(rs, outcome); break;
    case Experiment::GapScaling: run_gap(rs, outcome); break;
    case Experiment::EstimationScaling: run_estimation(rs, outcome); break;
    case Experiment::Identifiability: run_identifiability(rs, outcome); break;
    case Experiment::Regret: run_regret(rs, outcome); break;
    case Experiment::Sanity: run_sanity(rs, outcome); break;
  }
  for (const auto& c : outcome.checks) {
    log << (c.pass ? "PASS " : "FAIL ") << c.name;
    if (!c.detail.empty()) log << ": " << c.detail;
    log << '\n';
  }
  return outcome;
}

}  // namespace lqrl
