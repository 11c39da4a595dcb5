// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.
#include "lqrl/experiments.hpp"
#include "lqrl/fit.hpp"
#include "lqrl/problem_io.hpp"
#include "lqrl/riccati.hpp"

#include <chrono>
#include <cmath>
#include <functional>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

using namespace lqrl;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void criterion(int id, const std::string& title, double budget_s, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (secs > budget_s) {
    o.pass = false;
    o.detail += "; over time budget";
  }
  if (!o.pass) ++failures;
  std::cout << (o.pass ? "PASS" : "FAIL") << " [" << id << "] " << title << " (" << std::fixed
            << std::setprecision(1) << secs << " s of " << budget_s << " s): " << o.detail << std::endl;
  std::cout.unsetf(std::ios::fixed);
}

std::string num(double x) {
  std::ostringstream os;
  os << std::setprecision(6) << x;
  return os.str();
}

double slope(const std::vector<GapPoint>& pts) {
  std::vector<double> x, y;
  for (const auto& p : pts)
    if (p.x > 0) {
      x.push_back(p.x);
      y.push_back(p.gap);
    }
  return loglog_slope(x, y);
}

}  // namespace

int main() {
  const LqProblem scalar = builtin_problem("scalar-canonical");
  const LqProblem planar = builtin_problem("planar");
  double worst_certificate = 0.0;
  bool certificates_seen = false;

  criterion(1, "Riccati closed form", 1.0, [&] {
    const auto path = solve_riccati_continuous(scalar.theta_star, scalar.cost, scalar.T, 1000);
    const double err = std::abs(path.values.front()(0, 0) - std::tanh(1.0));
    return Outcome{err <= 1e-6, "|P(0) - tanh 1| = " + num(err)};
  });

  criterion(2, "Riccati first-order convergence", 10.0, [&] {
    bool ok = true;
    std::string d;
    for (const auto* p : {&scalar, &planar}) {
      const auto ratios = error_ratios(riccati_convergence_study(*p, {25, 50, 100, 200, 400}));
      d += p == &scalar ? "scalar" : " planar";
      for (double r : ratios) {
        ok = ok && r >= 1.6 && r <= 2.4;
        d += " " + num(r);
      }
    }
    return Outcome{ok, "e(N)/e(2N): " + d};
  });

  criterion(3, "Gamma operator bounds", 1.0, [&] {
    const auto c = gamma_bound_check(0, 200, false);
    return Outcome{c.pass, c.detail};
  });

  criterion(4, "Cost-oracle cross-check", 10.0, [&] {
    const auto c = oracle_agreement_check(0, 50);
    const double J = optimal_cost(scalar, 1000);
    const bool closed = std::abs(J - 1.195379) <= 1e-5;
    return Outcome{c.pass && closed, c.detail + "; scalar J* = " + num(J)};
  });

  criterion(5, "Quadratic performance gap", 5.0, [&] {
    const auto pts = epsilon_gap_sweep(planar, random_direction(planar, 0), {0.0, 0.2, 0.1, 0.05, 0.025});
    const double s = slope(pts);
    const bool ok = s >= 1.7 && s <= 2.3 && std::abs(pts.front().gap) <= 1e-8;
    return Outcome{ok, "slope " + num(s) + ", g(0) = " + num(pts.front().gap)};
  });

  criterion(6, "Discrete gap O(N^-2)", 5.0, [&] {
    const double s = slope(stepsize_gap_sweep(planar, {25, 50, 100, 200}));
    return Outcome{s >= -2.3 && s <= -1.7, "slope " + num(s)};
  });

  criterion(7, "Monte Carlo sanity (driftless scalar, m = 10^4)", 30.0, [&] {
    bool ok = true;
    std::string d;
    for (const auto& c : driftless_checks(0, 10000)) {
      if (c.name == "episode independence") continue;
      ok = ok && c.pass;
      d += (d.empty() ? "" : ", ") + c.name + " " + c.detail;
    }
    return Outcome{ok, d};
  });

  criterion(8, "Estimation-error scaling", 300.0, [&] {
    const ModelTheta dir = random_direction(planar, 0);
    const ModelTheta th{planar.theta_star.A + 0.1 * dir.A, planar.theta_star.B + 0.1 * dir.B};
    const auto sweep = estimation_m_sweep(planar, th, {250, 1000, 4000}, 50, 0, 1e-3);
    std::vector<double> m, r;
    for (const auto& row : sweep.rows) {
      m.push_back(static_cast<double>(row.m));
      r.push_back(row.rms_error);
    }
    const double ms = loglog_slope(m, r);
    const auto bias = discrete_bias_sweep(planar, {10, 20, 40, 80});
    std::vector<double> n, b;
    worst_certificate = std::max(worst_certificate, sweep.worst_certificate);
    for (const auto& row : bias) {
      n.push_back(row.N);
      b.push_back(row.bias);
      worst_certificate = std::max(worst_certificate, row.certificate);
    }
    certificates_seen = true;
    const double bs = loglog_slope(n, b);
    const bool ok = ms >= -0.6 && ms <= -0.4 && bs >= -1.3 && bs <= -0.7;
    return Outcome{ok, "m-sweep slope " + num(ms) + ", N-bias slope " + num(bs)};
  });

  criterion(9, "Identifiability", 5.0, [&] {
    const double s = population_min_eigenvalue(scalar);
    const double p = population_min_eigenvalue(planar);
    const double r = population_min_eigenvalue(rank_deficient_problem());
    return Outcome{s > 1e-4 && p > 1e-4 && r < 1e-8,
                   "scalar " + num(s) + ", planar " + num(p) + ", rank-deficient " + num(r)};
  });

  criterion(10, "Regret growth on planar", 1200.0, [&] {
    const ScheduleConfig sched;  // L = 10, C = 10, delta = 0.1
    bool ok = true;
    std::string d;
    for (const auto& v : {std::optional<NSchedule>{}, std::optional<NSchedule>{NSchedule{NScheduleKind::Fixed, 10}},
                          std::optional<NSchedule>{NSchedule{NScheduleKind::Geometric, 10}}}) {
      const auto study = regret_study(planar, sched, v, 20, 0, 1e-3);
      worst_certificate = std::max(worst_certificate, study.worst_certificate());
      const double e = study.median_exponent();
      bool vok = study.failed_fraction() <= 0.2;
      d += (d.empty() ? "" : "; ") + study.label + " median exponent " + num(e);
      if (!v) {
        const double spread = study.median_spread();
        vok = vok && e <= 0.35 && spread <= 3.0;
        d += ", median ratio spread " + num(spread);
      } else if (v->kind == NScheduleKind::Fixed) {
        vok = vok && e >= 0.8 && e <= 1.1;
      } else {
        vok = vok && e <= 0.45;
      }
      d += ", failed " + num(study.failed_fraction()) + (vok ? "" : " [out of bracket]");
      ok = ok && vok;
    }
    certificates_seen = true;
    return Outcome{ok, d};
  });

  criterion(11, "Ridge optimality certificate", 1.0, [&] {
    return Outcome{certificates_seen && worst_certificate <= 1e-8,
                   "worst certificate over criteria 8 and 10: " + num(worst_certificate)};
  });

  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed")
            << std::endl;
  return failures == 0 ? 0 : 1;
}
