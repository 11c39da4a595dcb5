#include "lqrl/experiments.hpp"
#include "lqrl/problem_io.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
  CLI::App app{"Least-squares learning for continuous-time linear-quadratic control"};
  app.set_help_flag("-h,--help");

  std::string experiment;
  lqrl::ExperimentSpec spec;
  std::string out = ".";
  std::string algorithm = "all";
  int phases = 0, seeds = 0;
  double C = 0.0, delta = 0.0, hsim = 0.0;
  std::string nsched;

  app.add_option("experiment", experiment,
                 "riccati-convergence | gap-scaling | estimation-scaling | identifiability | "
                 "regret | sanity")
      ->required();
  app.add_option("--problem", spec.problem, "built-in instance name or config file")
      ->capture_default_str();
  app.add_option("--seed", spec.seed, "master seed")->capture_default_str();
  app.add_option("--out", out, "output directory")->capture_default_str();
  auto* o_phases = app.add_option("--phases", phases, "number of phases L");
  auto* o_C = app.add_option("--C", C, "schedule constant");
  auto* o_delta = app.add_option("--delta", delta, "confidence parameter");
  auto* o_nsched = app.add_option("--nsched", nsched, "fixed:N or geo:N");
  auto* o_hsim = app.add_option("--hsim", hsim, "fine simulation step");
  auto* o_seeds = app.add_option("--seeds", seeds, "number of master seeds");
  app.add_option("--algorithm", algorithm, "continuous | discrete | all (regret)")
      ->check(CLI::IsMember({"continuous", "discrete", "all"}))
      ->capture_default_str();
  app.add_flag("--inject-fault", spec.inject_fault, "flip the sign of the Gamma correction (sanity)");
  app.add_flag("--export-trajectory", spec.export_trajectory, "write one trajectory CSV per run (regret)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  lqrl::ResolvedSpec resolved;
  try {
    spec.experiment = lqrl::parse_experiment(experiment);
    spec.out = out;
    if (*o_phases) spec.phases = phases;
    if (*o_C) spec.C = C;
    if (*o_delta) spec.delta = delta;
    if (*o_nsched) spec.n_schedule = nsched;
    if (*o_hsim) spec.h_sim = hsim;
    if (*o_seeds) spec.seeds = seeds;
    spec.algorithm = algorithm == "continuous" ? lqrl::RegretVariant::Continuous
                     : algorithm == "discrete" ? lqrl::RegretVariant::Discrete
                                               : lqrl::RegretVariant::All;
    resolved = lqrl::resolve_spec(spec);
  } catch (const lqrl::ConfigError& e) {
    std::cerr << "lqrl: " << e.what() << '\n';
    return 2;
  }

  try {
    const auto outcome = lqrl::run_experiment(resolved, std::cout);
    return outcome.ok() ? 0 : 1;
  } catch (const std::exception& e) {
    std::cerr << "lqrl: " << lqrl::experiment_name(spec.experiment) << " failed: " << e.what() << '\n';
    return 1;
  }
}
