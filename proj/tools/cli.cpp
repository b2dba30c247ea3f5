#include "cli.hpp"

#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "alert_surface/alert.hpp"
#include "alert_surface/bootstrap.hpp"
#include "alert_surface/errors.hpp"
#include "alert_surface/estimator.hpp"
#include "alert_surface/io.hpp"
#include "alert_surface/random.hpp"
#include "alert_surface/simulation.hpp"

namespace alert_surface::cli {

namespace {

enum Exit : int { kOk = 0, kOther = 1, kUsage = 2, kData = 3, kConvergence = 4 };

// Key for the initial fit's restart jitter, derived from the run seed.
constexpr std::uint64_t kInitialFitKey = 0xf17;

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void emit(const std::string& path, std::ostream& fallback,
          const std::function<void(std::ostream&)>& write) {
  if (path.empty() || path == "-") {
    write(fallback);
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw InvalidArgument("cannot write '" + path + "'");
  write(f);
  if (!f) throw InvalidArgument("failed writing '" + path + "'");
}

std::optional<Interval> to_interval(const std::vector<double>& v, const char* flag) {
  if (v.empty()) return std::nullopt;
  if (v.size() != 2) throw InvalidArgument(std::string(flag) + " takes MIN,MAX");
  return Interval{v[0], v[1]};
}

// Options shared by fit, test and alert-curve.
struct DataOpts {
  std::string data;
  std::string config;
  std::string columns;
  std::string family;
  std::string sigma;
  std::vector<double> reference;
};

void add_data_options(CLI::App* app, DataOpts& o) {
  app->add_option("--data", o.data, "Dataset CSV")->required();
  app->add_option("--config", o.config, "Analysis config JSON");
  app->add_option("--columns", o.columns, "Column mapping, e.g. time=x1,dose=x2,response=y");
  app->add_option("--family", o.family, "Mean family (td2pll, emax2)");
  app->add_option("--sigma", o.sigma, "Sigma terms: constant, complex or a comma list");
  app->add_option("--reference", o.reference, "Reference point X1,X2")->delimiter(',');
}

struct TestOpts {
  std::string dimension;
  std::optional<double> fixed;
  std::string form;
  std::optional<double> lambda;
  std::optional<double> alpha;
  std::optional<std::size_t> b1, b2;
  std::string algorithm;
  std::optional<std::uint64_t> seed;
  std::optional<int> retry_limit;
  std::vector<double> x1_range, x2_range;
  std::optional<std::size_t> x1_points, x2_points;
  unsigned threads = 0;
  std::string surface_out;
  std::string out;
};

void add_test_options(CLI::App* app, TestOpts& o, bool with_dimension) {
  if (with_dimension) {
    app->add_option("--dimension", o.dimension, "fixed_x1, fixed_x2 or surface");
    app->add_option("--fixed", o.fixed, "Value of the fixed covariate");
  }
  app->add_option("--form", o.form, "centered, undercut or exceeded");
  app->add_option("--lambda", o.lambda, "Relevance threshold");
  app->add_option("--alpha", o.alpha, "Significance level");
  app->add_option("--b1", o.b1, "First-level bootstrap replicates");
  app->add_option("--b2", o.b2, "Second-level bootstrap replicates");
  app->add_option("--algorithm", o.algorithm, "normal or fast");
  app->add_option("--seed", o.seed, "Bootstrap seed");
  app->add_option("--retry-limit", o.retry_limit, "Regenerations per failed refit");
  app->add_option("--x1-range", o.x1_range, "Grid bounds MIN,MAX for x1")->delimiter(',');
  app->add_option("--x2-range", o.x2_range, "Grid bounds MIN,MAX for x2")->delimiter(',');
  app->add_option("--x1-points", o.x1_points, "Grid points along x1");
  app->add_option("--x2-points", o.x2_points, "Grid points along x2");
  app->add_option("--threads", o.threads, "Worker threads (0 = automatic)");
  app->add_option("--surface", o.surface_out, "Surface CSV output path");
  app->add_option("-o,--out", o.out, "Alert JSON output path (default stdout)");
}

AnalysisConfig load_config(const DataOpts& d) {
  AnalysisConfig cfg = d.config.empty() ? AnalysisConfig{} : parse_analysis_config(slurp(d.config));
  if (!d.columns.empty()) cfg.columns = parse_column_map(d.columns);
  if (!d.family.empty()) cfg.family = d.family;
  if (!d.sigma.empty()) cfg.sigma_terms = parse_sigma_terms(d.sigma);
  if (!d.reference.empty()) {
    if (d.reference.size() != 2) throw InvalidArgument("--reference takes X1,X2");
    cfg.reference = Point2{d.reference[0], d.reference[1]};
  }
  return cfg;
}

void apply_test_flags(AnalysisConfig& cfg, const TestOpts& t) {
  auto& h = cfg.hypothesis;
  if (!t.dimension.empty()) h.dimension = parse_dimension(t.dimension);
  if (t.fixed) h.fixed_value = *t.fixed;
  if (!t.form.empty()) h.form = parse_form(t.form);
  if (t.lambda) h.lambda = *t.lambda;
  if (t.alpha) h.alpha = *t.alpha;
  auto& b = cfg.bootstrap;
  if (t.b1) b.b1 = *t.b1;
  if (t.b2) b.b2 = *t.b2;
  if (!t.algorithm.empty()) b.algorithm = parse_algorithm(t.algorithm);
  if (t.seed) b.seed = *t.seed;
  if (t.retry_limit) b.retry_limit = *t.retry_limit;
  b.threads = t.threads;
  if (auto r = to_interval(t.x1_range, "--x1-range")) {
    cfg.grid_x1.min = r->lo;
    cfg.grid_x1.max = r->hi;
  }
  if (auto r = to_interval(t.x2_range, "--x2-range")) {
    cfg.grid_x2.min = r->lo;
    cfg.grid_x2.max = r->hi;
  }
  if (t.x1_points) cfg.grid_x1.points = *t.x1_points;
  if (t.x2_points) cfg.grid_x2.points = *t.x2_points;
}

Dataset load_data(const DataOpts& d, const AnalysisConfig& cfg) {
  return parse_dataset_csv(d.data, cfg.columns, std::nullopt, std::nullopt, cfg.reference);
}

FitResult initial_fit(const Dataset& data, const AnalysisConfig& cfg, std::uint64_t seed) {
  FitOptions opts;
  opts.seed = stream_key({seed, kInitialFitKey});
  return fit_gamlss(data, find_family(cfg.family), cfg.sigma_terms, opts);
}

int cmd_fit(const DataOpts& d, std::uint64_t seed, const std::string& out, std::ostream& stdout_) {
  const AnalysisConfig cfg = load_config(d);
  const Dataset data = load_data(d, cfg);
  const FitResult fit = initial_fit(data, cfg, seed);
  emit(out, stdout_, [&](std::ostream& o) { write_fit_json(o, fit); });
  return kOk;
}

int cmd_test(const DataOpts& d, const TestOpts& t, bool surface, std::ostream& stdout_) {
  AnalysisConfig cfg = load_config(d);
  apply_test_flags(cfg, t);
  if (surface) {
    cfg.hypothesis.dimension = Dimension::surface;
    cfg.hypothesis.fixed_value.reset();
  }
  const Dataset data = load_data(d, cfg);
  cfg.hypothesis.reference = data.reference();
  validate(cfg.hypothesis, &data.domain_x1(), &data.domain_x2());
  const EvalGrid grid = resolve_grid(cfg, data);
  validate(cfg.bootstrap);

  const FitResult fit = initial_fit(data, cfg, cfg.bootstrap.seed);
  const ConfidenceSurface s = confidence_surface(data, fit, cfg.hypothesis, grid, cfg.bootstrap,
                                                 side_for(cfg.hypothesis.form));
  const AlertOutcome outcome = decide(s, cfg.hypothesis);
  if (!t.surface_out.empty()) {
    emit(t.surface_out, stdout_, [&](std::ostream& o) { write_surface_csv(o, s); });
  }
  emit(t.out, stdout_, [&](std::ostream& o) { write_alert_json(o, outcome, cfg, grid); });
  return kOk;
}

struct MedOpts {
  std::string family = "emax2";
  std::vector<double> theta;
  double p = 80.0;
  std::vector<double> x1_range, x2_range;
  std::size_t x1_points = 101, x2_points = 101;
  std::string out;
};

int cmd_med(const MedOpts& m, std::ostream& stdout_) {
  const MeanModel model(m.family, m.theta);
  const auto d1 = to_interval(m.x1_range, "--x1-range");
  const auto d2 = to_interval(m.x2_range, "--x2-range");
  const EvalGrid grid = EvalGrid::uniform(*d1, m.x1_points, *d2, m.x2_points);
  validate(grid);
  const MEDContour c = med_contour(model, grid, m.p);
  emit(m.out, stdout_, [&](std::ostream& o) { write_contour_csv(o, c); });
  return kOk;
}

struct ScenarioOpts {
  std::string scenario;
  std::string scenario_config;
  std::string sigma_assumption = "truth";
  std::string design;
};

void add_scenario_options(CLI::App* app, ScenarioOpts& o) {
  auto* name = app->add_option("--scenario", o.scenario, "Built-in scenario name");
  auto* file = app->add_option("--scenario-config", o.scenario_config, "Custom scenario JSON");
  name->excludes(file);
  app->add_option("--sigma-assumption", o.sigma_assumption,
                  "Sigma structure assumed by the fit: truth, constant or complex");
  app->add_option("--design", o.design, "Support design CSV (x1,x2,weight) for D-optimal scenarios");
}

ScenarioSpec load_scenario(const ScenarioOpts& o) {
  if (!o.scenario_config.empty()) return scenario_from_json(slurp(o.scenario_config));
  if (o.scenario.empty()) throw InvalidArgument("one of --scenario or --scenario-config is required");
  std::optional<SupportDesign> design;
  if (!o.design.empty()) design = load_design_csv(o.design);
  return build_scenario(o.scenario, parse_sigma_assumption(o.sigma_assumption), design);
}

struct SimulateOpts {
  std::size_t runs = 100;
  std::size_t b1 = 100;
  std::size_t b2 = 10;
  std::string algorithm = "normal";
  std::uint64_t seed = 0;
  int retry_limit = 20;
  unsigned threads = 0;
  std::string out;
};

int cmd_simulate(const ScenarioOpts& so, const SimulateOpts& o, std::ostream& stdout_) {
  const ScenarioSpec spec = load_scenario(so);
  BootstrapConfig cfg;
  cfg.b1 = o.b1;
  cfg.b2 = o.b2;
  cfg.algorithm = parse_algorithm(o.algorithm);
  cfg.retry_limit = o.retry_limit;
  cfg.threads = o.threads;
  const StudySummary s = run_study(spec, o.runs, cfg, o.seed);
  emit(o.out, stdout_, [&](std::ostream& out) { write_study_json(out, s); });
  return kOk;
}

int cmd_gen_data(const ScenarioOpts& so, std::uint64_t seed, const std::string& out,
                 std::ostream& stdout_) {
  const ScenarioSpec spec = load_scenario(so);
  const Dataset data = simulate_dataset(spec.design, spec.mean, spec.sigma, stream_key({seed, 0}),
                                        spec.domain_x1, spec.domain_x2, spec.reference);
  emit(out, stdout_, [&](std::ostream& o) { write_dataset_csv(o, data); });
  return kOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Threshold alerts from simultaneous confidence surfaces", "alert-surface"};
  app.require_subcommand(1);

  DataOpts fit_data;
  std::uint64_t fit_seed = 1;
  std::string fit_out;
  auto* fit = app.add_subcommand("fit", "Fit the mean and log-sigma model to a dataset");
  add_data_options(fit, fit_data);
  fit->add_option("--seed", fit_seed, "Restart jitter seed");
  fit->add_option("-o,--out", fit_out, "Fit JSON output path (default stdout)");

  DataOpts test_data;
  TestOpts test_opts;
  auto* test = app.add_subcommand("test", "Test a threshold hypothesis and report the alert");
  add_data_options(test, test_data);
  add_test_options(test, test_opts, true);

  DataOpts curve_data;
  TestOpts curve_opts;
  auto* curve = app.add_subcommand("alert-curve", "Alert curve over the whole covariate grid");
  add_data_options(curve, curve_data);
  add_test_options(curve, curve_opts, false);

  MedOpts med_opts;
  auto* med = app.add_subcommand("med", "MED contour of a mean surface");
  med->add_option("--family", med_opts.family, "Mean family");
  med->add_option("--theta", med_opts.theta, "Parameters, comma separated")
      ->required()
      ->delimiter(',');
  med->add_option("--p", med_opts.p, "Percent of the response range");
  med->add_option("--x1-range", med_opts.x1_range, "MIN,MAX")->required()->delimiter(',');
  med->add_option("--x2-range", med_opts.x2_range, "MIN,MAX")->required()->delimiter(',');
  med->add_option("--x1-points", med_opts.x1_points, "Grid points along x1");
  med->add_option("--x2-points", med_opts.x2_points, "Grid points along x2");
  med->add_option("-o,--out", med_opts.out, "Contour CSV output path (default stdout)");

  ScenarioOpts sim_scenario;
  SimulateOpts sim_opts;
  auto* sim = app.add_subcommand("simulate", "Monte Carlo study of a scenario");
  add_scenario_options(sim, sim_scenario);
  sim->add_option("--runs", sim_opts.runs, "Simulation runs");
  sim->add_option("--b1", sim_opts.b1, "First-level bootstrap replicates");
  sim->add_option("--b2", sim_opts.b2, "Second-level bootstrap replicates");
  sim->add_option("--algorithm", sim_opts.algorithm, "normal or fast");
  sim->add_option("--seed", sim_opts.seed, "Study seed")->required();
  sim->add_option("--retry-limit", sim_opts.retry_limit, "Regenerations per failed refit");
  sim->add_option("--threads", sim_opts.threads, "Worker threads (0 = automatic)");
  sim->add_option("-o,--out", sim_opts.out, "Summary JSON output path (default stdout)");

  ScenarioOpts gen_scenario;
  std::uint64_t gen_seed = 0;
  std::string gen_out;
  auto* gen = app.add_subcommand("gen-data", "Simulate one dataset from a scenario");
  add_scenario_options(gen, gen_scenario);
  gen->add_option("--seed", gen_seed, "Data seed")->required();
  gen->add_option("-o,--out", gen_out, "Dataset CSV output path (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kOk : kUsage;
  }

  try {
    if (*fit) return cmd_fit(fit_data, fit_seed, fit_out, out);
    if (*test) return cmd_test(test_data, test_opts, false, out);
    if (*curve) return cmd_test(curve_data, curve_opts, true, out);
    if (*med) return cmd_med(med_opts, out);
    if (*sim) return cmd_simulate(sim_scenario, sim_opts, out);
    if (*gen) return cmd_gen_data(gen_scenario, gen_seed, gen_out, out);
  } catch (const InvalidArgument& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kData;
  } catch (const ConvergenceError& e) {
    err << "convergence error: " << e.what() << '\n';
    return kConvergence;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kOther;
  }
  return kUsage;
}

}  // namespace alert_surface::cli
