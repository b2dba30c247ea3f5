#pragma once

// Simulation scenarios and the Monte Carlo study driver.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "alert_surface/alert.hpp"
#include "alert_surface/bootstrap.hpp"
#include "alert_surface/model.hpp"

namespace alert_surface {

/// Which sigma structure the analysis assumes when fitting.
enum class SigmaAssumption { truth, constant, complex };

SigmaAssumption parse_sigma_assumption(std::string_view s);

struct ScenarioSpec {
  std::string name;
  MeanModel mean;
  SigmaModel sigma;
  Design design;
  std::size_t n = 0;
  Interval domain_x1;
  Interval domain_x2;
  Point2 reference;
  /// Fixed-covariate hypothesis; the surface test uses the same form,
  /// threshold and level over the whole grid.
  Hypothesis hypothesis;
  EvalGrid grid;
  std::vector<SigmaTerm> fit_sigma_terms;

  Hypothesis surface_hypothesis() const { return hypothesis.with_dimension(Dimension::surface); }
};

/// Throws InvalidArgument when the design total differs from n or the
/// hypothesis and grid do not fit the domains.
void validate(const ScenarioSpec& spec);

/// Names of the built-in scenarios ("1 - Full - Simple", ..., "2 - D-optimal - N45").
std::vector<std::string> scenario_names();

/// Support points with (not necessarily integer) weights.
struct SupportDesign {
  std::vector<Point2> points;
  std::vector<double> weights;
};

/// Built-in scenario by name. D-optimal scenarios use `doptimal_design`
/// (see load_design_csv) when given and the shipped placeholder otherwise.
ScenarioSpec build_scenario(std::string_view name,
                            SigmaAssumption assumption = SigmaAssumption::truth,
                            const std::optional<SupportDesign>& doptimal_design = std::nullopt);

/// Custom scenario from a JSON document (see README for the schema).
ScenarioSpec scenario_from_json(std::string_view json_text);

/// Placeholder support points for the D-optimal Scenario 2 design. Not the
/// published design; replace it with a design file when available.
std::vector<Point2> doptimal_placeholder_points();

/// Splits n over weighted support points by largest remainder.
Design weighted_design(std::span<const Point2> points, std::span<const double> weights,
                       std::size_t n);

/// Per-run record kept alongside the aggregate summary.
struct RunRecord {
  bool excluded = false;
  bool reject_fixed = false;
  bool reject_surface = false;
  std::optional<double> alert_fixed;
  std::vector<std::optional<double>> alert_curve;
  IntervalMetrics metrics;
};

struct AlertErrorQuantiles {
  double x1 = 0.0;
  std::size_t count = 0;
  double q10 = 0.0;
  double q50 = 0.0;
  double q90 = 0.0;
};

struct StudySummary {
  std::string scenario;
  std::size_t runs = 0;
  std::size_t excluded = 0;
  std::size_t analyzed = 0;
  std::uint64_t seed = 0;
  std::size_t b1 = 0;
  std::size_t b2 = 0;
  Algorithm algorithm = Algorithm::normal;

  double rejection_proportion = 0.0;          ///< fixed-covariate test
  double rejection_proportion_surface = 0.0;  ///< surface test
  std::optional<double> true_alert;
  std::optional<double> alert_median;
  std::optional<double> alert_sd;
  std::optional<double> recall_mean, recall_sd;
  std::optional<double> precision_mean, precision_sd;
  std::optional<double> onset_mean, onset_sd;
  std::optional<double> offset_mean, offset_sd;
  std::vector<double> rmse_quartiles;  ///< 25/50/75% of per-run RMSE; empty if none
  std::vector<AlertErrorQuantiles> alert_error;

  std::vector<RunRecord> records;  ///< not serialized
};

/// Each run: simulate, fit with the assumed sigma design, bootstrap once,
/// build the fixed-covariate and surface confidence sets from the shared
/// draws, decide, and score the surface alerts against the true model.
/// Runs whose initial fit fails (non-convergence or unusable data) or whose
/// bootstrap exhausts its retries are excluded. cfg.seed is
/// ignored in favour of `seed`; cfg.threads spreads runs over workers.
/// Throws ConvergenceError if every run is excluded.
StudySummary run_study(const ScenarioSpec& spec, std::size_t runs, const BootstrapConfig& cfg,
                       std::uint64_t seed);

/// Linear-interpolation sample quantile (type 7).
double sample_quantile(std::vector<double> values, double prob);

}  // namespace alert_surface
