#pragma once

// Test decisions, alert extraction, MED contours and the accuracy metrics
// used to compare estimated alert spans against the truth.

#include <optional>
#include <span>
#include <vector>

#include "alert_surface/bootstrap.hpp"
#include "alert_surface/model.hpp"

namespace alert_surface {

struct AlertOutcome {
  Dimension dimension = Dimension::surface;
  bool reject = false;
  /// Fixed-covariate tests: smallest free-axis grid value where the band
  /// crosses lambda (an x2 value for fixed_x1, an x1 value for fixed_x2).
  std::optional<double> alert_dose;
  /// Surface tests: for each x1 of the surface, the smallest x2 with an alert.
  std::vector<double> curve_x1;
  std::vector<std::optional<double>> alert_curve;
  /// x1 values with an alert (surface tests).
  std::vector<double> t_est;
  double lambda = 0.0;
  double alpha = 0.0;
  double quantile_c = 0.0;
};

/// Centered and exceeded forms reject where the lower band exceeds lambda,
/// the undercut form where the upper band falls below it. Throws
/// InvalidArgument if the surface does not belong to the hypothesis.
AlertOutcome decide(const ConfidenceSurface& surface, const Hypothesis& hyp);

/// Smallest value along `scan` where the true decision quantity crosses
/// lambda: the first grid node where it holds, refined by bisection
/// against the previous node. For fixed_x1 the scan runs over x2 at
/// x1 = fixed; for fixed_x2 over x1; surface hypotheses are treated like
/// fixed_x1 but keep their own centering point.
std::optional<double> true_alert(const MeanModel& model, const Hypothesis& hyp, double fixed,
                                 std::span<const double> scan);

/// true_alert at every grid x1, scanning grid x2.
std::vector<std::optional<double>> true_alert_curve(const MeanModel& model,
                                                    const Hypothesis& hyp, const EvalGrid& grid);

struct MEDContour {
  double p = 0.0;
  std::vector<Point2> points;
  double r_max = 0.0;
  double f_min = 0.0;

  /// Response on the contour: f_min + p / 100 * r_max.
  double level() const noexcept { return f_min + p / 100.0 * r_max; }
};

/// Points where (f - min f) / R_max crosses p / 100, by linear interpolation
/// along grid edges (plus grid nodes lying exactly on the level).
MEDContour med_contour(const MeanModel& model, const EvalGrid& grid, double p);

struct IntervalMetrics {
  std::optional<double> recall;
  std::optional<double> precision;
  std::optional<double> onset_error;
  std::optional<double> offset_error;
  std::optional<double> rmse;
  std::size_t n_true = 0;
  std::size_t n_est = 0;
  std::size_t n_overlap = 0;
};

/// Grid points inside the closed interval (with a small tolerance for
/// rounding of the grid values).
std::vector<bool> discretize(const Interval& interval, std::span<const double> grid);

/// Masks and alert values are aligned with `grid`. RMSE needs both alerts
/// on every overlap point.
IntervalMetrics interval_metrics(std::span<const double> grid, const std::vector<bool>& t_true,
                                 const std::vector<bool>& t_est,
                                 std::span<const std::optional<double>> alerts_true,
                                 std::span<const std::optional<double>> alerts_est);

}  // namespace alert_surface
