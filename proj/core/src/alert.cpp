#include "alert_surface/alert.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "alert_surface/errors.hpp"

namespace alert_surface {

namespace {

bool crosses(Form form, double value, double lambda) {
  return form == Form::undercut ? value < lambda : value > lambda;
}

template <typename DeltaFn>
std::optional<double> first_crossing(DeltaFn&& delta_at, std::span<const double> scan, Form form,
                                     double lambda) {
  for (std::size_t k = 0; k < scan.size(); ++k) {
    if (!crosses(form, delta_at(scan[k]), lambda)) continue;
    if (k == 0) return scan[0];
    double lo = scan[k - 1];
    double hi = scan[k];
    for (int it = 0; it < 200 && hi - lo > 1e-13 * (1.0 + std::abs(hi)); ++it) {
      const double mid = 0.5 * (lo + hi);
      if (crosses(form, delta_at(mid), lambda)) {
        hi = mid;
      } else {
        lo = mid;
      }
    }
    return 0.5 * (lo + hi);
  }
  return std::nullopt;
}

}  // namespace

AlertOutcome decide(const ConfidenceSurface& surface, const Hypothesis& hyp) {
  validate(hyp);
  if (surface.side != side_for(hyp.form)) {
    throw InvalidArgument(std::string("a ") + std::string(to_string(hyp.form)) +
                          " hypothesis needs the " + std::string(to_string(side_for(hyp.form))) +
                          " band, got the " + std::string(to_string(surface.side)) + " one");
  }
  if (surface.dimension != hyp.dimension || surface.form != hyp.form) {
    throw InvalidArgument("confidence surface was built for a different hypothesis");
  }

  AlertOutcome out;
  out.dimension = hyp.dimension;
  out.lambda = hyp.lambda;
  out.alpha = hyp.alpha;
  out.quantile_c = surface.quantile_c;
  const std::size_t n1 = surface.x1.size();
  const std::size_t n2 = surface.x2.size();
  auto hit = [&](std::size_t i, std::size_t j) {
    return crosses(hyp.form, surface.band[surface.index(i, j)], hyp.lambda);
  };

  switch (hyp.dimension) {
    case Dimension::fixed_x1:
      for (std::size_t j = 0; j < n2 && !out.alert_dose; ++j) {
        if (hit(0, j)) out.alert_dose = surface.x2[j];
      }
      out.reject = out.alert_dose.has_value();
      break;
    case Dimension::fixed_x2:
      for (std::size_t i = 0; i < n1 && !out.alert_dose; ++i) {
        if (hit(i, 0)) out.alert_dose = surface.x1[i];
      }
      out.reject = out.alert_dose.has_value();
      break;
    case Dimension::surface:
      out.curve_x1 = surface.x1;
      out.alert_curve.assign(n1, std::nullopt);
      for (std::size_t i = 0; i < n1; ++i) {
        for (std::size_t j = 0; j < n2; ++j) {
          if (hit(i, j)) {
            out.alert_curve[i] = surface.x2[j];
            out.t_est.push_back(surface.x1[i]);
            break;
          }
        }
      }
      out.reject = !out.t_est.empty();
      break;
  }
  return out;
}

std::optional<double> true_alert(const MeanModel& model, const Hypothesis& hyp, double fixed,
                                 std::span<const double> scan) {
  const bool along_x1 = hyp.dimension == Dimension::fixed_x2;
  Point2 ref = hyp.centering_point();
  if (hyp.dimension == Dimension::fixed_x1) ref.x1 = fixed;
  if (hyp.dimension == Dimension::fixed_x2) ref.x2 = fixed;
  const double f_ref = eval_mean(model, ref.x1, ref.x2);
  auto delta_at = [&](double v) {
    const double f = along_x1 ? eval_mean(model, v, fixed) : eval_mean(model, fixed, v);
    return hyp.form == Form::centered ? std::abs(f - f_ref) : f;
  };
  return first_crossing(delta_at, scan, hyp.form, hyp.lambda);
}

std::vector<std::optional<double>> true_alert_curve(const MeanModel& model,
                                                    const Hypothesis& hyp, const EvalGrid& grid) {
  Hypothesis row = hyp.with_dimension(Dimension::surface);
  std::vector<std::optional<double>> out;
  out.reserve(grid.x1.size());
  for (double x1 : grid.x1) out.push_back(true_alert(model, row, x1, grid.x2));
  return out;
}

MEDContour med_contour(const MeanModel& model, const EvalGrid& grid, double p) {
  if (!(p > 0.0 && p <= 100.0)) throw InvalidArgument("MED percentage must lie in (0, 100]");
  validate(grid);
  const std::size_t n1 = grid.x1.size();
  const std::size_t n2 = grid.x2.size();
  std::vector<double> f(n1 * n2);
  eval_mean_grid(model.family(), model.theta(), grid.x1, grid.x2, f);
  const auto [lo, hi] = std::minmax_element(f.begin(), f.end());

  MEDContour c;
  c.p = p;
  c.f_min = *lo;
  c.r_max = *hi - *lo;
  if (!(c.r_max > 0.0)) throw InvalidArgument("mean surface is constant on the grid (R_max = 0)");

  const double target = p / 100.0;
  auto level = [&](std::size_t i, std::size_t j) { return (f[i * n2 + j] - c.f_min) / c.r_max; };
  for (std::size_t i = 0; i < n1; ++i) {
    for (std::size_t j = 0; j < n2; ++j) {
      const double a = level(i, j) - target;
      if (std::abs(a) <= 1e-12) {
        c.points.push_back({grid.x1[i], grid.x2[j]});
        continue;
      }
      if (j + 1 < n2) {
        const double b = level(i, j + 1) - target;
        if (a * b < 0.0 && std::abs(b) > 1e-12) {
          const double t = a / (a - b);
          c.points.push_back({grid.x1[i], grid.x2[j] + t * (grid.x2[j + 1] - grid.x2[j])});
        }
      }
      if (i + 1 < n1) {
        const double b = level(i + 1, j) - target;
        if (a * b < 0.0 && std::abs(b) > 1e-12) {
          const double t = a / (a - b);
          c.points.push_back({grid.x1[i] + t * (grid.x1[i + 1] - grid.x1[i]), grid.x2[j]});
        }
      }
    }
  }
  return c;
}

std::vector<bool> discretize(const Interval& interval, std::span<const double> grid) {
  double step = std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < grid.size(); ++i) step = std::min(step, grid[i] - grid[i - 1]);
  const double tol = std::isfinite(step) ? 1e-9 * step : 0.0;
  std::vector<bool> mask(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    mask[i] = grid[i] >= interval.lo - tol && grid[i] <= interval.hi + tol;
  }
  return mask;
}

IntervalMetrics interval_metrics(std::span<const double> grid, const std::vector<bool>& t_true,
                                 const std::vector<bool>& t_est,
                                 std::span<const std::optional<double>> alerts_true,
                                 std::span<const std::optional<double>> alerts_est) {
  const std::size_t n = grid.size();
  if (t_true.size() != n || t_est.size() != n || alerts_true.size() != n ||
      alerts_est.size() != n) {
    throw InvalidArgument("interval metrics inputs are not discretized on the same grid");
  }
  IntervalMetrics m;
  std::optional<double> true_min, true_max, est_min, est_max;
  double sq = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (t_true[i]) {
      ++m.n_true;
      if (!true_min) true_min = grid[i];
      true_max = grid[i];
    }
    if (t_est[i]) {
      ++m.n_est;
      if (!est_min) est_min = grid[i];
      est_max = grid[i];
    }
    if (t_true[i] && t_est[i]) {
      ++m.n_overlap;
      if (!alerts_true[i] || !alerts_est[i]) {
        throw InvalidArgument("overlap point without both alerts at grid value " +
                              std::to_string(grid[i]));
      }
      const double d = *alerts_est[i] - *alerts_true[i];
      sq += d * d;
    }
  }
  const auto overlap = static_cast<double>(m.n_overlap);
  if (m.n_true > 0) m.recall = overlap / static_cast<double>(m.n_true);
  if (m.n_est > 0) {
    m.precision = overlap / static_cast<double>(m.n_est);
    if (true_min) {
      m.onset_error = *est_min - *true_min;
      m.offset_error = *est_max - *true_max;
    }
  }
  if (m.n_overlap > 0) m.rmse = std::sqrt(sq / overlap);
  return m;
}

}  // namespace alert_surface
