#pragma once

// Parametric data generation and the nested two-level bootstrap that
// yields simultaneous confidence bands (one fixed covariate) and planes
// (the full covariate grid).

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "alert_surface/estimator.hpp"
#include "alert_surface/model.hpp"

namespace alert_surface {

struct DesignPoint {
  double x1 = 0.0;
  double x2 = 0.0;
  std::size_t replicates = 1;
};

struct Design {
  std::vector<DesignPoint> points;

  std::size_t total() const noexcept;

  /// Groups identical covariate pairs in order of first appearance.
  static Design from_dataset(const Dataset& data);
  /// Spreads n observations round-robin over the given points.
  static Design round_robin(std::span<const Point2> points, std::size_t n);
};

/// Throws InvalidArgument if a count is zero or the total differs from `declared_n`.
void validate(const Design& design, std::optional<std::size_t> declared_n = std::nullopt);

/// y = f(x1, x2) + eps, eps ~ N(0, sigma(x1, x2)^2). Design point j draws
/// from the substream stream_key({key, j}), so datasets depend only on the key.
Dataset simulate_dataset(const Design& design, const MeanModel& mean, const SigmaModel& sigma,
                         std::uint64_t key, std::optional<Interval> domain_x1 = std::nullopt,
                         std::optional<Interval> domain_x2 = std::nullopt,
                         std::optional<Point2> reference = std::nullopt);

/// ceil(level * m)-th order statistic of the m values.
double empirical_quantile(std::span<const double> values, double level);

enum class Algorithm { normal, fast };

/// Bootstrap refits: ten restarts, stopping at the first converged one.
inline FitOptions default_refit_options() {
  FitOptions o;
  o.restarts = 10;
  o.first_converged = true;
  return o;
}

std::string_view to_string(Algorithm a);
Algorithm parse_algorithm(std::string_view s);

struct BootstrapConfig {
  std::size_t b1 = 500;
  std::size_t b2 = 25;
  Algorithm algorithm = Algorithm::normal;
  std::uint64_t seed = 1;
  int retry_limit = 20;
  /// Worker threads (0 = automatic). Never changes results.
  unsigned threads = 0;
  /// Refit settings; the start is always the parent estimate.
  FitOptions refit = default_refit_options();
};

void validate(const BootstrapConfig& cfg);

/// Refitted parameters from both bootstrap levels, reusable across hypotheses.
struct BootstrapDraws {
  FamilyPtr family;
  std::vector<double> theta_hat;
  std::vector<std::vector<double>> first;                 ///< [l]
  std::vector<std::vector<std::vector<double>>> second;   ///< [l][k]
  std::size_t regenerated = 0;  ///< samples redrawn after failed refits
};

/// Draws B1 first-level datasets from the fit, refits each with the fit's
/// sigma design, then draws and refits B2 second-level datasets per
/// first-level replicate (joint refit for normal, theta-only for fast).
/// Throws BootstrapError once a replicate exhausts retry_limit regenerations.
BootstrapDraws draw_bootstrap(const Dataset& data, const FitResult& fit,
                              const BootstrapConfig& cfg);

/// Grid points whose second-level SD falls below this are left out of the
/// studentized maximum.
inline constexpr double kSigmaFloor = 1e-10;

struct ConfidenceSurface {
  Dimension dimension = Dimension::surface;
  Form form = Form::centered;
  Side side = Side::lower;
  std::vector<double> x1;  ///< evaluation axes; one value on a fixed axis
  std::vector<double> x2;
  std::vector<double> delta_hat;    ///< row-major in x1
  std::vector<double> sigma_delta;
  std::vector<double> band;
  double quantile_c = 0.0;
  std::vector<double> statistics;   ///< studentized maxima, one per first-level replicate

  std::size_t index(std::size_t i1, std::size_t i2) const noexcept { return i1 * x2.size() + i2; }
};

ConfidenceSurface surface_from_draws(const BootstrapDraws& draws, const Hypothesis& hyp,
                                     const EvalGrid& grid, Side side, unsigned threads = 1);

ConfidenceSurface confidence_surface(const Dataset& data, const FitResult& fit,
                                     const Hypothesis& hyp, const EvalGrid& grid,
                                     const BootstrapConfig& cfg, Side side);

}  // namespace alert_surface
