#include "alert_surface/bootstrap.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "alert_surface/errors.hpp"
#include "alert_surface/parallel.hpp"
#include "alert_surface/random.hpp"

namespace alert_surface {

namespace {

enum : std::uint64_t { kFirstLevel = 1, kSecondLevel = 2, kRefitJitter = 3 };

double sample_sd(const double* values, std::size_t m, std::size_t stride) {
  double mean = 0.0;
  for (std::size_t i = 0; i < m; ++i) mean += values[i * stride];
  mean /= static_cast<double>(m);
  double ss = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double d = values[i * stride] - mean;
    ss += d * d;
  }
  return std::sqrt(ss / static_cast<double>(m - 1));
}

struct Refit {
  FitResult fit;
  std::size_t regenerated = 0;
};

// Simulates from (mean, sigma) and refits, regenerating the sample with a
// fresh substream whenever the refit fails.
template <typename FitFn>
Refit simulate_and_refit(const Design& design, const Dataset& data, const MeanModel& mean,
                         const SigmaModel& sigma, const BootstrapConfig& cfg, int level,
                         std::size_t l, std::size_t k, FitFn&& fit_fn) {
  for (int attempt = 0; attempt <= cfg.retry_limit; ++attempt) {
    const auto a = static_cast<std::uint64_t>(attempt);
    const std::uint64_t key = stream_key({cfg.seed, static_cast<std::uint64_t>(level), l, k, a});
    Dataset sample = simulate_dataset(design, mean, sigma, key, data.domain_x1(),
                                      data.domain_x2(), data.reference());
    FitOptions opts = cfg.refit;
    opts.start = mean.theta();
    opts.seed = stream_key({cfg.seed, kRefitJitter, static_cast<std::uint64_t>(level), l, k, a});
    try {
      return {fit_fn(sample, opts), static_cast<std::size_t>(attempt)};
    } catch (const ConvergenceError&) {
      // regenerate
    }
  }
  throw BootstrapError(level, l, k,
                       "bootstrap level " + std::to_string(level) + " replicate " +
                           std::to_string(l) + (level == 2 ? "/" + std::to_string(k) : "") +
                           " failed to refit after " + std::to_string(cfg.retry_limit) +
                           " regenerations");
}

}  // namespace

std::size_t Design::total() const noexcept {
  std::size_t n = 0;
  for (const auto& p : points) n += p.replicates;
  return n;
}

Design Design::from_dataset(const Dataset& data) {
  Design d;
  for (const auto& o : data.observations()) {
    auto it = std::find_if(d.points.begin(), d.points.end(),
                           [&](const DesignPoint& p) { return p.x1 == o.x1 && p.x2 == o.x2; });
    if (it == d.points.end()) {
      d.points.push_back({o.x1, o.x2, 1});
    } else {
      ++it->replicates;
    }
  }
  return d;
}

Design Design::round_robin(std::span<const Point2> points, std::size_t n) {
  if (points.empty()) throw InvalidArgument("design needs at least one point");
  if (n < points.size()) {
    throw InvalidArgument("cannot spread " + std::to_string(n) + " observations over " +
                          std::to_string(points.size()) + " design points");
  }
  Design d;
  for (std::size_t j = 0; j < points.size(); ++j) {
    const std::size_t extra = j < n % points.size() ? 1 : 0;
    d.points.push_back({points[j].x1, points[j].x2, n / points.size() + extra});
  }
  return d;
}

void validate(const Design& design, std::optional<std::size_t> declared_n) {
  if (design.points.empty()) throw InvalidArgument("design has no points");
  for (const auto& p : design.points) {
    if (p.replicates < 1) throw InvalidArgument("design replicate counts must be >= 1");
    if (!std::isfinite(p.x1) || !std::isfinite(p.x2)) {
      throw InvalidArgument("design points must be finite");
    }
  }
  if (declared_n && design.total() != *declared_n) {
    throw InvalidArgument("design totals " + std::to_string(design.total()) +
                          " observations but n = " + std::to_string(*declared_n));
  }
}

Dataset simulate_dataset(const Design& design, const MeanModel& mean, const SigmaModel& sigma,
                         std::uint64_t key, std::optional<Interval> domain_x1,
                         std::optional<Interval> domain_x2, std::optional<Point2> reference) {
  std::vector<Observation> obs;
  obs.reserve(design.total());
  for (std::size_t j = 0; j < design.points.size(); ++j) {
    const auto& p = design.points[j];
    const double f = eval_mean(mean, p.x1, p.x2);
    const double s = eval_sigma(sigma, p.x1, p.x2);
    Stream rng(stream_key({key, static_cast<std::uint64_t>(j)}));
    std::normal_distribution<double> noise(0.0, 1.0);
    for (std::size_t r = 0; r < p.replicates; ++r) {
      obs.push_back({p.x1, p.x2, f + s * noise(rng)});
    }
  }
  return Dataset(std::move(obs), domain_x1, domain_x2, reference);
}

double empirical_quantile(std::span<const double> values, double level) {
  if (values.empty()) throw InvalidArgument("empirical_quantile of an empty sample");
  if (!(level > 0.0 && level < 1.0)) throw InvalidArgument("quantile level must lie in (0, 1)");
  const auto m = values.size();
  // Guard against level * m landing a hair above an integer.
  const double pos = std::ceil(level * static_cast<double>(m) * (1.0 - 1e-12));
  const auto k = static_cast<std::size_t>(std::clamp(pos, 1.0, static_cast<double>(m)));
  std::vector<double> copy(values.begin(), values.end());
  std::nth_element(copy.begin(), copy.begin() + static_cast<std::ptrdiff_t>(k - 1), copy.end());
  return copy[k - 1];
}

std::string_view to_string(Algorithm a) { return a == Algorithm::normal ? "normal" : "fast"; }

Algorithm parse_algorithm(std::string_view s) {
  if (s == "normal") return Algorithm::normal;
  if (s == "fast") return Algorithm::fast;
  throw InvalidArgument("unknown bootstrap algorithm '" + std::string(s) + "'");
}

void validate(const BootstrapConfig& cfg) {
  if (cfg.b1 < 2 || cfg.b2 < 2) throw InvalidArgument("b1 and b2 must both be >= 2");
  if (cfg.retry_limit < 0) throw InvalidArgument("retry_limit must be >= 0");
  validate(cfg.refit);
}

BootstrapDraws draw_bootstrap(const Dataset& data, const FitResult& fit,
                              const BootstrapConfig& cfg) {
  validate(cfg);
  if (!fit.converged) throw InvalidArgument("bootstrap needs a converged parent fit");

  const Design design = Design::from_dataset(data);
  const MeanModel parent_mean = fit.mean_model();
  const SigmaModel parent_sigma = fit.sigma_model();
  const std::vector<SigmaTerm> terms = parent_sigma.terms();
  const FamilyPtr& family = fit.family;

  BootstrapDraws draws;
  draws.family = family;
  draws.theta_hat = fit.theta_hat;
  draws.first.resize(cfg.b1);
  draws.second.resize(cfg.b1);
  std::vector<std::size_t> regenerated(cfg.b1, 0);

  auto joint_fit = [&](const Dataset& d, const FitOptions& o) {
    return fit_gamlss(d, family, terms, o);
  };
  auto theta_fit = [&](const Dataset& d, const FitOptions& o) {
    return fit_theta_ml(d, family, o);
  };

  parallel_for(cfg.b1, resolve_workers(cfg.threads), [&](std::size_t l) {
    Refit first = simulate_and_refit(design, data, parent_mean, parent_sigma, cfg, kFirstLevel, l,
                                     0, joint_fit);
    const MeanModel mean_l = first.fit.mean_model();
    const SigmaModel sigma_l = first.fit.sigma_model();
    std::size_t redrawn = first.regenerated;

    auto& second = draws.second[l];
    second.resize(cfg.b2);
    for (std::size_t k = 0; k < cfg.b2; ++k) {
      Refit r = cfg.algorithm == Algorithm::normal
                    ? simulate_and_refit(design, data, mean_l, sigma_l, cfg, kSecondLevel, l, k,
                                         joint_fit)
                    : simulate_and_refit(design, data, mean_l, sigma_l, cfg, kSecondLevel, l, k,
                                         theta_fit);
      second[k] = std::move(r.fit.theta_hat);
      redrawn += r.regenerated;
    }
    draws.first[l] = std::move(first.fit.theta_hat);
    regenerated[l] = redrawn;
  });
  for (auto r : regenerated) draws.regenerated += r;
  return draws;
}

ConfidenceSurface surface_from_draws(const BootstrapDraws& draws, const Hypothesis& hyp,
                                     const EvalGrid& grid, Side side, unsigned threads) {
  validate(hyp);
  validate(grid);
  const std::size_t b1 = draws.first.size();
  if (b1 < 2 || draws.second.size() != b1) throw InvalidArgument("malformed bootstrap draws");
  const MeanFamily& family = *draws.family;

  ConfidenceSurface s;
  s.dimension = hyp.dimension;
  s.form = hyp.form;
  s.side = side;
  const EvalAxes axes = evaluation_axes(hyp, grid);
  s.x1 = axes.x1;
  s.x2 = axes.x2;
  const std::size_t pts = axes.size();

  s.delta_hat.resize(pts);
  delta_grid(family, draws.theta_hat, hyp, axes, s.delta_hat);

  std::vector<double> first(b1 * pts);
  s.statistics.assign(b1, 0.0);
  const double sign = side == Side::lower ? 1.0 : -1.0;

  parallel_for(b1, resolve_workers(threads), [&](std::size_t l) {
    std::span<double> row(first.data() + l * pts, pts);
    delta_grid(family, draws.first[l], hyp, axes, row);

    const auto& second = draws.second[l];
    const std::size_t b2 = second.size();
    if (b2 < 2) throw InvalidArgument("second level needs at least 2 draws");
    std::vector<double> inner(b2 * pts);
    for (std::size_t k = 0; k < b2; ++k) {
      delta_grid(family, second[k], hyp, axes, std::span<double>(inner.data() + k * pts, pts));
    }
    double stat = -std::numeric_limits<double>::infinity();
    for (std::size_t p = 0; p < pts; ++p) {
      const double sd = sample_sd(inner.data() + p, b2, pts);
      if (!(sd >= kSigmaFloor)) continue;
      const double z = sign * (row[p] - s.delta_hat[p]) / sd;
      if (z > stat) stat = z;
    }
    // No usable point: the replicate carries no studentized deviation.
    s.statistics[l] = std::isfinite(stat) ? stat : 0.0;
  });

  s.sigma_delta.resize(pts);
  for (std::size_t p = 0; p < pts; ++p) s.sigma_delta[p] = sample_sd(first.data() + p, b1, pts);

  s.quantile_c = empirical_quantile(s.statistics, 1.0 - hyp.alpha);
  s.band.resize(pts);
  for (std::size_t p = 0; p < pts; ++p) {
    s.band[p] = side == Side::lower ? s.delta_hat[p] - s.quantile_c * s.sigma_delta[p]
                                    : s.delta_hat[p] + s.quantile_c * s.sigma_delta[p];
  }
  return s;
}

ConfidenceSurface confidence_surface(const Dataset& data, const FitResult& fit,
                                     const Hypothesis& hyp, const EvalGrid& grid,
                                     const BootstrapConfig& cfg, Side side) {
  validate(hyp, &data.domain_x1(), &data.domain_x2());
  validate(grid);
  const BootstrapDraws draws = draw_bootstrap(data, fit, cfg);
  return surface_from_draws(draws, hyp, grid, side, cfg.threads);
}

}  // namespace alert_surface
