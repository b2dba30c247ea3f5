// Acceptance suite: one PASS/FAIL line per criterion.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "alert_surface/alert.hpp"
#include "alert_surface/bootstrap.hpp"
#include "alert_surface/estimator.hpp"
#include "alert_surface/io.hpp"
#include "alert_surface/simulation.hpp"
#include "oracle.hpp"

using namespace alert_surface;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = true;
  std::string detail;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

const std::vector<double> kTd = {2.9, 5.9, 1.8, 4.8};
const std::vector<double> kEmax = {0.0, 80.0, 3.0, 120.0, 10.0, 0.02};

BootstrapConfig boot(std::size_t b1, std::size_t b2, std::uint64_t seed) {
  BootstrapConfig c;
  c.b1 = b1;
  c.b2 = b2;
  c.seed = seed;
  return c;
}

Dataset draw(const ScenarioSpec& s, std::uint64_t key) {
  return simulate_dataset(s.design, s.mean, s.sigma, key, s.domain_x1, s.domain_x2, s.reference);
}

// Shared with criteria 5, 7 and 9.
struct PowerStudy {
  bool done = false;
  StudySummary summary;
  std::string json;
  double seconds = 0.0;
};

PowerStudy& power_study() {
  static PowerStudy p;
  if (!p.done) {
    const ScenarioSpec spec = build_scenario("1 - Full - Simple");
    BootstrapConfig cfg = boot(100, 10, 0);
    cfg.threads = 1;
    const auto t0 = Clock::now();
    p.summary = run_study(spec, 100, cfg, 20240501);
    p.seconds = seconds_since(t0);
    std::ostringstream js;
    write_study_json(js, p.summary);
    p.json = js.str();
    p.done = true;
  }
  return p;
}

Outcome criterion1() {
  Outcome o;
  const ScenarioSpec s = build_scenario("1 - Reduced - Simple");
  const EvalGrid g = EvalGrid::uniform(s.domain_x1, 3, s.domain_x2, 3);
  double worst_time = 0.0;
  int cases = 0;
  for (const auto& terms : {constant_sigma_terms(), complex_sigma_terms()}) {
    for (Form form : {Form::centered, Form::undercut}) {
      const Dataset d = draw(s, 1000 + static_cast<std::uint64_t>(cases));
      const FitResult fit = fit_gamlss(d, s.mean.family_ptr(), terms);
      Hypothesis h = s.surface_hypothesis();
      h.form = form;
      const BootstrapConfig cfg = boot(8, 4, 77 + static_cast<std::uint64_t>(cases));
      const Side side = side_for(form);
      const auto t0 = Clock::now();
      const auto lib = confidence_surface(d, fit, h, g, cfg, side);
      worst_time = std::max(worst_time, seconds_since(t0));
      const auto ref = oracle::confidence_surface(d, fit, h, g, cfg, side);
      const bool same = lib.delta_hat == ref.delta_hat && lib.sigma_delta == ref.sigma_delta &&
                        lib.statistics == ref.statistics && lib.quantile_c == ref.c &&
                        lib.band == ref.band;
      o.pass = o.pass && same;
      ++cases;
    }
  }
  o.pass = o.pass && worst_time < 1.0;
  o.detail = std::to_string(cases) + " configurations bit-identical to the reference" +
             fmt(", slowest %.3f s", worst_time);
  return o;
}

Outcome criterion2() {
  Outcome o;
  ScenarioSpec s = build_scenario("1 - Full - Simple");
  s.sigma = SigmaModel(constant_sigma_terms(), {-30.0});
  const Dataset d = draw(s, 2);
  const auto t0 = Clock::now();
  const FitResult fit = fit_gamlss(d, s.mean.family_ptr(), constant_sigma_terms());
  const auto surf = confidence_surface(d, fit, s.hypothesis, s.grid, boot(50, 5, 3), Side::upper);
  const AlertOutcome a = decide(surf, s.hypothesis);
  const double secs = seconds_since(t0);
  const double ec50 = oracle::td2pll_ec50(kTd, 4.0);
  const double step = s.grid.x2[1] - s.grid.x2[0];
  o.pass = a.reject && a.alert_dose && std::abs(*a.alert_dose - ec50) <= step && secs < 60.0;
  o.detail = (a.alert_dose ? fmt("alert %.4f", *a.alert_dose) : std::string("no alert")) +
             fmt(" vs EC50(4) %.4f", ec50) + fmt(" (step %.2f)", step) + fmt(", %.2f s", secs);
  return o;
}

Outcome criterion3() {
  Outcome o;
  const ScenarioSpec s = build_scenario("1 - Full - Simple");
  const auto& x1 = s.grid.x1;
  const auto it = std::find(x1.begin(), x1.end(), *s.hypothesis.fixed_value);
  if (it == x1.end()) return {false, "fixed time is not a grid node"};
  const auto row = static_cast<std::size_t>(it - x1.begin());
  std::size_t compared = 0;
  int datasets = 0;
  for (std::uint64_t key = 30; key < 34; ++key, ++datasets) {
    const Dataset d = draw(s, key);
    const FitResult fit = fit_gamlss(d, s.mean.family_ptr(), constant_sigma_terms());
    const BootstrapDraws dr = draw_bootstrap(d, fit, boot(100, 10, key));
    for (Form form : {Form::undercut, Form::exceeded, Form::centered}) {
      Hypothesis h2 = s.hypothesis;
      h2.form = form;
      const Hypothesis h3 = h2.with_dimension(Dimension::surface);
      const Side side = side_for(form);
      const auto b2 = surface_from_draws(dr, h2, s.grid, side);
      const auto b3 = surface_from_draws(dr, h3, s.grid, side);
      o.pass = o.pass && b3.quantile_c >= b2.quantile_c;
      for (std::size_t j = 0; j < s.grid.x2.size(); ++j) {
        const double lo2 = b2.band[b2.index(0, j)];
        const double lo3 = b3.band[b3.index(row, j)];
        o.pass = o.pass && (side == Side::lower ? lo2 >= lo3 : lo2 <= lo3);
        ++compared;
      }
    }
  }
  o.detail = "c_surface >= c_slice and slice band inside plane band at " +
             std::to_string(compared) + " points over " + std::to_string(datasets) +
             " datasets, three forms";
  return o;
}

Outcome criterion4() {
  Outcome o;
  double worst_c = 0.0, worst_band = 0.0;
  for (const char* name : {"1 - Full - Simple", "2 - Factorial 3x3 - N90"}) {
    const ScenarioSpec s = build_scenario(name);
    const Dataset d = draw(s, 4);
    const FitResult fit = fit_gamlss(d, s.mean.family_ptr(), constant_sigma_terms());
    BootstrapConfig normal = boot(60, 8, 40);
    BootstrapConfig fast = normal;
    fast.algorithm = Algorithm::fast;
    const auto dn = draw_bootstrap(d, fit, normal);
    const auto df = draw_bootstrap(d, fit, fast);
    for (const Hypothesis& h : {s.hypothesis, s.surface_hypothesis()}) {
      const Side side = side_for(h.form);
      const auto a = surface_from_draws(dn, h, s.grid, side);
      const auto b = surface_from_draws(df, h, s.grid, side);
      worst_c = std::max(worst_c, std::abs(a.quantile_c - b.quantile_c));
      for (std::size_t p = 0; p < a.band.size(); ++p) {
        worst_band = std::max(worst_band, std::abs(a.band[p] - b.band[p]));
      }
    }
  }
  o.pass = worst_c <= 1e-6 && worst_band <= 1e-6;
  o.detail = fmt("max |dc| %.3g", worst_c) + fmt(", max |dband| %.3g", worst_band);
  return o;
}

Outcome criterion5() {
  const PowerStudy& p = power_study();
  const auto& s = p.summary;
  Outcome o;
  o.pass = s.rejection_proportion >= 0.95;
  o.detail = fmt("rejection %.3f", s.rejection_proportion) + " over " +
             std::to_string(s.analyzed) + " runs (" + std::to_string(s.excluded) + " excluded)" +
             (s.alert_median ? fmt(", median alert %.3f", *s.alert_median) : std::string()) +
             fmt(", %.1f s on one worker", p.seconds);
  return o;
}

Outcome criterion6() {
  Outcome o;
  const double bound = 0.05 + 3.0 * std::sqrt(0.05 * 0.95 / 200.0);
  ScenarioSpec base = build_scenario("1 - Reduced - Simple");
  base.hypothesis.form = Form::centered;
  // Oracle maxima of |f - f(ref)| over the slice and over the plane.
  const MeanModel& m = base.mean;
  double max2 = 0.0, max3 = 0.0;
  const Point2 c2 = base.hypothesis.centering_point();
  const double f2 = m.family().eval(c2.x1, c2.x2, m.theta());
  const double f3 = m.family().eval(base.reference.x1, base.reference.x2, m.theta());
  for (double b : base.grid.x2) {
    max2 = std::max(max2, std::abs(m.family().eval(*base.hypothesis.fixed_value, b, m.theta()) - f2));
    for (double a : base.grid.x1) {
      max3 = std::max(max3, std::abs(m.family().eval(a, b, m.theta()) - f3));
    }
  }
  BootstrapConfig cfg = boot(100, 10, 0);
  std::string detail;
  for (const auto& [label, lambda, surface] :
       {std::tuple{"slice", 1.2 * max2, false}, std::tuple{"plane", 1.2 * max3, true}}) {
    ScenarioSpec spec = base;
    spec.hypothesis.lambda = lambda;
    const StudySummary s = run_study(spec, 200, cfg, surface ? 6060 : 6061);
    const double rej = surface ? s.rejection_proportion_surface : s.rejection_proportion;
    o.pass = o.pass && rej <= bound;
    detail += std::string(detail.empty() ? "" : ", ") + label + fmt(" lambda %.2f", lambda) +
              fmt(" rejection %.3f", rej);
  }
  o.detail = detail + fmt(" (bound %.4f)", bound);
  return o;
}

Outcome criterion7() {
  Outcome o;
  std::vector<double> grid;
  for (int i = 0; i <= 60; ++i) grid.push_back(1.0 + 0.1 * i);
  const auto truth = discretize({1.1, 7.0}, grid);
  std::vector<std::optional<double>> at(grid.size()), ae(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (truth[i]) at[i] = 5.0;
  }
  struct Fix {
    Interval est;
    double recall, precision, onset, offset;
  };
  const std::vector<Fix> fixtures = {
      {{1.1, 7.0}, 1.0, 1.0, 0.0, 0.0},
      {{1.5, 7.0}, 56.0 / 60.0, 1.0, 0.4, 0.0},
      {{1.0, 6.0}, 50.0 / 60.0, 50.0 / 51.0, -0.1, -1.0},
      {{2.0, 5.0}, 31.0 / 60.0, 1.0, 0.9, -2.0},
  };
  for (const auto& f : fixtures) {
    const auto est = discretize(f.est, grid);
    for (std::size_t i = 0; i < grid.size(); ++i) ae[i] = est[i] ? std::optional(5.0) : std::nullopt;
    const auto m = interval_metrics(grid, truth, est, at, ae);
    const auto near = [](double a, double b) { return std::abs(a - b) <= 1e-12; };
    o.pass = o.pass && m.recall && *m.recall == f.recall && m.precision &&
             *m.precision == f.precision && near(*m.onset_error, f.onset) &&
             near(*m.offset_error, f.offset);
  }
  const auto& s = power_study().summary;
  o.pass = o.pass && s.precision_mean && *s.precision_mean >= 0.99;
  o.detail = std::to_string(fixtures.size()) + " fixtures exact" +
             (s.precision_mean ? fmt(", study mean precision %.4f", *s.precision_mean)
                               : std::string(", study precision missing")) +
             (s.recall_mean ? fmt(", mean recall %.4f", *s.recall_mean) : std::string());
  return o;
}

Outcome criterion8() {
  Outcome o;
  const MeanModel m("emax2", kEmax);
  const Interval d1{0, 10}, d2{0, 12};
  const MEDContour c = med_contour(m, EvalGrid::uniform(d1, 101, d2, 101), 80.0);
  // Dense brute-force scan for the range and the level set.
  const std::size_t n = 1001;
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  std::vector<double> f(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double a = d1.lo + d1.width() * static_cast<double>(i) / (n - 1);
      const double b = d2.lo + d2.width() * static_cast<double>(j) / (n - 1);
      f[i * n + j] = m.family().eval(a, b, m.theta());
      lo = std::min(lo, f[i * n + j]);
      hi = std::max(hi, f[i * n + j]);
    }
  }
  const double r_max = hi - lo;
  const double level = lo + 0.8 * r_max;
  double worst = 0.0;
  for (const auto& p : c.points) worst = std::max(worst, std::abs(eval_mean(m, p.x1, p.x2) - level));
  // Every dense crossing should have an emitted point nearby.
  double worst_gap = 0.0;
  for (std::size_t i = 0; i < n; i += 10) {
    for (std::size_t j = 0; j + 1 < n; ++j) {
      if ((f[i * n + j] - level) * (f[i * n + j + 1] - level) > 0.0) continue;
      const double a = d1.lo + d1.width() * static_cast<double>(i) / (n - 1);
      const double b = d2.lo + d2.width() * static_cast<double>(j) / (n - 1);
      double best = std::numeric_limits<double>::infinity();
      for (const auto& p : c.points) best = std::min(best, std::hypot(p.x1 - a, p.x2 - b));
      worst_gap = std::max(worst_gap, best);
    }
  }
  o.pass = !c.points.empty() && worst <= 1e-3 * r_max && std::abs(r_max - 129.394) < 1e-3 &&
           std::abs(c.r_max - r_max) < 1e-9 && worst_gap < 0.2;
  o.detail = std::to_string(c.points.size()) + " points" + fmt(", max level error %.2e", worst) +
             fmt(" (tol %.3f)", 1e-3 * r_max) + fmt(", R_max %.4f", r_max) +
             fmt(", max gap to dense crossings %.3f", worst_gap);
  return o;
}

Outcome criterion9() {
  const PowerStudy& p = power_study();
  const ScenarioSpec spec = build_scenario("1 - Full - Simple");
  BootstrapConfig cfg = boot(100, 10, 0);
  cfg.threads = 8;
  const auto t0 = Clock::now();
  const StudySummary s = run_study(spec, 100, cfg, 20240501);
  const double secs = seconds_since(t0);
  std::ostringstream js;
  write_study_json(js, s);
  Outcome o;
  o.pass = js.str() == p.json;
  o.detail = std::string(o.pass ? "identical" : "different") + " summary JSON (" +
             std::to_string(p.json.size()) + " bytes)" + fmt(", 8-worker rerun %.1f s", secs);
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"oracle equivalence", criterion1},  {"vanishing-noise alert", criterion2},
      {"2D/3D nesting", criterion3},       {"fast equals normal", criterion4},
      {"power", criterion5},               {"level", criterion6},
      {"metrics", criterion7},             {"MED contour", criterion8},
      {"determinism", criterion9},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    const auto t0 = Clock::now();
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("%s criterion %zu (%s): %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", i + 1,
                criteria[i].first, o.detail.c_str(), seconds_since(t0));
    std::fflush(stdout);
    if (!o.pass) ++failed;
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed,
              criteria.size());
  return failed == 0 ? 0 : 1;
}
