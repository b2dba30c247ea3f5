#include "alert_surface/simulation.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include "alert_surface/errors.hpp"
#include "alert_surface/estimator.hpp"
#include "alert_surface/parallel.hpp"
#include "alert_surface/random.hpp"
#include "json.hpp"

namespace alert_surface {

namespace {

using nlohmann::json;

const std::vector<double> kTd2pllTheta = {2.9, 5.9, 1.8, 4.8};
const std::vector<double> kEmax2Theta = {0.0, 80.0, 3.0, 120.0, 10.0, 0.02};

struct Scenario1Sigma {
  const char* label;
  std::vector<double> coef;
};

const std::array<Scenario1Sigma, 4>& scenario1_sigmas() {
  static const std::array<Scenario1Sigma, 4> s = {{
      {"Simple", {2.081}},
      {"Small", {2.081, 0.162, -0.019, 0.06, -0.001}},
      {"Medium", {2.081, 0.215, -0.025, 0.08, -0.002}},
      {"Large", {2.081, 0.269, -0.032, 0.1, -0.002}},
  }};
  return s;
}

std::vector<Point2> scenario1_points() {
  const std::array<double, 3> times = {1.0, 2.0, 7.0};
  const std::array<double, 6> doses = {0.0, std::pow(10.0, -1.0), std::pow(10.0, -0.5),
                                       1.0, std::pow(10.0, 0.5), 10.0};
  std::vector<Point2> pts;
  for (double t : times) {
    for (double d : doses) pts.push_back({t, d});
  }
  return pts;
}

std::vector<Point2> factorial_points() {
  std::vector<Point2> pts;
  for (double d1 : {0.0, 5.0, 10.0}) {
    for (double d2 : {0.0, 6.0, 12.0}) pts.push_back({d1, d2});
  }
  return pts;
}

std::vector<SigmaTerm> assumed_terms(SigmaAssumption a, const std::vector<SigmaTerm>& truth) {
  switch (a) {
    case SigmaAssumption::truth: return truth;
    case SigmaAssumption::constant: return constant_sigma_terms();
    case SigmaAssumption::complex: return complex_sigma_terms();
  }
  return truth;
}

ScenarioSpec scenario1(const std::string& name, bool full, const Scenario1Sigma& sig,
                       SigmaAssumption assumption) {
  const auto terms = sig.coef.size() == 1 ? constant_sigma_terms() : complex_sigma_terms();
  const std::size_t n = full ? 250 : 54;
  const Interval t{1.0, 7.0};
  const Interval d{0.0, 10.0};
  const auto pts = scenario1_points();
  Hypothesis hyp;
  hyp.dimension = Dimension::fixed_x1;
  hyp.fixed_value = 4.0;
  hyp.form = Form::undercut;
  hyp.lambda = 50.0;
  hyp.alpha = 0.05;
  hyp.reference = {t.lo, d.lo};
  return ScenarioSpec{name,
                      MeanModel("td2pll", kTd2pllTheta),
                      SigmaModel(terms, sig.coef),
                      Design::round_robin(pts, n),
                      n,
                      t,
                      d,
                      hyp.reference,
                      hyp,
                      EvalGrid::uniform(t, 101, d, 101),
                      assumed_terms(assumption, terms)};
}

ScenarioSpec scenario2(const std::string& name, Design design, std::size_t n,
                       SigmaAssumption assumption) {
  const Interval d1{0.0, 10.0};
  const Interval d2{0.0, 12.0};
  MeanModel mean("emax2", kEmax2Theta);
  EvalGrid grid = EvalGrid::uniform(d1, 101, d2, 101);
  Hypothesis hyp;
  hyp.dimension = Dimension::fixed_x1;
  hyp.fixed_value = 7.0;
  hyp.form = Form::exceeded;
  hyp.lambda = med_contour(mean, grid, 80.0).level();
  hyp.alpha = 0.05;
  hyp.reference = {d1.lo, d2.lo};
  const auto terms = constant_sigma_terms();
  return ScenarioSpec{name,
                      std::move(mean),
                      SigmaModel(terms, {3.401}),
                      std::move(design),
                      n,
                      d1,
                      d2,
                      hyp.reference,
                      hyp,
                      std::move(grid),
                      assumed_terms(assumption, terms)};
}

double mean_of(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

std::optional<double> sd_of(const std::vector<double>& v) {
  if (v.size() < 2) return std::nullopt;
  const double m = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

void mean_sd(const std::vector<double>& v, std::optional<double>& mean, std::optional<double>& sd) {
  if (v.empty()) return;
  mean = mean_of(v);
  sd = sd_of(v);
}

Interval read_interval(const json& j, const char* key) {
  const auto& v = j.at(key);
  if (!v.is_array() || v.size() != 2) {
    throw InvalidArgument(std::string(key) + " must be a [lo, hi] pair");
  }
  return {v[0].get<double>(), v[1].get<double>()};
}

std::vector<SigmaTerm> read_terms(const json& j) {
  if (j.is_string()) return parse_sigma_terms(j.get<std::string>());
  std::vector<SigmaTerm> terms;
  for (const auto& t : j) terms.push_back(parse_sigma_term(t.get<std::string>()));
  return terms;
}

}  // namespace

SigmaAssumption parse_sigma_assumption(std::string_view s) {
  if (s == "truth") return SigmaAssumption::truth;
  if (s == "constant") return SigmaAssumption::constant;
  if (s == "complex") return SigmaAssumption::complex;
  throw InvalidArgument("unknown sigma assumption '" + std::string(s) + "'");
}

void validate(const ScenarioSpec& spec) {
  validate(spec.design, spec.n);
  validate(spec.grid);
  validate(spec.hypothesis, &spec.domain_x1, &spec.domain_x2);
  if (spec.hypothesis.dimension == Dimension::surface) {
    throw InvalidArgument("scenario hypothesis must fix one covariate");
  }
  for (const auto& p : spec.design.points) {
    if (!spec.domain_x1.contains(p.x1) || !spec.domain_x2.contains(p.x2)) {
      throw InvalidArgument("design point lies outside the scenario domain");
    }
  }
}

std::vector<std::string> scenario_names() {
  std::vector<std::string> names;
  for (const char* design : {"Full", "Reduced"}) {
    for (const auto& s : scenario1_sigmas()) {
      names.push_back(std::string("1 - ") + design + " - " + s.label);
    }
  }
  for (const char* design : {"Factorial 3x3", "D-optimal"}) {
    for (int n : {152, 90, 45}) {
      names.push_back(std::string("2 - ") + design + " - N" + std::to_string(n));
    }
  }
  return names;
}

std::vector<Point2> doptimal_placeholder_points() {
  return {{0.0, 0.0},  {0.0, 12.0}, {10.0, 0.0}, {10.0, 12.0},
          {2.5, 4.0},  {2.5, 12.0}, {10.0, 3.5}, {5.0, 6.0}};
}

Design weighted_design(std::span<const Point2> points, std::span<const double> weights,
                       std::size_t n) {
  if (points.empty() || points.size() != weights.size()) {
    throw InvalidArgument("design needs one weight per support point");
  }
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  if (!(total > 0.0)) throw InvalidArgument("design weights must sum to a positive value");
  Design d;
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t j = 0; j < points.size(); ++j) {
    if (!(weights[j] >= 0.0)) throw InvalidArgument("design weights must be nonnegative");
    const double exact = static_cast<double>(n) * weights[j] / total;
    const auto whole = static_cast<std::size_t>(std::floor(exact));
    d.points.push_back({points[j].x1, points[j].x2, whole});
    assigned += whole;
    remainders.emplace_back(exact - static_cast<double>(whole), j);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t k = 0; assigned < n; ++k, ++assigned) {
    ++d.points[remainders[k % remainders.size()].second].replicates;
  }
  std::erase_if(d.points, [](const DesignPoint& p) { return p.replicates == 0; });
  return d;
}

ScenarioSpec build_scenario(std::string_view name, SigmaAssumption assumption,
                            const std::optional<SupportDesign>& doptimal_design) {
  const std::string key(name);
  for (const char* design : {"Full", "Reduced"}) {
    for (const auto& s : scenario1_sigmas()) {
      if (key == std::string("1 - ") + design + " - " + s.label) {
        return scenario1(key, std::string(design) == "Full", s, assumption);
      }
    }
  }
  for (int n : {152, 90, 45}) {
    const auto count = static_cast<std::size_t>(n);
    if (key == "2 - Factorial 3x3 - N" + std::to_string(n)) {
      return scenario2(key, Design::round_robin(factorial_points(), count), count, assumption);
    }
    if (key == "2 - D-optimal - N" + std::to_string(n)) {
      Design d;
      if (doptimal_design) {
        d = weighted_design(doptimal_design->points, doptimal_design->weights, count);
      } else {
        const auto pts = doptimal_placeholder_points();
        d = Design::round_robin(pts, count);
      }
      return scenario2(key, std::move(d), count, assumption);
    }
  }
  throw InvalidArgument("unknown scenario '" + key + "'");
}

ScenarioSpec scenario_from_json(std::string_view json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("scenario config is not valid JSON: ") + e.what());
  }
  try {
    const auto& mj = j.at("mean");
    MeanModel mean(mj.at("family").get<std::string>(), mj.at("theta").get<std::vector<double>>());
    const auto& sj = j.at("sigma");
    SigmaModel sigma(read_terms(sj.at("terms")), sj.at("coef").get<std::vector<double>>());
    const auto n = j.at("n").get<std::size_t>();

    Design design;
    std::vector<Point2> bare;
    for (const auto& p : j.at("design")) {
      if (p.contains("replicates")) {
        design.points.push_back(
            {p.at("x1").get<double>(), p.at("x2").get<double>(), p.at("replicates").get<std::size_t>()});
      } else {
        bare.push_back({p.at("x1").get<double>(), p.at("x2").get<double>()});
      }
    }
    if (!bare.empty()) {
      if (!design.points.empty()) {
        throw InvalidArgument("design entries must either all carry replicates or none");
      }
      design = Design::round_robin(bare, n);
    }

    const Interval d1 = read_interval(j, "domain_x1");
    const Interval d2 = read_interval(j, "domain_x2");
    Point2 ref{d1.lo, d2.lo};
    if (j.contains("reference")) {
      const auto r = j.at("reference").get<std::vector<double>>();
      if (r.size() != 2) throw InvalidArgument("reference must be an [x1, x2] pair");
      ref = {r[0], r[1]};
    }

    const auto& hj = j.at("hypothesis");
    Hypothesis hyp;
    hyp.dimension = parse_dimension(hj.value("dimension", std::string("fixed_x1")));
    if (hj.contains("fixed_value")) hyp.fixed_value = hj.at("fixed_value").get<double>();
    hyp.form = parse_form(hj.at("form").get<std::string>());
    hyp.lambda = hj.at("lambda").get<double>();
    hyp.alpha = hj.value("alpha", 0.05);
    hyp.reference = ref;

    std::size_t n1 = 101, n2 = 101;
    if (j.contains("grid")) {
      n1 = j["grid"].value("x1_points", n1);
      n2 = j["grid"].value("x2_points", n2);
    }
    const auto fit_terms =
        j.contains("fit_sigma_terms") ? read_terms(j.at("fit_sigma_terms")) : sigma.terms();

    ScenarioSpec spec{j.value("name", std::string("custom")),
                      std::move(mean),
                      std::move(sigma),
                      std::move(design),
                      n,
                      d1,
                      d2,
                      ref,
                      hyp,
                      EvalGrid::uniform(d1, n1, d2, n2),
                      fit_terms};
    validate(spec);
    return spec;
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("scenario config: ") + e.what());
  }
}

double sample_quantile(std::vector<double> values, double prob) {
  if (values.empty()) throw InvalidArgument("quantile of an empty sample");
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * prob;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

StudySummary run_study(const ScenarioSpec& spec, std::size_t runs, const BootstrapConfig& cfg,
                       std::uint64_t seed) {
  if (runs < 1) throw InvalidArgument("a study needs at least one run");
  validate(spec);
  validate(cfg);

  const Hypothesis hyp_fixed = spec.hypothesis;
  const Hypothesis hyp_surface = spec.surface_hypothesis();
  const Side side = side_for(hyp_fixed.form);
  const FamilyPtr family = spec.mean.family_ptr();

  // Truth from the generating model, independent of the band machinery.
  const auto free_axis = hyp_fixed.dimension == Dimension::fixed_x1 ? spec.grid.x2 : spec.grid.x1;
  const auto truth_fixed = true_alert(spec.mean, hyp_fixed, *hyp_fixed.fixed_value, free_axis);
  const auto truth_curve = true_alert_curve(spec.mean, hyp_surface, spec.grid);
  std::vector<bool> t_true(truth_curve.size());
  for (std::size_t i = 0; i < truth_curve.size(); ++i) t_true[i] = truth_curve[i].has_value();

  std::vector<RunRecord> records(runs);
  parallel_for(runs, resolve_workers(cfg.threads), [&](std::size_t r) {
    RunRecord& rec = records[r];
    const std::uint64_t run_key = stream_key({seed, 0x5eedULL, r});
    const Dataset data = simulate_dataset(spec.design, spec.mean, spec.sigma,
                                          stream_key({run_key, 0}), spec.domain_x1,
                                          spec.domain_x2, spec.reference);
    FitOptions initial;
    initial.seed = stream_key({run_key, 1});
    BootstrapConfig run_cfg = cfg;
    run_cfg.seed = stream_key({run_key, 2});
    run_cfg.threads = 1;

    BootstrapDraws draws;
    try {
      const FitResult fit = fit_gamlss(data, family, spec.fit_sigma_terms, initial);
      draws = draw_bootstrap(data, fit, run_cfg);
    } catch (const ConvergenceError&) {
      rec.excluded = true;
      return;
    } catch (const DataError&) {
      rec.excluded = true;
      return;
    }

    const auto fixed = decide(surface_from_draws(draws, hyp_fixed, spec.grid, side), hyp_fixed);
    const auto surf =
        decide(surface_from_draws(draws, hyp_surface, spec.grid, side), hyp_surface);
    rec.reject_fixed = fixed.reject;
    rec.alert_fixed = fixed.alert_dose;
    rec.reject_surface = surf.reject;
    rec.alert_curve = surf.alert_curve;
    std::vector<bool> t_est(surf.alert_curve.size());
    for (std::size_t i = 0; i < t_est.size(); ++i) t_est[i] = surf.alert_curve[i].has_value();
    rec.metrics = interval_metrics(spec.grid.x1, t_true, t_est, truth_curve, surf.alert_curve);
  });

  StudySummary s;
  s.scenario = spec.name;
  s.runs = runs;
  s.seed = seed;
  s.b1 = cfg.b1;
  s.b2 = cfg.b2;
  s.algorithm = cfg.algorithm;
  s.true_alert = truth_fixed;

  std::vector<double> alerts, recall, precision, onset, offset, rmse;
  std::size_t rej_fixed = 0, rej_surface = 0;
  std::vector<std::vector<double>> errors(spec.grid.x1.size());
  for (const auto& rec : records) {
    if (rec.excluded) {
      ++s.excluded;
      continue;
    }
    ++s.analyzed;
    rej_fixed += rec.reject_fixed ? 1 : 0;
    rej_surface += rec.reject_surface ? 1 : 0;
    if (rec.alert_fixed) alerts.push_back(*rec.alert_fixed);
    const auto& m = rec.metrics;
    if (m.recall) recall.push_back(*m.recall);
    if (m.precision) precision.push_back(*m.precision);
    if (m.onset_error) onset.push_back(*m.onset_error);
    if (m.offset_error) offset.push_back(*m.offset_error);
    if (m.rmse) rmse.push_back(*m.rmse);
    for (std::size_t i = 0; i < errors.size(); ++i) {
      if (truth_curve[i] && rec.alert_curve[i]) {
        errors[i].push_back(*rec.alert_curve[i] - *truth_curve[i]);
      }
    }
  }
  if (s.analyzed == 0) {
    throw ConvergenceError("all " + std::to_string(runs) + " simulation runs were excluded");
  }
  s.rejection_proportion = static_cast<double>(rej_fixed) / static_cast<double>(s.analyzed);
  s.rejection_proportion_surface =
      static_cast<double>(rej_surface) / static_cast<double>(s.analyzed);
  if (!alerts.empty()) {
    s.alert_median = sample_quantile(alerts, 0.5);
    s.alert_sd = sd_of(alerts);
  }
  mean_sd(recall, s.recall_mean, s.recall_sd);
  mean_sd(precision, s.precision_mean, s.precision_sd);
  mean_sd(onset, s.onset_mean, s.onset_sd);
  mean_sd(offset, s.offset_mean, s.offset_sd);
  if (!rmse.empty()) {
    s.rmse_quartiles = {sample_quantile(rmse, 0.25), sample_quantile(rmse, 0.5),
                        sample_quantile(rmse, 0.75)};
  }
  for (std::size_t i = 0; i < errors.size(); ++i) {
    if (errors[i].empty()) continue;
    s.alert_error.push_back({spec.grid.x1[i], errors[i].size(), sample_quantile(errors[i], 0.1),
                             sample_quantile(errors[i], 0.5), sample_quantile(errors[i], 0.9)});
  }
  s.records = std::move(records);
  return s;
}

}  // namespace alert_surface
