#include "alert_surface/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <sstream>

#include "alert_surface/errors.hpp"

namespace alert_surface {

namespace {

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

Interval observed_range(const std::vector<Observation>& obs, double Observation::*field) {
  Interval r{obs.front().*field, obs.front().*field};
  for (const auto& o : obs) {
    r.lo = std::min(r.lo, o.*field);
    r.hi = std::max(r.hi, o.*field);
  }
  return r;
}

// ---------------------------------------------------------------------------
// td2pLL

double td2pll_eval(double x1, double x2, std::span<const double> th) {
  const double ec50 = th[1] * std::pow(x1, -th[2]) + th[3];
  return 100.0 / (1.0 + std::pow(x2 / ec50, th[0]));
}

void td2pll_gradient(double x1, double x2, std::span<const double> th, std::span<double> g) {
  const double h = th[0], dl = th[1], gm = th[2];
  const double x1_pow = std::pow(x1, -gm);
  const double ec50 = dl * x1_pow + th[3];
  const double r = x2 / ec50;
  const double q = std::pow(r, h);
  const double df_dq = -100.0 / ((1.0 + q) * (1.0 + q));
  if (q == 0.0) {
    std::fill(g.begin(), g.end(), 0.0);
    return;
  }
  const double dq_dec50 = -h * q / ec50;
  g[0] = df_dq * q * std::log(r);
  g[1] = df_dq * dq_dec50 * x1_pow;
  g[2] = df_dq * dq_dec50 * (-dl * x1_pow * std::log(x1));
  g[3] = df_dq * dq_dec50;
}

void td2pll_grid(std::span<const double> th, std::span<const double> x1,
                 std::span<const double> x2, std::span<double> out) {
  const std::size_t n2 = x2.size();
  for (std::size_t i = 0; i < x1.size(); ++i) {
    const double ec50 = th[1] * std::pow(x1[i], -th[2]) + th[3];
    double* row = out.data() + i * n2;
    for (std::size_t j = 0; j < n2; ++j) {
      row[j] = 100.0 / (1.0 + std::pow(x2[j] / ec50, th[0]));
    }
  }
}

// Dose where the per-dose mean response (pooled over x1) first reaches 50,
// by linear interpolation; the dose with mean closest to 50 otherwise.
std::vector<double> td2pll_start(const Dataset& data) {
  std::map<double, std::pair<double, std::size_t>> by_dose;
  for (const auto& o : data.observations()) {
    auto& [sum, count] = by_dose[o.x2];
    sum += o.y;
    ++count;
  }
  std::vector<std::pair<double, double>> curve;
  for (const auto& [dose, acc] : by_dose) {
    curve.emplace_back(dose, acc.first / static_cast<double>(acc.second));
  }

  double c0 = curve.front().first;
  double best = std::numeric_limits<double>::infinity();
  for (const auto& [dose, mean] : curve) {
    if (std::abs(mean - 50.0) < best) {
      best = std::abs(mean - 50.0);
      c0 = dose;
    }
  }
  for (std::size_t k = 1; k < curve.size(); ++k) {
    const auto [d0, m0] = curve[k - 1];
    const auto [d1, m1] = curve[k];
    if ((m0 - 50.0) * (m1 - 50.0) <= 0.0 && m0 != m1) {
      c0 = d0 + (50.0 - m0) * (d1 - d0) / (m1 - m0);
      break;
    }
  }
  if (!(c0 > 0.0)) {
    c0 = std::max(1e-3 * data.domain_x2().width(), 1e-6);
  }
  std::vector<double> best_theta = {1.0, 1.0, 1.0, c0};

  // From (1, 1, 1, c0) the search tends to slide into the gamma -> infinity
  // corner, where all but the earliest time share one EC50. A coarse scan of
  // the cell-mean RSS picks a start in the right basin.
  std::map<std::pair<double, double>, std::pair<double, double>> cells;
  for (const auto& o : data.observations()) {
    auto& [sum, count] = cells[{o.x1, o.x2}];
    sum += o.y;
    count += 1.0;
  }
  auto rss = [&](const std::vector<double>& th) {
    double s = 0.0;
    for (const auto& [x, acc] : cells) {
      const double e = acc.first / acc.second - td2pll_eval(x.first, x.second, th);
      s += acc.second * e * e;
    }
    return std::isfinite(s) ? s : std::numeric_limits<double>::infinity();
  };
  double best_rss = rss(best_theta);
  const double span = data.domain_x2().hi > 0.0 ? data.domain_x2().hi : 1.0;
  const double t0 = std::max(data.domain_x1().lo, 1e-3);
  for (double h : {0.5, 1.0, 2.0, 4.0}) {
    for (double gamma : {0.5, 1.0, 2.0, 4.0}) {
      for (double c : {0.05, 0.15, 0.4, 1.0}) {
        for (double d : {0.1, 0.3, 1.0, 3.0}) {
          std::vector<double> th = {h, d * span * std::pow(t0, gamma), gamma, c * span};
          const double r = rss(th);
          if (r < best_rss) {
            best_rss = r;
            best_theta = std::move(th);
          }
        }
      }
    }
  }
  return best_theta;
}

// ---------------------------------------------------------------------------
// Emax + Emax + tau * x1 * x2

double emax2_eval(double x1, double x2, std::span<const double> th) {
  return th[0] + th[1] * x1 / (th[2] + x1) + th[3] * x2 / (th[4] + x2) + th[5] * x1 * x2;
}

void emax2_gradient(double x1, double x2, std::span<const double> th, std::span<double> g) {
  const double a = th[2] + x1;
  const double b = th[4] + x2;
  g[0] = 1.0;
  g[1] = x1 / a;
  g[2] = -th[1] * x1 / (a * a);
  g[3] = x2 / b;
  g[4] = -th[3] * x2 / (b * b);
  g[5] = x1 * x2;
}

std::vector<double> emax2_start(const Dataset& data) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const auto& o : data.observations()) {
    lo = std::min(lo, o.y);
    hi = std::max(hi, o.y);
  }
  const double range = hi > lo ? hi - lo : 1.0;
  const double h1 = std::max(0.5 * (data.domain_x1().lo + data.domain_x1().hi), 1e-3);
  const double h2 = std::max(0.5 * (data.domain_x2().lo + data.domain_x2().hi), 1e-3);
  return {lo, range, h1, range, h2, 0.0};
}

MeanFamily make_td2pll() {
  MeanFamily f;
  f.name = "td2pll";
  f.param_names = {"h", "delta", "gamma", "c0"};
  f.positive = {true, true, true, true};
  f.eval = td2pll_eval;
  f.gradient = td2pll_gradient;
  f.grid_eval = td2pll_grid;
  f.start = td2pll_start;
  return f;
}

MeanFamily make_emax2() {
  MeanFamily f;
  f.name = "emax2";
  f.param_names = {"theta0", "e1", "h1", "e2", "h2", "tau"};
  f.positive = {false, false, true, false, true, false};
  f.eval = emax2_eval;
  f.gradient = emax2_gradient;
  f.start = emax2_start;
  return f;
}

struct Registry {
  std::mutex mutex;
  std::map<std::string, FamilyPtr, std::less<>> families;

  Registry() {
    families["td2pll"] = std::make_shared<const MeanFamily>(make_td2pll());
    families["emax2"] = std::make_shared<const MeanFamily>(make_emax2());
  }
};

Registry& registry() {
  static Registry r;
  return r;
}

}  // namespace

// ---------------------------------------------------------------------------

Dataset::Dataset(std::vector<Observation> observations, std::optional<Interval> domain_x1,
                 std::optional<Interval> domain_x2, std::optional<Point2> reference)
    : obs_(std::move(observations)) {
  if (obs_.empty()) throw DataError("dataset is empty");
  for (std::size_t i = 0; i < obs_.size(); ++i) {
    const auto& o = obs_[i];
    if (!std::isfinite(o.x1) || !std::isfinite(o.x2) || !std::isfinite(o.y)) {
      throw DataError("observation " + std::to_string(i) + " has a non-finite field");
    }
  }
  domain_x1_ = domain_x1.value_or(observed_range(obs_, &Observation::x1));
  domain_x2_ = domain_x2.value_or(observed_range(obs_, &Observation::x2));
  if (!(domain_x1_.lo <= domain_x1_.hi) || !(domain_x2_.lo <= domain_x2_.hi)) {
    throw DataError("covariate domain has lo > hi");
  }
  for (std::size_t i = 0; i < obs_.size(); ++i) {
    if (!domain_x1_.contains(obs_[i].x1) || !domain_x2_.contains(obs_[i].x2)) {
      throw DataError("observation " + std::to_string(i) + " lies outside the covariate domain");
    }
  }
  reference_ = reference.value_or(Point2{domain_x1_.lo, domain_x2_.lo});
  if (!domain_x1_.contains(reference_.x1) || !domain_x2_.contains(reference_.x2)) {
    throw DataError("reference point lies outside the covariate domain");
  }
}

std::vector<Point2> Dataset::design_points() const {
  std::vector<Point2> pts;
  for (const auto& o : obs_) {
    const Point2 p{o.x1, o.x2};
    if (std::find(pts.begin(), pts.end(), p) == pts.end()) pts.push_back(p);
  }
  return pts;
}

FamilyPtr find_family(std::string_view name) {
  auto& r = registry();
  std::lock_guard lock(r.mutex);
  auto it = r.families.find(name);
  if (it == r.families.end()) {
    throw InvalidArgument("unknown mean family '" + std::string(name) + "'");
  }
  return it->second;
}

void register_family(MeanFamily family) {
  if (family.name.empty()) throw InvalidArgument("mean family needs a name");
  if (!family.eval) throw InvalidArgument("mean family '" + family.name + "' has no evaluator");
  if (family.param_names.empty()) {
    throw InvalidArgument("mean family '" + family.name + "' has no parameters");
  }
  if (family.positive.empty()) family.positive.assign(family.param_names.size(), false);
  if (family.positive.size() != family.param_names.size()) {
    throw InvalidArgument("constraint mask length does not match parameter count");
  }
  auto& r = registry();
  std::lock_guard lock(r.mutex);
  const std::string name = family.name;
  r.families[name] = std::make_shared<const MeanFamily>(std::move(family));
}

std::vector<std::string> registered_families() {
  auto& r = registry();
  std::lock_guard lock(r.mutex);
  std::vector<std::string> names;
  for (const auto& [name, _] : r.families) names.push_back(name);
  return names;
}

void validate_theta(const MeanFamily& family, std::span<const double> theta) {
  if (theta.size() != family.n_params()) {
    std::ostringstream msg;
    msg << family.name << " expects " << family.n_params() << " parameters, got "
        << theta.size();
    throw InvalidArgument(msg.str());
  }
  if (!all_finite(theta)) throw InvalidArgument(family.name + " parameters must be finite");
  for (std::size_t i = 0; i < theta.size(); ++i) {
    if (family.positive[i] && !(theta[i] > 0.0)) {
      throw InvalidArgument(family.name + " parameter '" + family.param_names[i] +
                            "' must be positive");
    }
  }
}

MeanModel::MeanModel(FamilyPtr family, std::vector<double> theta)
    : family_(std::move(family)), theta_(std::move(theta)) {
  if (!family_) throw InvalidArgument("null mean family");
  validate_theta(*family_, theta_);
}

MeanModel::MeanModel(std::string_view family, std::vector<double> theta)
    : MeanModel(find_family(family), std::move(theta)) {}

double eval_mean(const MeanModel& model, double x1, double x2) {
  return model.family().eval(x1, x2, model.theta());
}

void eval_mean_grid(const MeanFamily& family, std::span<const double> theta,
                    std::span<const double> x1, std::span<const double> x2,
                    std::span<double> out) {
  if (out.size() != x1.size() * x2.size()) {
    throw InvalidArgument("grid output buffer has the wrong size");
  }
  if (family.grid_eval) {
    family.grid_eval(theta, x1, x2, out);
    return;
  }
  for (std::size_t i = 0; i < x1.size(); ++i) {
    for (std::size_t j = 0; j < x2.size(); ++j) {
      out[i * x2.size() + j] = family.eval(x1[i], x2[j], theta);
    }
  }
}

double td2pll_ec50(std::span<const double> theta, double x1) {
  return theta[1] * std::pow(x1, -theta[2]) + theta[3];
}

// ---------------------------------------------------------------------------
// Standard deviation model

std::string_view to_string(SigmaTerm term) {
  switch (term) {
    case SigmaTerm::intercept: return "intercept";
    case SigmaTerm::x2: return "x2";
    case SigmaTerm::x2_sq: return "x2^2";
    case SigmaTerm::x1: return "x1";
    case SigmaTerm::x2_sq_x1: return "x2^2*x1";
  }
  return "?";
}

SigmaTerm parse_sigma_term(std::string_view name) {
  if (name == "intercept" || name == "1") return SigmaTerm::intercept;
  if (name == "x2" || name == "dose") return SigmaTerm::x2;
  if (name == "x2^2" || name == "x2_sq" || name == "dose^2") return SigmaTerm::x2_sq;
  if (name == "x1" || name == "time") return SigmaTerm::x1;
  if (name == "x2^2*x1" || name == "x2_sq_x1" || name == "dose^2*time") {
    return SigmaTerm::x2_sq_x1;
  }
  throw InvalidArgument("unknown sigma term '" + std::string(name) + "'");
}

std::vector<SigmaTerm> parse_sigma_terms(std::string_view spec) {
  if (spec == "constant") return constant_sigma_terms();
  if (spec == "complex") return complex_sigma_terms();
  std::vector<SigmaTerm> terms;
  std::size_t pos = 0;
  while (pos <= spec.size()) {
    const auto comma = spec.find(',', pos);
    const auto end = comma == std::string_view::npos ? spec.size() : comma;
    auto token = spec.substr(pos, end - pos);
    while (!token.empty() && token.front() == ' ') token.remove_prefix(1);
    while (!token.empty() && token.back() == ' ') token.remove_suffix(1);
    terms.push_back(parse_sigma_term(token));
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  return terms;
}

double sigma_term_value(SigmaTerm term, double x1, double x2) {
  switch (term) {
    case SigmaTerm::intercept: return 1.0;
    case SigmaTerm::x2: return x2;
    case SigmaTerm::x2_sq: return x2 * x2;
    case SigmaTerm::x1: return x1;
    case SigmaTerm::x2_sq_x1: return x2 * x2 * x1;
  }
  return 0.0;
}

std::vector<SigmaTerm> constant_sigma_terms() { return {SigmaTerm::intercept}; }

std::vector<SigmaTerm> complex_sigma_terms() {
  return {SigmaTerm::intercept, SigmaTerm::x2, SigmaTerm::x2_sq, SigmaTerm::x1,
          SigmaTerm::x2_sq_x1};
}

bool is_intercept_only(std::span<const SigmaTerm> terms) {
  return terms.size() == 1 && terms[0] == SigmaTerm::intercept;
}

SigmaModel::SigmaModel(std::vector<SigmaTerm> terms, std::vector<double> coef)
    : terms_(std::move(terms)), coef_(std::move(coef)) {
  if (terms_.empty() || terms_.front() != SigmaTerm::intercept) {
    throw InvalidArgument("sigma terms must be nonempty and start with the intercept");
  }
  if (coef_.size() != terms_.size()) {
    throw InvalidArgument("sigma model has " + std::to_string(terms_.size()) + " terms but " +
                          std::to_string(coef_.size()) + " coefficients");
  }
  if (!all_finite(coef_)) throw InvalidArgument("sigma coefficients must be finite");
}

double SigmaModel::log_sigma(double x1, double x2) const {
  double g = 0.0;
  for (std::size_t i = 0; i < terms_.size(); ++i) {
    g += coef_[i] * sigma_term_value(terms_[i], x1, x2);
  }
  return g;
}

double eval_sigma(const SigmaModel& model, double x1, double x2) {
  return std::exp(model.log_sigma(x1, x2));
}

// ---------------------------------------------------------------------------
// Hypotheses

std::string_view to_string(Dimension d) {
  switch (d) {
    case Dimension::fixed_x1: return "fixed_x1";
    case Dimension::fixed_x2: return "fixed_x2";
    case Dimension::surface: return "surface";
  }
  return "?";
}

std::string_view to_string(Form f) {
  switch (f) {
    case Form::centered: return "centered";
    case Form::undercut: return "undercut";
    case Form::exceeded: return "exceeded";
  }
  return "?";
}

std::string_view to_string(Side s) { return s == Side::lower ? "lower" : "upper"; }

Dimension parse_dimension(std::string_view s) {
  if (s == "fixed_x1") return Dimension::fixed_x1;
  if (s == "fixed_x2") return Dimension::fixed_x2;
  if (s == "surface") return Dimension::surface;
  throw InvalidArgument("unknown dimension '" + std::string(s) + "'");
}

Form parse_form(std::string_view s) {
  if (s == "centered") return Form::centered;
  if (s == "undercut") return Form::undercut;
  if (s == "exceeded") return Form::exceeded;
  throw InvalidArgument("unknown hypothesis form '" + std::string(s) + "'");
}

Side side_for(Form form) noexcept { return form == Form::undercut ? Side::upper : Side::lower; }

Point2 Hypothesis::centering_point() const {
  switch (dimension) {
    case Dimension::fixed_x1: return {fixed_value.value_or(reference.x1), reference.x2};
    case Dimension::fixed_x2: return {reference.x1, fixed_value.value_or(reference.x2)};
    case Dimension::surface: return reference;
  }
  return reference;
}

Hypothesis Hypothesis::with_dimension(Dimension d) const {
  Hypothesis h = *this;
  h.dimension = d;
  if (d == Dimension::surface) h.fixed_value.reset();
  return h;
}

void validate(const Hypothesis& hyp, const Interval* domain_x1, const Interval* domain_x2) {
  const bool fixed = hyp.dimension != Dimension::surface;
  if (fixed != hyp.fixed_value.has_value()) {
    throw InvalidArgument("a fixed value is required exactly for fixed_x1 / fixed_x2");
  }
  if (!(hyp.alpha > 0.0 && hyp.alpha < 1.0)) throw InvalidArgument("alpha must lie in (0, 1)");
  if (!std::isfinite(hyp.lambda)) throw InvalidArgument("lambda must be finite");
  if (hyp.form == Form::centered && !(hyp.lambda > 0.0)) {
    throw InvalidArgument("lambda must be positive for the centered form");
  }
  if (hyp.dimension == Dimension::fixed_x1 && domain_x1 && !domain_x1->contains(*hyp.fixed_value)) {
    throw InvalidArgument("fixed x1 value lies outside the x1 domain");
  }
  if (hyp.dimension == Dimension::fixed_x2 && domain_x2 && !domain_x2->contains(*hyp.fixed_value)) {
    throw InvalidArgument("fixed x2 value lies outside the x2 domain");
  }
}

double delta(const MeanModel& model, const Hypothesis& hyp, double x1, double x2) {
  const double f = eval_mean(model, x1, x2);
  if (hyp.form != Form::centered) return f;
  const Point2 ref = hyp.centering_point();
  return std::abs(f - eval_mean(model, ref.x1, ref.x2));
}

// ---------------------------------------------------------------------------
// Grids

std::vector<double> linspace(double lo, double hi, std::size_t n) {
  if (n < 2) throw InvalidArgument("linspace needs at least 2 points");
  std::vector<double> v(n);
  const double span = hi - lo;
  const double steps = static_cast<double>(n - 1);
  for (std::size_t i = 0; i < n; ++i) v[i] = lo + span * static_cast<double>(i) / steps;
  v.back() = hi;
  return v;
}

EvalGrid EvalGrid::uniform(const Interval& d1, std::size_t n1, const Interval& d2, std::size_t n2) {
  EvalGrid g{linspace(d1.lo, d1.hi, n1), linspace(d2.lo, d2.hi, n2)};
  validate(g);
  return g;
}

void validate(const EvalGrid& grid) {
  for (const auto* axis : {&grid.x1, &grid.x2}) {
    if (axis->size() < 2) throw InvalidArgument("grid axes need at least 2 points");
    if (!all_finite(*axis)) throw InvalidArgument("grid points must be finite");
    if (!std::is_sorted(axis->begin(), axis->end()) ||
        std::adjacent_find(axis->begin(), axis->end()) != axis->end()) {
      throw InvalidArgument("grid points must be strictly ascending");
    }
  }
}

EvalAxes evaluation_axes(const Hypothesis& hyp, const EvalGrid& grid) {
  switch (hyp.dimension) {
    case Dimension::fixed_x1: return {{*hyp.fixed_value}, grid.x2};
    case Dimension::fixed_x2: return {grid.x1, {*hyp.fixed_value}};
    case Dimension::surface: return {grid.x1, grid.x2};
  }
  return {};
}

void delta_grid(const MeanFamily& family, std::span<const double> theta, const Hypothesis& hyp,
                const EvalAxes& axes, std::span<double> out) {
  eval_mean_grid(family, theta, axes.x1, axes.x2, out);
  if (hyp.form != Form::centered) return;
  const Point2 ref = hyp.centering_point();
  const double f_ref = family.eval(ref.x1, ref.x2, theta);
  for (double& v : out) v = std::abs(v - f_ref);
}

}  // namespace alert_surface
