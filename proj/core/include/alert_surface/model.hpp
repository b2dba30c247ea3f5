#pragma once

// Domain types: observations, datasets, parametric mean families, the
// log-linear standard-deviation model, hypotheses and evaluation grids.

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace alert_surface {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  bool contains(double x) const noexcept { return x >= lo && x <= hi; }
  double width() const noexcept { return hi - lo; }
};

struct Point2 {
  double x1 = 0.0;
  double x2 = 0.0;

  friend bool operator==(const Point2&, const Point2&) = default;
};

struct Observation {
  double x1 = 0.0;  ///< covariate 1 (time, or dose of compound 1)
  double x2 = 0.0;  ///< covariate 2 (dose)
  double y = 0.0;   ///< response
};

/// Observations plus the covariate domains T x D and the reference
/// (control / placebo) point. Domains default to the observed ranges and
/// the reference to the lower corner of the domain.
class Dataset {
 public:
  explicit Dataset(std::vector<Observation> observations,
                   std::optional<Interval> domain_x1 = std::nullopt,
                   std::optional<Interval> domain_x2 = std::nullopt,
                   std::optional<Point2> reference = std::nullopt);

  const std::vector<Observation>& observations() const noexcept { return obs_; }
  std::size_t size() const noexcept { return obs_.size(); }
  const Interval& domain_x1() const noexcept { return domain_x1_; }
  const Interval& domain_x2() const noexcept { return domain_x2_; }
  const Point2& reference() const noexcept { return reference_; }

  /// Distinct (x1, x2) pairs in order of first appearance.
  std::vector<Point2> design_points() const;

 private:
  std::vector<Observation> obs_;
  Interval domain_x1_;
  Interval domain_x2_;
  Point2 reference_;
};

/// A parametric mean family f(x1, x2, theta).
///
/// `eval` is required. `gradient` (df/dtheta) is optional; estimators fall
/// back to central differences without it. `grid_eval`, when present, must
/// be bitwise identical to calling `eval` point by point; it only exists to
/// hoist per-row work. `start` proposes starting values from data.
struct MeanFamily {
  using EvalFn = std::function<double(double x1, double x2, std::span<const double> theta)>;
  using GradientFn = std::function<void(double x1, double x2, std::span<const double> theta,
                                        std::span<double> grad)>;
  using GridEvalFn = std::function<void(std::span<const double> theta, std::span<const double> x1,
                                        std::span<const double> x2, std::span<double> out)>;
  using StartFn = std::function<std::vector<double>(const Dataset&)>;

  std::string name;
  std::vector<std::string> param_names;
  std::vector<bool> positive;  ///< parameters constrained to be > 0
  EvalFn eval;
  GradientFn gradient;
  GridEvalFn grid_eval;
  StartFn start;

  std::size_t n_params() const noexcept { return param_names.size(); }
};

using FamilyPtr = std::shared_ptr<const MeanFamily>;

/// Looks up a registered family; throws InvalidArgument for unknown names.
FamilyPtr find_family(std::string_view name);

/// Adds (or replaces) a user family. Built-ins are "td2pll" and "emax2".
void register_family(MeanFamily family);

std::vector<std::string> registered_families();

/// Family plus a parameter vector that satisfies its constraints.
class MeanModel {
 public:
  MeanModel(FamilyPtr family, std::vector<double> theta);
  MeanModel(std::string_view family, std::vector<double> theta);

  const MeanFamily& family() const noexcept { return *family_; }
  const FamilyPtr& family_ptr() const noexcept { return family_; }
  const std::vector<double>& theta() const noexcept { return theta_; }

 private:
  FamilyPtr family_;
  std::vector<double> theta_;
};

/// Throws unless theta has the family's length, is finite, and meets the
/// positivity constraints.
void validate_theta(const MeanFamily& family, std::span<const double> theta);

double eval_mean(const MeanModel& model, double x1, double x2);

/// out[i * x2.size() + j] = f(x1[i], x2[j]).
void eval_mean_grid(const MeanFamily& family, std::span<const double> theta,
                    std::span<const double> x1, std::span<const double> x2, std::span<double> out);

/// td2pLL: 100 / (1 + (x2 / EC50(x1))^h), EC50(x1) = delta * x1^-gamma + c0,
/// theta = (h, delta, gamma, c0).
double td2pll_ec50(std::span<const double> theta, double x1);

enum class SigmaTerm { intercept, x2, x2_sq, x1, x2_sq_x1 };

std::string_view to_string(SigmaTerm term);
SigmaTerm parse_sigma_term(std::string_view name);
/// Accepts "constant", "complex" or a comma list of term names.
std::vector<SigmaTerm> parse_sigma_terms(std::string_view spec);
double sigma_term_value(SigmaTerm term, double x1, double x2);

std::vector<SigmaTerm> constant_sigma_terms();
std::vector<SigmaTerm> complex_sigma_terms();
bool is_intercept_only(std::span<const SigmaTerm> terms);

/// log sigma = sum_i coef_i * term_i(x1, x2), on raw covariate values.
class SigmaModel {
 public:
  SigmaModel(std::vector<SigmaTerm> terms, std::vector<double> coef);

  const std::vector<SigmaTerm>& terms() const noexcept { return terms_; }
  const std::vector<double>& coef() const noexcept { return coef_; }

  double log_sigma(double x1, double x2) const;

 private:
  std::vector<SigmaTerm> terms_;
  std::vector<double> coef_;
};

double eval_sigma(const SigmaModel& model, double x1, double x2);

enum class Dimension { fixed_x1, fixed_x2, surface };
enum class Form { centered, undercut, exceeded };
enum class Side { lower, upper };

std::string_view to_string(Dimension d);
std::string_view to_string(Form f);
std::string_view to_string(Side s);
Dimension parse_dimension(std::string_view s);
Form parse_form(std::string_view s);

/// Undercut tests against an upper band; centered and exceeded against a lower one.
Side side_for(Form form) noexcept;

struct Hypothesis {
  Dimension dimension = Dimension::surface;
  std::optional<double> fixed_value;
  Form form = Form::centered;
  double lambda = 0.0;
  double alpha = 0.05;
  Point2 reference;  ///< (x1_0, x2_0) used by the centered form

  /// Point the centered form subtracts: (t~, x2_0), (x1_0, d~) or (x1_0, x2_0).
  Point2 centering_point() const;
  Hypothesis with_dimension(Dimension d) const;
};

/// Throws InvalidArgument on violated invariants. When domains are given,
/// the fixed value must lie inside the matching one.
void validate(const Hypothesis& hyp, const Interval* domain_x1 = nullptr,
              const Interval* domain_x2 = nullptr);

double delta(const MeanModel& model, const Hypothesis& hyp, double x1, double x2);

struct EvalGrid {
  std::vector<double> x1;
  std::vector<double> x2;

  /// Equidistant grid including both endpoints exactly.
  static EvalGrid uniform(const Interval& d1, std::size_t n1, const Interval& d2, std::size_t n2);
};

void validate(const EvalGrid& grid);

std::vector<double> linspace(double lo, double hi, std::size_t n);

/// Axes of the set the hypothesis maximizes over: a single x1 row for
/// fixed_x1, a single x2 column for fixed_x2, the whole grid otherwise.
struct EvalAxes {
  std::vector<double> x1;
  std::vector<double> x2;

  std::size_t size() const noexcept { return x1.size() * x2.size(); }
};

EvalAxes evaluation_axes(const Hypothesis& hyp, const EvalGrid& grid);

/// Delta over an evaluation set, row-major in x1.
void delta_grid(const MeanFamily& family, std::span<const double> theta, const Hypothesis& hyp,
                const EvalAxes& axes, std::span<double> out);

}  // namespace alert_surface
