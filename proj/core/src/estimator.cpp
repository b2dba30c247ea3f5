#include "alert_surface/estimator.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "alert_surface/errors.hpp"
#include "alert_surface/random.hpp"
#include "optimize.hpp"

namespace alert_surface {

namespace {

constexpr double kLogBound = 650.0;

constexpr double kHalfLog2Pi = 0.91893853320467274178;  // 0.5 * ln(2 pi)
constexpr double kInf = std::numeric_limits<double>::infinity();

// Sufficient statistics of one design point: count, mean and within-cell sum
// of squares. The Gaussian likelihood only sees the data through these, and
// the within-cell form stays accurate when residuals are tiny.
struct Cell {
  double x1;
  double x2;
  double n;
  double mean;
  double ss;
};

std::vector<Cell> group_cells(const Dataset& data) {
  std::vector<Cell> cells;
  std::size_t hint = 0;
  for (const auto& o : data.observations()) {
    std::size_t idx = cells.size();
    if (hint < cells.size() && cells[hint].x1 == o.x1 && cells[hint].x2 == o.x2) {
      idx = hint;
    } else {
      for (std::size_t c = 0; c < cells.size(); ++c) {
        if (cells[c].x1 == o.x1 && cells[c].x2 == o.x2) {
          idx = c;
          break;
        }
      }
    }
    if (idx == cells.size()) cells.push_back({o.x1, o.x2, 0.0, 0.0, 0.0});
    Cell& c = cells[idx];
    c.n += 1.0;
    const double d = o.y - c.mean;
    c.mean += d / c.n;
    c.ss += d * (o.y - c.mean);
    hint = idx;
  }
  return cells;
}

class Problem {
 public:
  Problem(const MeanFamily& family, std::vector<Cell> cells)
      : family_(family), cells_(std::move(cells)), p_(family.n_params()), grad_buf_(p_) {
    for (const auto& c : cells_) n_total_ += c.n;
    for (const auto& c : cells_) ss_total_ += c.ss;
  }

  std::size_t n_params() const { return p_; }
  const std::vector<Cell>& cells() const { return cells_; }
  double n_total() const { return n_total_; }

  std::vector<double> theta_from(const Eigen::VectorXd& u) const {
    std::vector<double> th(p_);
    for (std::size_t k = 0; k < p_; ++k) {
      // clamped so a parameter drifting to a boundary stays strictly positive
      th[k] = family_.positive[k]
                  ? std::exp(std::clamp(u(static_cast<Eigen::Index>(k)), -kLogBound, kLogBound))
                  : u(static_cast<Eigen::Index>(k));
    }
    return th;
  }

  Eigen::VectorXd u_from(std::span<const double> th) const {
    Eigen::VectorXd u(static_cast<Eigen::Index>(p_));
    for (std::size_t k = 0; k < p_; ++k) {
      u(static_cast<Eigen::Index>(k)) = family_.positive[k] ? std::log(th[k]) : th[k];
    }
    return u;
  }

  // df/du at one cell (chain rule through the log scale).
  void mean_gradient(const Cell& c, std::span<const double> th, std::span<double> g) const {
    if (family_.gradient) {
      family_.gradient(c.x1, c.x2, th, g);
    } else {
      std::vector<double> tp(th.begin(), th.end());
      for (std::size_t k = 0; k < p_; ++k) {
        const double h = 6e-6 * std::max(std::abs(th[k]), 1e-3);
        tp[k] = th[k] + h;
        const double up = family_.eval(c.x1, c.x2, tp);
        tp[k] = th[k] - h;
        const double dn = family_.eval(c.x1, c.x2, tp);
        tp[k] = th[k];
        g[k] = (up - dn) / (2.0 * h);
      }
    }
    for (std::size_t k = 0; k < p_; ++k) {
      if (family_.positive[k]) g[k] *= th[k];
    }
  }

  bool residuals(const Eigen::VectorXd& u, Eigen::VectorXd& r, Eigen::MatrixXd* jac) {
    const auto th = theta_from(u);
    const auto m = static_cast<Eigen::Index>(cells_.size());
    r.resize(m);
    if (jac) jac->resize(m, static_cast<Eigen::Index>(p_));
    for (Eigen::Index i = 0; i < m; ++i) {
      const Cell& c = cells_[static_cast<std::size_t>(i)];
      const double w = std::sqrt(c.n);
      r(i) = w * (c.mean - family_.eval(c.x1, c.x2, th));
      if (!std::isfinite(r(i))) return false;
      if (jac) {
        mean_gradient(c, th, grad_buf_);
        for (std::size_t k = 0; k < p_; ++k) {
          (*jac)(i, static_cast<Eigen::Index>(k)) = -w * grad_buf_[k];
        }
      }
    }
    return !jac || jac->allFinite();
  }

  double rss(std::span<const double> th) const {
    double s = ss_total_;
    for (const auto& c : cells_) {
      const double e = c.mean - family_.eval(c.x1, c.x2, th);
      s += c.n * e * e;
    }
    return s;
  }

  // Joint negative log-likelihood over v = (u, vartheta).
  double joint(const Eigen::VectorXd& v, Eigen::VectorXd* grad,
               std::span<const SigmaTerm> terms) {
    const auto pe = static_cast<Eigen::Index>(p_);
    const auto th = theta_from(v.head(pe));
    for (double t : th) {
      if (!std::isfinite(t)) return kInf;
    }
    if (grad) grad->setZero(v.size());
    double nll = 0.0;
    for (const auto& c : cells_) {
      double g = 0.0;
      for (std::size_t j = 0; j < terms.size(); ++j) {
        g += v(pe + static_cast<Eigen::Index>(j)) * sigma_term_value(terms[j], c.x1, c.x2);
      }
      const double inv_var = std::exp(-2.0 * g);
      const double e = c.mean - family_.eval(c.x1, c.x2, th);
      const double q = c.ss + c.n * e * e;
      nll += c.n * (kHalfLog2Pi + g) + 0.5 * q * inv_var;
      if (grad) {
        const double ds = c.n - q * inv_var;
        for (std::size_t j = 0; j < terms.size(); ++j) {
          (*grad)(pe + static_cast<Eigen::Index>(j)) +=
              ds * sigma_term_value(terms[j], c.x1, c.x2);
        }
        mean_gradient(c, th, grad_buf_);
        const double dm = -c.n * e * inv_var;
        for (std::size_t k = 0; k < p_; ++k) {
          (*grad)(static_cast<Eigen::Index>(k)) += dm * grad_buf_[k];
        }
      }
    }
    if (!std::isfinite(nll)) return kInf;
    return nll;
  }

 private:
  const MeanFamily& family_;
  std::vector<Cell> cells_;
  std::size_t p_;
  std::vector<double> grad_buf_;
  double n_total_ = 0.0;
  double ss_total_ = 0.0;
};

detail::StopRule stop_rule(const FitOptions& opts) {
  return {opts.max_iterations, opts.tolerance, opts.tolerance};
}

std::vector<double> initial_theta(const Dataset& data, const MeanFamily& family,
                                  const FitOptions& opts) {
  std::vector<double> th;
  if (opts.start) {
    th = *opts.start;
  } else if (family.start) {
    th = family.start(data);
  } else {
    throw InvalidArgument("family '" + family.name + "' has no default start; pass one");
  }
  validate_theta(family, th);
  return th;
}

std::vector<double> jittered(std::span<const double> th, std::uint64_t seed, int attempt) {
  Stream rng(stream_key({seed, 0x5717ULL, static_cast<std::uint64_t>(attempt)}));
  std::vector<double> out(th.begin(), th.end());
  for (double& t : out) t *= 1.0 + 0.4 * (rng.uniform() - 0.5);
  return out;
}

Problem make_problem(const Dataset& data, const FamilyPtr& family) {
  if (!family) throw InvalidArgument("null mean family");
  auto cells = group_cells(data);
  if (cells.size() < family->n_params()) {
    throw IdentifiabilityError("dataset has " + std::to_string(cells.size()) +
                               " distinct design points but " + family->name + " has " +
                               std::to_string(family->n_params()) + " parameters");
  }
  return Problem(*family, std::move(cells));
}

struct LsFit {
  std::vector<double> theta;
  double rss = kInf;
  int iterations = 0;
  bool converged = false;
};

// LM on the cell residuals, with Nelder-Mead on the RSS when LM stalls.
LsFit least_squares(Problem& prob, std::span<const double> start, const detail::StopRule& stop) {
  auto residuals = [&](const Eigen::VectorXd& u, Eigen::VectorXd& r, Eigen::MatrixXd* jac) {
    return prob.residuals(u, r, jac);
  };
  auto res = detail::levenberg_marquardt(residuals, prob.u_from(start), stop);
  int iterations = res.iterations;
  if (!res.converged) {
    auto rss_objective = [&](const Eigen::VectorXd& u, Eigen::VectorXd*) {
      const auto th = prob.theta_from(u);
      for (double t : th) {
        if (!std::isfinite(t)) return kInf;
      }
      return prob.rss(th);
    };
    const Eigen::VectorXd from = res.x.allFinite() ? res.x : prob.u_from(start);
    res = detail::nelder_mead(rss_objective, from, stop);
    iterations += res.iterations;
  }
  LsFit out;
  out.iterations = iterations;
  out.theta = prob.theta_from(res.x);
  out.rss = prob.rss(out.theta);
  out.converged = res.converged && std::isfinite(out.rss);
  for (double t : out.theta) out.converged = out.converged && std::isfinite(t);
  return out;
}

double constant_sigma_loglik(double n, double sigma) {
  return -(n * (kHalfLog2Pi + std::log(sigma)) + 0.5 * n);
}

double pooled_sigma(double rss, double n) {
  // Exact fits would give log(0); floor the variance at a representable value.
  return std::sqrt(std::max(rss / n, 1e-300));
}

template <typename Attempt>
FitResult multistart(const std::vector<double>& start, const FitOptions& opts, Attempt attempt,
                     const std::string& what) {
  FitResult best;
  double best_value = kInf;
  for (int a = 0; a <= opts.restarts; ++a) {
    const auto th0 = a == 0 ? start : jittered(start, opts.seed, a);
    FitResult r;
    double value = kInf;
    if (!attempt(th0, r, value)) continue;
    if (value < best_value) {
      best_value = value;
      best = std::move(r);
    }
    if (opts.first_converged) break;
  }
  if (!best.converged) {
    throw ConvergenceError(what + " did not converge from any of " +
                           std::to_string(opts.restarts + 1) + " starts");
  }
  return best;
}

}  // namespace

void validate(const FitOptions& opts) {
  if (opts.max_iterations < 1) throw InvalidArgument("max_iterations must be positive");
  if (!(opts.tolerance > 0.0)) throw InvalidArgument("tolerance must be positive");
  if (opts.restarts < 0 || opts.restarts > 50) {
    throw InvalidArgument("restarts must lie in [0, 50]");
  }
}

MeanModel FitResult::mean_model() const { return MeanModel(family, theta_hat); }

SigmaModel FitResult::sigma_model() const {
  if (vartheta_hat) return SigmaModel(sigma_terms, *vartheta_hat);
  return SigmaModel(constant_sigma_terms(), {std::log(sigma_pooled.value_or(1.0))});
}

double negloglik(const Dataset& data, const MeanModel& mean, const SigmaModel& sigma) {
  double total = 0.0;
  const auto& obs = data.observations();
  for (std::size_t i = 0; i < obs.size(); ++i) {
    const auto& o = obs[i];
    const double g = sigma.log_sigma(o.x1, o.x2);
    const double r = o.y - eval_mean(mean, o.x1, o.x2);
    const double term = kHalfLog2Pi + g + r * r / (2.0 * std::exp(2.0 * g));
    if (!std::isfinite(term)) {
      throw DataError("negative log-likelihood term is not finite at observation " +
                      std::to_string(i));
    }
    total += term;
  }
  return total;
}

FitResult fit_theta_ml(const Dataset& data, const FamilyPtr& family, const FitOptions& opts) {
  validate(opts);
  Problem prob = make_problem(data, family);
  const auto start = initial_theta(data, *family, opts);
  const auto stop = stop_rule(opts);
  const double n = prob.n_total();

  auto attempt = [&](const std::vector<double>& th0, FitResult& r, double& value) {
    const LsFit ls = least_squares(prob, th0, stop);
    if (!ls.converged) return false;
    r.family = family;
    r.theta_hat = ls.theta;
    r.sigma_terms = constant_sigma_terms();
    r.sigma_pooled = pooled_sigma(ls.rss, n);
    r.loglik = constant_sigma_loglik(n, *r.sigma_pooled);
    r.converged = true;
    r.n = data.size();
    r.iterations = ls.iterations;
    value = ls.rss;
    return true;
  };
  return multistart(start, opts, attempt, "least-squares fit");
}

FitResult fit_gamlss(const Dataset& data, const FamilyPtr& family,
                     std::span<const SigmaTerm> sigma_terms, const FitOptions& opts) {
  validate(opts);
  // Throws on an invalid term list.
  (void)SigmaModel(std::vector<SigmaTerm>(sigma_terms.begin(), sigma_terms.end()),
                   std::vector<double>(sigma_terms.size(), 0.0));

  if (is_intercept_only(sigma_terms) && opts.profile_constant_sigma) {
    FitResult r = fit_theta_ml(data, family, opts);
    r.vartheta_hat = std::vector<double>{std::log(*r.sigma_pooled)};
    return r;
  }

  Problem prob = make_problem(data, family);
  const auto start = initial_theta(data, *family, opts);
  const auto stop = stop_rule(opts);
  const std::vector<SigmaTerm> terms(sigma_terms.begin(), sigma_terms.end());
  const auto pe = static_cast<Eigen::Index>(family->n_params());
  const auto q = static_cast<Eigen::Index>(terms.size());

  auto objective = [&](const Eigen::VectorXd& v, Eigen::VectorXd* grad) {
    return prob.joint(v, grad, terms);
  };

  auto attempt = [&](const std::vector<double>& th0, FitResult& r, double& value) {
    // Least squares gives theta; sigma starts constant at the pooled value.
    const LsFit ls = least_squares(prob, th0, stop);
    const auto& th_start = ls.converged ? ls.theta : th0;
    Eigen::VectorXd v(pe + q);
    v.head(pe) = prob.u_from(th_start);
    v.tail(q).setZero();
    v(pe) = std::log(pooled_sigma(ls.converged ? ls.rss : prob.rss(th0), prob.n_total()));

    auto res = detail::bfgs(objective, v, stop);
    int iterations = ls.iterations + res.iterations;
    if (!res.converged) {
      const Eigen::VectorXd from = res.x.allFinite() ? res.x : v;
      res = detail::nelder_mead(objective, from, stop);
      iterations += res.iterations;
    }
    if (!res.converged || !std::isfinite(res.value)) return false;
    r.family = family;
    r.theta_hat = prob.theta_from(res.x.head(pe));
    r.vartheta_hat = std::vector<double>(res.x.data() + pe, res.x.data() + pe + q);
    r.sigma_terms = terms;
    r.loglik = -res.value;
    r.converged = true;
    r.n = data.size();
    r.iterations = iterations;
    value = res.value;
    for (double t : r.theta_hat) {
      if (!std::isfinite(t)) return false;
    }
    return true;
  };
  return multistart(start, opts, attempt, "joint mean/sigma fit");
}

}  // namespace alert_surface
