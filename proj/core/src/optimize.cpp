#include "optimize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

namespace alert_surface::detail {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double inf_norm(const Eigen::VectorXd& v) { return v.size() ? v.lpNorm<Eigen::Infinity>() : 0.0; }

bool step_is_small(const Eigen::VectorXd& step, const Eigen::VectorXd& x, double tol) {
  return inf_norm(step) <= tol * (1.0 + inf_norm(x));
}

// An objective change below f_tol only counts once the parameters have
// also nearly stopped moving; otherwise a flat stretch ends the search early.
bool change_is_small(double df, const Eigen::VectorXd& step, const Eigen::VectorXd& x,
                     const StopRule& stop) {
  return std::abs(df) < stop.f_tol && inf_norm(step) < 1e-4 * (1.0 + inf_norm(x));
}

}  // namespace

OptimResult levenberg_marquardt(const ResidualFn& residuals, Eigen::VectorXd x,
                                const StopRule& stop) {
  OptimResult out;
  Eigen::VectorXd r;
  Eigen::MatrixXd jac;
  if (!residuals(x, r, &jac)) {
    out.x = x;
    out.value = kInf;
    return out;
  }
  double cost = r.squaredNorm();
  Eigen::MatrixXd jtj = jac.transpose() * jac;
  Eigen::VectorXd grad = jac.transpose() * r;
  double mu = 1e-3;
  double nu = 2.0;
  const Eigen::Index n = x.size();

  Eigen::VectorXd r_new;
  for (int it = 1; it <= stop.max_iterations; ++it) {
    out.iterations = it;
    if (grad.allFinite() && inf_norm(grad) == 0.0) {
      out.converged = true;
      break;
    }
    Eigen::MatrixXd damped = jtj;
    for (Eigen::Index i = 0; i < n; ++i) {
      damped(i, i) += mu * std::max(jtj(i, i), 1e-12);
    }
    const Eigen::VectorXd step = damped.ldlt().solve(-grad);
    if (!step.allFinite()) {
      mu *= nu;
      nu *= 2.0;
      if (mu > 1e30) break;
      continue;
    }
    const Eigen::VectorXd x_new = x + step;
    const bool ok = residuals(x_new, r_new, nullptr);
    const double cost_new = ok ? r_new.squaredNorm() : kInf;
    const double predicted = -2.0 * step.dot(grad) - step.dot(jtj * step);
    const double rho = predicted > 0.0 ? (cost - cost_new) / predicted : -1.0;

    if (std::isfinite(cost_new) && cost_new <= cost && rho > 0.0) {
      const double df = cost - cost_new;
      x = x_new;
      if (!residuals(x, r, &jac)) break;
      cost = r.squaredNorm();
      jtj = jac.transpose() * jac;
      grad = jac.transpose() * r;
      mu *= std::max(1.0 / 3.0, 1.0 - std::pow(2.0 * rho - 1.0, 3));
      nu = 2.0;
      if (step_is_small(step, x, stop.x_tol) || change_is_small(df, step, x, stop)) {
        out.converged = true;
        break;
      }
    } else {
      if (step_is_small(step, x, stop.x_tol)) {
        out.converged = true;
        break;
      }
      mu *= nu;
      nu *= 2.0;
      if (mu > 1e30) break;
    }
  }
  out.x = x;
  out.value = cost;
  out.converged = out.converged && std::isfinite(cost);
  return out;
}

OptimResult bfgs(const ObjectiveFn& objective, Eigen::VectorXd x, const StopRule& stop) {
  OptimResult out;
  const Eigen::Index n = x.size();
  Eigen::VectorXd grad(n);
  double f = objective(x, &grad);
  if (!std::isfinite(f) || !grad.allFinite()) {
    out.x = x;
    out.value = kInf;
    return out;
  }
  Eigen::MatrixXd inv_hess = Eigen::MatrixXd::Identity(n, n);
  bool scaled = false;
  Eigen::VectorXd grad_new(n);

  for (int it = 1; it <= stop.max_iterations; ++it) {
    out.iterations = it;
    if (inf_norm(grad) <= 1e-12 * (1.0 + std::abs(f))) {
      out.converged = true;
      break;
    }
    Eigen::VectorXd dir = -inv_hess * grad;
    double slope = grad.dot(dir);
    if (!(slope < 0.0)) {
      inv_hess.setIdentity();
      scaled = false;
      dir = -grad;
      slope = grad.dot(dir);
    }
    double alpha = scaled ? 1.0 : std::min(1.0, 1.0 / grad.norm());
    Eigen::VectorXd x_new;
    double f_new = kInf;
    bool accepted = false;
    for (int k = 0; k < 60; ++k) {
      x_new = x + alpha * dir;
      f_new = objective(x_new, &grad_new);
      if (std::isfinite(f_new) && grad_new.allFinite() && f_new <= f + 1e-4 * alpha * slope) {
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted) {
      out.line_search_failed = true;
      break;
    }
    const Eigen::VectorXd s = x_new - x;
    const Eigen::VectorXd y = grad_new - grad;
    const double sy = s.dot(y);
    const double df = f - f_new;
    if (sy > 1e-12 * s.norm() * y.norm()) {
      if (!scaled) {
        inv_hess = Eigen::MatrixXd::Identity(n, n) * (sy / y.squaredNorm());
        scaled = true;
      }
      const double rho = 1.0 / sy;
      const Eigen::MatrixXd left = Eigen::MatrixXd::Identity(n, n) - rho * s * y.transpose();
      inv_hess = left * inv_hess * left.transpose() + rho * s * s.transpose();
    }
    x = x_new;
    f = f_new;
    grad = grad_new;
    if (step_is_small(s, x, stop.x_tol) || change_is_small(df, s, x, stop)) {
      out.converged = true;
      break;
    }
  }
  out.x = x;
  out.value = f;
  return out;
}

OptimResult nelder_mead(const ObjectiveFn& objective, Eigen::VectorXd x0, const StopRule& stop) {
  const Eigen::Index n = x0.size();
  auto eval = [&](const Eigen::VectorXd& x) {
    const double v = objective(x, nullptr);
    return std::isfinite(v) ? v : kInf;
  };

  std::vector<Eigen::VectorXd> simplex(static_cast<std::size_t>(n + 1), x0);
  std::vector<double> values(simplex.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    auto& v = simplex[static_cast<std::size_t>(i + 1)];
    v(i) += std::abs(v(i)) > 1e-8 ? 0.1 * std::abs(v(i)) : 0.05;
  }
  for (std::size_t i = 0; i < simplex.size(); ++i) values[i] = eval(simplex[i]);

  std::vector<std::size_t> order(simplex.size());
  OptimResult out;
  const int max_evals = stop.max_iterations * 5;
  int evals = static_cast<int>(simplex.size());
  int it = 0;
  while (evals < max_evals) {
    ++it;
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return values[a] < values[b]; });
    const std::size_t best = order.front();
    const std::size_t worst = order.back();
    const std::size_t second = order[order.size() - 2];

    double size = 0.0;
    for (const auto& v : simplex) size = std::max(size, inf_norm(v - simplex[best]));
    if (std::isfinite(values[worst]) && values[worst] - values[best] < stop.f_tol &&
        size < 1e-6 * (1.0 + inf_norm(simplex[best]))) {
      out.converged = true;
      break;
    }

    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
    for (std::size_t i = 0; i < simplex.size(); ++i) {
      if (i != worst) centroid += simplex[i];
    }
    centroid /= static_cast<double>(n);

    const Eigen::VectorXd reflected = centroid + (centroid - simplex[worst]);
    const double f_r = eval(reflected);
    ++evals;
    if (f_r < values[best]) {
      const Eigen::VectorXd expanded = centroid + 2.0 * (centroid - simplex[worst]);
      const double f_e = eval(expanded);
      ++evals;
      if (f_e < f_r) {
        simplex[worst] = expanded;
        values[worst] = f_e;
      } else {
        simplex[worst] = reflected;
        values[worst] = f_r;
      }
    } else if (f_r < values[second]) {
      simplex[worst] = reflected;
      values[worst] = f_r;
    } else {
      const bool outside = f_r < values[worst];
      const Eigen::VectorXd contracted =
          outside ? Eigen::VectorXd(centroid + 0.5 * (reflected - centroid))
                  : Eigen::VectorXd(centroid + 0.5 * (simplex[worst] - centroid));
      const double f_c = eval(contracted);
      ++evals;
      if (f_c < std::min(f_r, values[worst])) {
        simplex[worst] = contracted;
        values[worst] = f_c;
      } else {
        for (std::size_t i = 0; i < simplex.size(); ++i) {
          if (i == best) continue;
          simplex[i] = simplex[best] + 0.5 * (simplex[i] - simplex[best]);
          values[i] = eval(simplex[i]);
          ++evals;
        }
      }
    }
  }
  const auto best_it = std::min_element(values.begin(), values.end());
  out.x = simplex[static_cast<std::size_t>(best_it - values.begin())];
  out.value = *best_it;
  out.iterations = it;
  out.converged = out.converged && std::isfinite(out.value);
  return out;
}

}  // namespace alert_surface::detail
