#pragma once

// Maximum-likelihood fitting of the joint mean / log-sigma model under
// normal errors, and the constant-variance theta-only fit.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "alert_surface/model.hpp"

namespace alert_surface {

struct FitOptions {
  int max_iterations = 2000;
  double tolerance = 1e-8;  ///< objective change and parameter step
  int restarts = 10;        ///< jittered multistarts after the first start
  std::optional<std::vector<double>> start;  ///< theta start; family default otherwise
  std::uint64_t seed = 0;   ///< jitter stream for the restarts
  /// Stop at the first converged start instead of searching all of them.
  /// Bootstrap refits use this together with a warm start.
  bool first_converged = false;
  /// With an intercept-only sigma design the theta argmin does not depend on
  /// sigma, so the joint fit reduces to least squares plus a closed-form
  /// sigma. Turning this off forces the joint quasi-Newton search.
  bool profile_constant_sigma = true;
};

void validate(const FitOptions& opts);

struct FitResult {
  FamilyPtr family;
  std::vector<double> theta_hat;
  /// Log-sigma coefficients; absent for fit_theta_ml.
  std::optional<std::vector<double>> vartheta_hat;
  std::vector<SigmaTerm> sigma_terms;
  /// sqrt(RSS / n); set by fit_theta_ml and by profiled constant-sigma fits.
  std::optional<double> sigma_pooled;
  double loglik = 0.0;
  bool converged = false;
  std::size_t n = 0;
  int iterations = 0;

  MeanModel mean_model() const;
  /// The log-sigma model; a fast fit maps to the intercept log(sigma_pooled).
  SigmaModel sigma_model() const;
};

/// Sum over observations of 0.5 ln(2 pi) + g + (y - f)^2 / (2 exp(2 g)).
/// Throws DataError naming the first observation whose term is not finite.
double negloglik(const Dataset& data, const MeanModel& mean, const SigmaModel& sigma);

/// Joint ML over (theta, vartheta). Positive-constrained parameters are
/// searched on the log scale. Throws IdentifiabilityError when the data has
/// fewer distinct design points than mean parameters and ConvergenceError
/// when no start converges.
FitResult fit_gamlss(const Dataset& data, const FamilyPtr& family,
                     std::span<const SigmaTerm> sigma_terms, const FitOptions& opts = {});

/// Least-squares theta (ML under iid normal errors) with pooled sigma.
FitResult fit_theta_ml(const Dataset& data, const FamilyPtr& family, const FitOptions& opts = {});

}  // namespace alert_surface
