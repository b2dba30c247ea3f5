#include <cmath>
#include <vector>

#include "alert_surface/bootstrap.hpp"
#include "alert_surface/errors.hpp"
#include "alert_surface/estimator.hpp"
#include "alert_surface/random.hpp"
#include "alert_surface/simulation.hpp"
#include "doctest.h"

using namespace alert_surface;

namespace {

const std::vector<double> kTd = {2.9, 5.9, 1.8, 4.8};
const std::vector<double> kEmax = {0.0, 80.0, 3.0, 120.0, 10.0, 0.02};

Dataset scenario_data(const char* name, std::uint64_t key, std::optional<SigmaModel> sigma = {}) {
  const ScenarioSpec s = build_scenario(name);
  return simulate_dataset(s.design, s.mean, sigma ? *sigma : s.sigma, key, s.domain_x1,
                          s.domain_x2, s.reference);
}

}  // namespace

TEST_CASE("negloglik on a single residual") {
  // r = 2, sigma = 2: 0.5 ln(2 pi) + ln 2 + 4 / 8
  const Dataset d({{1.0, 0.0, 102.0}});
  const MeanModel m("td2pll", kTd);
  const SigmaModel s(constant_sigma_terms(), {std::log(2.0)});
  const double expect = 0.5 * std::log(2.0 * M_PI) + std::log(2.0) + 0.5;
  CHECK(negloglik(d, m, s) == doctest::Approx(expect).epsilon(1e-14));
  CHECK(expect == doctest::Approx(2.1121).epsilon(1e-4));
}

TEST_CASE("negloglik reports the offending observation") {
  const Dataset d({{1.0, 0.0, 100.0}, {1.0, 1.0, 1e300}});
  const SigmaModel s(constant_sigma_terms(), {-400.0});
  try {
    negloglik(d, MeanModel("td2pll", kTd), s);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("observation 0") != std::string::npos);
  }
}

TEST_CASE("near-noiseless recovery") {
  const Dataset d = scenario_data("1 - Full - Simple", 5, SigmaModel(constant_sigma_terms(), {-5}));
  const FitResult fit = fit_gamlss(d, find_family("td2pll"), constant_sigma_terms());
  CHECK(fit.converged);
  CHECK(std::abs(fit.theta_hat[0] - 2.9) < 1e-2);
  CHECK(std::abs(fit.theta_hat[1] - 5.9) < 1e-2);
  CHECK(std::abs(fit.theta_hat[2] - 1.8) < 1e-2);
  CHECK(std::abs(fit.theta_hat[3] - 4.8) < 1e-2);
  CHECK(fit.vartheta_hat->front() == doctest::Approx(-5.0).epsilon(0.05));
}

TEST_CASE("noiseless data recovers theta for both families") {
  for (const auto& [name, theta, scen] :
       {std::tuple{"td2pll", kTd, "1 - Reduced - Simple"},
        std::tuple{"emax2", kEmax, "2 - Factorial 3x3 - N90"}}) {
    const ScenarioSpec s = build_scenario(scen);
    std::vector<Observation> obs;
    for (const auto& p : s.design.points) {
      obs.push_back({p.x1, p.x2, eval_mean(s.mean, p.x1, p.x2)});
    }
    const FitResult fit = fit_theta_ml(Dataset(obs), find_family(name));
    CHECK(fit.converged);
    CHECK(*fit.sigma_pooled < 1e-6);
    for (std::size_t k = 0; k < theta.size(); ++k) {
      CHECK(fit.theta_hat[k] == doctest::Approx(theta[k]).epsilon(1e-5).scale(1.0));
    }
  }
}

TEST_CASE("fitting is deterministic for a fixed seed") {
  const Dataset d = scenario_data("2 - Factorial 3x3 - N152", 17);
  FitOptions o;
  o.seed = 99;
  const auto a = fit_gamlss(d, find_family("emax2"), constant_sigma_terms(), o);
  const auto b = fit_gamlss(d, find_family("emax2"), constant_sigma_terms(), o);
  CHECK(a.theta_hat == b.theta_hat);
  CHECK(a.loglik == b.loglik);
}

TEST_CASE("theta-only and constant-sigma joint fits share the argmin") {
  for (std::uint64_t key = 1; key <= 5; ++key) {
    const Dataset d = scenario_data("1 - Full - Simple", key);
    const auto fam = find_family("td2pll");
    FitOptions joint;
    joint.profile_constant_sigma = false;
    const auto ml = fit_theta_ml(d, fam);
    const auto gl = fit_gamlss(d, fam, constant_sigma_terms(), joint);
    const auto pr = fit_gamlss(d, fam, constant_sigma_terms());
    CAPTURE(key);
    for (std::size_t k = 0; k < 4; ++k) {
      // gamma may run off to a boundary on this design; compare on the
      // scale the search uses.
      CHECK(std::log(gl.theta_hat[k]) == doctest::Approx(std::log(ml.theta_hat[k])).epsilon(1e-6).scale(1));
      CHECK(pr.theta_hat[k] == ml.theta_hat[k]);
    }
    CHECK(gl.loglik == doctest::Approx(ml.loglik).epsilon(1e-9));
    CHECK(*pr.vartheta_hat->data() == doctest::Approx(std::log(*ml.sigma_pooled)).epsilon(1e-15));
  }
}

TEST_CASE("estimates beat the generating truth on the likelihood") {
  const auto fam = find_family("td2pll");
  const ScenarioSpec s = build_scenario("1 - Full - Medium");
  int better = 0;
  const int trials = 40;
  for (int i = 0; i < trials; ++i) {
    const Dataset d = simulate_dataset(s.design, s.mean, s.sigma, stream_key({77, std::uint64_t(i)}));
    FitOptions o;
    o.seed = static_cast<std::uint64_t>(i);
    const auto fit = fit_gamlss(d, fam, complex_sigma_terms(), o);
    const double at_hat = negloglik(d, fit.mean_model(), fit.sigma_model());
    const double at_truth = negloglik(d, s.mean, s.sigma);
    if (at_hat <= at_truth + 1e-9) ++better;
    CHECK(-at_hat == doctest::Approx(fit.loglik).epsilon(1e-9));
  }
  CHECK(better >= static_cast<int>(0.95 * trials));
}

TEST_CASE("identifiability and convergence errors") {
  const Dataset one({{1, 1, 50}, {1, 1, 51}, {1, 1, 49}});
  CHECK_THROWS_AS(fit_gamlss(one, find_family("td2pll"), constant_sigma_terms()),
                  IdentifiabilityError);
  CHECK_THROWS_AS(fit_theta_ml(one, find_family("emax2")), IdentifiabilityError);

  MeanFamily broken;
  broken.name = "broken_test";
  broken.param_names = {"a"};
  broken.positive = {false};
  broken.eval = [](double, double, std::span<const double>) { return NAN; };
  register_family(broken);
  FitOptions o;
  o.start = std::vector<double>{1.0};
  o.restarts = 2;
  CHECK_THROWS_AS(fit_theta_ml(one, find_family("broken_test"), o), ConvergenceError);

  FitOptions bad;
  bad.restarts = 51;
  CHECK_THROWS_AS(validate(bad), InvalidArgument);
}

TEST_CASE("default starts") {
  const Dataset d = scenario_data("1 - Full - Simple", 3);
  const auto st = find_family("td2pll")->start(d);
  REQUIRE(st.size() == 4);
  for (double v : st) CHECK(v > 0.0);
  // the scanned start fits the data better than the flat unit start
  const auto fam = find_family("td2pll");
  auto rss = [&](const std::vector<double>& th) {
    double s = 0.0;
    for (const auto& o : d.observations()) {
      const double e = o.y - fam->eval(o.x1, o.x2, th);
      s += e * e;
    }
    return s;
  };
  CHECK(rss(st) <= rss({1.0, 1.0, 1.0, st[3]}));
  CHECK(rss(st) <= rss({1.0, 1.0, 1.0, 1.0}));
  const Dataset e = scenario_data("2 - Factorial 3x3 - N45", 3);
  const auto se = find_family("emax2")->start(e);
  REQUIRE(se.size() == 6);
  CHECK(se[2] == 5.0);
  CHECK(se[4] == 6.0);
  CHECK(se[5] == 0.0);
}

TEST_CASE("complex sigma fits recover a strong variance trend") {
  const ScenarioSpec s = build_scenario("1 - Full - Large");
  const Dataset d = simulate_dataset(s.design, s.mean, s.sigma, 4242);
  const auto fit = fit_gamlss(d, find_family("td2pll"), complex_sigma_terms());
  CHECK(fit.converged);
  REQUIRE(fit.vartheta_hat->size() == 5);
  CHECK(std::abs((*fit.vartheta_hat)[0] - 2.081) < 0.6);
}
