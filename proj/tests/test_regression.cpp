#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "quadlab/regression.hpp"

using namespace quadlab;

namespace {

Dataset random_dataset(std::uint64_t seed, Eigen::Index n, Eigen::Index d) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  Dataset data;
  data.design.resize(n, d);
  data.response.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double y = 0.3;
    for (Eigen::Index j = 0; j < d; ++j) {
      data.design(i, j) = g(rng);
      y += (j + 1.0) * 0.5 * data.design(i, j);
    }
    data.response(i) = y + std::exp(0.7 * g(rng)) - 1.0;  // skewed noise
  }
  return data;
}

Dataset line(std::vector<double> x, std::vector<double> y) {
  Dataset data;
  data.design = Eigen::Map<Eigen::VectorXd>(x.data(), x.size());
  data.response = Eigen::Map<Eigen::VectorXd>(y.data(), y.size());
  return data;
}

double kb(const Dataset& data, const LinearModel& m, double alpha) {
  const Residuals r = residuals(m, data);
  const auto s = EmpiricalSample::uniform(std::span<const double>(r.z.data(), r.z.size()));
  return koenker_bassett_error(s, ConfidenceLevel(alpha));
}

double se_error(const Dataset& data, const LinearModel& m, double x) {
  const Residuals r = residuals(m, data);
  const auto s = EmpiricalSample::uniform(std::span<const double>(r.z.data(), r.z.size()));
  return superexpectation_error(s, BiasParam{x});
}

// A pinball-loss optimum is attained by a line through two observations.
double quantile_line_oracle(const Dataset& data, double alpha) {
  double best = lp::kInf;
  for (Eigen::Index a = 0; a < data.n(); ++a)
    for (Eigen::Index b = a + 1; b < data.n(); ++b) {
      const double dx = data.design(b, 0) - data.design(a, 0);
      if (dx == 0.0) continue;
      LinearModel m;
      m.coefficients = Eigen::VectorXd::Constant(1, (data.response(b) - data.response(a)) / dx);
      m.intercept = data.response(a) - m.coefficients(0) * data.design(a, 0);
      best = std::min(best, kb(data, m, alpha));
    }
  return best;
}

// With the intercept pinned by mean(z) = -x the slope objective has kinks at g_i / (x_i - xbar).
double biased_mean_slope_oracle(const Dataset& data, double x) {
  const double xbar = data.design.col(0).mean(), ybar = data.response.mean();
  double best = lp::kInf;
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    const double xt = data.design(i, 0) - xbar;
    if (xt == 0.0) continue;
    LinearModel m;
    m.coefficients = Eigen::VectorXd::Constant(1, (data.response(i) - ybar - x) / xt);
    m.intercept = ybar + x - m.coefficients(0) * xbar;
    best = std::min(best, se_error(data, m, x));
  }
  return best;
}

}  // namespace

TEST_CASE("residuals") {
  const std::vector<double> y{2.0};
  const Dataset d = Dataset::response_only(y);
  LinearModel m;
  m.intercept = 1.0;
  m.coefficients.resize(0);
  CHECK(residuals(m, d).z(0) == 1.0);

  const Dataset exact = line({0, 1, 2}, {1, 3, 5});
  LinearModel fit{1.0, Eigen::VectorXd::Constant(1, 2.0)};
  CHECK(residuals(fit, exact).z.isZero(0.0));
  CHECK_THROWS_AS(residuals(m, exact), std::invalid_argument);
}

TEST_CASE("induced alpha counts exact fractions") {
  Residuals r;
  r.z = Eigen::Vector3d(-1, -1, 1);
  auto a = induced_alpha(r);
  CHECK(a[0] == doctest::Approx(2.0 / 3.0));
  CHECK(a[1] == doctest::Approx(2.0 / 3.0));
  r.z = Eigen::Vector4d(-2, -1, 0, 1);
  a = induced_alpha(r);
  CHECK(a[0] == 0.5);
  CHECK(a[1] == 0.75);
  r.z = Eigen::Vector2d(1, 3);
  a = induced_alpha(r);
  CHECK(a[0] == 0.0);
  CHECK(a[1] == 0.0);
}

TEST_CASE("ols examples") {
  auto f = fit_ols(line({0, 1, 2, 3}, {1, 3, 5, 7}));
  CHECK(f.model.intercept == doctest::Approx(1.0));
  CHECK(f.model.coefficients(0) == doctest::Approx(2.0));
  f = fit_ols(line({0, 1}, {0, 1}));
  CHECK(f.model.intercept == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(f.model.coefficients(0) == doctest::Approx(1.0));
  const std::vector<double> y{1, 2, 6};
  f = fit_ols(Dataset::response_only(y));
  CHECK(f.model.intercept == doctest::Approx(3.0));
  CHECK_FALSE(f.regularized);
}

TEST_CASE("ols agrees with a Householder least-squares solve") {
  const Dataset data = random_dataset(3, 80, 4);
  const auto f = fit_ols(data);
  Eigen::MatrixXd a(data.n(), data.d() + 1);
  a << Eigen::VectorXd::Ones(data.n()), data.design;
  const Eigen::VectorXd beta = a.colPivHouseholderQr().solve(data.response);
  CHECK(f.model.intercept == doctest::Approx(beta(0)).epsilon(1e-10));
  for (int j = 0; j < 4; ++j) CHECK(f.model.coefficients(j) == doctest::Approx(beta(j + 1)).epsilon(1e-10));
}

TEST_CASE("rank-deficient ols is regularized and flagged") {
  Dataset data = random_dataset(4, 20, 2);
  data.design.col(1) = data.design.col(0);
  const auto f = fit_ols(data);
  CHECK(f.regularized);
  CHECK(f.model.coefficients.allFinite());
}

TEST_CASE("quantile intercept-only median plateau") {
  const std::vector<double> y{1, 2, 3, 4};
  for (LpForm form : {LpForm::compact, LpForm::epigraph}) {
    const auto f = fit_quantile(Dataset::response_only(y), ConfidenceLevel(0.5), {form, {}});
    CHECK(f.model.intercept >= 2.0 - 1e-12);
    CHECK(f.model.intercept <= 3.0 + 1e-12);
    CHECK(f.objective == doctest::Approx(1.0));
  }
  const std::vector<double> flat{4, 4, 4};
  const auto f = fit_quantile(Dataset::response_only(flat), ConfidenceLevel(0.9));
  CHECK(f.model.intercept == doctest::Approx(4.0));
  CHECK(f.objective == doctest::Approx(0.0));
  CHECK_THROWS_AS(fit_quantile(Dataset::response_only(flat), ConfidenceLevel(1.0)), std::invalid_argument);
}

TEST_CASE("quantile perfect fit") {
  const auto f = fit_quantile(line({0, 1, 2, 5}, {1, 3, 5, 11}), ConfidenceLevel(0.3));
  CHECK(f.objective == doctest::Approx(0.0));
  CHECK(f.model.coefficients(0) == doctest::Approx(2.0));
}

TEST_CASE("quantile matches the two-point line oracle and the epigraph LP") {
  for (std::uint64_t seed = 10; seed < 25; ++seed) {
    const Dataset data = random_dataset(seed, 25, 1);
    for (double alpha : {0.1, 0.5, 0.8}) {
      const double oracle = quantile_line_oracle(data, alpha);
      const auto compact = fit_quantile(data, ConfidenceLevel(alpha));
      const auto epi = fit_quantile(data, ConfidenceLevel(alpha), {LpForm::epigraph, {}});
      CHECK(compact.objective == doctest::Approx(oracle).epsilon(1e-9));
      CHECK(epi.objective == doctest::Approx(oracle).epsilon(1e-9));
    }
  }
}

TEST_CASE("quantile compact and epigraph forms agree in higher dimension") {
  for (std::uint64_t seed = 30; seed < 36; ++seed) {
    const Dataset data = random_dataset(seed, 60, 4);
    const auto a = fit_quantile(data, ConfidenceLevel(0.7));
    const auto b = fit_quantile(data, ConfidenceLevel(0.7), {LpForm::epigraph, {}});
    CHECK(std::abs(a.objective - b.objective) <= 1e-8 * std::max(1.0, b.objective));
  }
}

TEST_CASE("biased mean intercept-only closed form") {
  const std::vector<double> y{1, 2, 3, 4};
  for (double x : {-1.0, 0.0, 0.25, 3.0}) {
    const auto f = fit_biased_mean(Dataset::response_only(y), BiasParam{x});
    CHECK(f.model.intercept == doctest::Approx(2.5 + x));
  }
  const auto se = fit_se(Dataset::response_only(y));
  CHECK(se.model.intercept == doctest::Approx(2.5));
  CHECK(se.objective == doctest::Approx(0.5));
}

TEST_CASE("se on zero response and perfect fit") {
  const std::vector<double> zeros(5, 0.0);
  const auto f = fit_se(Dataset::response_only(zeros));
  CHECK(f.model.intercept == 0.0);
  CHECK(f.objective == 0.0);
  const auto g = fit_biased_mean(line({0, 1, 2}, {1, 3, 5}), BiasParam{0.0});
  CHECK(g.objective == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("biased mean matches the slope oracle, both LP forms, and pins mean(z) = -x") {
  for (std::uint64_t seed = 40; seed < 55; ++seed) {
    const Dataset data = random_dataset(seed, 30, 1);
    for (double x : {-0.02, 0.0, 0.005, 0.05, 0.5}) {
      const double oracle = biased_mean_slope_oracle(data, x);
      const auto compact = fit_biased_mean(data, BiasParam{x});
      const auto epi = fit_biased_mean(data, BiasParam{x}, {LpForm::epigraph, {}});
      CHECK(compact.objective == doctest::Approx(oracle).epsilon(1e-9));
      CHECK(epi.objective == doctest::Approx(oracle).epsilon(1e-9));
      CHECK(std::abs(residuals(compact.model, data).z.mean() + x) <= 1e-7);
      CHECK(std::abs(residuals(epi.model, data).z.mean() + x) <= 1e-7);
    }
  }
}

TEST_CASE("se fit: both LP shapes, half mean absolute residual, fit_biased_mean at zero") {
  for (std::uint64_t seed = 60; seed < 66; ++seed) {
    const Dataset data = random_dataset(seed, 50, 3);
    const auto a = fit_se(data);
    const auto b = fit_se(data, {LpForm::epigraph, {}});
    const auto c = fit_biased_mean(data, BiasParam{0.0}, {LpForm::epigraph, {}});
    CHECK(std::abs(a.objective - b.objective) <= 1e-9);
    CHECK(std::abs(a.objective - c.objective) <= 1e-9);
    const Residuals r = residuals(a.model, data);
    CHECK(std::abs(r.z.mean()) <= 1e-7);
    CHECK(std::abs(a.objective - 0.5 * r.z.cwiseAbs().mean()) <= 1e-9);
  }
}

TEST_CASE("se fit is positively homogeneous in the response") {
  Dataset data = random_dataset(70, 40, 2);
  const auto base = fit_se(data);
  data.response *= 3.5;
  const auto scaled = fit_se(data);
  CHECK(scaled.objective == doctest::Approx(3.5 * base.objective).epsilon(1e-10));
  CHECK(scaled.model.intercept == doctest::Approx(3.5 * base.model.intercept).epsilon(1e-9));
}

TEST_CASE("biased mean solution solves quantile regression at the induced level") {
  for (std::uint64_t seed = 80; seed < 90; ++seed) {
    const Dataset data = random_dataset(seed, 120, 3);
    for (double x : {0.0, 0.005, 0.05, -0.02}) {
      const auto bmr = fit_biased_mean(data, BiasParam{x});
      REQUIRE(bmr.certified_alpha.has_value());
      const double alpha = *bmr.certified_alpha;
      CHECK(alpha >= bmr.induced_alpha[0]);
      CHECK(alpha <= bmr.induced_alpha[1]);
      REQUIRE(alpha > 0.0);
      REQUIRE(alpha < 1.0);
      const auto qr = fit_quantile(data, ConfidenceLevel(alpha));
      const double at_bmr = kb(data, bmr.model, alpha);
      CHECK(std::abs(at_bmr - qr.objective) <= 1e-6 * std::max(1e-12, std::abs(qr.objective)));
    }
  }
}

TEST_CASE("the upper endpoint alone does not certify quantile optimality in small samples") {
  // documents why certified_alpha exists: at the endpoint the KB objective of
  // the biased mean model can exceed the quantile optimum
  double worst = 0.0;
  for (std::uint64_t seed = 80; seed < 90; ++seed) {
    const Dataset data = random_dataset(seed, 120, 3);
    const auto bmr = fit_biased_mean(data, BiasParam{0.0});
    const double alpha = bmr.induced_alpha[1];
    const auto qr = fit_quantile(data, ConfidenceLevel(alpha));
    worst = std::max(worst, kb(data, bmr.model, alpha) - qr.objective);
    CHECK(kb(data, bmr.model, alpha) >= qr.objective - 1e-9);
  }
  CHECK(worst > 1e-6);
}

TEST_CASE("newsvendor policy and price") {
  const NewsvendorSpec spec{1.0, 2.0};
  CHECK(spec.alpha() == 0.5);
  CHECK_THROWS_AS((NewsvendorSpec{2.0, 2.0}.alpha()), std::invalid_argument);
  CHECK_THROWS_AS((NewsvendorSpec{0.0, 2.0}.alpha()), std::invalid_argument);

  const std::vector<double> y{1, 2, 3, 4, 5, 6, 7};
  const auto policy = newsvendor_policy(Dataset::response_only(y), spec);
  CHECK(policy.alpha == 0.5);
  CHECK(policy.fit.model.intercept == doctest::Approx(4.0));

  // symmetric data: mean = median, alpha* is the upper end P(z <= 0)
  const auto price = newsvendor_price(Dataset::response_only(y), BiasParam{0.0}, 1.0);
  CHECK(price.alpha_star == doctest::Approx(4.0 / 7.0));
  CHECK(price.delta == doctest::Approx(1.0 / (1.0 - 4.0 / 7.0)));

  const auto high = newsvendor_price(Dataset::response_only(y), BiasParam{2.5}, 1.0);
  CHECK(high.alpha_star == doctest::Approx(6.0 / 7.0));
  CHECK(high.delta > price.delta);
  CHECK_THROWS_AS(newsvendor_price(Dataset::response_only(y), BiasParam{10.0}, 1.0), RegressionError);
}

TEST_CASE("dataset validation") {
  Dataset bad;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  Dataset mismatch = random_dataset(1, 5, 2);
  mismatch.design.conservativeResize(4, 2);
  CHECK_THROWS_AS(fit_ols(mismatch), std::invalid_argument);
  Dataset nan = random_dataset(1, 5, 2);
  nan.response(2) = std::nan("");
  CHECK_THROWS_AS(fit_se(nan), std::invalid_argument);
}
