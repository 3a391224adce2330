#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <random>

#include "quadlab/distributions.hpp"
#include "quadlab/functionals.hpp"

using namespace quadlab;

namespace {

EmpiricalSample U(std::vector<double> v) { return EmpiricalSample::uniform(v); }

EmpiricalSample random_sample(std::mt19937_64& rng, bool weighted) {
  std::uniform_int_distribution<int> size(1, 50);
  std::uniform_int_distribution<int> grid(-6, 6);
  std::normal_distribution<double> g;
  std::uniform_real_distribution<double> u(0.1, 2.0);
  const int n = size(rng);
  std::vector<double> v(n), w(n);
  for (int i = 0; i < n; ++i) {
    v[i] = (i % 3 == 0) ? 0.5 * grid(rng) : g(rng);  // plenty of ties
    w[i] = u(rng);
  }
  return weighted ? EmpiricalSample::weighted(v, w) : EmpiricalSample::uniform(v);
}

// VaR-_beta from the raw atoms, for midpoint-rule integration.
double var_lower_naive(const EmpiricalSample& s, double beta) {
  std::vector<std::pair<double, double>> pts;
  for (std::size_t i = 0; i < s.size(); ++i) pts.emplace_back(s.atoms()[i], s.probabilities()[i]);
  std::sort(pts.begin(), pts.end());
  double cum = 0.0;
  for (const auto& [v, p] : pts) {
    cum += p;
    if (cum >= beta) return v;
  }
  return pts.back().first;
}

}  // namespace

TEST_CASE("var examples") {
  auto v = var(U({5, 5, 5}), ConfidenceLevel(0.3));
  CHECK(v.lower == 5.0);
  CHECK(v.upper == 5.0);
  v = var(U({1, 2, 3, 4}), ConfidenceLevel(0.5));
  CHECK(v.lower == 2.0);
  CHECK(v.upper == 3.0);
  CHECK(v.midpoint() == 2.5);
  v = var(U({1, 2, 3, 4}), ConfidenceLevel(0.6));
  CHECK(v.lower == 3.0);
  CHECK(v.upper == 3.0);
  v = var(U({1, 2, 3, 4}), ConfidenceLevel(0.0));
  CHECK(v.lower == 1.0);
  v = var(U({1, 2, 3, 4}), ConfidenceLevel(1.0));
  CHECK(v.upper == 4.0);
  CHECK_THROWS_AS(ConfidenceLevel(1.5), std::invalid_argument);
}

TEST_CASE("cvar examples") {
  CHECK(cvar(U({1, 2, 3, 4}), ConfidenceLevel(0.5)) == doctest::Approx(3.5));
  CHECK(cvar(U({1, 2, 6}), ConfidenceLevel(0.0)) == doctest::Approx(3.0));
  CHECK(cvar(U({1, 2, 6}), ConfidenceLevel(1.0)) == 6.0);
  CHECK(cvar(U({7, 7}), ConfidenceLevel(0.9)) == doctest::Approx(7.0));
}

TEST_CASE("cvar via minimization examples") {
  auto m = cvar_via_min(U({1, 2, 3, 4}), ConfidenceLevel(0.5));
  CHECK(m.value == doctest::Approx(3.5));
  CHECK(m.minimizers.lower == 2.0);
  CHECK(m.minimizers.upper == 3.0);
  m = cvar_via_min(U({3, 3}), ConfidenceLevel(0.4));
  CHECK(m.value == doctest::Approx(3.0));
  CHECK(m.minimizers.lower == 3.0);
  CHECK(m.minimizers.upper == 3.0);
  m = cvar_via_min(U({0, 1}), ConfidenceLevel(0.75));
  CHECK(m.value == doctest::Approx(1.0));
  CHECK(m.minimizers.lower == 1.0);
  CHECK(m.minimizers.upper == 1.0);
}

TEST_CASE("superexpectation examples") {
  const auto s = U({1, 2, 3, 4});
  CHECK(superexpectation(s, 0.0) == doctest::Approx(2.5));
  CHECK(superexpectation(s, 9.0) == 9.0);
  CHECK(superexpectation(s, 2.5) == doctest::Approx(3.0));
  auto d = superexpectation_dual(s, 2.5);
  CHECK(d.value == doctest::Approx(3.0));
  CHECK(d.maximizers[0] == doctest::Approx(0.5));
  CHECK(d.maximizers[1] == doctest::Approx(0.5));
  d = superexpectation_dual(U({2, 2}), 2.0);
  CHECK(d.value == doctest::Approx(2.0));
  CHECK(d.maximizers[0] == 0.0);
  CHECK(d.maximizers[1] == 1.0);
  d = superexpectation_dual(s, 2.0);
  CHECK(d.value == doctest::Approx(2.75));
  CHECK(d.maximizers[0] == doctest::Approx(0.25));
  CHECK(d.maximizers[1] == doctest::Approx(0.5));
}

TEST_CASE("quantile quadrangle examples") {
  auto q = eval_quantile_quadrangle(U({0, 0}), ConfidenceLevel(0.7));
  CHECK(q.risk == 0.0);
  CHECK(q.deviation == 0.0);
  CHECK(q.regret == 0.0);
  CHECK(q.error == 0.0);
  q = eval_quantile_quadrangle(U({-1, 1}), ConfidenceLevel(0.5));
  CHECK(q.error == doctest::Approx(1.0));
  CHECK(q.deviation == doctest::Approx(1.0));
  REQUIRE(q.statistic_interval.has_value());
  CHECK(q.statistic_interval->lower == -1.0);
  CHECK(q.statistic_interval->upper == 1.0);
  CHECK(q.statistic == 0.0);
  CHECK_THROWS_AS(eval_quantile_quadrangle(U({1}), ConfidenceLevel(1.0)), std::invalid_argument);
}

TEST_CASE("biased mean and mean L1 quadrangle examples") {
  auto b = eval_biased_mean_quadrangle(U({3, 3, 3}), BiasParam{0.7});
  CHECK(b.deviation == doctest::Approx(0.0));
  CHECK(b.risk == doctest::Approx(3.0));
  CHECK(superexpectation_error(U({0, 0}), BiasParam{0.7}) == 0.0);

  b = eval_biased_mean_quadrangle(U({-1, 1}), BiasParam{0.5});
  CHECK(b.statistic == doctest::Approx(0.5));
  CHECK(b.error == doctest::Approx(0.5));
  CHECK(b.deviation == doctest::Approx(0.25));
  CHECK(b.risk == doctest::Approx(0.25));
  CHECK(b.regret == doctest::Approx(0.5));

  auto l1 = eval_mean_l1_quadrangle(U({-1, 1}));
  CHECK(l1.deviation == doctest::Approx(0.5));
  l1 = eval_mean_l1_quadrangle(U({0, 2}));
  CHECK(l1.deviation == doctest::Approx(0.5));
  CHECK(l1.error == doctest::Approx(1.0));
  l1 = eval_mean_l1_quadrangle(U({0, 0}));
  CHECK(l1.deviation == 0.0);
  CHECK(l1.error == 0.0);
}

TEST_CASE("error projection examples") {
  auto p = error_projection(U({-1, 1}), BiasParam{0.5});
  CHECK(p.statistic == doctest::Approx(0.5));
  CHECK(p.min_value == doctest::Approx(0.25));
  p = error_projection(U({4, 4}), BiasParam{0.0});
  CHECK(p.statistic == doctest::Approx(4.0));
  CHECK(p.min_value == doctest::Approx(0.0));
  p = error_projection(U({1, 2, 3, 4}), BiasParam{0.0});
  CHECK(p.statistic == doctest::Approx(2.5));
  CHECK(p.min_value == doctest::Approx(0.5));
  // far-negative x: the minimizer set is an interval containing x + mean
  p = error_projection(U({1, 2, 3, 4}), BiasParam{-5.0});
  CHECK(p.argmin.contains(p.statistic, 1e-12));
  CHECK(p.argmin.upper > p.argmin.lower);
}

TEST_CASE("relation check and subregularity examples") {
  auto r = quadrangle_relation_check(U({2, 2, 2}), BiasParam{0.3});
  CHECK(r.max_residual() == 0.0);
  r = quadrangle_relation_check(U({1, 2, 3, 4}), BiasParam{0.0});
  CHECK(r.risk.lhs == doctest::Approx(3.0));
  CHECK(r.risk.rhs == doctest::Approx(3.0));

  auto pr = subregularity_probe(U({-1}), BiasParam{2.0});
  CHECK(pr.lambda == doctest::Approx(3.0));
  CHECK(pr.error_at_lambda == doctest::Approx(1.0));
  pr = subregularity_probe(U({1}), BiasParam{-2.0});
  CHECK(pr.lambda == doctest::Approx(3.0));
  CHECK(pr.error_at_lambda > 0.0);
  pr = subregularity_probe(U({-1, 2}), BiasParam{0.0});
  CHECK(pr.lambda == 1.0);
  CHECK_THROWS_AS(subregularity_probe(U({0, 0}), BiasParam{1.0}), std::invalid_argument);
}

TEST_CASE("cvar agrees with top-k averages and with integrated VaR") {
  std::mt19937_64 rng(77);
  for (int rep = 0; rep < 50; ++rep) {
    const auto s = random_sample(rng, false);
    std::vector<double> sorted = s.atoms();
    std::sort(sorted.begin(), sorted.end());
    const std::size_t n = sorted.size();
    for (std::size_t k = 0; k < n; ++k) {
      double top = 0.0;
      for (std::size_t i = k; i < n; ++i) top += sorted[i];
      const double alpha = static_cast<double>(k) / static_cast<double>(n);
      CHECK(cvar(s, ConfidenceLevel(alpha)) == doctest::Approx(top / static_cast<double>(n - k)).epsilon(1e-12));
    }
  }
  for (int rep = 0; rep < 10; ++rep) {
    const auto s = random_sample(rng, true);
    const double alpha = 0.37;
    const int steps = 200000;
    double integral = 0.0;
    for (int i = 0; i < steps; ++i)
      integral += var_lower_naive(s, alpha + (1.0 - alpha) * (i + 0.5) / steps);
    integral /= steps;
    CHECK(cvar(s, ConfidenceLevel(alpha)) == doctest::Approx(integral).epsilon(1e-3));
  }
}

TEST_CASE("random samples: cvar and superexpectation optimality, centerness, projection, relations") {
  std::mt19937_64 rng(2024);
  for (int rep = 0; rep < 200; ++rep) {
    const auto s = random_sample(rng, rep % 2 == 1);
    for (double x : {-2.0, -0.5, 0.0, 0.5, 2.0}) {
      const BiasParam bx{x};
      const auto d = superexpectation_dual(s, x);
      CHECK(std::abs(d.value - superexpectation(s, x)) <= 1e-10);
      CHECK(d.maximizers[0] == doctest::Approx(s.prob_less(x)).epsilon(1e-12));
      CHECK(d.maximizers[1] == doctest::Approx(s.prob_less_equal(x)).epsilon(1e-12));
      // no level on a fine grid beats the kink maximum
      for (int k = 0; k <= 100; ++k) {
        const double a = k / 100.0;
        CHECK(a * x + cvar_tail_integral(s, a) <= d.value + 1e-10);
      }

      const auto b = eval_biased_mean_quadrangle(s, bx);
      CHECK(std::abs(b.risk - b.deviation - s.mean()) <= 1e-10);
      CHECK(std::abs(b.regret - b.error - s.mean()) <= 1e-10);
      const auto p = error_projection(s, bx);
      CHECK(std::abs(p.statistic - (x + s.mean())) <= 1e-10);
      CHECK(std::abs(p.min_value - superexpectation_deviation(s, bx)) <= 1e-10);
      CHECK(p.argmin.contains(p.statistic, 1e-10));
      CHECK(quadrangle_relation_check(s, bx).max_residual() <= 1e-10);
      CHECK(superexpectation_error(s, bx) >= 0.0);
    }
    for (double alpha : {0.05, 0.5, 0.9}) {
      const auto m = cvar_via_min(s, ConfidenceLevel(alpha));
      const auto v = var(s, ConfidenceLevel(alpha));
      CHECK(std::abs(m.value - cvar(s, ConfidenceLevel(alpha))) <= 1e-10);
      CHECK(m.minimizers.lower == v.lower);
      CHECK(m.minimizers.upper == v.upper);
      const auto q = eval_quantile_quadrangle(s, ConfidenceLevel(alpha));
      CHECK(std::abs(q.risk - q.deviation - s.mean()) <= 1e-10);
      CHECK(std::abs(q.regret - q.error - s.mean()) <= 1e-10);
    }
    const auto b0 = eval_biased_mean_quadrangle(s, BiasParam{0.0});
    const auto l1 = eval_mean_l1_quadrangle(s);
    CHECK(std::abs(b0.deviation - l1.deviation) <= 1e-12);
    CHECK(std::abs(b0.error - l1.error) <= 1e-12);
    CHECK(std::abs(b0.risk - l1.risk) <= 1e-12);
    CHECK(std::abs(b0.regret - l1.regret) <= 1e-12);
  }
}

TEST_CASE("coherence of the x = 0 risk on coupled samples") {
  std::mt19937_64 rng(99);
  std::normal_distribution<double> g;
  auto r0 = [](const EmpiricalSample& s) { return eval_biased_mean_quadrangle(s, BiasParam{0.0}).risk; };
  for (int rep = 0; rep < 100; ++rep) {
    const int n = 1 + rep % 40;
    std::vector<double> a(n), c(n), w(n);
    for (int i = 0; i < n; ++i) {
      a[i] = g(rng);
      c[i] = g(rng);
      w[i] = 0.5 + std::abs(g(rng));
    }
    const auto X = EmpiricalSample::weighted(a, w);
    const auto Y = EmpiricalSample::weighted(c, w);
    const auto Z = X.transformed([](double v) { return v + 1.0; });
    CHECK(std::abs(r0(X.transformed([](double v) { return 2.5 * v; })) - 2.5 * r0(X)) <= 1e-10);
    CHECK(std::abs(r0(X.transformed([](double v) { return v + 0.7; })) - (r0(X) + 0.7)) <= 1e-10);
    CHECK(r0(X) <= r0(Z) + 1e-10);
    CHECK(r0(coupled_sum(X, Y)) <= r0(X) + r0(Y) + 1e-10);
  }
}
