#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "quadlab/portfolio.hpp"

using namespace quadlab;
using lp::kInf;
using lp::Relation;

namespace {

Eigen::MatrixXd random_returns(std::uint64_t seed, Eigen::Index n, Eigen::Index m) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  Eigen::MatrixXd r(n, m);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < m; ++j) r(i, j) = 0.01 * (j + 1) + 0.05 * (1 + j) * g(rng);
  return r;
}

// Primal epigraph LPs with weights as variables: an independent formulation.
double se_dev_primal(const Eigen::MatrixXd& r, double mu, double x, bool long_only) {
  const Eigen::Index n = r.rows(), m = r.cols();
  lp::LpProblem p;
  for (Eigen::Index j = 0; j < m; ++j) p.add_variable(0.0, long_only ? 0.0 : -kInf, kInf);
  for (Eigen::Index i = 0; i < n; ++i) p.add_variable(1.0 / n, 0.0, kInf);
  const Eigen::RowVectorXd rbar = r.colwise().mean();
  std::vector<std::pair<int, double>> budget, mean;
  for (Eigen::Index j = 0; j < m; ++j) {
    budget.emplace_back(j, 1.0);
    mean.emplace_back(j, rbar(j));
  }
  p.add_row(budget, Relation::equal, 1.0);
  p.add_row(mean, Relation::equal, mu);
  // s_i >= X_i - EX - x = -w.(r_i - rbar) - x
  for (Eigen::Index i = 0; i < n; ++i) {
    std::vector<std::pair<int, double>> row{{static_cast<int>(m + i), 1.0}};
    for (Eigen::Index j = 0; j < m; ++j) row.emplace_back(j, r(i, j) - rbar(j));
    p.add_row(row, Relation::greater_equal, -x);
  }
  const auto sol = lp::solve_lp(p);
  REQUIRE(sol.status == lp::LpStatus::optimal);
  return sol.objective - (x < 0 ? -x : 0.0);
}

double cvar_dev_primal(const Eigen::MatrixXd& r, double mu, double alpha, bool long_only) {
  const Eigen::Index n = r.rows(), m = r.cols();
  lp::LpProblem p;
  for (Eigen::Index j = 0; j < m; ++j) p.add_variable(0.0, long_only ? 0.0 : -kInf, kInf);
  const int zeta = p.add_variable(1.0, -kInf, kInf);
  for (Eigen::Index i = 0; i < n; ++i) p.add_variable(1.0 / ((1.0 - alpha) * n), 0.0, kInf);
  const Eigen::RowVectorXd rbar = r.colwise().mean();
  std::vector<std::pair<int, double>> budget, mean;
  for (Eigen::Index j = 0; j < m; ++j) {
    budget.emplace_back(j, 1.0);
    mean.emplace_back(j, rbar(j));
  }
  p.add_row(budget, Relation::equal, 1.0);
  p.add_row(mean, Relation::equal, mu);
  for (Eigen::Index i = 0; i < n; ++i) {
    std::vector<std::pair<int, double>> row{{static_cast<int>(zeta + 1 + i), 1.0}, {zeta, 1.0}};
    for (Eigen::Index j = 0; j < m; ++j) row.emplace_back(j, r(i, j));
    p.add_row(row, Relation::greater_equal, 0.0);
  }
  const auto sol = lp::solve_lp(p);
  REQUIRE(sol.status == lp::LpStatus::optimal);
  return sol.objective + mu;
}

PortfolioSolution with_loss(std::vector<double> loss) {
  PortfolioSolution s;
  s.loss = EmpiricalSample::uniform(loss);
  return s;
}

}  // namespace

TEST_CASE("map x to alpha examples") {
  auto a = map_x_to_alpha(with_loss({1, 2, 3}), BiasParam{0.5});
  CHECK(a[0] == doctest::Approx(2.0 / 3.0));
  CHECK(a[1] == doctest::Approx(2.0 / 3.0));
  a = map_x_to_alpha(with_loss({4, 4}), BiasParam{0.1});
  CHECK(a[0] == 1.0);
  CHECK(a[1] == 1.0);
  a = map_x_to_alpha(with_loss({0, 1}), BiasParam{-0.5});
  CHECK(a[0] == 0.0);
  CHECK(a[1] == 0.5);
}

TEST_CASE("a risk-free asset meeting the target has zero deviation") {
  Eigen::MatrixXd r = random_returns(1, 40, 3);
  r.col(0).setConstant(0.02);
  const PortfolioProblem p{r, 0.02, false};
  const auto se = optimize_se_dev(p, BiasParam{0.0});
  CHECK(se.deviation == doctest::Approx(0.0).epsilon(1e-12));
  const auto cv = optimize_cvar_dev(p, ConfidenceLevel(0.9));
  CHECK(cv.deviation == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("one scenario: every feasible portfolio is riskless") {
  Eigen::MatrixXd r(1, 3);
  r << 0.01, 0.03, -0.02;
  const PortfolioProblem p{r, 0.015, false};
  CHECK(optimize_cvar_dev(p, ConfidenceLevel(0.8)).deviation == doctest::Approx(0.0));
  CHECK(optimize_se_dev(p, BiasParam{0.0}).deviation == doctest::Approx(0.0));
}

TEST_CASE("two identical assets") {
  Eigen::MatrixXd r = random_returns(2, 30, 3);
  r.col(1) = r.col(0);
  const PortfolioProblem p{r, 0.02, false};
  const auto se = optimize_se_dev(p, BiasParam{0.01});
  CHECK(se.deviation == doctest::Approx(se_dev_primal(r, 0.02, 0.01, false)).epsilon(1e-9));
}

TEST_CASE("compact dual matches the primal epigraph LP, constraints hold") {
  for (std::uint64_t seed = 10; seed < 22; ++seed) {
    const Eigen::MatrixXd r = random_returns(seed, 60, 4);
    for (bool long_only : {false, true}) {
      const double mu = 0.022;
      const PortfolioProblem p{r, mu, long_only};
      for (double x : {-0.02, 0.0, 0.01, 0.05}) {
        const auto se = optimize_se_dev(p, BiasParam{x});
        CHECK(se.deviation == doctest::Approx(se_dev_primal(r, mu, x, long_only)).epsilon(1e-9));
        CHECK(std::abs(se.weights.sum() - 1.0) <= 1e-8);
        CHECK(std::abs(-se.loss.mean() - mu) <= 1e-7);
        CHECK(se.deviation >= -(x < 0 ? -x : 0.0) - 1e-12);
        if (long_only) CHECK(se.weights.minCoeff() >= -1e-9);
      }
      for (double alpha : {0.3, 0.8, 0.95}) {
        const auto cv = optimize_cvar_dev(p, ConfidenceLevel(alpha));
        CHECK(cv.deviation == doctest::Approx(cvar_dev_primal(r, mu, alpha, long_only)).epsilon(1e-9));
        CHECK(cv.deviation >= -1e-12);
        CHECK(std::abs(-cv.loss.mean() - mu) <= 1e-7);
        // zeta is a minimizer in the CVaR formula, i.e. a VaR point
        const VarInterval v = var(cv.loss, ConfidenceLevel(alpha));
        CHECK(v.contains(*cv.zeta, 1e-9));
      }
    }
  }
}

TEST_CASE("unattainable target mean is reported") {
  const Eigen::MatrixXd r = random_returns(5, 20, 3);
  const PortfolioProblem p{r, 10.0, true};
  CHECK_THROWS_AS(optimize_se_dev(p, BiasParam{0.0}), PortfolioError);
  CHECK_THROWS_AS(optimize_cvar_dev(p, ConfidenceLevel(0.9)), PortfolioError);
  Eigen::MatrixXd flat = r;
  flat.rowwise() -= flat.colwise().mean();  // every asset has mean 0
  CHECK_THROWS_AS(optimize_se_dev({flat, 0.01, false}, BiasParam{0.0}), PortfolioError);
}

TEST_CASE("invalid problems are rejected") {
  CHECK_THROWS_AS(optimize_se_dev({Eigen::MatrixXd::Zero(3, 1), 0.0, false}, BiasParam{0.0}),
                  std::invalid_argument);
  CHECK_THROWS_AS(optimize_cvar_dev({random_returns(1, 5, 2), 0.0, false}, ConfidenceLevel(1.0)),
                  std::invalid_argument);
  CHECK_THROWS_AS(equivalence_sweep(random_returns(1, 5, 2), 0.0, {}), std::invalid_argument);
}

TEST_CASE("equivalence sweep on a small scenario set") {
  const Eigen::MatrixXd r = random_returns(7, 400, 4);
  const auto grid = make_grid(-1e-4, 0.05, 0.0020875 * 4);
  for (AlphaChoice choice : {AlphaChoice::certified, AlphaChoice::upper}) {
    const auto rows = equivalence_sweep(r, 0.025, grid, choice);
    REQUIRE(rows.size() == grid.size());
    for (const auto& row : rows) {
      REQUIRE(row.error.empty());
      CHECK(row.alpha >= row.alpha_lo);
      CHECK(row.alpha <= row.alpha_hi);
      // the equivalence is exact at the certified level; endpoints are close at this size
      if (choice == AlphaChoice::certified) CHECK(row.cvar_gap() <= 1e-9);
      else CHECK(row.cvar_gap() <= 1e-3);
      CHECK(row.cvar_dev_at_se_opt >= row.cvar_dev_opt - 1e-12);
      CHECK(row.se_dev_at_cvar_opt >= row.se_dev_opt - 1e-12);
    }
  }
}

TEST_CASE("sweep with a risk-free asset is identically zero") {
  Eigen::MatrixXd r = random_returns(8, 50, 3);
  r.col(2).setConstant(0.03);
  const auto rows = equivalence_sweep(r, 0.03, {0.0, 0.01}, AlphaChoice::certified);
  for (const auto& row : rows) {
    if (!row.error.empty()) continue;  // alpha may hit an endpoint for a constant loss
    CHECK(row.se_dev_opt == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(row.cvar_dev_opt == doctest::Approx(0.0).epsilon(1e-12));
  }
}

TEST_CASE("grid construction") {
  const auto g = make_grid(-1e-4, -1e-4 + 24 * 0.0020875, 0.0020875);
  CHECK(g.size() == 25);
  CHECK(g.back() == doctest::Approx(0.04999));
  CHECK_THROWS_AS(make_grid(0.0, 1.0, 0.0), std::invalid_argument);
}

TEST_CASE("synthetic returns are reproducible and have the requested moments") {
  const auto a = sample_returns({}, 20000, 3);
  const auto b = sample_returns({}, 20000, 3);
  CHECK(a == b);
  CHECK(a.col(3).mean() == doctest::Approx(0.025).epsilon(0.1));
  const double sd = std::sqrt((a.col(3).array() - a.col(3).mean()).square().mean());
  CHECK(sd == doctest::Approx(0.12).epsilon(0.03));
}
