#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "quadlab/functionals.hpp"
#include "quadlab/lp.hpp"

namespace quadlab {

/// Scenario returns r_ij (scenario i, asset j). Losses are X_i = -w . r_i;
/// feasible portfolios satisfy sum(w) = 1 and E[-X] = target_mean.
struct PortfolioProblem {
  Eigen::MatrixXd returns;
  double target_mean = 0.0;
  bool long_only = false;

  void validate() const;
};

struct PortfolioSolution {
  Eigen::VectorXd weights;
  EmpiricalSample loss = EmpiricalSample::uniform(std::vector<double>{0.0});
  double deviation = 0.0;
  /// Filled by optimize_se_dev: [P(X < x + EX), P(X <= x + EX)].
  std::array<double, 2> induced_alpha{};
  /// 1 - mean(v) from the LP multipliers; for SE deviation this is a level at
  /// which the same portfolio also minimizes CVaR deviation.
  std::optional<double> certified_alpha;
  /// CVaR deviation only: the minimizing threshold zeta.
  std::optional<double> zeta;
  int lp_iterations = 0;
};

class PortfolioError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// min E[X - EX - x]_+ - x_- over feasible portfolios. Throws PortfolioError
/// when the target mean cannot be met.
PortfolioSolution optimize_se_dev(const PortfolioProblem& problem, BiasParam x,
                                  const lp::LpOptions& opt = {});

/// min CVaR_alpha(X) - E[X], alpha in (0, 1).
PortfolioSolution optimize_cvar_dev(const PortfolioProblem& problem, ConfidenceLevel alpha,
                                    const lp::LpOptions& opt = {});

/// [P(X < x + EX), P(X <= x + EX)] with |X_i - x - EX| <= zero_tol counted as equal.
std::array<double, 2> map_x_to_alpha(const PortfolioSolution& solution, BiasParam x,
                                     double zero_tol = 0.0);

/// Threshold tolerance used for LP-produced loss samples.
double loss_zero_tolerance(const PortfolioSolution& solution);

/// Loss sample of a fixed portfolio.
EmpiricalSample portfolio_loss(const Eigen::MatrixXd& returns, const Eigen::VectorXd& weights);

struct SweepRow {
  double x = 0.0;
  double alpha = 0.0;  ///< level used for the CVaR partner problem
  double alpha_lo = 0.0;
  double alpha_hi = 0.0;
  double se_dev_opt = 0.0;
  double cvar_dev_at_se_opt = 0.0;
  double cvar_dev_opt = 0.0;
  double se_dev_at_cvar_opt = 0.0;
  std::string error;  ///< empty when both solves succeeded

  double cvar_gap() const;  ///< |cvar_dev_opt - cvar_dev_at_se_opt| / max(1e-12, cvar_dev_opt)
  double se_gap() const;    ///< same for the SE deviation pair
};

/// Which level in the mapped interval pairs an SE problem with its CVaR partner.
enum class AlphaChoice { certified, upper, lower };

/// For each x: SE-deviation optimum, mapped alpha, CVaR-deviation optimum at
/// alpha, and both objectives cross-evaluated. Solver failures are recorded per row.
std::vector<SweepRow> equivalence_sweep(const Eigen::MatrixXd& returns, double target_mean,
                                        const std::vector<double>& x_grid,
                                        AlphaChoice choice = AlphaChoice::upper,
                                        bool long_only = false);

/// x0, x0 + step, ... up to x1 (inclusive within half a step).
std::vector<double> make_grid(double x0, double x1, double step);

/// Stand-in for the external 4-asset data: correlated normal returns with
/// fixed means and volatilities.
struct ReturnsSpec {
  std::vector<double> means{0.010, 0.015, 0.020, 0.025};
  std::vector<double> vols{0.05, 0.07, 0.09, 0.12};
  double correlation = 0.3;
};

Eigen::MatrixXd sample_returns(const ReturnsSpec& spec, std::size_t n, std::uint64_t seed);

}  // namespace quadlab
