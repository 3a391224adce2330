#include "quadlab/portfolio.hpp"

#include <algorithm>
#include <cmath>

#include "quadlab/distributions.hpp"

namespace quadlab {
namespace {

using lp::LpProblem;
using lp::LpSolution;
using lp::LpStatus;
using lp::Relation;

// Both deviation LPs are solved in dual form: one [0, 1] column per scenario,
// free columns theta (budget) and eta (target mean), one row per asset. The
// portfolio is minus the asset-row multipliers.
struct DualShape {
  LpProblem problem;
  int theta = 0;
  int eta = 0;
  int first_asset_row = 0;
};

void add_asset_rows(DualShape& s, const Eigen::MatrixXd& coeffs, const Eigen::RowVectorXd& rbar,
                    bool long_only) {
  const Eigen::Index n = coeffs.rows(), m = coeffs.cols();
  s.first_asset_row = s.problem.num_rows();
  for (Eigen::Index j = 0; j < m; ++j) {
    std::vector<std::pair<int, double>> row;
    row.reserve(n + 2);
    for (Eigen::Index i = 0; i < n; ++i)
      if (coeffs(i, j) != 0.0) row.emplace_back(static_cast<int>(i), coeffs(i, j));
    row.emplace_back(s.theta, 1.0);
    row.emplace_back(s.eta, rbar(j));
    s.problem.add_row(std::move(row), long_only ? Relation::less_equal : Relation::equal, 0.0);
  }
}

LpSolution solve_or_throw(const LpProblem& p, const lp::LpOptions& opt, const char* who) {
  LpSolution sol = lp::solve_lp(p, opt);
  // the dual LP is unbounded exactly when no portfolio meets the constraints
  if (sol.status == LpStatus::unbounded)
    throw PortfolioError(std::string(who) + ": target mean is not attainable");
  if (sol.status == LpStatus::infeasible)
    throw PortfolioError(std::string(who) + ": deviation is unbounded below");
  if (sol.status != LpStatus::optimal)
    throw PortfolioError(std::string(who) + ": LP " + std::string(lp::to_string(sol.status)));
  return sol;
}

void check_constraints(const PortfolioProblem& p, const PortfolioSolution& s, const char* who) {
  const double budget = s.weights.sum();
  const double mean_ret = -s.loss.mean();
  const double scale = 1.0 + s.weights.cwiseAbs().sum();
  if (std::abs(budget - 1.0) > 1e-8 * scale || std::abs(mean_ret - p.target_mean) > 1e-7 * scale)
    throw PortfolioError(std::string(who) + ": recovered portfolio violates budget or target mean");
}

double mean_of_v(const LpSolution& sol, Eigen::Index n) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) acc += sol.x[i];
  return acc / static_cast<double>(n);
}

}  // namespace

void PortfolioProblem::validate() const {
  if (returns.rows() < 1) throw std::invalid_argument("PortfolioProblem: need at least one scenario");
  if (returns.cols() < 2) throw std::invalid_argument("PortfolioProblem: need at least two assets");
  if (!returns.allFinite() || !std::isfinite(target_mean))
    throw std::invalid_argument("PortfolioProblem: non-finite data");
}

EmpiricalSample portfolio_loss(const Eigen::MatrixXd& returns, const Eigen::VectorXd& weights) {
  if (weights.size() != returns.cols())
    throw std::invalid_argument("portfolio_loss: weight vector does not match asset count");
  const Eigen::VectorXd loss = -(returns * weights);
  return EmpiricalSample::uniform(std::span<const double>(loss.data(), static_cast<std::size_t>(loss.size())));
}

// min_w (1/n) sum_i [-w . (r_i - rbar) - x]_+ dualizes to
//   max -x sum v + theta + eta mu,  sum_i v_i (r_ij - rbar_j) + theta + eta rbar_j = 0 (<= 0 long-only),
// scaled by n so the scenario coefficients stay O(r).
PortfolioSolution optimize_se_dev(const PortfolioProblem& problem, BiasParam x, const lp::LpOptions& opt) {
  problem.validate();
  if (!std::isfinite(x.x)) throw std::invalid_argument("optimize_se_dev: non-finite x");
  const Eigen::Index n = problem.returns.rows();
  const Eigen::RowVectorXd rbar = problem.returns.colwise().mean();
  const Eigen::MatrixXd centred = problem.returns.rowwise() - rbar;

  DualShape s;
  for (Eigen::Index i = 0; i < n; ++i) s.problem.add_variable(x.x, 0.0, 1.0);
  s.theta = s.problem.add_variable(-1.0, -lp::kInf, lp::kInf);
  s.eta = s.problem.add_variable(-problem.target_mean, -lp::kInf, lp::kInf);
  add_asset_rows(s, centred, rbar, problem.long_only);
  const LpSolution sol = solve_or_throw(s.problem, opt, "optimize_se_dev");

  PortfolioSolution out;
  out.weights.resize(problem.returns.cols());
  for (Eigen::Index j = 0; j < out.weights.size(); ++j) out.weights(j) = -sol.row_duals[s.first_asset_row + j];
  out.loss = portfolio_loss(problem.returns, out.weights);
  check_constraints(problem, out, "optimize_se_dev");
  out.deviation = superexpectation_deviation(out.loss, x);
  out.induced_alpha = map_x_to_alpha(out, x, loss_zero_tolerance(out));
  out.certified_alpha = std::clamp(1.0 - mean_of_v(sol, n), 0.0, 1.0);
  out.lp_iterations = sol.iterations;
  return out;
}

// CVaR_alpha(X) - EX = min_zeta zeta + E[X - zeta]_+ / (1 - alpha) + mu. Dual, scaled by
// (1 - alpha) n:  sum v = (1 - alpha) n,  sum_i v_i r_ij + theta + eta rbar_j = 0.
PortfolioSolution optimize_cvar_dev(const PortfolioProblem& problem, ConfidenceLevel alpha,
                                    const lp::LpOptions& opt) {
  problem.validate();
  if (!alpha.interior()) throw std::invalid_argument("optimize_cvar_dev: alpha must lie in (0, 1)");
  const Eigen::Index n = problem.returns.rows();
  const Eigen::RowVectorXd rbar = problem.returns.colwise().mean();
  const double mass = (1.0 - alpha.value()) * static_cast<double>(n);

  DualShape s;
  for (Eigen::Index i = 0; i < n; ++i) s.problem.add_variable(0.0, 0.0, 1.0);
  s.theta = s.problem.add_variable(-1.0, -lp::kInf, lp::kInf);
  s.eta = s.problem.add_variable(-problem.target_mean, -lp::kInf, lp::kInf);
  std::vector<std::pair<int, double>> total(n);
  for (Eigen::Index i = 0; i < n; ++i) total[i] = {static_cast<int>(i), 1.0};
  s.problem.add_row(std::move(total), Relation::equal, mass);
  add_asset_rows(s, problem.returns, rbar, problem.long_only);
  const LpSolution sol = solve_or_throw(s.problem, opt, "optimize_cvar_dev");

  PortfolioSolution out;
  out.weights.resize(problem.returns.cols());
  for (Eigen::Index j = 0; j < out.weights.size(); ++j) out.weights(j) = -sol.row_duals[s.first_asset_row + j];
  out.loss = portfolio_loss(problem.returns, out.weights);
  check_constraints(problem, out, "optimize_cvar_dev");
  out.deviation = cvar_deviation(out.loss, alpha);
  out.zeta = -sol.row_duals[0];  // scenarios with X_i > zeta carry v_i = 1
  out.certified_alpha = alpha.value();
  out.lp_iterations = sol.iterations;
  return out;
}

std::array<double, 2> map_x_to_alpha(const PortfolioSolution& solution, BiasParam x, double zero_tol) {
  const double threshold = x.x + solution.loss.mean();
  double below = 0.0, at = 0.0;
  const auto& atoms = solution.loss.atoms();
  const auto& probs = solution.loss.probabilities();
  for (std::size_t i = 0; i < atoms.size(); ++i) {
    if (std::abs(atoms[i] - threshold) <= zero_tol) at += probs[i];
    else if (atoms[i] < threshold) below += probs[i];
  }
  return {std::min(1.0, below), std::min(1.0, below + at)};
}

double loss_zero_tolerance(const PortfolioSolution& solution) {
  return 1e-9 * (1.0 + std::max(std::abs(solution.loss.min()), std::abs(solution.loss.max())));
}

double SweepRow::cvar_gap() const {
  return std::abs(cvar_dev_opt - cvar_dev_at_se_opt) / std::max(1e-12, std::abs(cvar_dev_opt));
}

double SweepRow::se_gap() const {
  return std::abs(se_dev_opt - se_dev_at_cvar_opt) / std::max(1e-12, std::abs(se_dev_opt));
}

std::vector<SweepRow> equivalence_sweep(const Eigen::MatrixXd& returns, double target_mean,
                                        const std::vector<double>& x_grid, AlphaChoice choice,
                                        bool long_only) {
  if (x_grid.empty()) throw std::invalid_argument("equivalence_sweep: empty x grid");
  const PortfolioProblem problem{returns, target_mean, long_only};
  problem.validate();
  std::vector<SweepRow> rows;
  rows.reserve(x_grid.size());
  for (double xv : x_grid) {
    SweepRow row;
    row.x = xv;
    try {
      const BiasParam x{xv};
      const PortfolioSolution se = optimize_se_dev(problem, x);
      row.alpha_lo = se.induced_alpha[0];
      row.alpha_hi = se.induced_alpha[1];
      switch (choice) {
        case AlphaChoice::certified: row.alpha = *se.certified_alpha; break;
        case AlphaChoice::upper: row.alpha = row.alpha_hi; break;
        case AlphaChoice::lower: row.alpha = row.alpha_lo; break;
      }
      if (!(row.alpha > 0.0 && row.alpha < 1.0))
        throw PortfolioError("mapped alpha " + std::to_string(row.alpha) + " is not in (0, 1)");
      const ConfidenceLevel alpha(row.alpha);
      row.se_dev_opt = se.deviation;
      row.cvar_dev_at_se_opt = cvar_deviation(se.loss, alpha);
      const PortfolioSolution cv = optimize_cvar_dev(problem, alpha);
      row.cvar_dev_opt = cv.deviation;
      row.se_dev_at_cvar_opt = superexpectation_deviation(cv.loss, x);
    } catch (const std::exception& e) {
      row.error = e.what();
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<double> make_grid(double x0, double x1, double step) {
  if (!(step > 0.0) || !std::isfinite(step) || !std::isfinite(x0) || !std::isfinite(x1))
    throw std::invalid_argument("make_grid: step must be positive and bounds finite");
  if (x1 < x0) throw std::invalid_argument("make_grid: upper end below lower end");
  std::vector<double> grid;
  const auto count = static_cast<long>(std::floor((x1 - x0) / step + 0.5));
  for (long k = 0; k <= count; ++k) grid.push_back(x0 + static_cast<double>(k) * step);
  return grid;
}

Eigen::MatrixXd sample_returns(const ReturnsSpec& spec, std::size_t n, std::uint64_t seed) {
  const std::size_t m = spec.means.size();
  if (m < 2 || spec.vols.size() != m) throw std::invalid_argument("sample_returns: bad asset spec");
  if (n == 0) throw std::invalid_argument("sample_returns: n must be positive");
  Eigen::MatrixXd cov(m, m);
  for (std::size_t a = 0; a < m; ++a)
    for (std::size_t b = 0; b < m; ++b)
      cov(a, b) = spec.vols[a] * spec.vols[b] * (a == b ? 1.0 : spec.correlation);
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success) throw std::invalid_argument("sample_returns: covariance not positive definite");
  const Eigen::MatrixXd lower = llt.matrixL();
  const std::vector<double> z = sample_standard_normal(n * m, seed);
  const Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> white(
      z.data(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m));
  Eigen::MatrixXd out = white * lower.transpose();
  const Eigen::Map<const Eigen::RowVectorXd> mu(spec.means.data(), static_cast<Eigen::Index>(m));
  out.rowwise() += mu;
  return out;
}

}  // namespace quadlab
