#pragma once

#include <array>
#include <optional>
#include <span>
#include <utility>

#include <Eigen/Dense>

#include "quadlab/functionals.hpp"
#include "quadlab/lp.hpp"

namespace quadlab {

/// Observations x_i as rows of `design`, responses y_i in `response`.
/// A design with zero columns is the intercept-only model.
struct Dataset {
  Eigen::MatrixXd design;
  Eigen::VectorXd response;

  Eigen::Index n() const noexcept { return response.size(); }
  Eigen::Index d() const noexcept { return design.cols(); }

  /// Throws std::invalid_argument when empty, mis-shaped, or non-finite.
  void validate() const;
  /// Intercept-only dataset.
  static Dataset response_only(std::span<const double> y);
};

struct LinearModel {
  double intercept = 0.0;
  Eigen::VectorXd coefficients;

  double predict(const Eigen::Ref<const Eigen::RowVectorXd>& x) const;
};

struct Residuals {
  Eigen::VectorXd z;
};

/// z_i = y_i - c0 - c . x_i
Residuals residuals(const LinearModel& model, const Dataset& data);

/// [P(z < 0), P(z <= 0)] counting |z_i| <= zero_tol as zero.
std::array<double, 2> induced_alpha(const Residuals& r, double zero_tol = 0.0);

/// Zero threshold used for solver-produced residuals.
double residual_zero_tolerance(const Dataset& data);

/// LP shape used by the piecewise-linear fitters. The compact form has one row
/// per coefficient and one [0, 1] column per observation; the epigraph form
/// carries one row per observation and is kept as an independent cross-check.
enum class LpForm { compact, epigraph };

struct FitOptions {
  LpForm form = LpForm::compact;
  lp::LpOptions lp;
};

struct FitResult {
  LinearModel model;
  double objective = 0.0;
  std::array<double, 2> induced_alpha{};  ///< from residuals, with residual_zero_tolerance
  /// Biased mean fits (compact LP): 1 - mean(v) for the optimal multipliers v.
  /// It lies in induced_alpha and is a level at which the same model also
  /// solves quantile regression, which an interval endpoint need not be.
  std::optional<double> certified_alpha;
  bool regularized = false;               ///< OLS only: ridge added after a failed factorization
  int lp_iterations = 0;
};

class RegressionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Mean squared residual minimizer via the normal equations.
FitResult fit_ols(const Dataset& data);

/// Minimizes (1/n) sum[(alpha/(1-alpha)) (z_i)_+ + (z_i)_-], alpha in (0, 1).
FitResult fit_quantile(const Dataset& data, ConfidenceLevel alpha, const FitOptions& opt = {});

/// Minimizes max{mean(z_-) - x_+, mean(z_+) - x_-}. The intercept is chosen
/// so that mean(z) = -x, which always lies in the minimizer set.
FitResult fit_biased_mean(const Dataset& data, BiasParam x, const FitOptions& opt = {});

/// fit_biased_mean at x = 0; the objective equals mean|z| / 2.
FitResult fit_se(const Dataset& data, const FitOptions& opt = {});

/// Cost gamma, price delta > gamma.
struct NewsvendorSpec {
  double gamma = 1.0;
  double delta = 2.0;
  double alpha() const;  ///< 1 - gamma / delta; throws on invalid prices
};

struct NewsvendorPolicy {
  FitResult fit;
  double alpha = 0.0;
};

NewsvendorPolicy newsvendor_policy(const Dataset& data, const NewsvendorSpec& spec,
                                   const FitOptions& opt = {});

struct NewsvendorPrice {
  FitResult fit;
  double alpha_star = 0.0;  ///< upper end of the induced interval
  double delta = 0.0;       ///< gamma / (1 - alpha_star)
};

/// Throws RegressionError when alpha_star = 1 (no finite price).
NewsvendorPrice newsvendor_price(const Dataset& data, BiasParam x, double gamma,
                                 const FitOptions& opt = {});

namespace detail {
/// Epigraph LP for the SE error at x = 0 used by the sparse MILP. Variable
/// layout: c0, c_1..c_d, u_1..u_n, t. Minimizing t gives max{mean z_+, mean z_-}.
struct SeEpigraph {
  lp::LpProblem problem;
  int intercept = 0;
  int first_coef = 1;
  int first_u = 0;
  int t = 0;
};
SeEpigraph build_se_epigraph(const Dataset& data);
}  // namespace detail

}  // namespace quadlab
