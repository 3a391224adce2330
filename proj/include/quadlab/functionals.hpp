#pragma once

#include <array>
#include <optional>
#include <string_view>

#include "quadlab/empirical_sample.hpp"

namespace quadlab {

/// Confidence level alpha in [0, 1]. Operations that need the open interval
/// reject the endpoints themselves.
class ConfidenceLevel {
 public:
  explicit ConfidenceLevel(double alpha);
  double value() const noexcept { return alpha_; }
  bool interior() const noexcept { return alpha_ > 0.0 && alpha_ < 1.0; }

 private:
  double alpha_;
};

/// Bias x of the biased mean quadrangle with its positive and negative parts.
struct BiasParam {
  double x = 0.0;
  double plus() const noexcept { return x > 0.0 ? x : 0.0; }
  double minus() const noexcept { return x < 0.0 ? -x : 0.0; }
};

/// [VaR-, VaR+]. Callers needing one number take `midpoint()`.
struct VarInterval {
  double lower = 0.0;
  double upper = 0.0;
  double midpoint() const noexcept { return 0.5 * (lower + upper); }
  bool contains(double v, double tol = 0.0) const noexcept {
    return v >= lower - tol && v <= upper + tol;
  }
};

enum class QuadrangleFamily { quantile, biased_mean, mean_l1 };
std::string_view to_string(QuadrangleFamily family);

struct QuadrangleEval {
  QuadrangleFamily family = QuadrangleFamily::biased_mean;
  double param = 0.0;  ///< alpha for quantile, x for biased mean, 0 for mean_l1
  double risk = 0.0;
  double deviation = 0.0;
  double regret = 0.0;
  double error = 0.0;
  double statistic = 0.0;
  /// Set-valued statistic; only the quantile family has a nontrivial interval.
  std::optional<VarInterval> statistic_interval;
};

// --- primitive functionals -------------------------------------------------

VarInterval var(const EmpiricalSample& sample, ConfidenceLevel alpha);

/// CVaR_alpha; alpha = 0 gives the mean and alpha = 1 the largest atom.
double cvar(const EmpiricalSample& sample, ConfidenceLevel alpha);

/// (1 - alpha) CVaR_alpha = integral of VaR-_beta over [alpha, 1]; continuous at alpha = 1.
double cvar_tail_integral(const EmpiricalSample& sample, double alpha);

/// E[X - x]_+ + x
double superexpectation(const EmpiricalSample& sample, double x);

double cvar_deviation(const EmpiricalSample& sample, ConfidenceLevel alpha);
/// E[(alpha/(1-alpha)) X_+ + X_-], alpha in (0, 1).
double koenker_bassett_error(const EmpiricalSample& sample, ConfidenceLevel alpha);
/// E[X - E X - x]_+ - x_-
double superexpectation_deviation(const EmpiricalSample& sample, BiasParam x);
/// max{E[X_-] - x_+, E[X_+] - x_-}
double superexpectation_error(const EmpiricalSample& sample, BiasParam x);

// --- optimization formulas on exact kink grids -------------------------------

struct CvarMinimum {
  double value = 0.0;
  VarInterval minimizers;
};

/// min_c { c + E[X - c]_+ / (1 - alpha) } over the atoms, alpha in (0, 1).
CvarMinimum cvar_via_min(const EmpiricalSample& sample, ConfidenceLevel alpha);

struct SuperexpectationMaximum {
  double value = 0.0;
  std::array<double, 2> maximizers{};  ///< [alpha_lo, alpha_hi]
};

/// max over alpha in [0, 1] of alpha x + (1 - alpha) CVaR_alpha, evaluated at
/// alpha in {0, 1} and every CDF level of the sample.
SuperexpectationMaximum superexpectation_dual(const EmpiricalSample& sample, double x);

// --- quadrangles ---------------------------------------------------------------

QuadrangleEval eval_quantile_quadrangle(const EmpiricalSample& sample, ConfidenceLevel alpha);
QuadrangleEval eval_biased_mean_quadrangle(const EmpiricalSample& sample, BiasParam x);
/// Mean quadrangle written with L1 norms; agrees with the biased mean family at x = 0.
QuadrangleEval eval_mean_l1_quadrangle(const EmpiricalSample& sample);

struct ErrorProjection {
  double statistic = 0.0;     ///< x + E[X]
  double min_value = 0.0;     ///< min over C of E_x(X - C), from the candidate grid
  VarInterval argmin;         ///< candidates attaining min_value
};

/// Minimizes C -> E_x(X - C) over the atoms and x + E[X]; the objective is
/// piecewise linear with kinks only there.
ErrorProjection error_projection(const EmpiricalSample& sample, BiasParam x);

struct RelationSide {
  double lhs = 0.0;
  double rhs = 0.0;
  double residual() const;
};

/// Biased mean corners as maxima over alpha of quantile-quadrangle corners.
struct RelationReport {
  RelationSide risk;
  RelationSide deviation;
  RelationSide regret;
  RelationSide error;
  double max_residual() const;
};

RelationReport quadrangle_relation_check(const EmpiricalSample& sample, BiasParam x);

struct SubregularityProbe {
  double lambda = 1.0;
  double error_at_lambda = 0.0;
};

/// Finds lambda > 0 with E_x(lambda X) > 0 for a nonzero sample.
SubregularityProbe subregularity_probe(const EmpiricalSample& sample, BiasParam x);

}  // namespace quadlab
