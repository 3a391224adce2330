#include "quadlab/regression.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace quadlab {
namespace {

using lp::LpProblem;
using lp::LpSolution;
using lp::LpStatus;
using lp::Relation;

EmpiricalSample residual_sample(const Residuals& r) {
  return EmpiricalSample::uniform(std::span<const double>(r.z.data(), static_cast<std::size_t>(r.z.size())));
}

LpSolution require_optimal(LpSolution sol, const char* who) {
  if (sol.status != LpStatus::optimal)
    throw RegressionError(std::string(who) + ": LP " + std::string(lp::to_string(sol.status)) +
                          (sol.message.empty() ? "" : " (" + sol.message + ")"));
  return sol;
}

FitResult finish(const Dataset& data, LinearModel model, int iterations) {
  FitResult out;
  out.model = std::move(model);
  out.lp_iterations = iterations;
  out.induced_alpha = induced_alpha(residuals(out.model, data), residual_zero_tolerance(data));
  return out;
}

// Moves the intercept so that mean(z) = -x; the biased mean statistic says
// this intercept always minimizes the SE error once the slopes are fixed.
void recentre(LinearModel& m, const Dataset& data, double x) {
  const Residuals r = residuals(m, data);
  m.intercept += r.z.mean() + x;
}

// --- quantile -------------------------------------------------------------------

// Dual of the pinball LP: v_i in [0, 1], sum_i v_i a_i = (1 - alpha) sum_i a_i
// with a_i = (1, x_i). Coefficients come back as minus the row multipliers.
LinearModel quantile_compact(const Dataset& data, double alpha, const lp::LpOptions& opt, int& iters) {
  const Eigen::Index n = data.n(), d = data.d();
  LpProblem p;
  for (Eigen::Index i = 0; i < n; ++i) p.add_variable(-data.response(i), 0.0, 1.0);
  std::vector<std::pair<int, double>> ones(n);
  for (Eigen::Index i = 0; i < n; ++i) ones[i] = {static_cast<int>(i), 1.0};
  p.add_row(std::move(ones), Relation::equal, (1.0 - alpha) * static_cast<double>(n));
  for (Eigen::Index j = 0; j < d; ++j) {
    std::vector<std::pair<int, double>> coeffs;
    coeffs.reserve(n);
    for (Eigen::Index i = 0; i < n; ++i)
      if (data.design(i, j) != 0.0) coeffs.emplace_back(static_cast<int>(i), data.design(i, j));
    p.add_row(std::move(coeffs), Relation::equal, (1.0 - alpha) * data.design.col(j).sum());
  }
  const LpSolution sol = require_optimal(lp::solve_lp(p, opt), "fit_quantile");
  iters = sol.iterations;
  LinearModel m;
  m.intercept = -sol.row_duals[0];
  m.coefficients.resize(d);
  for (Eigen::Index j = 0; j < d; ++j) m.coefficients(j) = -sol.row_duals[j + 1];
  return m;
}

// Split residuals z = p - q with one equality row per observation.
LinearModel quantile_epigraph(const Dataset& data, double alpha, const lp::LpOptions& opt, int& iters) {
  const Eigen::Index n = data.n(), d = data.d();
  const double inv_n = 1.0 / static_cast<double>(n);
  LpProblem p;
  const int c0 = p.add_variable(0.0, -lp::kInf, lp::kInf);
  for (Eigen::Index j = 0; j < d; ++j) p.add_variable(0.0, -lp::kInf, lp::kInf);
  const int first_p = p.num_variables();
  for (Eigen::Index i = 0; i < n; ++i) p.add_variable(inv_n * alpha / (1.0 - alpha), 0.0, lp::kInf);
  const int first_q = p.num_variables();
  for (Eigen::Index i = 0; i < n; ++i) p.add_variable(inv_n, 0.0, lp::kInf);
  for (Eigen::Index i = 0; i < n; ++i) {
    std::vector<std::pair<int, double>> coeffs{{c0, 1.0}};
    for (Eigen::Index j = 0; j < d; ++j) coeffs.emplace_back(1 + static_cast<int>(j), data.design(i, j));
    coeffs.emplace_back(first_p + static_cast<int>(i), 1.0);
    coeffs.emplace_back(first_q + static_cast<int>(i), -1.0);
    p.add_row(std::move(coeffs), Relation::equal, data.response(i));
  }
  const LpSolution sol = require_optimal(lp::solve_lp(p, opt), "fit_quantile");
  iters = sol.iterations;
  LinearModel m;
  m.intercept = sol.x[c0];
  m.coefficients.resize(d);
  for (Eigen::Index j = 0; j < d; ++j) m.coefficients(j) = sol.x[1 + j];
  return m;
}

// --- biased mean ------------------------------------------------------------------

// With the intercept pinned by mean(z) = -x the problem is
//   min_c (1/n) sum_i [g_i - c . (x_i - xbar)]_+ - x_-,  g_i = y_i - ybar - x,
// whose dual is max sum_i v_i g_i over v in [0, 1]^n with sum_i v_i (x_i - xbar) = 0.
LinearModel biased_mean_compact(const Dataset& data, double x, const lp::LpOptions& opt, int& iters,
                                double& certified) {
  const Eigen::Index n = data.n(), d = data.d();
  const double ybar = data.response.mean();
  const Eigen::RowVectorXd xbar = d > 0 ? Eigen::RowVectorXd(data.design.colwise().mean())
                                        : Eigen::RowVectorXd(0);
  LpProblem p;
  for (Eigen::Index i = 0; i < n; ++i) p.add_variable(-(data.response(i) - ybar - x), 0.0, 1.0);
  for (Eigen::Index j = 0; j < d; ++j) {
    std::vector<std::pair<int, double>> coeffs;
    coeffs.reserve(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double a = data.design(i, j) - xbar(j);
      if (a != 0.0) coeffs.emplace_back(static_cast<int>(i), a);
    }
    p.add_row(std::move(coeffs), Relation::equal, 0.0);
  }
  const LpSolution sol = require_optimal(lp::solve_lp(p, opt), "fit_biased_mean");
  iters = sol.iterations;
  LinearModel m;
  m.coefficients.resize(d);
  for (Eigen::Index j = 0; j < d; ++j) m.coefficients(j) = -sol.row_duals[j];
  m.intercept = ybar + x - (d > 0 ? xbar.dot(m.coefficients) : 0.0);
  double vsum = 0.0;
  for (double v : sol.x) vsum += v;
  certified = std::clamp(1.0 - vsum / static_cast<double>(n), 0.0, 1.0);
  return m;
}

// z = p - q, t >= mean(q) - x_+, t >= mean(p) - x_-.
LinearModel biased_mean_epigraph(const Dataset& data, BiasParam x, const lp::LpOptions& opt, int& iters) {
  const Eigen::Index n = data.n(), d = data.d();
  const double inv_n = 1.0 / static_cast<double>(n);
  LpProblem p;
  const int c0 = p.add_variable(0.0, -lp::kInf, lp::kInf);
  for (Eigen::Index j = 0; j < d; ++j) p.add_variable(0.0, -lp::kInf, lp::kInf);
  const int first_p = p.num_variables();
  for (Eigen::Index i = 0; i < n; ++i) p.add_variable(0.0, 0.0, lp::kInf);
  const int first_q = p.num_variables();
  for (Eigen::Index i = 0; i < n; ++i) p.add_variable(0.0, 0.0, lp::kInf);
  const int t = p.add_variable(1.0, -lp::kInf, lp::kInf);
  for (Eigen::Index i = 0; i < n; ++i) {
    std::vector<std::pair<int, double>> coeffs{{c0, 1.0}};
    for (Eigen::Index j = 0; j < d; ++j) coeffs.emplace_back(1 + static_cast<int>(j), data.design(i, j));
    coeffs.emplace_back(first_p + static_cast<int>(i), 1.0);
    coeffs.emplace_back(first_q + static_cast<int>(i), -1.0);
    p.add_row(std::move(coeffs), Relation::equal, data.response(i));
  }
  std::vector<std::pair<int, double>> neg{{t, 1.0}}, pos{{t, 1.0}};
  for (Eigen::Index i = 0; i < n; ++i) {
    neg.emplace_back(first_q + static_cast<int>(i), -inv_n);
    pos.emplace_back(first_p + static_cast<int>(i), -inv_n);
  }
  p.add_row(std::move(neg), Relation::greater_equal, -x.plus());
  p.add_row(std::move(pos), Relation::greater_equal, -x.minus());

  const LpSolution sol = require_optimal(lp::solve_lp(p, opt), "fit_biased_mean");
  iters = sol.iterations;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (sol.x[first_p + i] * sol.x[first_q + i] > 1e-8)
      throw RegressionError("fit_biased_mean: residual split is not tight at observation " +
                            std::to_string(i));
  }
  LinearModel m;
  m.intercept = sol.x[c0];
  m.coefficients.resize(d);
  for (Eigen::Index j = 0; j < d; ++j) m.coefficients(j) = sol.x[1 + j];
  return m;
}

}  // namespace

// --- data plumbing ------------------------------------------------------------------

void Dataset::validate() const {
  if (response.size() == 0) throw std::invalid_argument("Dataset: no observations");
  if (design.rows() != response.size())
    throw std::invalid_argument("Dataset: design has " + std::to_string(design.rows()) +
                                " rows but response has " + std::to_string(response.size()));
  if (!design.allFinite() || !response.allFinite())
    throw std::invalid_argument("Dataset: non-finite entry");
}

Dataset Dataset::response_only(std::span<const double> y) {
  Dataset out;
  out.response = Eigen::Map<const Eigen::VectorXd>(y.data(), static_cast<Eigen::Index>(y.size()));
  out.design.resize(out.response.size(), 0);
  return out;
}

double LinearModel::predict(const Eigen::Ref<const Eigen::RowVectorXd>& x) const {
  if (x.size() != coefficients.size())
    throw std::invalid_argument("LinearModel::predict: dimension mismatch");
  return intercept + x.dot(coefficients);
}

Residuals residuals(const LinearModel& model, const Dataset& data) {
  if (model.coefficients.size() != data.d())
    throw std::invalid_argument("residuals: model has " + std::to_string(model.coefficients.size()) +
                                " coefficients, data has " + std::to_string(data.d()) + " columns");
  Residuals r;
  r.z = data.response.array() - model.intercept;
  if (data.d() > 0) r.z.noalias() -= data.design * model.coefficients;
  return r;
}

std::array<double, 2> induced_alpha(const Residuals& r, double zero_tol) {
  const Eigen::Index n = r.z.size();
  if (n == 0) return {0.0, 0.0};
  Eigen::Index below = 0, at = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (std::abs(r.z(i)) <= zero_tol) ++at;
    else if (r.z(i) < 0.0) ++below;
  }
  const double nn = static_cast<double>(n);
  return {static_cast<double>(below) / nn, static_cast<double>(below + at) / nn};
}

double residual_zero_tolerance(const Dataset& data) {
  return 1e-9 * (1.0 + data.response.cwiseAbs().maxCoeff());
}

// --- fitters ---------------------------------------------------------------------------

FitResult fit_ols(const Dataset& data) {
  data.validate();
  const Eigen::Index d = data.d();
  const double ybar = data.response.mean();
  LinearModel m;
  m.coefficients = Eigen::VectorXd::Zero(d);
  bool regularized = false;
  if (d > 0) {
    // centred normal equations: the intercept drops out and conditioning improves
    const Eigen::RowVectorXd xbar = data.design.colwise().mean();
    const Eigen::MatrixXd xc = data.design.rowwise() - xbar;
    const Eigen::VectorXd yc = data.response.array() - ybar;
    Eigen::MatrixXd gram = xc.transpose() * xc;
    const Eigen::VectorXd rhs = xc.transpose() * yc;
    Eigen::LLT<Eigen::MatrixXd> llt(gram);
    auto ok = [&] {
      if (llt.info() != Eigen::Success) return false;
      const Eigen::VectorXd c = llt.solve(rhs);
      const double scale = std::max(1.0, rhs.norm());
      return c.allFinite() && (gram * c - rhs).norm() <= 1e-8 * scale;
    };
    if (!ok()) {
      const double ridge = 1e-10 * std::max(gram.trace() / static_cast<double>(d), 1e-300);
      gram.diagonal().array() += ridge;
      llt.compute(gram);
      if (llt.info() != Eigen::Success) throw RegressionError("fit_ols: factorization failed after ridge");
      regularized = true;
    }
    m.coefficients = llt.solve(rhs);
    m.intercept = ybar - xbar.dot(m.coefficients);
  } else {
    m.intercept = ybar;
  }
  FitResult out = finish(data, std::move(m), 0);
  out.regularized = regularized;
  out.objective = residuals(out.model, data).z.squaredNorm() / static_cast<double>(data.n());
  return out;
}

FitResult fit_quantile(const Dataset& data, ConfidenceLevel alpha, const FitOptions& opt) {
  data.validate();
  if (!alpha.interior()) throw std::invalid_argument("fit_quantile: alpha must lie in (0, 1)");
  int iters = 0;
  LinearModel m = opt.form == LpForm::compact ? quantile_compact(data, alpha.value(), opt.lp, iters)
                                              : quantile_epigraph(data, alpha.value(), opt.lp, iters);
  FitResult out = finish(data, std::move(m), iters);
  out.objective = koenker_bassett_error(residual_sample(residuals(out.model, data)), alpha);
  return out;
}

FitResult fit_biased_mean(const Dataset& data, BiasParam x, const FitOptions& opt) {
  data.validate();
  if (!std::isfinite(x.x)) throw std::invalid_argument("fit_biased_mean: non-finite x");
  int iters = 0;
  LinearModel m;
  std::optional<double> certified;
  if (opt.form == LpForm::compact) {
    double a = 0.0;
    m = biased_mean_compact(data, x.x, opt.lp, iters, a);
    certified = a;
  } else {
    m = biased_mean_epigraph(data, x, opt.lp, iters);
    recentre(m, data, x.x);
  }
  FitResult out = finish(data, std::move(m), iters);
  out.certified_alpha = certified;
  out.objective = superexpectation_error(residual_sample(residuals(out.model, data)), x);
  return out;
}

FitResult fit_se(const Dataset& data, const FitOptions& opt) {
  if (opt.form == LpForm::compact) return fit_biased_mean(data, BiasParam{0.0}, opt);
  data.validate();
  detail::SeEpigraph epi = detail::build_se_epigraph(data);
  const LpSolution sol = require_optimal(lp::solve_lp(epi.problem, opt.lp), "fit_se");
  LinearModel m;
  m.intercept = sol.x[epi.intercept];
  m.coefficients.resize(data.d());
  for (Eigen::Index j = 0; j < data.d(); ++j) m.coefficients(j) = sol.x[epi.first_coef + j];
  recentre(m, data, 0.0);
  FitResult out = finish(data, std::move(m), sol.iterations);
  out.objective = superexpectation_error(residual_sample(residuals(out.model, data)), BiasParam{0.0});
  return out;
}

namespace detail {

// u_i >= z_i, u >= 0, t >= mean(u) = E[z_+] and t >= mean(u) - mean(z) = E[z_-].
SeEpigraph build_se_epigraph(const Dataset& data) {
  const Eigen::Index n = data.n(), d = data.d();
  const double inv_n = 1.0 / static_cast<double>(n);
  SeEpigraph out;
  LpProblem& p = out.problem;
  out.intercept = p.add_variable(0.0, -lp::kInf, lp::kInf);
  out.first_coef = p.num_variables();
  for (Eigen::Index j = 0; j < d; ++j) p.add_variable(0.0, -lp::kInf, lp::kInf);
  out.first_u = p.num_variables();
  for (Eigen::Index i = 0; i < n; ++i) p.add_variable(0.0, 0.0, lp::kInf);
  out.t = p.add_variable(1.0, -lp::kInf, lp::kInf);
  for (Eigen::Index i = 0; i < n; ++i) {
    std::vector<std::pair<int, double>> coeffs{{out.first_u + static_cast<int>(i), 1.0},
                                               {out.intercept, 1.0}};
    for (Eigen::Index j = 0; j < d; ++j)
      if (data.design(i, j) != 0.0) coeffs.emplace_back(out.first_coef + static_cast<int>(j), data.design(i, j));
    p.add_row(std::move(coeffs), Relation::greater_equal, data.response(i));
  }
  std::vector<std::pair<int, double>> pos{{out.t, 1.0}};
  for (Eigen::Index i = 0; i < n; ++i) pos.emplace_back(out.first_u + static_cast<int>(i), -inv_n);
  std::vector<std::pair<int, double>> neg = pos;
  neg.emplace_back(out.intercept, -1.0);
  for (Eigen::Index j = 0; j < d; ++j)
    neg.emplace_back(out.first_coef + static_cast<int>(j), -data.design.col(j).mean());
  p.add_row(std::move(pos), Relation::greater_equal, 0.0);
  p.add_row(std::move(neg), Relation::greater_equal, -data.response.mean());
  return out;
}

}  // namespace detail

// --- newsvendor ----------------------------------------------------------------------------

double NewsvendorSpec::alpha() const {
  if (!(std::isfinite(gamma) && std::isfinite(delta)) || gamma <= 0.0)
    throw std::invalid_argument("NewsvendorSpec: gamma must be positive and finite");
  if (delta <= gamma) throw std::invalid_argument("NewsvendorSpec: price delta must exceed cost gamma");
  return 1.0 - gamma / delta;
}

NewsvendorPolicy newsvendor_policy(const Dataset& data, const NewsvendorSpec& spec, const FitOptions& opt) {
  const double a = spec.alpha();
  return {fit_quantile(data, ConfidenceLevel(a), opt), a};
}

NewsvendorPrice newsvendor_price(const Dataset& data, BiasParam x, double gamma, const FitOptions& opt) {
  if (!(gamma > 0.0) || !std::isfinite(gamma))
    throw std::invalid_argument("newsvendor_price: gamma must be positive and finite");
  NewsvendorPrice out;
  out.fit = fit_biased_mean(data, x, opt);
  out.alpha_star = out.fit.induced_alpha[1];
  if (out.alpha_star >= 1.0)
    throw RegressionError("newsvendor_price: induced alpha is 1, no finite price");
  out.delta = gamma / (1.0 - out.alpha_star);
  return out;
}

}  // namespace quadlab
