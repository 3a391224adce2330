#pragma once

// Independent checks for LP/MIP results: dual certificates and exhaustive enumeration.

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "quadlab/lp.hpp"

namespace quadlab::testing {

struct DualCertificate {
  bool sign_feasible = true;
  double dual_objective = 0.0;
};

/// Builds the dual objective from the row multipliers alone: reduced costs are
/// recomputed from the problem data and paired with whichever bound they price.
inline DualCertificate dual_certificate(const lp::LpProblem& p, const std::vector<double>& pi,
                                        double tol = 1e-7) {
  DualCertificate cert;
  std::vector<double> d(p.objective);
  for (int i = 0; i < p.num_rows(); ++i) {
    const auto& row = p.rows[i];
    if (row.relation == lp::Relation::greater_equal && pi[i] < -tol) cert.sign_feasible = false;
    if (row.relation == lp::Relation::less_equal && pi[i] > tol) cert.sign_feasible = false;
    cert.dual_objective += pi[i] * row.rhs;
    for (const auto& [j, a] : row.coeffs) d[j] -= pi[i] * a;
  }
  for (int j = 0; j < p.num_variables(); ++j) {
    if (d[j] > tol) {
      if (!std::isfinite(p.lower[j])) cert.sign_feasible = false;
      else cert.dual_objective += d[j] * p.lower[j];
    } else if (d[j] < -tol) {
      if (!std::isfinite(p.upper[j])) cert.sign_feasible = false;
      else cert.dual_objective += d[j] * p.upper[j];
    } else {
      // near-zero reduced cost: price at whichever bound is finite (both finite in boxed tests)
      const double at = std::isfinite(p.lower[j]) ? p.lower[j] : (std::isfinite(p.upper[j]) ? p.upper[j] : 0.0);
      cert.dual_objective += d[j] * at;
    }
  }
  return cert;
}

/// Random LP with a known interior point and boxed variables, hence feasible and bounded.
inline lp::LpProblem random_bounded_lp(std::uint64_t seed, int max_vars = 30, int max_rows = 30) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> nv(1, max_vars), nr(0, max_rows), rel(0, 2);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  lp::LpProblem p;
  const int n = nv(rng);
  const int m = nr(rng);
  std::vector<double> x0(n);
  for (int j = 0; j < n; ++j) {
    const double lo = -1.0 - 4.0 * std::abs(u(rng));
    const double hi = 1.0 + 4.0 * std::abs(u(rng));
    p.add_variable(u(rng), lo, hi);
    x0[j] = 0.5 * (lo + hi) + 0.25 * u(rng);
  }
  for (int i = 0; i < m; ++i) {
    std::vector<std::pair<int, double>> coeffs;
    double act = 0.0;
    for (int j = 0; j < n; ++j) {
      if (u(rng) < 0.2) continue;  // ~40% sparsity
      const double a = u(rng);
      coeffs.emplace_back(j, a);
      act += a * x0[j];
    }
    const int r = rel(rng);
    const double slack = std::abs(u(rng));
    if (r == 0) p.add_row(coeffs, lp::Relation::less_equal, act + slack);
    else if (r == 1) p.add_row(coeffs, lp::Relation::equal, act);
    else p.add_row(coeffs, lp::Relation::greater_equal, act - slack);
  }
  return p;
}

/// Optimum of a MIP by enumerating every binary assignment and solving the
/// remaining LP (or evaluating directly when there are no continuous variables).
inline double enumerate_mip(const lp::LpProblem& p) {
  std::vector<int> bins;
  for (int j = 0; j < p.num_variables(); ++j)
    if (p.binary[j]) bins.push_back(j);
  double best = lp::kInf;
  for (std::uint32_t mask = 0; mask < (1u << bins.size()); ++mask) {
    lp::LpProblem fixed = p;
    fixed.binary.assign(p.binary.size(), false);
    for (std::size_t b = 0; b < bins.size(); ++b)
      fixed.lower[bins[b]] = fixed.upper[bins[b]] = (mask >> b) & 1u ? 1.0 : 0.0;
    const auto sol = lp::solve_lp(fixed);
    if (sol.status == lp::LpStatus::optimal) best = std::min(best, sol.objective);
  }
  return best;
}

/// Small random MIP: 2..12 binaries, up to 3 boxed continuous variables, <= rows.
inline lp::LpProblem random_mip(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_int_distribution<int> nb(2, 12), nc(0, 3), nr(1, 6);
  lp::LpProblem p;
  const int bins = nb(rng);
  const int conts = nc(rng);
  for (int j = 0; j < bins; ++j) p.add_binary(u(rng));
  for (int j = 0; j < conts; ++j) p.add_variable(u(rng), -2.0, 2.0);
  const int rows = nr(rng);
  for (int i = 0; i < rows; ++i) {
    std::vector<std::pair<int, double>> coeffs;
    double sum_abs = 0.0;
    for (int j = 0; j < p.num_variables(); ++j) {
      const double a = u(rng);
      coeffs.emplace_back(j, a);
      sum_abs += std::abs(a);
    }
    p.add_row(coeffs, lp::Relation::less_equal, 0.3 * sum_abs * std::abs(u(rng)));
  }
  return p;
}

}  // namespace quadlab::testing
