#include <algorithm>
#include <cmath>
#include <ostream>

#include "quadlab/lp.hpp"

namespace quadlab::lp {

int LpProblem::add_variable(double cost, double lo, double hi, bool is_binary) {
  objective.push_back(cost);
  lower.push_back(lo);
  upper.push_back(hi);
  binary.push_back(is_binary);
  return num_variables() - 1;
}

void LpProblem::add_row(std::vector<std::pair<int, double>> coeffs, Relation rel, double rhs) {
  rows.push_back({std::move(coeffs), rel, rhs});
}

bool LpProblem::has_binaries() const {
  return std::any_of(binary.begin(), binary.end(), [](bool b) { return b; });
}

void LpProblem::validate() const {
  const std::size_t n = objective.size();
  if (lower.size() != n || upper.size() != n || binary.size() != n)
    throw std::invalid_argument("LpProblem: bound/integrality arrays do not match objective length");
  for (std::size_t j = 0; j < n; ++j) {
    if (std::isnan(objective[j]) || std::isnan(lower[j]) || std::isnan(upper[j]))
      throw std::invalid_argument("LpProblem: NaN in variable " + std::to_string(j));
    if (lower[j] > upper[j])
      throw std::invalid_argument("LpProblem: empty bound interval on variable " + std::to_string(j));
    if (binary[j] && (lower[j] != 0.0 || upper[j] != 1.0))
      throw std::invalid_argument("LpProblem: binary variable " + std::to_string(j) +
                                  " must have bounds [0, 1]");
  }
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (!std::isfinite(rows[i].rhs))
      throw std::invalid_argument("LpProblem: non-finite rhs in row " + std::to_string(i));
    for (const auto& [j, a] : rows[i].coeffs) {
      if (j < 0 || static_cast<std::size_t>(j) >= n)
        throw std::invalid_argument("LpProblem: row " + std::to_string(i) +
                                    " references unknown variable " + std::to_string(j));
      if (!std::isfinite(a))
        throw std::invalid_argument("LpProblem: non-finite coefficient in row " + std::to_string(i));
    }
  }
}

void write_lp_text(std::ostream& out, const LpProblem& problem) {
  const auto prev = out.precision(17);
  out << "min:";
  for (int j = 0; j < problem.num_variables(); ++j)
    if (problem.objective[j] != 0.0) out << ' ' << problem.objective[j] << "*x" << j;
  out << '\n';
  for (int i = 0; i < problem.num_rows(); ++i) {
    const Row& row = problem.rows[i];
    out << 'r' << i << ':';
    for (const auto& [j, a] : row.coeffs) out << ' ' << a << "*x" << j;
    switch (row.relation) {
      case Relation::less_equal: out << " <= "; break;
      case Relation::equal: out << " = "; break;
      case Relation::greater_equal: out << " >= "; break;
    }
    out << row.rhs << '\n';
  }
  for (int j = 0; j < problem.num_variables(); ++j) {
    out << "x" << j << " in [" << problem.lower[j] << ", " << problem.upper[j] << ']';
    if (problem.binary[j]) out << " binary";
    out << '\n';
  }
  out.precision(prev);
}

std::string_view to_string(LpStatus status) {
  switch (status) {
    case LpStatus::optimal: return "optimal";
    case LpStatus::infeasible: return "infeasible";
    case LpStatus::unbounded: return "unbounded";
    case LpStatus::iteration_limit: return "iteration_limit";
    case LpStatus::time_limit: return "time_limit";
  }
  return "unknown";
}

std::string_view to_string(MipStatus status) {
  switch (status) {
    case MipStatus::optimal: return "optimal";
    case MipStatus::feasible: return "feasible";
    case MipStatus::infeasible: return "infeasible";
    case MipStatus::time_limit: return "time_limit";
  }
  return "unknown";
}

double mip_gap(double incumbent, double bound) {
  if (!std::isfinite(incumbent) || !std::isfinite(bound)) return kInf;
  return std::abs(incumbent - bound) / std::max(1.0, std::abs(incumbent));
}

}  // namespace quadlab::lp
