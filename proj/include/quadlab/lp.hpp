#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace quadlab::lp {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Tolerances shared by the simplex and the branch-and-bound driver.
struct Tolerances {
  double primal_feasibility = 1e-8;
  double reduced_cost = 1e-9;
  double pivot = 1e-9;
  double integrality = 1e-6;
};

enum class Relation { less_equal, equal, greater_equal };

struct Row {
  std::vector<std::pair<int, double>> coeffs;  ///< (variable index, coefficient)
  Relation relation = Relation::less_equal;
  double rhs = 0.0;
};

/// Minimize objective . x subject to rows and per-variable bounds. Variables
/// flagged binary must carry bounds [0, 1].
struct LpProblem {
  std::vector<double> objective;
  std::vector<double> lower;
  std::vector<double> upper;
  std::vector<bool> binary;
  std::vector<Row> rows;

  int num_variables() const noexcept { return static_cast<int>(objective.size()); }
  int num_rows() const noexcept { return static_cast<int>(rows.size()); }

  int add_variable(double cost, double lo, double hi, bool is_binary = false);
  int add_binary(double cost) { return add_variable(cost, 0.0, 1.0, true); }
  void add_row(std::vector<std::pair<int, double>> coeffs, Relation rel, double rhs);
  bool has_binaries() const;

  /// Throws std::invalid_argument on inconsistent dimensions, NaN data, or bad binary bounds.
  void validate() const;
};

/// Plain-text dump, one line per row: `r<i>: <c>*x<j> ... <=|=|>= <rhs>`,
/// preceded by the objective and followed by the bounds. Meant for diffing.
void write_lp_text(std::ostream& out, const LpProblem& problem);

enum class LpStatus { optimal, infeasible, unbounded, iteration_limit, time_limit };
std::string_view to_string(LpStatus status);

enum class VarStatus : std::uint8_t { basic, at_lower, at_upper, at_zero };

/// Basis statuses for structurals followed by one logical per row.
struct Basis {
  std::vector<VarStatus> status;
};

struct LpSolution {
  LpStatus status = LpStatus::iteration_limit;
  std::vector<double> x;
  double objective = 0.0;
  int iterations = 0;
  /// pi with reduced cost d_j = c_j - pi . A_j (meaningful when optimal).
  std::vector<double> row_duals;
  std::vector<double> reduced_costs;
  double max_row_violation = 0.0;
  double max_bound_violation = 0.0;
  Basis basis;
  /// Diagnostics when the status is not optimal.
  std::string message;
};

struct LpOptions {
  Tolerances tol;
  int max_iterations = 0;        ///< 0 selects 50 * (rows + columns) + 10000
  int refactor_interval = 64;
  int degenerate_watchdog = 50;  ///< degenerate pivots in a row before Bland's rule
  double time_limit_s = 0.0;     ///< wall clock per solve; 0 = none
};

class LpNumericalError : public std::runtime_error {
 public:
  LpNumericalError(const std::string& what, std::vector<int> basis_head)
      : std::runtime_error(what), basis_head_(std::move(basis_head)) {}
  const std::vector<int>& basis_head() const noexcept { return basis_head_; }

 private:
  std::vector<int> basis_head_;
};

/// Bounded-variable primal revised simplex. Deterministic: Dantzig pricing with
/// lowest-index ties, Bland's rule after a run of degenerate pivots.
/// A warm-start basis is used when it is consistent with the problem shape.
LpSolution solve_lp(const LpProblem& problem, const LpOptions& options = {},
                    const Basis* warm_start = nullptr);

// --- mixed-integer ------------------------------------------------------------

enum class MipStatus { optimal, feasible, infeasible, time_limit };
std::string_view to_string(MipStatus status);

struct MipSolution {
  MipStatus status = MipStatus::infeasible;
  std::vector<double> x;
  double objective = kInf;
  double bound = -kInf;
  double gap = kInf;  ///< |objective - bound| / max(1, |objective|)
  long nodes = 0;
  long lp_iterations = 0;
  bool has_incumbent = false;
  /// Global lower bound after each processed node.
  std::vector<double> bound_history;
};

struct MipOptions {
  double time_limit_s = 60.0;
  double gap_tolerance = 1e-9;
  long node_limit = 0;  ///< 0 = unlimited
  int rounding_frequency = 20;
  LpOptions lp;
  /// Optional starting incumbent; checked for feasibility before use.
  std::optional<std::vector<double>> initial_solution;
};

double mip_gap(double incumbent, double bound);

/// Best-first branch-and-bound over LP relaxations. Branches on the most
/// fractional binary (lowest index on ties); a rounding heuristic seeds the incumbent.
MipSolution solve_mip(const LpProblem& problem, const MipOptions& options = {});

}  // namespace quadlab::lp
