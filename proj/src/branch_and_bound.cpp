#include <chrono>
#include <cmath>
#include <memory>
#include <queue>

#include "quadlab/lp.hpp"

namespace quadlab::lp {
namespace {

struct Node {
  double bound = -kInf;
  long id = 0;
  std::vector<std::pair<int, double>> fixes;  // binary index -> fixed value
  std::shared_ptr<const Basis> basis;
};

struct WorseNode {
  bool operator()(const Node& a, const Node& b) const {
    if (a.bound != b.bound) return a.bound > b.bound;
    return a.id > b.id;
  }
};

bool feasible_point(const LpProblem& p, const std::vector<double>& x, const Tolerances& tol) {
  if (static_cast<int>(x.size()) != p.num_variables()) return false;
  for (int j = 0; j < p.num_variables(); ++j) {
    if (x[j] < p.lower[j] - 1e-9 || x[j] > p.upper[j] + 1e-9) return false;
    if (p.binary[j] && std::abs(x[j] - std::round(x[j])) > tol.integrality) return false;
  }
  for (const Row& row : p.rows) {
    double act = 0.0;
    for (const auto& [j, a] : row.coeffs) act += a * x[j];
    const double slack = tol.primal_feasibility * (1.0 + std::abs(row.rhs));
    if (row.relation != Relation::greater_equal && act > row.rhs + slack) return false;
    if (row.relation != Relation::less_equal && act < row.rhs - slack) return false;
  }
  return true;
}

double objective_of(const LpProblem& p, const std::vector<double>& x) {
  double acc = 0.0;
  for (int j = 0; j < p.num_variables(); ++j) acc += p.objective[j] * x[j];
  return acc;
}

class BranchAndBound {
 public:
  BranchAndBound(const LpProblem& problem, const MipOptions& options)
      : original_(problem), relax_(problem), opt_(options) {
    relax_.binary.assign(problem.binary.size(), false);
    for (int j = 0; j < problem.num_variables(); ++j)
      if (problem.binary[j]) binaries_.push_back(j);
  }

  MipSolution run() {
    start_ = std::chrono::steady_clock::now();

    if (opt_.initial_solution && feasible_point(original_, *opt_.initial_solution, opt_.lp.tol))
      offer(*opt_.initial_solution);

    std::priority_queue<Node, std::vector<Node>, WorseNode> open;
    open.push(Node{-kInf, next_id_++, {}, nullptr});
    double global_bound = -kInf;
    bool stopped_by_time = false;
    bool stopped_by_nodes = false;

    while (!open.empty()) {
      if (elapsed() > opt_.time_limit_s) {
        stopped_by_time = true;
        break;
      }
      if (opt_.node_limit > 0 && sol_.nodes >= opt_.node_limit) {
        stopped_by_nodes = true;
        break;
      }
      global_bound = std::max(global_bound, open.top().bound);
      if (sol_.has_incumbent && mip_gap(sol_.objective, global_bound) <= opt_.gap_tolerance) break;

      Node node = open.top();
      open.pop();
      if (prunable(node.bound)) continue;
      if (!process(node, open)) {
        // node LP ran out of time; keep it open so the bound stays valid
        --sol_.nodes;
        open.push(std::move(node));
        stopped_by_time = true;
        break;
      }
      record_bound(open, global_bound);
    }

    if (open.empty()) {
      sol_.bound = sol_.has_incumbent ? sol_.objective : kInf;
    } else {
      sol_.bound = std::min(open.top().bound, sol_.has_incumbent ? sol_.objective : kInf);
      sol_.bound = std::max(sol_.bound, global_bound);
    }
    if (sol_.has_incumbent) sol_.bound = std::min(sol_.bound, sol_.objective);

    if (!sol_.has_incumbent) {
      sol_.status = stopped_by_time || stopped_by_nodes ? MipStatus::time_limit : MipStatus::infeasible;
      sol_.gap = kInf;
    } else {
      sol_.gap = mip_gap(sol_.objective, sol_.bound);
      if (stopped_by_time) sol_.status = MipStatus::time_limit;
      else if (stopped_by_nodes && sol_.gap > opt_.gap_tolerance) sol_.status = MipStatus::feasible;
      else sol_.status = MipStatus::optimal;
    }
    return sol_;
  }

 private:
  double elapsed() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

  // every LP shares the solver's deadline
  LpOptions timed_lp_options() const {
    LpOptions lp = opt_.lp;
    const double remaining = std::max(1e-3, opt_.time_limit_s - elapsed());
    lp.time_limit_s = lp.time_limit_s > 0.0 ? std::min(lp.time_limit_s, remaining) : remaining;
    return lp;
  }

  double prune_margin() const {
    const double scale = std::max(1.0, std::abs(sol_.objective));
    return std::max(1e-9, opt_.gap_tolerance) * scale;
  }

  bool prunable(double bound) const {
    return sol_.has_incumbent && bound >= sol_.objective - prune_margin();
  }

  void record_bound(const std::priority_queue<Node, std::vector<Node>, WorseNode>& open,
                    double& global_bound) {
    double b = open.empty() ? (sol_.has_incumbent ? sol_.objective : global_bound) : open.top().bound;
    if (sol_.has_incumbent) b = std::min(b, sol_.objective);
    global_bound = std::max(global_bound, b);
    sol_.bound_history.push_back(global_bound);
  }

  void apply_fixes(const std::vector<std::pair<int, double>>& fixes) {
    relax_.lower = original_.lower;
    relax_.upper = original_.upper;
    for (const auto& [j, v] : fixes) relax_.lower[j] = relax_.upper[j] = v;
  }

  void offer(const std::vector<double>& x) {
    std::vector<double> snapped = x;
    for (int j : binaries_) snapped[j] = std::round(snapped[j]);
    const double obj = objective_of(original_, snapped);
    if (!sol_.has_incumbent || obj < sol_.objective) {
      sol_.objective = obj;
      sol_.x = std::move(snapped);
      sol_.has_incumbent = true;
    }
  }

  /// False when the node LP hit the time limit.
  bool process(const Node& node, std::priority_queue<Node, std::vector<Node>, WorseNode>& open) {
    ++sol_.nodes;
    apply_fixes(node.fixes);
    const LpSolution lp = solve_lp(relax_, timed_lp_options(), node.basis.get());
    sol_.lp_iterations += lp.iterations;
    if (lp.status == LpStatus::time_limit) return false;
    if (lp.status == LpStatus::infeasible) return true;
    if (lp.status == LpStatus::unbounded)
      throw std::runtime_error("solve_mip: LP relaxation is unbounded");
    if (lp.status != LpStatus::optimal)
      throw std::runtime_error("solve_mip: LP relaxation failed: " + lp.message);

    const double bound = std::max(node.bound, lp.objective);
    if (prunable(bound)) return true;

    int branch_var = -1;
    double best_frac = opt_.lp.tol.integrality;
    for (int j : binaries_) {
      const double frac = std::abs(lp.x[j] - std::round(lp.x[j]));
      if (frac > best_frac + 1e-12) {
        best_frac = frac;
        branch_var = j;
      }
    }
    if (branch_var < 0) {
      offer(lp.x);
      return true;
    }

    auto basis = std::make_shared<const Basis>(lp.basis);
    if (sol_.nodes == 1 || (opt_.rounding_frequency > 0 && sol_.nodes % opt_.rounding_frequency == 0))
      try_rounding(node, lp, *basis);

    for (double value : {0.0, 1.0}) {
      Node child{bound, next_id_++, node.fixes, basis};
      child.fixes.emplace_back(branch_var, value);
      open.push(std::move(child));
    }
    return true;
  }

  void try_rounding(const Node& node, const LpSolution& lp, const Basis& basis) {
    std::vector<std::pair<int, double>> fixes = node.fixes;
    for (int j : binaries_) fixes.emplace_back(j, lp.x[j] >= 0.5 ? 1.0 : 0.0);
    apply_fixes(fixes);
    const LpSolution rounded = solve_lp(relax_, timed_lp_options(), &basis);
    sol_.lp_iterations += rounded.iterations;
    if (rounded.status == LpStatus::optimal) offer(rounded.x);
  }

  const LpProblem& original_;
  LpProblem relax_;
  MipOptions opt_;
  std::vector<int> binaries_;
  MipSolution sol_;
  long next_id_ = 0;
  std::chrono::steady_clock::time_point start_;
};

}  // namespace

MipSolution solve_mip(const LpProblem& problem, const MipOptions& options) {
  problem.validate();
  if (!problem.has_binaries()) throw std::invalid_argument("solve_mip: no binary variables");
  return BranchAndBound(problem, options).run();
}

}  // namespace quadlab::lp
