#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>

#include <Eigen/Dense>

#include "quadlab/lp.hpp"

namespace quadlab::lp {
namespace {

// Structural j < n keeps its column of A; logical n + i carries -e_i so that
// every row reads A x - r = 0 with the row relation moved into bounds on r.
class RevisedSimplex {
 public:
  RevisedSimplex(const LpProblem& problem, const LpOptions& options)
      : opt_(options), n_(problem.num_variables()), m_(problem.num_rows()), total_(n_ + m_) {
    build_columns(problem);
    lo_.resize(total_);
    hi_.resize(total_);
    cost_.assign(total_, 0.0);
    for (int j = 0; j < n_; ++j) {
      lo_[j] = problem.lower[j];
      hi_[j] = problem.upper[j];
      cost_[j] = problem.objective[j];
    }
    for (int i = 0; i < m_; ++i) {
      const Row& row = problem.rows[i];
      lo_[n_ + i] = row.relation == Relation::less_equal ? -kInf : row.rhs;
      hi_[n_ + i] = row.relation == Relation::greater_equal ? kInf : row.rhs;
    }
    max_iterations_ = opt_.max_iterations > 0 ? opt_.max_iterations : 50 * total_ + 10000;
  }

  LpSolution run(const Basis* warm) {
    if (!(warm && install_basis(*warm) && refactor())) {
      install_slack_basis();
      if (!refactor()) throw LpNumericalError("slack basis is singular", head_);
    }
    compute_basic_values();

    LpSolution sol;
    int iteration = 0;
    int since_refactor = 0;
    int degenerate_run = 0;
    bool bland = false;
    Eigen::VectorXd basic_cost(m_);
    Eigen::VectorXd pi(m_);

    const auto start = std::chrono::steady_clock::now();
    while (true) {
      if (opt_.time_limit_s > 0.0 && iteration % 32 == 0 &&
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count() > opt_.time_limit_s) {
        sol.status = LpStatus::time_limit;
        sol.message = "time limit reached after " + std::to_string(iteration) + " iterations";
        break;
      }
      if (iteration >= max_iterations_) {
        sol.status = LpStatus::iteration_limit;
        std::ostringstream msg;
        msg << "iteration limit " << max_iterations_ << " reached; primal infeasibility "
            << total_infeasibility();
        sol.message = msg.str();
        break;
      }
      if (since_refactor >= opt_.refactor_interval) {
        if (!refactor()) throw LpNumericalError("basis became singular", head_);
        compute_basic_values();
        since_refactor = 0;
      }

      const bool phase_one = fill_basic_costs(basic_cost);
      pi.noalias() = binv_.transpose() * basic_cost;

      const int entering = price(pi, phase_one, bland);
      if (entering < 0) {
        if (since_refactor > 0) {
          // confirm on a fresh factorization before declaring termination
          if (!refactor()) throw LpNumericalError("basis became singular", head_);
          compute_basic_values();
          since_refactor = 0;
          continue;
        }
        sol.status = phase_one ? LpStatus::infeasible : LpStatus::optimal;
        if (phase_one) sol.message = "phase one ended with positive infeasibility";
        break;
      }

      const double d_q = reduced_cost(entering, pi, phase_one);
      const double dir = d_q < 0.0 ? 1.0 : -1.0;
      const Eigen::VectorXd alpha = ftran(entering);
      const Step step = ratio_test(entering, alpha, dir, bland);

      if (step.kind == Step::Kind::none) {
        if (!phase_one) {
          sol.status = LpStatus::unbounded;
          sol.message = "unbounded ray along variable " + std::to_string(entering);
          break;
        }
        // A phase-one direction with no blocking row is numerical noise.
        if (!refactor()) throw LpNumericalError("basis became singular", head_);
        compute_basic_values();
        since_refactor = 0;
        ++iteration;
        continue;
      }

      apply_step(entering, alpha, dir, step);
      ++iteration;
      if (step.kind == Step::Kind::pivot) ++since_refactor;

      if (step.theta * std::abs(d_q) <= 1e-12) {
        if (++degenerate_run >= opt_.degenerate_watchdog) bland = true;
      } else {
        degenerate_run = 0;
        bland = false;
      }
    }

    finish(sol, iteration);
    return sol;
  }

 private:
  struct Step {
    enum class Kind { none, flip, pivot } kind = Kind::none;
    double theta = 0.0;
    int row = -1;
    double target = 0.0;  // bound the leaving variable lands on
  };

  void build_columns(const LpProblem& problem) {
    std::vector<std::vector<std::pair<int, double>>> cols(n_);
    for (int i = 0; i < m_; ++i)
      for (const auto& [j, a] : problem.rows[i].coeffs) cols[j].emplace_back(i, a);
    col_start_.assign(n_ + 1, 0);
    for (int j = 0; j < n_; ++j) {
      auto& c = cols[j];
      std::sort(c.begin(), c.end());
      // merge duplicate (row, var) entries
      std::vector<std::pair<int, double>> merged;
      for (const auto& e : c) {
        if (!merged.empty() && merged.back().first == e.first)
          merged.back().second += e.second;
        else
          merged.push_back(e);
      }
      for (const auto& [i, a] : merged) {
        if (a == 0.0) continue;
        col_row_.push_back(i);
        col_val_.push_back(a);
      }
      col_start_[j + 1] = static_cast<int>(col_row_.size());
    }
  }

  double column_dot(const Eigen::VectorXd& v, int j) const {
    if (j >= n_) return -v[j - n_];
    double acc = 0.0;
    for (int k = col_start_[j]; k < col_start_[j + 1]; ++k) acc += v[col_row_[k]] * col_val_[k];
    return acc;
  }

  Eigen::VectorXd ftran(int j) const {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(m_);
    if (j >= n_) {
      out = -binv_.col(j - n_);
    } else {
      for (int k = col_start_[j]; k < col_start_[j + 1]; ++k)
        out.noalias() += col_val_[k] * binv_.col(col_row_[k]);
    }
    return out;
  }

  double nonbasic_value(int j, VarStatus s) const {
    switch (s) {
      case VarStatus::at_lower: return lo_[j];
      case VarStatus::at_upper: return hi_[j];
      default: return 0.0;
    }
  }

  VarStatus default_status(int j) const {
    const bool has_lo = std::isfinite(lo_[j]);
    const bool has_hi = std::isfinite(hi_[j]);
    if (has_lo && has_hi) return cost_[j] < 0.0 ? VarStatus::at_upper : VarStatus::at_lower;
    if (has_lo) return VarStatus::at_lower;
    if (has_hi) return VarStatus::at_upper;
    return VarStatus::at_zero;
  }

  VarStatus admissible(int j, VarStatus s) const {
    if (s == VarStatus::at_lower && !std::isfinite(lo_[j])) return default_status(j);
    if (s == VarStatus::at_upper && !std::isfinite(hi_[j])) return default_status(j);
    if (s == VarStatus::at_zero && (std::isfinite(lo_[j]) || std::isfinite(hi_[j])))
      return default_status(j);
    return s;
  }

  void install_slack_basis() {
    status_.assign(total_, VarStatus::basic);
    head_.resize(m_);
    pos_.assign(total_, -1);
    x_.assign(total_, 0.0);
    for (int j = 0; j < n_; ++j) {
      status_[j] = default_status(j);
      x_[j] = nonbasic_value(j, status_[j]);
    }
    for (int i = 0; i < m_; ++i) {
      head_[i] = n_ + i;
      pos_[n_ + i] = i;
    }
  }

  bool install_basis(const Basis& basis) {
    if (static_cast<int>(basis.status.size()) != total_) return false;
    const auto basics = std::count(basis.status.begin(), basis.status.end(), VarStatus::basic);
    if (basics != m_) return false;
    status_ = basis.status;
    head_.clear();
    pos_.assign(total_, -1);
    x_.assign(total_, 0.0);
    for (int j = 0; j < total_; ++j) {
      if (status_[j] == VarStatus::basic) {
        pos_[j] = static_cast<int>(head_.size());
        head_.push_back(j);
      } else {
        status_[j] = admissible(j, status_[j]);
        x_[j] = nonbasic_value(j, status_[j]);
      }
    }
    return true;
  }

  bool refactor() {
    if (m_ == 0) {
      binv_.resize(0, 0);
      return true;
    }
    Eigen::MatrixXd basis = Eigen::MatrixXd::Zero(m_, m_);
    for (int r = 0; r < m_; ++r) {
      const int j = head_[r];
      if (j >= n_) {
        basis(j - n_, r) = -1.0;
      } else {
        for (int k = col_start_[j]; k < col_start_[j + 1]; ++k) basis(col_row_[k], r) = col_val_[k];
      }
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(basis);
    lu.setThreshold(1e-11);
    if (!lu.isInvertible()) return false;
    binv_ = lu.inverse();
    return true;
  }

  void compute_basic_values() {
    if (m_ == 0) return;
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m_);
    for (int j = 0; j < total_; ++j) {
      if (status_[j] == VarStatus::basic || x_[j] == 0.0) continue;
      if (j >= n_) {
        rhs[j - n_] += x_[j];
      } else {
        for (int k = col_start_[j]; k < col_start_[j + 1]; ++k) rhs[col_row_[k]] -= col_val_[k] * x_[j];
      }
    }
    const Eigen::VectorXd xb = binv_ * rhs;
    for (int r = 0; r < m_; ++r) x_[head_[r]] = xb[r];
  }

  bool fill_basic_costs(Eigen::VectorXd& cb) const {
    const double ftol = opt_.tol.primal_feasibility;
    bool infeasible = false;
    for (int r = 0; r < m_; ++r) {
      const int j = head_[r];
      if (x_[j] < lo_[j] - ftol) {
        cb[r] = -1.0;
        infeasible = true;
      } else if (x_[j] > hi_[j] + ftol) {
        cb[r] = 1.0;
        infeasible = true;
      } else {
        cb[r] = 0.0;
      }
    }
    if (!infeasible)
      for (int r = 0; r < m_; ++r) cb[r] = cost_[head_[r]];
    return infeasible;
  }

  double total_infeasibility() const {
    double acc = 0.0;
    for (int r = 0; r < m_; ++r) {
      const int j = head_[r];
      acc += std::max(0.0, lo_[j] - x_[j]) + std::max(0.0, x_[j] - hi_[j]);
    }
    return acc;
  }

  double reduced_cost(int j, const Eigen::VectorXd& pi, bool phase_one) const {
    return (phase_one ? 0.0 : cost_[j]) - column_dot(pi, j);
  }

  int price(const Eigen::VectorXd& pi, bool phase_one, bool bland) const {
    const double dtol = opt_.tol.reduced_cost;
    int best = -1;
    double best_score = 0.0;
    for (int j = 0; j < total_; ++j) {
      const VarStatus s = status_[j];
      if (s == VarStatus::basic || lo_[j] == hi_[j]) continue;
      const double d = reduced_cost(j, pi, phase_one);
      bool eligible = false;
      if (s == VarStatus::at_lower) eligible = d < -dtol;
      else if (s == VarStatus::at_upper) eligible = d > dtol;
      else eligible = std::abs(d) > dtol;
      if (!eligible) continue;
      if (bland) return j;
      if (std::abs(d) > best_score) {
        best_score = std::abs(d);
        best = j;
      }
    }
    return best;
  }

  Step ratio_test(int entering, const Eigen::VectorXd& alpha, double dir, bool bland) const {
    const double ftol = opt_.tol.primal_feasibility;
    const double ptol = opt_.tol.pivot;

    // Harris pass one: smallest step with bounds relaxed by the feasibility tolerance.
    double relaxed_min = kInf;
    std::vector<double> target(m_, 0.0);
    std::vector<char> blocks(m_, 0);
    for (int r = 0; r < m_; ++r) {
      if (std::abs(alpha[r]) <= ptol) continue;
      const int j = head_[r];
      const double rate = -dir * alpha[r];
      double t;
      if (rate < 0.0) {
        if (x_[j] > hi_[j] + ftol) t = hi_[j];
        else if (x_[j] >= lo_[j] - ftol && std::isfinite(lo_[j])) t = lo_[j];
        else continue;
        relaxed_min = std::min(relaxed_min, (x_[j] - t + ftol) / -rate);
      } else {
        if (x_[j] < lo_[j] - ftol) t = lo_[j];
        else if (x_[j] <= hi_[j] + ftol && std::isfinite(hi_[j])) t = hi_[j];
        else continue;
        relaxed_min = std::min(relaxed_min, (t - x_[j] + ftol) / rate);
      }
      target[r] = t;
      blocks[r] = 1;
    }

    Step step;
    const double flip = hi_[entering] - lo_[entering];
    if (std::isfinite(flip) && flip <= relaxed_min) {
      step.kind = Step::Kind::flip;
      step.theta = flip;
      return step;
    }
    if (!std::isfinite(relaxed_min)) return step;

    // Pass two: among rows blocking within the relaxed step, the largest pivot wins.
    double best_pivot = -1.0;
    int best_var = total_;
    for (int r = 0; r < m_; ++r) {
      if (!blocks[r]) continue;
      const double rate = -dir * alpha[r];
      const double exact = std::max(0.0, (target[r] - x_[head_[r]]) / rate);
      if (exact > relaxed_min) continue;
      const bool better = bland ? head_[r] < best_var
                                : std::abs(alpha[r]) > best_pivot + 1e-12 ||
                                      (std::abs(alpha[r]) >= best_pivot - 1e-12 && head_[r] < best_var);
      if (better) {
        best_pivot = std::abs(alpha[r]);
        best_var = head_[r];
        step.row = r;
        step.theta = exact;
        step.target = target[r];
      }
    }
    step.kind = step.row >= 0 ? Step::Kind::pivot : Step::Kind::none;
    return step;
  }

  void apply_step(int entering, const Eigen::VectorXd& alpha, double dir, const Step& step) {
    const double theta = step.theta;
    if (theta != 0.0)
      for (int r = 0; r < m_; ++r) x_[head_[r]] -= dir * theta * alpha[r];

    if (step.kind == Step::Kind::flip) {
      if (status_[entering] == VarStatus::at_lower) {
        status_[entering] = VarStatus::at_upper;
        x_[entering] = hi_[entering];
      } else {
        status_[entering] = VarStatus::at_lower;
        x_[entering] = lo_[entering];
      }
      return;
    }

    const int r = step.row;
    const int leaving = head_[r];
    x_[entering] += dir * theta;
    x_[leaving] = step.target;
    status_[leaving] = step.target == lo_[leaving] ? VarStatus::at_lower : VarStatus::at_upper;
    pos_[leaving] = -1;
    status_[entering] = VarStatus::basic;
    head_[r] = entering;
    pos_[entering] = r;

    const Eigen::RowVectorXd pivot_row = binv_.row(r) / alpha[r];
    binv_.noalias() -= alpha * pivot_row;
    binv_.row(r) = pivot_row;
  }

  void finish(LpSolution& sol, int iterations) const {
    sol.iterations = iterations;
    sol.x.assign(x_.begin(), x_.begin() + n_);
    sol.objective = 0.0;
    for (int j = 0; j < n_; ++j) sol.objective += cost_[j] * x_[j];
    sol.basis.status = status_;

    Eigen::VectorXd cb(m_);
    for (int r = 0; r < m_; ++r) cb[r] = cost_[head_[r]];
    const Eigen::VectorXd pi = m_ > 0 ? Eigen::VectorXd(binv_.transpose() * cb) : Eigen::VectorXd();
    sol.row_duals.assign(pi.data(), pi.data() + m_);
    sol.reduced_costs.resize(n_);
    for (int j = 0; j < n_; ++j) sol.reduced_costs[j] = cost_[j] - column_dot(pi, j);

    // activities recomputed from the columns, independent of the basis bookkeeping
    std::vector<double> activity(m_, 0.0);
    for (int j = 0; j < n_; ++j)
      for (int k = col_start_[j]; k < col_start_[j + 1]; ++k) activity[col_row_[k]] += col_val_[k] * x_[j];
    sol.max_row_violation = 0.0;
    for (int i = 0; i < m_; ++i) {
      const double v = std::max(lo_[n_ + i] - activity[i], activity[i] - hi_[n_ + i]);
      sol.max_row_violation = std::max(sol.max_row_violation, std::max(0.0, v));
    }
    sol.max_bound_violation = 0.0;
    for (int j = 0; j < n_; ++j) {
      const double v = std::max(lo_[j] - x_[j], x_[j] - hi_[j]);
      sol.max_bound_violation = std::max(sol.max_bound_violation, std::max(0.0, v));
    }
  }

  LpOptions opt_;
  int n_;
  int m_;
  int total_;
  int max_iterations_ = 0;
  std::vector<int> col_start_;
  std::vector<int> col_row_;
  std::vector<double> col_val_;
  std::vector<double> lo_, hi_, cost_;
  std::vector<VarStatus> status_;
  std::vector<int> head_;
  std::vector<int> pos_;
  std::vector<double> x_;
  Eigen::MatrixXd binv_;
};

}  // namespace

LpSolution solve_lp(const LpProblem& problem, const LpOptions& options, const Basis* warm_start) {
  problem.validate();
  if (problem.has_binaries())
    throw std::invalid_argument("solve_lp: problem has binary variables; use solve_mip");
  RevisedSimplex simplex(problem, options);
  return simplex.run(warm_start);
}

}  // namespace quadlab::lp
