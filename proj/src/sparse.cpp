#include "quadlab/sparse.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <queue>

namespace quadlab {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

Dataset restrict_columns(const Dataset& data, const std::vector<int>& cols) {
  Dataset out;
  out.response = data.response;
  out.design.resize(data.n(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) out.design.col(static_cast<Eigen::Index>(j)) = data.design.col(cols[j]);
  return out;
}

double binomial(int d, int k) {
  double c = 1.0;
  for (int i = 1; i <= k; ++i) c = c * static_cast<double>(d - k + i) / static_cast<double>(i);
  return c;
}

// --- SE: big-M MILP -------------------------------------------------------------

struct SeMilp {
  detail::SeEpigraph base;
  int first_z = 0;
};

SeMilp build_se_milp(const Dataset& data, int k, double big_m) {
  SeMilp out{detail::build_se_epigraph(data), 0};
  lp::LpProblem& p = out.base.problem;
  const int d = static_cast<int>(data.d());
  out.first_z = p.num_variables();
  for (int j = 0; j < d; ++j) p.add_binary(0.0);
  std::vector<std::pair<int, double>> card;
  for (int j = 0; j < d; ++j) {
    const int c = out.base.first_coef + j, z = out.first_z + j;
    p.add_row({{c, 1.0}, {z, -big_m}}, lp::Relation::less_equal, 0.0);
    p.add_row({{c, 1.0}, {z, big_m}}, lp::Relation::greater_equal, 0.0);
    card.emplace_back(z, 1.0);
  }
  p.add_row(std::move(card), lp::Relation::less_equal, static_cast<double>(k));
  return out;
}

// MILP point for a model supported on `support`.
std::vector<double> milp_point(const SeMilp& milp, const Dataset& data, const LinearModel& m,
                               const std::vector<int>& support) {
  std::vector<double> x(milp.base.problem.num_variables(), 0.0);
  x[milp.base.intercept] = m.intercept;
  for (Eigen::Index j = 0; j < data.d(); ++j) x[milp.base.first_coef + j] = m.coefficients(j);
  const Residuals r = residuals(m, data);
  double usum = 0.0;
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    x[milp.base.first_u + i] = std::max(0.0, r.z(i));
    usum += x[milp.base.first_u + i];
  }
  const double umean = usum / static_cast<double>(data.n());
  x[milp.base.t] = std::max(umean, umean - r.z.mean());
  for (int j : support) x[milp.first_z + j] = 1.0;
  return x;
}

// --- MSE: include/exclude branch and bound ----------------------------------------

struct MseNode {
  double bound = 0.0;
  long id = 0;
  std::vector<int> included;
  std::vector<int> relaxed;  ///< included plus free slopes
  Eigen::VectorXd relaxed_coefs;
};

struct WorseMseNode {
  bool operator()(const MseNode& a, const MseNode& b) const {
    if (a.bound != b.bound) return a.bound > b.bound;
    return a.id > b.id;
  }
};

class MseBranchAndBound {
 public:
  MseBranchAndBound(const SparseProblem& p) : p_(p) {}

  SparseSolution run() {
    const auto start = Clock::now();
    const int d = static_cast<int>(p_.data.d());
    incumbent_support_ = forward_selection(p_.data, p_.k, ErrorKind::mse);
    incumbent_ = fit_on_support(p_.data, incumbent_support_, ErrorKind::mse).objective;

    std::priority_queue<MseNode, std::vector<MseNode>, WorseMseNode> open;
    std::vector<int> all(d);
    std::iota(all.begin(), all.end(), 0);
    open.push(make_node({}, std::move(all)));
    double global_bound = open.top().bound;
    bool timed_out = false;

    while (!open.empty()) {
      if (seconds_since(start) > p_.time_limit_s) {
        timed_out = true;
        break;
      }
      global_bound = std::max(global_bound, std::min(open.top().bound, incumbent_));
      if (lp::mip_gap(incumbent_, global_bound) <= p_.gap_tolerance) break;
      MseNode node = open.top();
      open.pop();
      ++nodes_;
      if (prunable(node.bound)) continue;

      const int k = p_.k;
      if (static_cast<int>(node.relaxed.size()) <= k) {
        offer(node.relaxed, node.bound);
        continue;
      }
      if (static_cast<int>(node.included.size()) == k) {
        offer(node.included, fit_on_support(p_.data, node.included, ErrorKind::mse).objective);
        continue;
      }
      const int j = branch_variable(node);
      std::vector<int> inc = node.included;
      inc.insert(std::upper_bound(inc.begin(), inc.end(), j), j);
      std::vector<int> rest;
      rest.reserve(node.relaxed.size() - 1);
      for (int v : node.relaxed)
        if (v != j) rest.push_back(v);
      MseNode include_child{node.bound, next_id_++, std::move(inc), node.relaxed, node.relaxed_coefs};
      MseNode exclude_child = make_node(node.included, std::move(rest));
      exclude_child.bound = std::max(exclude_child.bound, node.bound);
      if (!prunable(include_child.bound)) open.push(std::move(include_child));
      if (!prunable(exclude_child.bound)) open.push(std::move(exclude_child));
    }

    SparseSolution out;
    out.bound = open.empty() ? incumbent_ : std::min(incumbent_, std::max(global_bound, open.top().bound));
    out.status = timed_out ? lp::MipStatus::time_limit : lp::MipStatus::optimal;
    out.nodes = nodes_;
    finalize(out, incumbent_support_);
    out.bound = std::min(out.bound, out.objective);
    out.gap = lp::mip_gap(out.objective, out.bound);
    out.time_s = seconds_since(start);
    return out;
  }

  void finalize(SparseSolution& out, const std::vector<int>& support) const {
    const FitResult f = fit_on_support(p_.data, support, ErrorKind::mse);
    out.model = f.model;
    out.objective = f.objective;
    out.support = support;
  }

 private:
  MseNode make_node(std::vector<int> included, std::vector<int> relaxed) {
    const FitResult f = fit_on_support(p_.data, relaxed, ErrorKind::mse);
    MseNode node{f.objective, next_id_++, std::move(included), std::move(relaxed), {}};
    node.relaxed_coefs.resize(static_cast<Eigen::Index>(node.relaxed.size()));
    for (std::size_t a = 0; a < node.relaxed.size(); ++a)
      node.relaxed_coefs(static_cast<Eigen::Index>(a)) = f.model.coefficients(node.relaxed[a]);
    return node;
  }

  // free slope with the largest relaxed magnitude, lowest index on ties
  int branch_variable(const MseNode& node) const {
    int best = -1;
    double mag = -1.0;
    for (std::size_t a = 0; a < node.relaxed.size(); ++a) {
      const int j = node.relaxed[a];
      if (std::binary_search(node.included.begin(), node.included.end(), j)) continue;
      const double v = std::abs(node.relaxed_coefs(static_cast<Eigen::Index>(a)));
      if (v > mag) {
        mag = v;
        best = j;
      }
    }
    return best;
  }

  bool prunable(double bound) const {
    return bound >= incumbent_ - std::max(1e-12, p_.gap_tolerance) * std::max(1.0, std::abs(incumbent_));
  }

  void offer(const std::vector<int>& support, double objective) {
    if (objective < incumbent_) {
      incumbent_ = objective;
      incumbent_support_ = support;
    }
  }

  const SparseProblem& p_;
  double incumbent_ = lp::kInf;
  std::vector<int> incumbent_support_;
  long nodes_ = 0;
  long next_id_ = 0;
};

}  // namespace

std::string_view to_string(ErrorKind kind) {
  return kind == ErrorKind::mse ? "mse" : "se";
}

void SparseProblem::validate() const {
  data.validate();
  if (k < 1 || k > data.d())
    throw std::invalid_argument("SparseProblem: k must lie in [1, d] (k = " + std::to_string(k) +
                                ", d = " + std::to_string(data.d()) + ")");
  if (big_m && !(*big_m > 0.0 && std::isfinite(*big_m)))
    throw std::invalid_argument("SparseProblem: big-M must be positive and finite");
  if (!(time_limit_s > 0.0)) throw std::invalid_argument("SparseProblem: time limit must be positive");
  if (!(gap_tolerance >= 0.0)) throw std::invalid_argument("SparseProblem: gap tolerance must be >= 0");
}

FitResult fit_on_support(const Dataset& data, const std::vector<int>& support, ErrorKind error) {
  for (int j : support)
    if (j < 0 || j >= data.d()) throw std::invalid_argument("fit_on_support: index out of range");
  const Dataset sub = restrict_columns(data, support);
  FitResult f = error == ErrorKind::mse ? fit_ols(sub) : fit_se(sub);
  Eigen::VectorXd full = Eigen::VectorXd::Zero(data.d());
  for (std::size_t a = 0; a < support.size(); ++a) full(support[a]) = f.model.coefficients(static_cast<Eigen::Index>(a));
  f.model.coefficients = std::move(full);
  return f;
}

std::vector<int> forward_selection(const Dataset& data, int k, ErrorKind error) {
  std::vector<int> support;
  const int d = static_cast<int>(data.d());
  const int target = std::min(k, d);
  while (static_cast<int>(support.size()) < target) {
    int best = -1;
    double best_obj = lp::kInf;
    for (int j = 0; j < d; ++j) {
      if (std::find(support.begin(), support.end(), j) != support.end()) continue;
      std::vector<int> trial = support;
      trial.insert(std::upper_bound(trial.begin(), trial.end(), j), j);
      const double obj = fit_on_support(data, trial, error).objective;
      if (obj < best_obj) {
        best_obj = obj;
        best = j;
      }
    }
    support.insert(std::upper_bound(support.begin(), support.end(), best), best);
  }
  return support;
}

SparseSolution fit_sparse_se(const SparseProblem& problem) {
  problem.validate();
  if (problem.error != ErrorKind::se) throw std::invalid_argument("fit_sparse_se: error kind must be se");
  const auto start = Clock::now();
  const Dataset& data = problem.data;

  const std::vector<int> greedy = forward_selection(data, problem.k, ErrorKind::se);
  const FitResult greedy_fit = fit_on_support(data, greedy, ErrorKind::se);
  double big_m = problem.big_m.value_or(0.0);
  // the greedy fit must stay feasible so it can seed the search
  if (!problem.big_m)
    big_m = 2.0 * std::max({1.0, fit_ols(data).model.coefficients.cwiseAbs().maxCoeff(),
                            greedy_fit.model.coefficients.cwiseAbs().maxCoeff()});

  SparseSolution out;
  constexpr int kMaxDoublings = 3;
  for (int attempt = 0;; ++attempt) {
    const SeMilp milp = build_se_milp(data, problem.k, big_m);
    lp::MipOptions opt;
    opt.time_limit_s = std::max(1e-3, problem.time_limit_s - seconds_since(start));
    opt.gap_tolerance = problem.gap_tolerance;
    opt.initial_solution = milp_point(milp, data, greedy_fit.model, greedy);
    const lp::MipSolution mip = lp::solve_mip(milp.base.problem, opt);
    out.nodes += mip.nodes;
    if (!mip.has_incumbent) throw SparseError("fit_sparse_se: no feasible solution found");

    bool active = false;
    std::vector<int> support;
    for (int j = 0; j < data.d(); ++j) {
      if (mip.x[milp.first_z + j] > 0.5) support.push_back(j);
      if (std::abs(mip.x[milp.base.first_coef + j]) >= 0.99 * big_m) active = true;
    }
    if (active) {
      if (attempt == kMaxDoublings)
        throw SparseError("fit_sparse_se: big-M still binding after " + std::to_string(kMaxDoublings) +
                          " doublings (M = " + std::to_string(big_m) + ")");
      big_m *= 2.0;
      out.big_m_active = true;
      continue;
    }
    // exact refit on the chosen support removes LP drift and leaves off-support slopes at 0
    const FitResult polished = fit_on_support(data, support, ErrorKind::se);
    out.model = polished.model;
    out.support = std::move(support);
    out.objective = polished.objective;
    // the SE error is nonnegative, which matters when time ran out at the root
    out.bound = std::clamp(mip.bound, 0.0, out.objective);
    out.gap = lp::mip_gap(out.objective, out.bound);
    out.status = mip.status;
    out.big_m = big_m;
    break;
  }
  out.time_s = seconds_since(start);
  return out;
}

SparseSolution fit_sparse_mse(const SparseProblem& problem) {
  problem.validate();
  if (problem.error != ErrorKind::mse) throw std::invalid_argument("fit_sparse_mse: error kind must be mse");
  return MseBranchAndBound(problem).run();
}

SparseSolution fit_sparse(const SparseProblem& problem) {
  return problem.error == ErrorKind::mse ? fit_sparse_mse(problem) : fit_sparse_se(problem);
}

SparseSolution brute_force_subset(const Dataset& data, int k, ErrorKind error, double max_subsets) {
  data.validate();
  const int d = static_cast<int>(data.d());
  if (k < 1) throw std::invalid_argument("brute_force_subset: k must be positive");
  const int s = std::min(k, d);
  const double count = binomial(d, s);
  if (count > max_subsets)
    throw SparseError("brute_force_subset: C(" + std::to_string(d) + ", " + std::to_string(s) +
                      ") exceeds the enumeration guard");
  const auto start = Clock::now();

  SparseSolution best;
  best.objective = lp::kInf;
  std::vector<int> idx(s);
  std::iota(idx.begin(), idx.end(), 0);
  for (;;) {
    const FitResult f = fit_on_support(data, idx, error);
    ++best.nodes;
    if (f.objective < best.objective) {
      best.objective = f.objective;
      best.model = f.model;
      best.support = idx;
    }
    // next combination in lexicographic order
    int pos = s - 1;
    while (pos >= 0 && idx[pos] == d - s + pos) --pos;
    if (pos < 0) break;
    ++idx[pos];
    for (int q = pos + 1; q < s; ++q) idx[q] = idx[q - 1] + 1;
  }
  best.bound = best.objective;
  best.gap = 0.0;
  best.status = lp::MipStatus::optimal;
  best.time_s = seconds_since(start);
  return best;
}

RecoveryReport support_accuracy(const LinearModel& estimated, const Eigen::VectorXd& true_coeffs,
                                int k_star, double zero_tol) {
  if (k_star < 1) throw std::invalid_argument("support_accuracy: k_star must be positive");
  if (estimated.coefficients.size() != true_coeffs.size())
    throw std::invalid_argument("support_accuracy: coefficient vectors differ in length");
  int hits = 0;
  for (Eigen::Index i = 0; i < true_coeffs.size(); ++i)
    if (std::abs(estimated.coefficients(i)) > zero_tol && true_coeffs(i) != 0.0) ++hits;
  return {static_cast<double>(hits) / static_cast<double>(k_star), k_star};
}

}  // namespace quadlab
