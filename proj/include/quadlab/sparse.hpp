#pragma once

#include <optional>
#include <string_view>
#include <vector>

#include "quadlab/lp.hpp"
#include "quadlab/regression.hpp"

namespace quadlab {

enum class ErrorKind { mse, se };
std::string_view to_string(ErrorKind kind);

/// Best-subset regression: at most k nonzero slopes (the intercept is free).
struct SparseProblem {
  Dataset data;
  int k = 1;
  ErrorKind error = ErrorKind::se;
  std::optional<double> big_m;  ///< empty = automatic
  double time_limit_s = 60.0;
  double gap_tolerance = 1e-9;

  void validate() const;
};

struct SparseSolution {
  LinearModel model;
  std::vector<int> support;  ///< sorted slope indices allowed to be nonzero
  double objective = 0.0;    ///< mean squared residual (mse) or SE error (se)
  double bound = 0.0;
  double gap = 0.0;          ///< |objective - bound| / max(1, |objective|)
  lp::MipStatus status = lp::MipStatus::optimal;
  bool big_m_active = false; ///< the bound on |c_j| had to be enlarged
  double big_m = 0.0;        ///< value used in the final solve (se only)
  long nodes = 0;
  double time_s = 0.0;
};

class SparseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Big-M MILP over the SE regression LP, solved by branch and bound. A greedy
/// forward-selection fit seeds the incumbent.
SparseSolution fit_sparse_se(const SparseProblem& problem);

/// Include/exclude branch and bound; node bound = least squares with the
/// excluded slopes forced to zero.
SparseSolution fit_sparse_mse(const SparseProblem& problem);

/// Dispatches on problem.error.
SparseSolution fit_sparse(const SparseProblem& problem);

/// Exhaustive search over all supports of size min(k, d). Throws SparseError
/// when C(d, k) exceeds `max_subsets`.
SparseSolution brute_force_subset(const Dataset& data, int k, ErrorKind error,
                                  double max_subsets = 1e6);

/// Restricted fit on a fixed support; slopes off the support are exactly zero.
FitResult fit_on_support(const Dataset& data, const std::vector<int>& support, ErrorKind error);

/// Greedy forward selection up to k slopes.
std::vector<int> forward_selection(const Dataset& data, int k, ErrorKind error);

struct RecoveryReport {
  double accuracy = 0.0;
  int k_star = 0;
};

/// |{i : |c_hat_i| > zero_tol and c_true_i != 0}| / k_star
RecoveryReport support_accuracy(const LinearModel& estimated, const Eigen::VectorXd& true_coeffs,
                                int k_star, double zero_tol = 1e-8);

}  // namespace quadlab
