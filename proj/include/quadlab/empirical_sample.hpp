#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace quadlab {

/// Finite discrete distribution: atoms with nonnegative probabilities summing to one.
///
/// Atoms are stored in construction order so that two samples built over the same
/// scenario set stay coupled (atom i of X and atom i of Y share one outcome).
/// Distribution-level queries go through `sorted()`, which merges duplicate atoms.
class EmpiricalSample {
 public:
  struct Support {
    std::vector<double> values;      ///< distinct atoms, strictly increasing
    std::vector<double> masses;      ///< probability of each distinct atom
    std::vector<double> cumulative;  ///< F at each distinct atom
  };

  /// Equal weights 1/n.
  static EmpiricalSample uniform(std::span<const double> values);
  /// Weights are normalized by their sum.
  static EmpiricalSample weighted(std::span<const double> values,
                                  std::span<const double> weights);

  std::size_t size() const noexcept { return atoms_.size(); }
  const std::vector<double>& atoms() const noexcept { return atoms_; }
  const std::vector<double>& probabilities() const noexcept { return probs_; }
  const Support& sorted() const noexcept { return support_; }

  double mean() const noexcept { return mean_; }
  double min() const noexcept { return support_.values.front(); }
  double max() const noexcept { return support_.values.back(); }

  /// E[g(X)] for an atomwise transform.
  template <typename F>
  double expect(F&& g) const {
    double acc = 0.0;
    for (std::size_t i = 0; i < atoms_.size(); ++i) acc += probs_[i] * g(atoms_[i]);
    return acc;
  }

  /// Same probabilities, atoms replaced by g(atom). Keeps the coupling.
  template <typename F>
  EmpiricalSample transformed(F&& g) const {
    std::vector<double> out(atoms_.size());
    for (std::size_t i = 0; i < atoms_.size(); ++i) out[i] = g(atoms_[i]);
    return EmpiricalSample(std::move(out), probs_);
  }

  double prob_less(double t) const noexcept;        ///< P(X < t)
  double prob_less_equal(double t) const noexcept;  ///< P(X <= t)

 private:
  EmpiricalSample(std::vector<double> atoms, std::vector<double> probs);
  void build_support();

  std::vector<double> atoms_;
  std::vector<double> probs_;
  Support support_;
  double mean_ = 0.0;
};

/// Atomwise sum of two samples sharing one probability vector.
EmpiricalSample coupled_sum(const EmpiricalSample& x, const EmpiricalSample& y);

}  // namespace quadlab
