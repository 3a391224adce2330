#include "quadlab/empirical_sample.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace quadlab {

EmpiricalSample EmpiricalSample::uniform(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("empirical sample: no values");
  std::vector<double> probs(values.size(), 1.0 / static_cast<double>(values.size()));
  return EmpiricalSample({values.begin(), values.end()}, std::move(probs));
}

EmpiricalSample EmpiricalSample::weighted(std::span<const double> values,
                                          std::span<const double> weights) {
  if (values.empty()) throw std::invalid_argument("empirical sample: no values");
  if (weights.size() != values.size())
    throw std::invalid_argument("empirical sample: weights and values differ in length");
  double total = 0.0;
  for (double w : weights) {
    if (!std::isfinite(w) || w < 0.0)
      throw std::invalid_argument("empirical sample: weights must be finite and nonnegative");
    total += w;
  }
  if (total <= 0.0) throw std::invalid_argument("empirical sample: weights are all zero");
  std::vector<double> probs(weights.size());
  std::transform(weights.begin(), weights.end(), probs.begin(),
                 [total](double w) { return w / total; });
  return EmpiricalSample({values.begin(), values.end()}, std::move(probs));
}

EmpiricalSample::EmpiricalSample(std::vector<double> atoms, std::vector<double> probs)
    : atoms_(std::move(atoms)), probs_(std::move(probs)) {
  for (double a : atoms_)
    if (!std::isfinite(a)) throw std::invalid_argument("empirical sample: non-finite atom");
  build_support();
}

void EmpiricalSample::build_support() {
  std::vector<std::size_t> order(atoms_.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [this](std::size_t a, std::size_t b) { return atoms_[a] < atoms_[b]; });

  support_ = {};
  for (std::size_t idx : order) {
    if (!support_.values.empty() && support_.values.back() == atoms_[idx]) {
      support_.masses.back() += probs_[idx];
    } else {
      support_.values.push_back(atoms_[idx]);
      support_.masses.push_back(probs_[idx]);
    }
  }
  double running = 0.0;
  support_.cumulative.reserve(support_.masses.size());
  for (double m : support_.masses) {
    running += m;
    support_.cumulative.push_back(running);
  }
  // Pin F at the top atom so that tail integrals close exactly.
  support_.cumulative.back() = 1.0;

  mean_ = 0.0;
  for (std::size_t i = 0; i < atoms_.size(); ++i) mean_ += probs_[i] * atoms_[i];
}

double EmpiricalSample::prob_less(double t) const noexcept {
  double p = 0.0;
  for (std::size_t k = 0; k < support_.values.size() && support_.values[k] < t; ++k)
    p = support_.cumulative[k];
  return p;
}

double EmpiricalSample::prob_less_equal(double t) const noexcept {
  double p = 0.0;
  for (std::size_t k = 0; k < support_.values.size() && support_.values[k] <= t; ++k)
    p = support_.cumulative[k];
  return p;
}

EmpiricalSample coupled_sum(const EmpiricalSample& x, const EmpiricalSample& y) {
  if (x.size() != y.size() || x.probabilities() != y.probabilities())
    throw std::invalid_argument("coupled_sum: samples do not share probabilities");
  std::vector<double> sum(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) sum[i] = x.atoms()[i] + y.atoms()[i];
  return EmpiricalSample::weighted(sum, x.probabilities());
}

}  // namespace quadlab
