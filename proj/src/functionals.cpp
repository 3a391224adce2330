#include "quadlab/functionals.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace quadlab {
namespace {

// CDF levels are sums of probabilities; comparisons against alpha allow this slack.
constexpr double kProbTol = 1e-12;

/// Prefix sums over the sorted support for O(log K) partial moments.
class PartialMoments {
 public:
  explicit PartialMoments(const EmpiricalSample& sample) : s_(sample.sorted()) {
    const std::size_t k = s_.values.size();
    mass_below_.assign(k + 1, 0.0);
    first_below_.assign(k + 1, 0.0);
    for (std::size_t i = 0; i < k; ++i) {
      mass_below_[i + 1] = mass_below_[i] + s_.masses[i];
      first_below_[i + 1] = first_below_[i] + s_.masses[i] * s_.values[i];
    }
  }

  /// E[X - c]_+
  double upper(double c) const {
    const std::size_t i = count_le(c);
    const double mass = mass_below_.back() - mass_below_[i];
    const double first = first_below_.back() - first_below_[i];
    return std::max(0.0, first - c * mass);
  }

  /// E[c - X]_+
  double lower(double c) const {
    const std::size_t i = count_lt(c);
    return std::max(0.0, c * mass_below_[i] - first_below_[i]);
  }

 private:
  std::size_t count_le(double c) const {
    return static_cast<std::size_t>(
        std::upper_bound(s_.values.begin(), s_.values.end(), c) - s_.values.begin());
  }
  std::size_t count_lt(double c) const {
    return static_cast<std::size_t>(
        std::lower_bound(s_.values.begin(), s_.values.end(), c) - s_.values.begin());
  }

  const EmpiricalSample::Support& s_;
  std::vector<double> mass_below_;
  std::vector<double> first_below_;
};

double scale_of(const EmpiricalSample& sample) {
  return 1.0 + std::max(std::abs(sample.min()), std::abs(sample.max()));
}

double positive_part_mean(const EmpiricalSample& s) {
  return s.expect([](double v) { return v > 0.0 ? v : 0.0; });
}

double negative_part_mean(const EmpiricalSample& s) {
  return s.expect([](double v) { return v < 0.0 ? -v : 0.0; });
}

void require_interior(ConfidenceLevel alpha, const char* where) {
  if (!alpha.interior())
    throw std::invalid_argument(std::string(where) + ": alpha must lie in (0, 1)");
}

}  // namespace

ConfidenceLevel::ConfidenceLevel(double alpha) : alpha_(alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0))
    throw std::invalid_argument("confidence level must lie in [0, 1]");
}

std::string_view to_string(QuadrangleFamily family) {
  switch (family) {
    case QuadrangleFamily::quantile: return "quantile";
    case QuadrangleFamily::biased_mean: return "biased_mean";
    case QuadrangleFamily::mean_l1: return "mean_l1";
  }
  return "unknown";
}

VarInterval var(const EmpiricalSample& sample, ConfidenceLevel alpha) {
  const auto& s = sample.sorted();
  const double a = alpha.value();
  VarInterval out{s.values.front(), s.values.back()};
  if (a > 0.0) {
    for (std::size_t k = 0; k < s.values.size(); ++k) {
      if (s.cumulative[k] >= a - kProbTol) {
        out.lower = s.values[k];
        break;
      }
    }
  }
  if (a < 1.0) {
    for (std::size_t k = 0; k < s.values.size(); ++k) {
      if (s.cumulative[k] > a + kProbTol) {
        out.upper = s.values[k];
        break;
      }
    }
  }
  return out;
}

double cvar_tail_integral(const EmpiricalSample& sample, double alpha) {
  const auto& s = sample.sorted();
  double acc = 0.0;
  double prev = 0.0;
  for (std::size_t k = 0; k < s.values.size(); ++k) {
    const double width = s.cumulative[k] - std::max(prev, alpha);
    if (width > 0.0) acc += s.values[k] * width;
    prev = s.cumulative[k];
  }
  return acc;
}

double cvar(const EmpiricalSample& sample, ConfidenceLevel alpha) {
  const double a = alpha.value();
  if (a == 0.0) return sample.mean();
  if (a == 1.0) return sample.max();
  return cvar_tail_integral(sample, a) / (1.0 - a);
}

double superexpectation(const EmpiricalSample& sample, double x) {
  return sample.expect([x](double v) { return v > x ? v - x : 0.0; }) + x;
}

double cvar_deviation(const EmpiricalSample& sample, ConfidenceLevel alpha) {
  return cvar(sample, alpha) - sample.mean();
}

double koenker_bassett_error(const EmpiricalSample& sample, ConfidenceLevel alpha) {
  require_interior(alpha, "koenker_bassett_error");
  const double k = alpha.value() / (1.0 - alpha.value());
  return sample.expect([k](double v) { return v > 0.0 ? k * v : -v; });
}

double superexpectation_deviation(const EmpiricalSample& sample, BiasParam x) {
  const double shift = sample.mean() + x.x;
  return sample.expect([shift](double v) { return v > shift ? v - shift : 0.0; }) - x.minus();
}

double superexpectation_error(const EmpiricalSample& sample, BiasParam x) {
  return std::max(negative_part_mean(sample) - x.plus(), positive_part_mean(sample) - x.minus());
}

CvarMinimum cvar_via_min(const EmpiricalSample& sample, ConfidenceLevel alpha) {
  require_interior(alpha, "cvar_via_min");
  const double inv = 1.0 / (1.0 - alpha.value());
  const PartialMoments moments(sample);
  const auto& atoms = sample.sorted().values;

  std::vector<double> objective(atoms.size());
  for (std::size_t k = 0; k < atoms.size(); ++k)
    objective[k] = atoms[k] + inv * moments.upper(atoms[k]);

  const double best = *std::min_element(objective.begin(), objective.end());
  const double tol = 1e-13 * scale_of(sample) * inv;
  CvarMinimum out{best, {std::numeric_limits<double>::infinity(),
                         -std::numeric_limits<double>::infinity()}};
  for (std::size_t k = 0; k < atoms.size(); ++k) {
    if (objective[k] <= best + tol) {
      out.minimizers.lower = std::min(out.minimizers.lower, atoms[k]);
      out.minimizers.upper = std::max(out.minimizers.upper, atoms[k]);
    }
  }
  return out;
}

SuperexpectationMaximum superexpectation_dual(const EmpiricalSample& sample, double x) {
  const auto& s = sample.sorted();
  std::vector<double> levels;
  levels.reserve(s.cumulative.size() + 2);
  levels.push_back(0.0);
  levels.insert(levels.end(), s.cumulative.begin(), s.cumulative.end());
  levels.push_back(1.0);

  std::vector<double> objective(levels.size());
  for (std::size_t i = 0; i < levels.size(); ++i)
    objective[i] = levels[i] * x + cvar_tail_integral(sample, levels[i]);

  const double best = *std::max_element(objective.begin(), objective.end());
  const double tol = 1e-13 * (scale_of(sample) + std::abs(x));
  SuperexpectationMaximum out{best, {2.0, -1.0}};
  for (std::size_t i = 0; i < levels.size(); ++i) {
    if (objective[i] >= best - tol) {
      out.maximizers[0] = std::min(out.maximizers[0], levels[i]);
      out.maximizers[1] = std::max(out.maximizers[1], levels[i]);
    }
  }
  return out;
}

QuadrangleEval eval_quantile_quadrangle(const EmpiricalSample& sample, ConfidenceLevel alpha) {
  require_interior(alpha, "eval_quantile_quadrangle");
  const double a = alpha.value();
  QuadrangleEval q;
  q.family = QuadrangleFamily::quantile;
  q.param = a;
  q.risk = cvar(sample, alpha);
  q.deviation = q.risk - sample.mean();
  q.regret = positive_part_mean(sample) / (1.0 - a);
  q.error = koenker_bassett_error(sample, alpha);
  const VarInterval stat = var(sample, alpha);
  q.statistic = stat.midpoint();
  q.statistic_interval = stat;
  return q;
}

QuadrangleEval eval_biased_mean_quadrangle(const EmpiricalSample& sample, BiasParam x) {
  QuadrangleEval q;
  q.family = QuadrangleFamily::biased_mean;
  q.param = x.x;
  q.statistic = x.x + sample.mean();
  q.deviation = superexpectation_deviation(sample, x);
  q.risk = q.deviation + sample.mean();
  q.error = superexpectation_error(sample, x);
  q.regret = q.error + sample.mean();
  return q;
}

QuadrangleEval eval_mean_l1_quadrangle(const EmpiricalSample& sample) {
  const double m = sample.mean();
  QuadrangleEval q;
  q.family = QuadrangleFamily::mean_l1;
  q.param = 0.0;
  q.statistic = m;
  q.deviation = 0.5 * sample.expect([m](double v) { return std::abs(v - m); });
  q.risk = q.deviation + m;
  q.error = 0.5 * sample.expect([](double v) { return std::abs(v); }) + 0.5 * std::abs(m);
  q.regret = q.error + m;
  return q;
}

ErrorProjection error_projection(const EmpiricalSample& sample, BiasParam x) {
  const PartialMoments moments(sample);
  auto shifted_error = [&](double c) {
    return std::max(moments.lower(c) - x.plus(), moments.upper(c) - x.minus());
  };

  std::vector<double> candidates = sample.sorted().values;
  const double statistic = x.x + sample.mean();
  candidates.insert(std::upper_bound(candidates.begin(), candidates.end(), statistic), statistic);

  std::vector<double> objective(candidates.size());
  std::transform(candidates.begin(), candidates.end(), objective.begin(), shifted_error);
  const double best = *std::min_element(objective.begin(), objective.end());
  const double tol = 1e-13 * (scale_of(sample) + std::abs(x.x));

  ErrorProjection out{statistic, best,
                      {std::numeric_limits<double>::infinity(),
                       -std::numeric_limits<double>::infinity()}};
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (objective[i] <= best + tol) {
      out.argmin.lower = std::min(out.argmin.lower, candidates[i]);
      out.argmin.upper = std::max(out.argmin.upper, candidates[i]);
    }
  }
  return out;
}

double RelationSide::residual() const { return std::abs(lhs - rhs); }

double RelationReport::max_residual() const {
  return std::max({risk.residual(), deviation.residual(), regret.residual(), error.residual()});
}

RelationReport quadrangle_relation_check(const EmpiricalSample& sample, BiasParam x) {
  const double mean = sample.mean();
  const double pos = positive_part_mean(sample);
  const double neg = negative_part_mean(sample);
  const double xp = x.plus();
  const double xm = x.minus();

  std::vector<double> levels{0.0, 1.0};
  levels.insert(levels.end(), sample.sorted().cumulative.begin(), sample.sorted().cumulative.end());

  constexpr double kLowest = -std::numeric_limits<double>::infinity();
  double risk = kLowest, deviation = kLowest, regret = kLowest, error = kLowest;
  for (double a : levels) {
    // (1 - a) times each quantile corner, extended continuously to a = 1.
    const double scaled_risk = cvar_tail_integral(sample, a);
    const double scaled_deviation = scaled_risk - (1.0 - a) * mean;
    const double scaled_regret = pos;
    const double scaled_error = a * pos + (1.0 - a) * neg;

    risk = std::max(risk, scaled_risk - (1.0 - a) * xp + a * (mean - xm));
    deviation = std::max(deviation, scaled_deviation - (1.0 - a) * xp - a * xm);
    regret = std::max(regret, scaled_regret - (1.0 - a) * xp + a * (mean - xm));
    error = std::max(error, scaled_error - (1.0 - a) * xp - a * xm);
  }

  const QuadrangleEval bm = eval_biased_mean_quadrangle(sample, x);
  return {{bm.risk, risk}, {bm.deviation, deviation}, {bm.regret, regret}, {bm.error, error}};
}

SubregularityProbe subregularity_probe(const EmpiricalSample& sample, BiasParam x) {
  const double pos = positive_part_mean(sample);
  const double neg = negative_part_mean(sample);
  if (pos == 0.0 && neg == 0.0)
    throw std::invalid_argument("subregularity_probe: sample is identically zero");

  constexpr double kMargin = 1.0;
  double lambda = 1.0;
  if (superexpectation_error(sample, x) <= 0.0) {
    if (x.x > 0.0 && pos == 0.0) {
      lambda = x.x / neg + kMargin;
    } else if (x.x < 0.0 && neg == 0.0) {
      lambda = -x.x / pos + kMargin;
    } else {
      throw std::logic_error("subregularity_probe: zero error outside the two degenerate cases");
    }
  }
  const EmpiricalSample scaled = sample.transformed([lambda](double v) { return lambda * v; });
  const double e = superexpectation_error(scaled, x);
  if (!(e > 0.0)) throw std::logic_error("subregularity_probe: scaled error is not positive");
  return {lambda, e};
}

}  // namespace quadlab
