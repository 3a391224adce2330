#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "quadlab/portfolio.hpp"
#include "quadlab/regression.hpp"
#include "quadlab/report.hpp"

namespace quadlab {

enum class ExperimentId { tables345, fig1_sweep, table2_pattern, sparse_recovery };
ExperimentId parse_experiment_id(std::string_view s);
std::string_view to_string(ExperimentId id);

/// Every field has an experiment-specific default; JSON overrides any subset.
struct ExperimentConfig {
  std::uint64_t seed = 20240601;
  int replications = 20;
  std::vector<int> sample_sizes{100, 1000, 10000};
  double shape = 10.0;        ///< skew-normal shape of the noise
  double noise_scale = 1.0;
  double x = 0.005;           ///< table2 bias parameter
  int observations = 1264;    ///< table2 sample size
  int scenarios = 10000;      ///< fig1 scenario count
  double target_mean = 0.0175;
  std::vector<double> x_grid; ///< fig1; empty = x_start + i * x_step, i < x_count
  double x_start = -1e-4;
  double x_step = 0.0020875;
  int x_count = 25;
  std::string alpha_choice = "upper";  ///< fig1: upper | certified | lower
  bool long_only = false;
  int dimension = 30;         ///< sparse
  int k_star = 3;
  double rho = 0.9;
  double time_limit_s = 60.0;
  bool check_oracle = true;
  bool medium = false;        ///< sparse: extra d = 300, k* = 5 run, reported only
  double tolerance = 1e-5;    ///< fig1 per-point relative gap; table2 uses 1e-6

  static ExperimentConfig defaults(ExperimentId id);
  /// Unknown keys and wrong types throw std::invalid_argument.
  static ExperimentConfig from_json(ExperimentId id, const nlohmann::json& j);
  nlohmann::json to_json() const;
};

struct Verdict {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct ExperimentResult {
  ExperimentId id{};
  std::vector<ReportTable> tables;
  std::vector<Verdict> verdicts;
  double runtime_s = 0.0;

  bool passed() const;
};

ExperimentResult run_experiment(ExperimentId id, const ExperimentConfig& config);

ExperimentResult run_tables345(const ExperimentConfig& config);
ExperimentResult run_fig1_sweep(const ExperimentConfig& config);
ExperimentResult run_table2_pattern(const ExperimentConfig& config);
ExperimentResult run_sparse_recovery(const ExperimentConfig& config);

/// Averages that may rise at most `allowed` times as n grows.
bool mostly_decreasing(const std::vector<double>& values, int allowed = 1);

// --- data generators -------------------------------------------------------

/// Y = X + noise_scale * eps, X ~ N(0, 1), eps standardized SN(shape). True (c0, c) = (0, 1).
Dataset simulate_linear_skew(std::size_t n, double shape, double noise_scale, std::uint64_t seed);

/// Four correlated factors and a skewed idiosyncratic term on a daily-return scale.
struct FactorSpec {
  std::vector<double> means{0.0060, 0.0020, 0.0030, 0.0010};
  std::vector<double> vols{0.045, 0.030, 0.030, 0.020};
  double correlation = 0.2;
  std::vector<double> loadings{0.55, 0.50, -0.07, -0.005};
  double intercept = 0.004;
  double noise_sd = 0.006;
  double noise_shape = 4.0;
};
Dataset simulate_factor_dataset(const FactorSpec& spec, std::size_t n, std::uint64_t seed);

struct SparseInstance {
  Dataset data;
  Eigen::VectorXd truth;  ///< +-1 on k_star random positions
};
SparseInstance simulate_sparse(std::size_t n, int d, int k_star, double rho, double noise_scale,
                               std::uint64_t seed);

/// Runs body(i) for i < count on up to QUADLAB_THREADS threads (default: hardware).
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body);
unsigned worker_threads();

}  // namespace quadlab
