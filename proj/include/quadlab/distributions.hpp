#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "quadlab/empirical_sample.hpp"

namespace quadlab {

/// Builds an EmpiricalSample; missing weights mean equal weighting.
EmpiricalSample make_sample(std::span<const double> values,
                            std::optional<std::span<const double>> weights = std::nullopt);

/// Seeds for replication r and stream s are derived from one base seed through
/// splitmix64, so replication streams never overlap in the derivation domain.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

using Rng = std::mt19937_64;

/// Standard normal draws from the stream seeded by `seed`.
std::vector<double> sample_standard_normal(std::size_t n, std::uint64_t seed);

struct SkewNormalSpec {
  double shape = 0.0;       ///< Azzalini shape a
  bool standardized = true; ///< shift/scale to mean 0, sd 1 by population moments
};

/// delta = a / sqrt(1 + a^2)
double skew_normal_delta(double shape);
/// Population mean and standard deviation of SN(a) with location 0, scale 1.
double skew_normal_mean(double shape);
double skew_normal_sd(double shape);

/// Two-normal construction delta*|U0| + sqrt(1-delta^2)*U1. The U1 stream is
/// exactly `sample_standard_normal(n, seed)`, so shape 0 reproduces it.
std::vector<double> sample_skew_normal(const SkewNormalSpec& spec, std::size_t n,
                                       std::uint64_t seed);

class QuadratureError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// F(0) of the standardized skew-normal, i.e. P(Z <= mean) for Z ~ SN(a),
/// by adaptive Gauss-Kronrod quadrature of 2 phi(z) Phi(a z).
double skew_normal_cdf_at_zero(double shape);

struct DesignSpec {
  int dimension = 1;
  double rho = 0.0;  ///< covariance rho^|i-j|
};

/// Sigma_{ij} = rho^|i-j|.
Eigen::MatrixXd ar1_covariance(const DesignSpec& spec);

/// Rows i.i.d. N(0, Sigma) via the Cholesky factor of `ar1_covariance`.
Eigen::MatrixXd sample_correlated_design(const DesignSpec& spec, std::size_t n,
                                         std::uint64_t seed);

}  // namespace quadlab
