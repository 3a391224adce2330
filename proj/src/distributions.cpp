#include "quadlab/distributions.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace quadlab {

EmpiricalSample make_sample(std::span<const double> values,
                            std::optional<std::span<const double>> weights) {
  if (weights) return EmpiricalSample::weighted(values, *weights);
  return EmpiricalSample::uniform(values);
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  // splitmix64 finalizer over (base, stream)
  std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::vector<double> sample_standard_normal(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> out(n);
  for (auto& v : out) v = normal(rng);
  return out;
}

double skew_normal_delta(double shape) { return shape / std::sqrt(1.0 + shape * shape); }

double skew_normal_mean(double shape) {
  return skew_normal_delta(shape) * std::sqrt(2.0 / std::numbers::pi);
}

double skew_normal_sd(double shape) {
  const double d = skew_normal_delta(shape);
  return std::sqrt(1.0 - 2.0 * d * d / std::numbers::pi);
}

std::vector<double> sample_skew_normal(const SkewNormalSpec& spec, std::size_t n,
                                       std::uint64_t seed) {
  if (n == 0) throw std::invalid_argument("sample_skew_normal: n must be positive");
  if (!std::isfinite(spec.shape)) throw std::invalid_argument("sample_skew_normal: shape not finite");

  const double delta = skew_normal_delta(spec.shape);
  const double tail = std::sqrt(1.0 - delta * delta);
  std::vector<double> body = sample_standard_normal(n, seed);
  const std::vector<double> half = sample_standard_normal(n, derive_seed(seed, 0x5E));

  const double loc = spec.standardized ? skew_normal_mean(spec.shape) : 0.0;
  const double scale = spec.standardized ? skew_normal_sd(spec.shape) : 1.0;
  for (std::size_t i = 0; i < n; ++i)
    body[i] = (delta * std::abs(half[i]) + tail * body[i] - loc) / scale;
  return body;
}

double skew_normal_cdf_at_zero(double shape) {
  if (!std::isfinite(shape)) throw std::invalid_argument("skew_normal_cdf_at_zero: shape not finite");
  constexpr double kTruncation = 12.0;
  constexpr double kTolerance = 1e-8;

  const double upper = skew_normal_mean(shape);
  auto density = [shape](double z) {
    const double phi = std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
    const double cdf = 0.5 * std::erfc(-shape * z / std::numbers::sqrt2);
    return 2.0 * phi * cdf;
  };

  double error = 0.0;
  const double value = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
      density, -kTruncation, upper, 20, kTolerance, &error);
  if (!std::isfinite(value) || error > kTolerance)
    throw QuadratureError("skew_normal_cdf_at_zero: quadrature did not converge (error estimate " +
                          std::to_string(error) + ")");
  return value;
}

Eigen::MatrixXd ar1_covariance(const DesignSpec& spec) {
  if (spec.dimension < 1) throw std::invalid_argument("design: dimension must be positive");
  if (!(std::abs(spec.rho) < 1.0)) throw std::invalid_argument("design: |rho| must be < 1");
  const int d = spec.dimension;
  Eigen::MatrixXd sigma(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) sigma(i, j) = std::pow(spec.rho, std::abs(i - j));
  return sigma;
}

Eigen::MatrixXd sample_correlated_design(const DesignSpec& spec, std::size_t n,
                                         std::uint64_t seed) {
  if (n == 0) throw std::invalid_argument("sample_correlated_design: n must be positive");
  const Eigen::MatrixXd sigma = ar1_covariance(spec);
  Eigen::LLT<Eigen::MatrixXd> llt(sigma);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("sample_correlated_design: covariance not positive definite");
  const Eigen::MatrixXd lower = llt.matrixL();

  const std::vector<double> z = sample_standard_normal(n * spec.dimension, seed);
  const Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
      white(z.data(), static_cast<Eigen::Index>(n), spec.dimension);
  return white * lower.transpose();
}

}  // namespace quadlab
