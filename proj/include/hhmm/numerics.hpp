#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "hhmm/matrix.hpp"

namespace hhmm {

enum class CovarianceType { Diagonal, Full, Tied, Spherical };

std::string_view to_string(CovarianceType type);
/// Accepts "diagonal", "full", "tied", "spherical". Throws InputError otherwise.
CovarianceType parse_covariance_type(std::string_view name);

/// Covariance in its compact per-type representation:
/// Spherical holds one variance, Diagonal holds `dim` variances, Full and Tied
/// hold a row-major dim x dim matrix.
struct Covariance {
  CovarianceType type = CovarianceType::Diagonal;
  std::size_t dim = 0;
  std::vector<double> values;

  static std::size_t storage_size(CovarianceType type, std::size_t dim);
  /// scale * identity in the representation of `type`.
  static Covariance scaled_identity(CovarianceType type, std::size_t dim, double scale);

  bool is_dense() const { return type == CovarianceType::Full || type == CovarianceType::Tied; }
  double at(std::size_t r, std::size_t c) const;
  Matrix dense() const;

  bool operator==(const Covariance&) const = default;
};

struct GaussianComponent {
  std::vector<double> mean;
  Covariance covariance;
};

/// Lower Cholesky factor of a symmetric positive-definite matrix.
class Cholesky {
 public:
  /// Throws NumericError("singular covariance") if `a` is not positive-definite.
  explicit Cholesky(const Matrix& a);

  std::size_t dim() const { return lower_.rows(); }
  const Matrix& lower() const { return lower_; }
  double log_determinant() const { return log_det_; }

  /// Overwrites b with L^{-1} b.
  void solve_lower_in_place(std::span<double> b) const;
  /// Overwrites b with A^{-1} b.
  void solve_in_place(std::span<double> b) const;

 private:
  Matrix lower_;
  double log_det_ = 0.0;
};

/// log(sum(exp(values))) with the maximum factored out. Entries may be -inf.
/// Throws InputError("empty reduction") for empty input.
double log_sum_exp(std::span<const double> values);

/// Marginal log-density over the observed coordinates of x (mask value non-zero
/// means observed). Returns exactly 0.0 when nothing is observed.
double gaussian_log_density(std::span<const double> x, std::span<const std::uint8_t> observed_mask,
                            const GaussianComponent& comp);

struct ConditionalGaussian {
  std::vector<std::size_t> missing_dims;
  std::vector<double> mean;
  Matrix covariance;
};

/// Distribution of the unobserved coordinates given the observed ones.
/// observed_values[k] is the value of dimension observed_dims[k].
ConditionalGaussian conditional_gaussian(const GaussianComponent& comp,
                                         std::span<const std::size_t> observed_dims,
                                         std::span<const double> observed_values);

/// Adds `floor` to every variance (diagonal entry).
Covariance regularize_covariance(Covariance cov, double floor);

/// Precomputed evaluator for one Gaussian. The fully observed case reuses one
/// factorization; partially observed rows fall back to gaussian_log_density.
class GaussianDensity {
 public:
  explicit GaussianDensity(GaussianComponent comp);

  const GaussianComponent& component() const { return comp_; }
  double log_density(std::span<const double> x, std::span<const std::uint8_t> observed_mask) const;
  double log_density_complete(std::span<const double> x) const;

 private:
  GaussianComponent comp_;
  double log_norm_ = 0.0;               // -0.5 (M log 2pi + log det)
  std::vector<double> inverse_variance_;  // Diagonal / Spherical
  Matrix lower_;                          // Full / Tied
};

}  // namespace hhmm
