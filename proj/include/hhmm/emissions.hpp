#pragma once

#include <span>
#include <vector>

#include "hhmm/matrix.hpp"
#include "hhmm/model.hpp"
#include "hhmm/numerics.hpp"

namespace hhmm {

/// Emission evaluators prepared once per parameter set (one Cholesky per
/// distinct covariance) and shared read-only across sequences.
class EmissionModel {
 public:
  EmissionModel(const ModelSpec& spec, const HHMMParams& params);

  /// T x I matrix; entry (t, i) = log p(y_t, l_t | s_t = i). Missing
  /// continuous coordinates are marginalized and missing symbols contribute 0.
  Matrix log_matrix(const Sequence& seq) const;

  const GaussianDensity& density(std::size_t state) const { return densities_[state]; }

 private:
  const ModelSpec& spec_;
  std::vector<GaussianDensity> densities_;
  std::vector<Matrix> log_tables_;  // J tables, I x K_j, log-domain
};

Matrix emission_log_matrix(const ModelSpec& spec, const HHMMParams& params, const Sequence& seq);

/// Expected complete-data statistics accumulated over sequences.
///
/// For continuous data, `first_moment` and `second_moment` hold posterior
/// weighted sums of E[y | y_obs, s=i] and E[y y^T | y_obs, s=i]; missing
/// coordinates enter through the per-state conditional Gaussian. Diagonal and
/// spherical models keep only the diagonal of the second moment (I x M);
/// full and tied models keep one M x M matrix per state.
struct SufficientStats {
  std::vector<double> post_sum;        // I
  std::vector<double> init_counts;     // I
  Matrix trans_counts;                 // I x I
  Matrix first_moment;                 // I x M
  Matrix diag_second_moment;           // I x M (diagonal / spherical)
  std::vector<Matrix> second_moment;   // I of M x M (full / tied)
  std::vector<Matrix> discrete_counts; // J of I x K_j
  std::size_t n_sequences = 0;

  static SufficientStats zeros(const ModelSpec& spec);
  SufficientStats& operator+=(const SufficientStats& other);
};

/// Adds one sequence's contribution. `gamma` is T x I with rows summing to 1;
/// `xi_sum` is I x I. `params` supplies the conditional expectations for
/// missing continuous cells.
void accumulate_stats(SufficientStats& stats, const ModelSpec& spec, const HHMMParams& params,
                      const Sequence& seq, const Matrix& gamma, const Matrix& xi_sum);

/// States whose posterior mass is below this keep their previous mean.
inline constexpr double kEmptyStateMass = 1e-12;

/// Re-estimates all parameters from `stats`. The trailing
/// spec.n_frozen_discrete tables are copied verbatim from `frozen_tables`.
/// `previous` supplies the fallback for states with no posterior mass.
HHMMParams m_step(const ModelSpec& spec, const SufficientStats& stats, const HHMMParams& previous,
                  std::span<const Matrix> frozen_tables, double cov_floor);

}  // namespace hhmm
