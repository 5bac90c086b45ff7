#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "hhmm/model.hpp"
#include "hhmm/training.hpp"

namespace hhmm {

/// 2 dof - 2 log L
double aic(double log_likelihood, std::size_t dof);

/// dof ln(n_obs) - 2 log L, with n_obs the total number of time steps.
double bic(double log_likelihood, std::size_t dof, std::size_t n_obs);

struct SelectionRow {
  std::size_t n_states = 0;
  std::size_t dof = 0;
  double log_likelihood = 0.0;
  double aic = 0.0;
  double bic = 0.0;
  bool converged = false;
  bool failed = false;
  std::string error;
};

struct SelectionReport {
  std::vector<SelectionRow> rows;  // ascending n_states
  std::size_t best_by_aic = 0;
  std::size_t best_by_bic = 0;
};

/// Picks the row minimizing the criterion among non-failed rows, preferring
/// fewer states on ties. Returns 0 when every row failed.
std::size_t best_n_states(const std::vector<SelectionRow>& rows, bool use_bic);

/// Fits one model per state count in [min_states, max_states]. Candidate c
/// (0-based) uses seeds starting at config.seed + c * config.n_init. Fits that
/// fail numerically are flagged and skipped when picking the best.
SelectionReport order_sweep(const ModelSpec& spec_template, std::span<const Sequence> sequences,
                            std::size_t min_states, std::size_t max_states, const TrainConfig& config);

}  // namespace hhmm
