#include "hhmm/selection.hpp"

#include <cmath>

#include "hhmm/error.hpp"

namespace hhmm {

double aic(double log_likelihood, std::size_t dof) { return 2.0 * static_cast<double>(dof) - 2.0 * log_likelihood; }

double bic(double log_likelihood, std::size_t dof, std::size_t n_obs) {
  if (n_obs == 0) throw InputError("bic needs at least one observation");
  return static_cast<double>(dof) * std::log(static_cast<double>(n_obs)) - 2.0 * log_likelihood;
}

std::size_t best_n_states(const std::vector<SelectionRow>& rows, bool use_bic) {
  const SelectionRow* best = nullptr;
  for (const SelectionRow& row : rows) {
    if (row.failed) continue;
    const double v = use_bic ? row.bic : row.aic;
    if (best == nullptr || v < (use_bic ? best->bic : best->aic) ||
        (v == (use_bic ? best->bic : best->aic) && row.n_states < best->n_states)) {
      best = &row;
    }
  }
  return best ? best->n_states : 0;
}

SelectionReport order_sweep(const ModelSpec& spec_template, std::span<const Sequence> sequences,
                            std::size_t min_states, std::size_t max_states, const TrainConfig& config) {
  if (min_states < 1 || max_states < min_states) throw InputError("state range must be non-empty and start at 1 or more");
  if (sequences.empty()) throw InputError("no training sequences");
  if (spec_template.n_frozen_discrete > 0) {
    throw InputError("order selection cannot vary the state count with frozen tables, which fix it");
  }
  std::size_t n_obs = 0;
  for (const Sequence& seq : sequences) n_obs += seq.length();

  SelectionReport report;
  for (std::size_t n = min_states; n <= max_states; ++n) {
    ModelSpec spec = spec_template;
    spec.n_states = n;
    TrainConfig cfg = config;
    cfg.seed = config.seed + (n - min_states) * config.n_init;

    SelectionRow row;
    row.n_states = n;
    row.dof = count_free_parameters(spec);
    try {
      const FitReport fit = em_fit(spec, sequences, cfg);
      row.log_likelihood = fit.loglik_trace.back();
      row.converged = fit.converged;
      row.aic = aic(row.log_likelihood, row.dof);
      row.bic = bic(row.log_likelihood, row.dof, n_obs);
    } catch (const NumericError& e) {
      row.failed = true;
      row.error = e.what();
    }
    report.rows.push_back(row);
  }
  report.best_by_aic = best_n_states(report.rows, false);
  report.best_by_bic = best_n_states(report.rows, true);
  return report;
}

}  // namespace hhmm
