#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "hhmm/emissions.hpp"
#include "hhmm/matrix.hpp"
#include "hhmm/model.hpp"

namespace hhmm {

enum class InitType { Random, KMeans };

std::string_view to_string(InitType type);
InitType parse_init_type(std::string_view name);

struct TrainConfig {
  std::size_t n_init = 1;
  std::size_t n_iter = 50;
  /// Relative log-likelihood improvement below which an iteration counts
  /// toward convergence.
  double thres = 1e-3;
  /// Consecutive sub-threshold iterations required to declare convergence.
  std::size_t conv_iter = 5;
  InitType init_type = InitType::Random;
  std::uint64_t seed = 0;
  double cov_floor = 1e-6;
  /// Tables for the trailing spec.n_frozen_discrete features, installed at
  /// initialization and never re-estimated.
  std::vector<Matrix> frozen_tables;
  /// Worker threads for per-sequence E-steps. Results do not depend on it.
  unsigned threads = 1;

  /// Throws InputError on invalid settings or frozen tables that do not fit spec.
  void check(const ModelSpec& spec) const;
};

struct FitReport {
  HHMMParams params;
  std::vector<double> loglik_trace;  // best restart
  bool converged = false;
  std::size_t best_restart = 0;
  std::vector<double> per_restart_final_loglik;
  std::vector<std::vector<double>> restart_traces;
  std::vector<bool> restart_converged;
};

struct KMeansResult {
  Matrix centers;                    // k x dim
  std::vector<std::size_t> labels;   // one per row
  std::size_t iterations = 0;
};

/// Lloyd's algorithm with farthest-point seeding. The first center is a
/// row drawn from `seed`; each further center is the row farthest from the
/// centers chosen so far. Empty clusters are reseeded to the row farthest
/// from its current center.
KMeansResult lloyd_kmeans(const Matrix& rows, std::size_t k, std::uint64_t seed, std::size_t max_iter = 100);

HHMMParams init_params(const ModelSpec& spec, std::span<const Sequence> sequences, InitType init_type,
                       std::uint64_t seed, std::span<const Matrix> frozen_tables = {}, double cov_floor = 1e-6);

struct EStepResult {
  double log_likelihood = 0.0;
  SufficientStats stats;
};

/// Posteriors and expected statistics over all sequences. Per-sequence work
/// runs on `threads` workers and is reduced in sequence order.
EStepResult e_step(const ModelSpec& spec, const HHMMParams& params, std::span<const Sequence> sequences,
                   unsigned threads = 1);

struct EMRun {
  HHMMParams params;  // parameters whose likelihood is the last trace entry
  std::vector<double> loglik_trace;
  bool converged = false;
};

/// Baum-Welch from fixed starting parameters.
EMRun em_run(const ModelSpec& spec, std::span<const Sequence> sequences, HHMMParams initial,
             const TrainConfig& config);

/// n_init restarts (restart r seeded with seed + r), best final likelihood wins.
FitReport em_fit(const ModelSpec& spec, std::span<const Sequence> sequences, const TrainConfig& config);

}  // namespace hhmm
