#pragma once

#include <cstdint>
#include <vector>

#include "hhmm/model.hpp"

namespace hhmm {

struct SampleBatch {
  std::vector<Sequence> sequences;  // fully observed
  std::vector<std::vector<std::size_t>> state_paths;
};

/// Draws sequences from the generative model. Deterministic given `seed`.
SampleBatch sample(const ModelSpec& spec, const HHMMParams& params, std::size_t n_sequences, std::size_t n_samples,
                   std::uint64_t seed);

/// Fills missing cells from the smoothed state posteriors: continuous cells
/// get the posterior-weighted conditional mean, discrete cells the most
/// probable symbol under the posterior mixture (lowest symbol on ties).
/// Observed cells are copied unchanged.
Sequence impute(const ModelSpec& spec, const HHMMParams& params, const Sequence& seq);

/// Stochastic variant: per step, a state is drawn from its posterior, then
/// missing continuous cells are drawn from that state's conditional Gaussian
/// and missing symbols from that state's emission row.
Sequence impute_draw(const ModelSpec& spec, const HHMMParams& params, const Sequence& seq, std::uint64_t seed);

}  // namespace hhmm
