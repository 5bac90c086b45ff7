#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "hhmm/matrix.hpp"
#include "hhmm/model.hpp"

namespace hhmm {

// All recursions run in log space over a T x I emission log-matrix, so rows
// may contain -inf (zero-probability symbols) without special casing.

struct ForwardResult {
  Matrix log_alpha;  // T x I
  double log_likelihood = 0.0;
};

struct PosteriorResult {
  double log_likelihood = 0.0;
  Matrix gamma;   // T x I, rows sum to 1
  Matrix xi_sum;  // I x I, sum over t of p(s_t = i, s_{t+1} = j | data)
};

struct DecodeResult {
  double log_prob = 0.0;
  std::vector<std::size_t> states;
};

ForwardResult forward(std::span<const double> pi, const Matrix& transitions, const Matrix& log_emissions);
Matrix backward(const Matrix& transitions, const Matrix& log_emissions);

/// Throws NumericError if the data has zero probability under the model.
PosteriorResult posteriors(std::span<const double> pi, const Matrix& transitions, const Matrix& log_emissions);

/// Most probable joint state path; ties go to the lower state index.
DecodeResult viterbi(std::span<const double> pi, const Matrix& transitions, const Matrix& log_emissions);

/// Per-step argmax of the smoothed posteriors. log_prob is the data
/// log-likelihood, since the per-step path has no joint score of its own.
DecodeResult posterior_decode(std::span<const double> pi, const Matrix& transitions, const Matrix& log_emissions);

/// log p(seq) for each sequence, computed in parallel and returned in input order.
std::vector<double> score_each(const ModelSpec& spec, const HHMMParams& params, std::span<const Sequence> sequences,
                               unsigned threads = 1);

/// Sum of per-sequence log-likelihoods. Throws InputError on an empty list.
double score(const ModelSpec& spec, const HHMMParams& params, std::span<const Sequence> sequences,
             unsigned threads = 1);

}  // namespace hhmm
