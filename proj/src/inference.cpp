#include "hhmm/inference.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "hhmm/emissions.hpp"
#include "hhmm/error.hpp"
#include "hhmm/kernels.hpp"
#include "hhmm/numerics.hpp"
#include "hhmm/parallel.hpp"

namespace hhmm {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void check_inputs(std::size_t n_pi, const Matrix& transitions, const Matrix& log_emissions) {
  const std::size_t I = log_emissions.cols();
  if (log_emissions.rows() == 0) throw InputError("inference needs at least one time step");
  if (transitions.rows() != I || transitions.cols() != I) throw InputError("transition matrix does not match state count");
  if (n_pi != I && n_pi != 0) throw InputError("initial distribution does not match state count");
}

Matrix log_of(const Matrix& m) {
  Matrix out(m.rows(), m.cols());
  for (std::size_t k = 0; k < m.size(); ++k) out.flat()[k] = std::log(m.flat()[k]);
  return out;
}

Matrix log_transposed(const Matrix& m) {
  Matrix out(m.cols(), m.rows());
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) out(c, r) = std::log(m(r, c));
  }
  return out;
}

}  // namespace

ForwardResult forward(std::span<const double> pi, const Matrix& transitions, const Matrix& log_emissions) {
  check_inputs(pi.size(), transitions, log_emissions);
  const std::size_t T = log_emissions.rows();
  const std::size_t I = log_emissions.cols();
  const auto& k = kernels::active();
  const Matrix log_at = log_transposed(transitions);

  ForwardResult res;
  res.log_alpha = Matrix(T, I);
  for (std::size_t i = 0; i < I; ++i) res.log_alpha(0, i) = std::log(pi[i]) + log_emissions(0, i);

  std::vector<double> tmp(I);
  for (std::size_t t = 1; t < T; ++t) {
    const auto prev = res.log_alpha.row(t - 1);
    for (std::size_t j = 0; j < I; ++j) {
      k.add(prev.data(), log_at.row(j).data(), I, tmp.data());
      res.log_alpha(t, j) = log_sum_exp(tmp) + log_emissions(t, j);
    }
  }
  res.log_likelihood = log_sum_exp(res.log_alpha.row(T - 1));
  return res;
}

Matrix backward(const Matrix& transitions, const Matrix& log_emissions) {
  check_inputs(0, transitions, log_emissions);
  const std::size_t T = log_emissions.rows();
  const std::size_t I = log_emissions.cols();
  const auto& k = kernels::active();
  const Matrix log_a = log_of(transitions);

  Matrix log_beta(T, I, 0.0);
  std::vector<double> ahead(I);
  std::vector<double> tmp(I);
  for (std::size_t t = T - 1; t-- > 0;) {
    k.add(log_emissions.row(t + 1).data(), log_beta.row(t + 1).data(), I, ahead.data());
    for (std::size_t i = 0; i < I; ++i) {
      k.add(log_a.row(i).data(), ahead.data(), I, tmp.data());
      log_beta(t, i) = log_sum_exp(tmp);
    }
  }
  return log_beta;
}

PosteriorResult posteriors(std::span<const double> pi, const Matrix& transitions, const Matrix& log_emissions) {
  const ForwardResult fwd = forward(pi, transitions, log_emissions);
  const Matrix log_beta = backward(transitions, log_emissions);
  const std::size_t T = log_emissions.rows();
  const std::size_t I = log_emissions.cols();
  const double L = fwd.log_likelihood;
  if (!std::isfinite(L)) throw NumericError("sequence has zero probability under the model");

  const auto& k = kernels::active();
  const Matrix log_a = log_of(transitions);

  PosteriorResult res;
  res.log_likelihood = L;
  res.gamma = Matrix(T, I);
  res.xi_sum = Matrix(I, I, 0.0);

  std::vector<double> tmp(I);
  for (std::size_t t = 0; t < T; ++t) {
    k.add(fwd.log_alpha.row(t).data(), log_beta.row(t).data(), I, tmp.data());
    auto g = res.gamma.row(t);
    k.exp_shifted(tmp.data(), I, L, g.data());
    double sum = 0.0;
    for (double v : g) sum += v;
    if (!(sum > 0.0) || !std::isfinite(sum)) throw NumericError("degenerate state posterior at step " + std::to_string(t));
    for (double& v : g) v /= sum;
  }

  Matrix block(I, I);
  std::vector<double> ahead(I);
  for (std::size_t t = 0; t + 1 < T; ++t) {
    k.add(log_emissions.row(t + 1).data(), log_beta.row(t + 1).data(), I, ahead.data());
    double sum = 0.0;
    for (std::size_t i = 0; i < I; ++i) {
      k.add(log_a.row(i).data(), ahead.data(), I, tmp.data());
      // alpha(t, i) enters as part of the shift
      k.exp_shifted(tmp.data(), I, L - fwd.log_alpha(t, i), block.row(i).data());
      for (double v : block.row(i)) sum += v;
    }
    if (!(sum > 0.0) || !std::isfinite(sum)) throw NumericError("degenerate pairwise posterior at step " + std::to_string(t));
    k.axpy(1.0 / sum, block.data(), block.size(), res.xi_sum.data());
  }
  return res;
}

DecodeResult viterbi(std::span<const double> pi, const Matrix& transitions, const Matrix& log_emissions) {
  check_inputs(pi.size(), transitions, log_emissions);
  const std::size_t T = log_emissions.rows();
  const std::size_t I = log_emissions.cols();
  const auto& k = kernels::active();
  const Matrix log_at = log_transposed(transitions);

  Matrix delta(T, I);
  Grid<std::size_t> back(T, I, 0);
  for (std::size_t i = 0; i < I; ++i) delta(0, i) = std::log(pi[i]) + log_emissions(0, i);

  std::vector<double> tmp(I);
  for (std::size_t t = 1; t < T; ++t) {
    const auto prev = delta.row(t - 1);
    for (std::size_t j = 0; j < I; ++j) {
      k.add(prev.data(), log_at.row(j).data(), I, tmp.data());
      const std::size_t best = k.argmax(tmp.data(), I);
      back(t, j) = best;
      delta(t, j) = tmp[best] + log_emissions(t, j);
    }
  }

  DecodeResult res;
  res.states.resize(T);
  std::size_t s = k.argmax(delta.row(T - 1).data(), I);
  res.log_prob = delta(T - 1, s);
  for (std::size_t t = T; t-- > 0;) {
    res.states[t] = s;
    if (t > 0) s = back(t, s);
  }
  return res;
}

DecodeResult posterior_decode(std::span<const double> pi, const Matrix& transitions, const Matrix& log_emissions) {
  const PosteriorResult post = posteriors(pi, transitions, log_emissions);
  const auto& k = kernels::active();
  DecodeResult res;
  res.log_prob = post.log_likelihood;
  res.states.resize(post.gamma.rows());
  for (std::size_t t = 0; t < post.gamma.rows(); ++t) res.states[t] = k.argmax(post.gamma.row(t).data(), post.gamma.cols());
  return res;
}

std::vector<double> score_each(const ModelSpec& spec, const HHMMParams& params, std::span<const Sequence> sequences,
                               unsigned threads) {
  validate(spec, params);
  for (const Sequence& seq : sequences) validate_sequence(spec, seq);
  const EmissionModel emissions(spec, params);
  std::vector<double> out(sequences.size());
  parallel_for(sequences.size(), threads, [&](std::size_t n) {
    out[n] = forward(params.pi, params.transitions, emissions.log_matrix(sequences[n])).log_likelihood;
  });
  return out;
}

double score(const ModelSpec& spec, const HHMMParams& params, std::span<const Sequence> sequences, unsigned threads) {
  if (sequences.empty()) throw InputError("score needs at least one sequence");
  double total = 0.0;
  for (double v : score_each(spec, params, sequences, threads)) total += v;
  return total;
}

}  // namespace hhmm
