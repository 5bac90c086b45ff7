#include "hhmm/generation.hpp"

#include <cmath>
#include <random>

#include "hhmm/emissions.hpp"
#include "hhmm/error.hpp"
#include "hhmm/inference.hpp"
#include "hhmm/kernels.hpp"
#include "hhmm/numerics.hpp"

namespace hhmm {
namespace {

using Rng = std::mt19937_64;

std::size_t draw_categorical(std::span<const double> probs, Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double u = unit(rng);
  double cum = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t k = 0; k < probs.size(); ++k) {
    if (probs[k] <= 0.0) continue;
    cum += probs[k];
    last_positive = k;
    if (u < cum) return k;
  }
  return last_positive;
}

// Lower factor for drawing; tolerates a PSD matrix with zero directions.
Matrix sampling_factor(const Matrix& cov) {
  try {
    return Cholesky(cov).lower();
  } catch (const NumericError&) {
    Matrix jittered = cov;
    double scale = 0.0;
    for (std::size_t d = 0; d < cov.rows(); ++d) scale = std::max(scale, cov(d, d));
    for (std::size_t d = 0; d < cov.rows(); ++d) jittered(d, d) += 1e-12 * std::max(scale, 1.0);
    try {
      return Cholesky(jittered).lower();
    } catch (const NumericError&) {
      Matrix diag(cov.rows(), cov.rows(), 0.0);
      for (std::size_t d = 0; d < cov.rows(); ++d) diag(d, d) = std::sqrt(std::max(0.0, cov(d, d)));
      return diag;
    }
  }
}

// out = mean + L z with z standard normal.
void draw_gaussian(std::span<const double> mean, const Matrix& lower, Rng& rng, std::span<double> out) {
  std::normal_distribution<double> normal(0.0, 1.0);
  const std::size_t n = mean.size();
  std::vector<double> z(n);
  for (double& v : z) v = normal(rng);
  for (std::size_t r = 0; r < n; ++r) {
    out[r] = mean[r] + kernels::dot(lower.row(r).first(r + 1), std::span<const double>(z).first(r + 1));
  }
}

struct Observed {
  std::vector<std::size_t> dims;
  std::vector<double> values;
};

Observed observed_part(const Sequence& seq, std::size_t t) {
  Observed o;
  for (std::size_t d = 0; d < seq.continuous.cols(); ++d) {
    if (seq.continuous_observed(t, d)) {
      o.dims.push_back(d);
      o.values.push_back(seq.continuous(t, d));
    }
  }
  return o;
}

PosteriorResult smoothed(const ModelSpec& spec, const HHMMParams& params, const Sequence& seq) {
  validate(spec, params);
  validate_sequence(spec, seq);
  return posteriors(params.pi, params.transitions, emission_log_matrix(spec, params, seq));
}

}  // namespace

SampleBatch sample(const ModelSpec& spec, const HHMMParams& params, std::size_t n_sequences, std::size_t n_samples,
                   std::uint64_t seed) {
  validate(spec, params);
  if (n_sequences < 1 || n_samples < 1) throw InputError("n_sequences and n_samples must be positive");
  const std::size_t I = spec.n_states;
  const std::size_t M = spec.n_continuous;
  const std::size_t J = spec.n_discrete();

  std::vector<Matrix> factors;
  if (M > 0) {
    for (std::size_t i = 0; i < I; ++i) factors.push_back(sampling_factor(params.covariance(i).dense()));
  }

  Rng rng(seed);
  SampleBatch batch;
  for (std::size_t n = 0; n < n_sequences; ++n) {
    Sequence seq(n_samples, M, J);
    std::vector<std::size_t> path(n_samples);
    std::size_t s = draw_categorical(params.pi, rng);
    for (std::size_t t = 0; t < n_samples; ++t) {
      if (t > 0) s = draw_categorical(params.transitions.row(s), rng);
      path[t] = s;
      if (M > 0) draw_gaussian(params.means.row(s), factors[s], rng, seq.continuous.row(t));
      for (std::size_t j = 0; j < J; ++j) {
        seq.discrete(t, j) = static_cast<std::int32_t>(draw_categorical(params.discrete_tables[j].row(s), rng));
      }
    }
    batch.sequences.push_back(std::move(seq));
    batch.state_paths.push_back(std::move(path));
  }
  return batch;
}

Sequence impute(const ModelSpec& spec, const HHMMParams& params, const Sequence& seq) {
  if (!seq.has_missing()) {
    validate_sequence(spec, seq);
    return seq;
  }
  const PosteriorResult post = smoothed(spec, params, seq);
  const std::size_t I = spec.n_states;
  const std::size_t M = spec.n_continuous;
  std::vector<GaussianComponent> comps;
  for (std::size_t i = 0; i < I && M > 0; ++i) comps.push_back(params.component(i));

  Sequence out = seq;
  for (std::size_t t = 0; t < seq.length(); ++t) {
    const auto g = post.gamma.row(t);
    const Observed obs = observed_part(seq, t);
    if (obs.dims.size() < M) {
      std::vector<double> fill(M - obs.dims.size(), 0.0);
      std::vector<std::size_t> missing;
      for (std::size_t i = 0; i < I; ++i) {
        const ConditionalGaussian cond = conditional_gaussian(comps[i], obs.dims, obs.values);
        kernels::axpy(g[i], cond.mean, fill);
        missing = cond.missing_dims;
      }
      for (std::size_t a = 0; a < missing.size(); ++a) {
        out.continuous(t, missing[a]) = fill[a];
        out.mask(t, missing[a]) = 1;
      }
    }
    for (std::size_t j = 0; j < spec.n_discrete(); ++j) {
      if (seq.discrete(t, j) != Sequence::kMissingSymbol) continue;
      const Matrix& table = params.discrete_tables[j];
      std::vector<double> mix(table.cols(), 0.0);
      for (std::size_t i = 0; i < I; ++i) kernels::axpy(g[i], table.row(i), mix);
      out.discrete(t, j) = static_cast<std::int32_t>(kernels::argmax(mix));
    }
  }
  return out;
}

Sequence impute_draw(const ModelSpec& spec, const HHMMParams& params, const Sequence& seq, std::uint64_t seed) {
  if (!seq.has_missing()) {
    validate_sequence(spec, seq);
    return seq;
  }
  const PosteriorResult post = smoothed(spec, params, seq);
  const std::size_t M = spec.n_continuous;
  Rng rng(seed);

  Sequence out = seq;
  for (std::size_t t = 0; t < seq.length(); ++t) {
    const std::size_t s = draw_categorical(post.gamma.row(t), rng);
    const Observed obs = observed_part(seq, t);
    if (obs.dims.size() < M) {
      const ConditionalGaussian cond = conditional_gaussian(params.component(s), obs.dims, obs.values);
      std::vector<double> value(cond.mean.size());
      draw_gaussian(cond.mean, sampling_factor(cond.covariance), rng, value);
      for (std::size_t a = 0; a < cond.missing_dims.size(); ++a) {
        out.continuous(t, cond.missing_dims[a]) = value[a];
        out.mask(t, cond.missing_dims[a]) = 1;
      }
    }
    for (std::size_t j = 0; j < spec.n_discrete(); ++j) {
      if (seq.discrete(t, j) != Sequence::kMissingSymbol) continue;
      out.discrete(t, j) = static_cast<std::int32_t>(draw_categorical(params.discrete_tables[j].row(s), rng));
    }
  }
  return out;
}

}  // namespace hhmm
