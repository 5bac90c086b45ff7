#include "hhmm/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>

#include "hhmm/error.hpp"
#include "hhmm/inference.hpp"
#include "hhmm/kernels.hpp"
#include "hhmm/parallel.hpp"

namespace hhmm {
namespace {

using Rng = std::mt19937_64;

void fill_flat_dirichlet(std::span<double> out, Rng& rng) {
  std::exponential_distribution<double> draw(1.0);
  double sum = 0.0;
  for (double& v : out) {
    v = draw(rng);
    sum += v;
  }
  for (double& v : out) v /= sum;
}

struct ObservedSummary {
  std::vector<double> min, max, mean, variance;
};

ObservedSummary summarize_observed(std::size_t M, std::span<const Sequence> sequences) {
  ObservedSummary s;
  s.min.assign(M, std::numeric_limits<double>::infinity());
  s.max.assign(M, -std::numeric_limits<double>::infinity());
  s.mean.assign(M, 0.0);
  s.variance.assign(M, 0.0);
  std::vector<double> count(M, 0.0);
  for (const Sequence& seq : sequences) {
    for (std::size_t t = 0; t < seq.length(); ++t) {
      for (std::size_t d = 0; d < M; ++d) {
        if (!seq.continuous_observed(t, d)) continue;
        const double x = seq.continuous(t, d);
        s.min[d] = std::min(s.min[d], x);
        s.max[d] = std::max(s.max[d], x);
        count[d] += 1.0;
        s.mean[d] += x;
      }
    }
  }
  for (std::size_t d = 0; d < M; ++d) {
    if (count[d] == 0.0) throw InputError("continuous dimension " + std::to_string(d) + " has no observed values");
    s.mean[d] /= count[d];
  }
  for (const Sequence& seq : sequences) {
    for (std::size_t t = 0; t < seq.length(); ++t) {
      for (std::size_t d = 0; d < M; ++d) {
        if (!seq.continuous_observed(t, d)) continue;
        const double dx = seq.continuous(t, d) - s.mean[d];
        s.variance[d] += dx * dx;
      }
    }
  }
  for (std::size_t d = 0; d < M; ++d) s.variance[d] /= count[d];
  return s;
}

// Covariance of `type` built from a full M x M sample covariance.
Covariance shaped_covariance(CovarianceType type, const Matrix& sample, double floor) {
  const std::size_t M = sample.rows();
  Covariance cov = Covariance::scaled_identity(type, M, 0.0);
  switch (type) {
    case CovarianceType::Diagonal:
      for (std::size_t d = 0; d < M; ++d) cov.values[d] = sample(d, d);
      break;
    case CovarianceType::Spherical: {
      double total = 0.0;
      for (std::size_t d = 0; d < M; ++d) total += sample(d, d);
      cov.values[0] = M > 0 ? total / static_cast<double>(M) : 1.0;
      break;
    }
    case CovarianceType::Full:
    case CovarianceType::Tied:
      cov.values.assign(sample.flat().begin(), sample.flat().end());
      break;
  }
  return regularize_covariance(std::move(cov), floor);
}

void check_frozen_tables(const ModelSpec& spec, std::span<const Matrix> frozen_tables) {
  if (frozen_tables.size() != spec.n_frozen_discrete) {
    throw InputError("n_frozen_discrete is " + std::to_string(spec.n_frozen_discrete) + " but " +
                     std::to_string(frozen_tables.size()) + " frozen tables were supplied");
  }
  for (std::size_t f = 0; f < frozen_tables.size(); ++f) {
    const std::size_t j = spec.first_frozen() + f;
    const Matrix& table = frozen_tables[f];
    if (table.rows() != spec.n_states || table.cols() != spec.alphabet_sizes[j]) {
      throw InputError("frozen table " + std::to_string(f) + " must be " + std::to_string(spec.n_states) + "x" +
                       std::to_string(spec.alphabet_sizes[j]));
    }
    for (std::size_t i = 0; i < table.rows(); ++i) {
      double sum = 0.0;
      for (double p : table.row(i)) {
        if (!(p >= 0.0)) throw InputError("frozen table " + std::to_string(f) + " has a negative probability");
        sum += p;
      }
      if (std::abs(sum - 1.0) > 1e-9) {
        throw InputError("frozen table " + std::to_string(f) + " row " + std::to_string(i) + " does not sum to 1");
      }
    }
  }
}

double squared_distance(std::span<const double> a, std::span<const double> b, std::span<const double> ones) {
  return kernels::active().weighted_sq_dist(a.data(), b.data(), ones.data(), a.size());
}

}  // namespace

std::string_view to_string(InitType type) { return type == InitType::KMeans ? "kmeans" : "random"; }

InitType parse_init_type(std::string_view name) {
  if (name == "random") return InitType::Random;
  if (name == "kmeans") return InitType::KMeans;
  throw InputError("unknown init_type '" + std::string(name) + "' (expected random or kmeans)");
}

void TrainConfig::check(const ModelSpec& spec) const {
  spec.check();
  if (n_init < 1) throw InputError("n_init must be at least 1");
  if (n_iter < 1) throw InputError("n_iter must be at least 1");
  if (!(thres > 0.0) || !std::isfinite(thres)) throw InputError("thres must be positive");
  if (conv_iter < 1) throw InputError("conv_iter must be at least 1");
  if (!(cov_floor > 0.0) || !std::isfinite(cov_floor)) throw InputError("cov_floor must be positive");
  check_frozen_tables(spec, frozen_tables);
}

KMeansResult lloyd_kmeans(const Matrix& rows, std::size_t k, std::uint64_t seed, std::size_t max_iter) {
  const std::size_t n = rows.rows();
  const std::size_t dim = rows.cols();
  if (k == 0 || n < k) {
    throw InputError("k-means needs at least " + std::to_string(k) + " complete rows, got " + std::to_string(n));
  }
  const std::vector<double> ones(dim, 1.0);
  Rng rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);

  KMeansResult res;
  res.centers = Matrix(k, dim);
  std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
  std::size_t chosen = pick(rng);
  for (std::size_t c = 0; c < k; ++c) {
    std::copy_n(rows.row(chosen).begin(), dim, res.centers.row(c).begin());
    for (std::size_t r = 0; r < n; ++r) nearest[r] = std::min(nearest[r], squared_distance(rows.row(r), res.centers.row(c), ones));
    chosen = static_cast<std::size_t>(std::max_element(nearest.begin(), nearest.end()) - nearest.begin());
  }

  res.labels.assign(n, k);
  std::vector<double> dist(n);
  std::vector<double> counts(k);
  for (std::size_t iter = 0; iter < max_iter; ++iter) {
    bool changed = false;
    for (std::size_t r = 0; r < n; ++r) {
      std::size_t best = 0;
      double best_d = squared_distance(rows.row(r), res.centers.row(0), ones);
      for (std::size_t c = 1; c < k; ++c) {
        const double d = squared_distance(rows.row(r), res.centers.row(c), ones);
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      dist[r] = best_d;
      if (res.labels[r] != best) {
        res.labels[r] = best;
        changed = true;
      }
    }
    res.iterations = iter + 1;
    if (!changed && iter > 0) break;

    res.centers.fill(0.0);
    std::fill(counts.begin(), counts.end(), 0.0);
    for (std::size_t r = 0; r < n; ++r) {
      kernels::axpy(1.0, rows.row(r), res.centers.row(res.labels[r]));
      counts[res.labels[r]] += 1.0;
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] > 0.0) {
        for (double& v : res.centers.row(c)) v /= counts[c];
        continue;
      }
      // Empty cluster: take over the row worst served by its current center.
      const std::size_t far = static_cast<std::size_t>(std::max_element(dist.begin(), dist.end()) - dist.begin());
      std::copy_n(rows.row(far).begin(), dim, res.centers.row(c).begin());
      dist[far] = 0.0;
      res.labels[far] = c;
    }
  }
  return res;
}

HHMMParams init_params(const ModelSpec& spec, std::span<const Sequence> sequences, InitType init_type,
                       std::uint64_t seed, std::span<const Matrix> frozen_tables, double cov_floor) {
  spec.check();
  if (sequences.empty()) throw InputError("initialization needs at least one sequence");
  for (const Sequence& seq : sequences) validate_sequence(spec, seq);
  check_frozen_tables(spec, frozen_tables);
  if (init_type == InitType::KMeans && spec.n_continuous == 0) {
    throw InputError("kmeans initialization requires continuous observations");
  }

  const std::size_t I = spec.n_states;
  const std::size_t M = spec.n_continuous;
  Rng rng(seed);

  HHMMParams p;
  p.pi.resize(I);
  fill_flat_dirichlet(p.pi, rng);
  p.transitions = Matrix(I, I);
  for (std::size_t i = 0; i < I; ++i) fill_flat_dirichlet(p.transitions.row(i), rng);

  p.means = Matrix(I, M, 0.0);
  if (M == 0) {
    const std::size_t n_cov = spec.covariance_type == CovarianceType::Tied ? 1 : I;
    p.covariances.assign(n_cov, Covariance::scaled_identity(spec.covariance_type, 0, 1.0));
  } else {
    const ObservedSummary summary = summarize_observed(M, sequences);
    Matrix global(M, M, 0.0);
    for (std::size_t d = 0; d < M; ++d) global(d, d) = summary.variance[d];

    if (init_type == InitType::Random) {
      for (std::size_t i = 0; i < I; ++i) {
        for (std::size_t d = 0; d < M; ++d) {
          std::uniform_real_distribution<double> draw(summary.min[d], summary.max[d]);
          p.means(i, d) = summary.max[d] > summary.min[d] ? draw(rng) : summary.min[d];
        }
      }
      const std::size_t n_cov = spec.covariance_type == CovarianceType::Tied ? 1 : I;
      for (std::size_t c = 0; c < n_cov; ++c) p.covariances.push_back(shaped_covariance(spec.covariance_type, global, cov_floor));
    } else {
      std::size_t n_complete = 0;
      for (const Sequence& seq : sequences) {
        for (std::size_t t = 0; t < seq.length(); ++t) {
          const auto m = seq.mask.row(t);
          n_complete += std::all_of(m.begin(), m.end(), [](std::uint8_t v) { return v != 0; });
        }
      }
      if (n_complete < I) {
        throw InputError("kmeans initialization needs at least " + std::to_string(I) +
                         " fully observed rows, found " + std::to_string(n_complete));
      }
      Matrix rows(n_complete, M);
      std::size_t r = 0;
      for (const Sequence& seq : sequences) {
        for (std::size_t t = 0; t < seq.length(); ++t) {
          const auto m = seq.mask.row(t);
          if (!std::all_of(m.begin(), m.end(), [](std::uint8_t v) { return v != 0; })) continue;
          std::copy_n(seq.continuous.row(t).begin(), M, rows.row(r++).begin());
        }
      }
      const KMeansResult km = lloyd_kmeans(rows, I, seed);
      p.means = km.centers;

      std::vector<Matrix> scatter(I, Matrix(M, M, 0.0));
      std::vector<double> size(I, 0.0);
      for (std::size_t n = 0; n < rows.rows(); ++n) {
        const std::size_t c = km.labels[n];
        size[c] += 1.0;
        for (std::size_t a = 0; a < M; ++a) {
          const double da = rows(n, a) - km.centers(c, a);
          for (std::size_t b = 0; b < M; ++b) scatter[c](a, b) += da * (rows(n, b) - km.centers(c, b));
        }
      }
      if (spec.covariance_type == CovarianceType::Tied) {
        Matrix pooled(M, M, 0.0);
        for (std::size_t c = 0; c < I; ++c) kernels::axpy(1.0 / static_cast<double>(n_complete), scatter[c].flat(), pooled.flat());
        p.covariances.push_back(shaped_covariance(spec.covariance_type, pooled, cov_floor));
      } else {
        for (std::size_t c = 0; c < I; ++c) {
          if (size[c] < 2.0) {
            p.covariances.push_back(shaped_covariance(spec.covariance_type, global, cov_floor));
            continue;
          }
          for (double& v : scatter[c].flat()) v /= size[c];
          p.covariances.push_back(shaped_covariance(spec.covariance_type, scatter[c], cov_floor));
        }
      }
    }
  }

  for (std::size_t j = 0; j < spec.n_discrete(); ++j) {
    if (spec.is_frozen(j)) {
      p.discrete_tables.push_back(frozen_tables[j - spec.first_frozen()]);
      continue;
    }
    Matrix table(I, spec.alphabet_sizes[j]);
    for (std::size_t i = 0; i < I; ++i) fill_flat_dirichlet(table.row(i), rng);
    p.discrete_tables.push_back(std::move(table));
  }
  validate(spec, p);
  return p;
}

EStepResult e_step(const ModelSpec& spec, const HHMMParams& params, std::span<const Sequence> sequences,
                   unsigned threads) {
  const EmissionModel emissions(spec, params);
  std::vector<double> loglik(sequences.size());
  std::vector<SufficientStats> partial(sequences.size());
  parallel_for(sequences.size(), threads, [&](std::size_t n) {
    const Matrix log_b = emissions.log_matrix(sequences[n]);
    const PosteriorResult post = posteriors(params.pi, params.transitions, log_b);
    loglik[n] = post.log_likelihood;
    partial[n] = SufficientStats::zeros(spec);
    accumulate_stats(partial[n], spec, params, sequences[n], post.gamma, post.xi_sum);
  });

  EStepResult res;
  res.stats = SufficientStats::zeros(spec);
  for (std::size_t n = 0; n < sequences.size(); ++n) {
    res.log_likelihood += loglik[n];
    res.stats += partial[n];
  }
  return res;
}

EMRun em_run(const ModelSpec& spec, std::span<const Sequence> sequences, HHMMParams initial,
             const TrainConfig& config) {
  config.check(spec);
  validate(spec, initial);
  if (sequences.empty()) throw InputError("no training sequences");
  for (const Sequence& seq : sequences) validate_sequence(spec, seq);

  EMRun run;
  run.params = std::move(initial);
  std::size_t streak = 0;
  for (std::size_t iter = 0; iter < config.n_iter; ++iter) {
    EStepResult e = e_step(spec, run.params, sequences, config.threads);
    const double L = e.log_likelihood;
    if (!std::isfinite(L)) throw NumericError("non-finite log-likelihood at iteration " + std::to_string(iter + 1));
    if (!run.loglik_trace.empty()) {
      const double prev = run.loglik_trace.back();
      const double rel = prev != 0.0 ? (L - prev) / std::abs(prev) : L - prev;
      streak = rel < config.thres ? streak + 1 : 0;
    }
    run.loglik_trace.push_back(L);
    if (streak >= config.conv_iter) {
      run.converged = true;
      break;
    }
    if (iter + 1 == config.n_iter) break;
    run.params = m_step(spec, e.stats, run.params, config.frozen_tables, config.cov_floor);
  }
  return run;
}

FitReport em_fit(const ModelSpec& spec, std::span<const Sequence> sequences, const TrainConfig& config) {
  config.check(spec);
  if (sequences.empty()) throw InputError("no training sequences");

  FitReport report;
  std::vector<EMRun> runs;
  runs.reserve(config.n_init);
  for (std::size_t r = 0; r < config.n_init; ++r) {
    HHMMParams start = init_params(spec, sequences, config.init_type, config.seed + r, config.frozen_tables,
                                   config.cov_floor);
    runs.push_back(em_run(spec, sequences, std::move(start), config));
    report.per_restart_final_loglik.push_back(runs.back().loglik_trace.back());
    report.restart_traces.push_back(runs.back().loglik_trace);
    report.restart_converged.push_back(runs.back().converged);
  }
  std::size_t best = 0;
  for (std::size_t r = 1; r < runs.size(); ++r) {
    if (report.per_restart_final_loglik[r] > report.per_restart_final_loglik[best]) best = r;
  }
  report.best_restart = best;
  report.params = std::move(runs[best].params);
  report.loglik_trace = std::move(runs[best].loglik_trace);
  report.converged = runs[best].converged;
  return report;
}

}  // namespace hhmm
