#include "hhmm/emissions.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "hhmm/error.hpp"
#include "hhmm/kernels.hpp"

namespace hhmm {
namespace {

bool row_complete(std::span<const std::uint8_t> mask) {
  return std::all_of(mask.begin(), mask.end(), [](std::uint8_t m) { return m != 0; });
}

// Normalizes `row` in place; a row with no mass becomes uniform.
void normalize_or_uniform(std::span<double> row) {
  double sum = 0.0;
  for (double v : row) sum += v;
  if (!(sum > 0.0) || !std::isfinite(sum)) {
    std::fill(row.begin(), row.end(), 1.0 / static_cast<double>(row.size()));
    return;
  }
  for (double& v : row) v /= sum;
}

void add_into(Matrix& dst, const Matrix& src) {
  auto d = dst.flat();
  const auto s = src.flat();
  kernels::active().add(d.data(), s.data(), d.size(), d.data());
}

}  // namespace

EmissionModel::EmissionModel(const ModelSpec& spec, const HHMMParams& params) : spec_(spec) {
  if (spec.n_continuous > 0) {
    densities_.reserve(spec.n_states);
    for (std::size_t i = 0; i < spec.n_states; ++i) densities_.emplace_back(params.component(i));
  }
  log_tables_.reserve(spec.n_discrete());
  for (const Matrix& table : params.discrete_tables) {
    Matrix logs(table.rows(), table.cols());
    for (std::size_t k = 0; k < table.size(); ++k) logs.flat()[k] = std::log(table.flat()[k]);
    log_tables_.push_back(std::move(logs));
  }
}

Matrix EmissionModel::log_matrix(const Sequence& seq) const {
  const std::size_t T = seq.length();
  const std::size_t I = spec_.n_states;
  const std::size_t M = spec_.n_continuous;
  const std::size_t J = spec_.n_discrete();
  if (seq.continuous.cols() != M || seq.discrete.cols() != J || seq.continuous.rows() != T ||
      seq.discrete.rows() != T || seq.mask.rows() != T || seq.mask.cols() != M) {
    throw InputError("sequence shape does not match the model");
  }

  Matrix out(T, I, 0.0);
  for (std::size_t t = 0; t < T; ++t) {
    auto row = out.row(t);
    if (M > 0) {
      const auto x = seq.continuous.row(t);
      const auto mask = seq.mask.row(t);
      if (row_complete(mask)) {
        for (std::size_t i = 0; i < I; ++i) row[i] = densities_[i].log_density_complete(x);
      } else {
        for (std::size_t i = 0; i < I; ++i) row[i] = densities_[i].log_density(x, mask);
      }
    }
    for (std::size_t j = 0; j < J; ++j) {
      const std::int32_t sym = seq.discrete(t, j);
      if (sym == Sequence::kMissingSymbol) continue;
      if (sym < 0 || static_cast<std::size_t>(sym) >= spec_.alphabet_sizes[j]) {
        throw InputError("discrete symbol " + std::to_string(sym) + " out of range for feature " +
                         std::to_string(j) + " at step " + std::to_string(t));
      }
      for (std::size_t i = 0; i < I; ++i) row[i] += log_tables_[j](i, static_cast<std::size_t>(sym));
    }
  }
  return out;
}

Matrix emission_log_matrix(const ModelSpec& spec, const HHMMParams& params, const Sequence& seq) {
  return EmissionModel(spec, params).log_matrix(seq);
}

SufficientStats SufficientStats::zeros(const ModelSpec& spec) {
  const std::size_t I = spec.n_states;
  const std::size_t M = spec.n_continuous;
  SufficientStats s;
  s.post_sum.assign(I, 0.0);
  s.init_counts.assign(I, 0.0);
  s.trans_counts = Matrix(I, I, 0.0);
  s.first_moment = Matrix(I, M, 0.0);
  const bool dense = spec.covariance_type == CovarianceType::Full || spec.covariance_type == CovarianceType::Tied;
  if (dense) {
    s.second_moment.assign(I, Matrix(M, M, 0.0));
  } else {
    s.diag_second_moment = Matrix(I, M, 0.0);
  }
  for (std::size_t k : spec.alphabet_sizes) s.discrete_counts.emplace_back(I, k, 0.0);
  return s;
}

SufficientStats& SufficientStats::operator+=(const SufficientStats& other) {
  if (other.post_sum.size() != post_sum.size() || other.discrete_counts.size() != discrete_counts.size() ||
      other.second_moment.size() != second_moment.size()) {
    throw InputError("cannot combine sufficient statistics of different shapes");
  }
  const auto& k = kernels::active();
  k.add(post_sum.data(), other.post_sum.data(), post_sum.size(), post_sum.data());
  k.add(init_counts.data(), other.init_counts.data(), init_counts.size(), init_counts.data());
  add_into(trans_counts, other.trans_counts);
  add_into(first_moment, other.first_moment);
  add_into(diag_second_moment, other.diag_second_moment);
  for (std::size_t i = 0; i < second_moment.size(); ++i) add_into(second_moment[i], other.second_moment[i]);
  for (std::size_t j = 0; j < discrete_counts.size(); ++j) add_into(discrete_counts[j], other.discrete_counts[j]);
  n_sequences += other.n_sequences;
  return *this;
}

namespace {

// Adds one sequence into zeroed statistics.
void accumulate_sequence(SufficientStats& stats, const ModelSpec& spec, const HHMMParams& params,
                         const Sequence& seq, const Matrix& gamma, const Matrix& xi_sum) {
  const std::size_t T = seq.length();
  const std::size_t I = spec.n_states;
  const std::size_t M = spec.n_continuous;
  const std::size_t J = spec.n_discrete();
  if (gamma.rows() != T || gamma.cols() != I || xi_sum.rows() != I || xi_sum.cols() != I ||
      stats.post_sum.size() != I || stats.first_moment.cols() != M || stats.discrete_counts.size() != J) {
    throw InputError("accumulate_stats: shape mismatch");
  }
  const auto& k = kernels::active();
  const bool dense = !stats.second_moment.empty();

  stats.n_sequences += 1;
  k.add(stats.init_counts.data(), gamma.row(0).data(), I, stats.init_counts.data());
  add_into(stats.trans_counts, xi_sum);
  for (std::size_t t = 0; t < T; ++t) k.add(stats.post_sum.data(), gamma.row(t).data(), I, stats.post_sum.data());

  if (M > 0) {
    std::vector<GaussianComponent> comps;
    if (seq.has_missing()) {
      for (std::size_t i = 0; i < I; ++i) comps.push_back(params.component(i));
    }
    std::vector<double> y(M);
    std::vector<double> sq(M);
    std::vector<std::size_t> obs_dims;
    std::vector<double> obs_vals;

    for (std::size_t t = 0; t < T; ++t) {
      const auto x = seq.continuous.row(t);
      const auto mask = seq.mask.row(t);
      const auto g = gamma.row(t);
      const bool complete = row_complete(mask);
      if (complete) {
        for (std::size_t d = 0; d < M; ++d) sq[d] = x[d] * x[d];
      } else {
        obs_dims.clear();
        obs_vals.clear();
        for (std::size_t d = 0; d < M; ++d) {
          if (mask[d]) {
            obs_dims.push_back(d);
            obs_vals.push_back(x[d]);
          }
        }
      }
      for (std::size_t i = 0; i < I; ++i) {
        const double w = g[i];
        if (w == 0.0) continue;
        if (complete) {
          k.axpy(w, x.data(), M, stats.first_moment.row(i).data());
          if (dense) {
            Matrix& s2 = stats.second_moment[i];
            for (std::size_t r = 0; r < M; ++r) k.axpy(w * x[r], x.data(), M, s2.row(r).data());
          } else {
            k.axpy(w, sq.data(), M, stats.diag_second_moment.row(i).data());
          }
          continue;
        }
        // Expected statistics of the missing coordinates under state i.
        const ConditionalGaussian cond = conditional_gaussian(comps[i], obs_dims, obs_vals);
        std::copy(x.begin(), x.end(), y.begin());
        for (std::size_t a = 0; a < cond.missing_dims.size(); ++a) y[cond.missing_dims[a]] = cond.mean[a];
        k.axpy(w, y.data(), M, stats.first_moment.row(i).data());
        if (dense) {
          Matrix& s2 = stats.second_moment[i];
          for (std::size_t r = 0; r < M; ++r) k.axpy(w * y[r], y.data(), M, s2.row(r).data());
          for (std::size_t a = 0; a < cond.missing_dims.size(); ++a) {
            for (std::size_t b = 0; b < cond.missing_dims.size(); ++b) {
              s2(cond.missing_dims[a], cond.missing_dims[b]) += w * cond.covariance(a, b);
            }
          }
        } else {
          auto s2 = stats.diag_second_moment.row(i);
          for (std::size_t d = 0; d < M; ++d) s2[d] += w * y[d] * y[d];
          for (std::size_t a = 0; a < cond.missing_dims.size(); ++a) {
            s2[cond.missing_dims[a]] += w * cond.covariance(a, a);
          }
        }
      }
    }
  }

  for (std::size_t j = 0; j < J; ++j) {
    Matrix& counts = stats.discrete_counts[j];
    for (std::size_t t = 0; t < T; ++t) {
      const std::int32_t sym = seq.discrete(t, j);
      if (sym == Sequence::kMissingSymbol) continue;
      if (sym < 0 || static_cast<std::size_t>(sym) >= counts.cols()) {
        throw InputError("discrete symbol out of range for feature " + std::to_string(j));
      }
      const auto g = gamma.row(t);
      for (std::size_t i = 0; i < I; ++i) counts(i, static_cast<std::size_t>(sym)) += g[i];
    }
  }
}

}  // namespace

void accumulate_stats(SufficientStats& stats, const ModelSpec& spec, const HHMMParams& params,
                      const Sequence& seq, const Matrix& gamma, const Matrix& xi_sum) {
  // Each sequence enters the running totals as one addition per entry, so the
  // result does not depend on how sequences are grouped.
  SufficientStats local = SufficientStats::zeros(spec);
  accumulate_sequence(local, spec, params, seq, gamma, xi_sum);
  stats += local;
}

HHMMParams m_step(const ModelSpec& spec, const SufficientStats& stats, const HHMMParams& previous,
                  std::span<const Matrix> frozen_tables, double cov_floor) {
  const std::size_t I = spec.n_states;
  const std::size_t M = spec.n_continuous;
  const std::size_t J = spec.n_discrete();
  if (frozen_tables.size() != spec.n_frozen_discrete) {
    throw InputError("expected " + std::to_string(spec.n_frozen_discrete) + " frozen tables, got " +
                     std::to_string(frozen_tables.size()));
  }
  if (!(cov_floor > 0.0)) throw InputError("cov_floor must be positive");

  HHMMParams next;
  next.pi = stats.init_counts;
  normalize_or_uniform(next.pi);

  next.transitions = stats.trans_counts;
  for (std::size_t i = 0; i < I; ++i) normalize_or_uniform(next.transitions.row(i));

  std::vector<bool> empty(I);
  next.means = Matrix(I, M, 0.0);
  for (std::size_t i = 0; i < I; ++i) {
    empty[i] = !(stats.post_sum[i] >= kEmptyStateMass);
    for (std::size_t d = 0; d < M; ++d) {
      next.means(i, d) = empty[i] ? previous.means(i, d) : stats.first_moment(i, d) / stats.post_sum[i];
    }
  }

  const CovarianceType type = spec.covariance_type;
  switch (type) {
    case CovarianceType::Diagonal:
    case CovarianceType::Spherical: {
      for (std::size_t i = 0; i < I; ++i) {
        Covariance cov = Covariance::scaled_identity(type, M, 0.0);
        if (!empty[i]) {
          double total = 0.0;
          for (std::size_t d = 0; d < M; ++d) {
            const double mu = next.means(i, d);
            const double var = std::max(0.0, stats.diag_second_moment(i, d) / stats.post_sum[i] - mu * mu);
            if (type == CovarianceType::Diagonal) cov.values[d] = var;
            total += var;
          }
          if (type == CovarianceType::Spherical) cov.values[0] = M > 0 ? total / static_cast<double>(M) : 0.0;
        }
        next.covariances.push_back(regularize_covariance(std::move(cov), cov_floor));
      }
      break;
    }
    case CovarianceType::Full: {
      for (std::size_t i = 0; i < I; ++i) {
        Covariance cov = Covariance::scaled_identity(type, M, 0.0);
        if (!empty[i]) {
          for (std::size_t r = 0; r < M; ++r) {
            for (std::size_t c = r; c < M; ++c) {
              const double v = 0.5 * (stats.second_moment[i](r, c) + stats.second_moment[i](c, r)) /
                                   stats.post_sum[i] -
                               next.means(i, r) * next.means(i, c);
              cov.values[r * M + c] = v;
              cov.values[c * M + r] = v;
            }
          }
          for (std::size_t d = 0; d < M; ++d) cov.values[d * M + d] = std::max(0.0, cov.values[d * M + d]);
        }
        next.covariances.push_back(regularize_covariance(std::move(cov), cov_floor));
      }
      break;
    }
    case CovarianceType::Tied: {
      Covariance cov = Covariance::scaled_identity(type, M, 0.0);
      double mass = 0.0;
      for (std::size_t i = 0; i < I; ++i) {
        if (empty[i]) continue;
        mass += stats.post_sum[i];
        for (std::size_t r = 0; r < M; ++r) {
          for (std::size_t c = 0; c < M; ++c) {
            cov.values[r * M + c] += stats.second_moment[i](r, c) -
                                     stats.post_sum[i] * next.means(i, r) * next.means(i, c);
          }
        }
      }
      if (mass > 0.0) {
        for (std::size_t r = 0; r < M; ++r) {
          for (std::size_t c = r; c < M; ++c) {
            const double v = 0.5 * (cov.values[r * M + c] + cov.values[c * M + r]) / mass;
            cov.values[r * M + c] = v;
            cov.values[c * M + r] = v;
          }
          cov.values[r * M + r] = std::max(0.0, cov.values[r * M + r]);
        }
      } else {
        std::fill(cov.values.begin(), cov.values.end(), 0.0);
      }
      next.covariances.push_back(regularize_covariance(std::move(cov), cov_floor));
      break;
    }
  }

  for (std::size_t j = 0; j < J; ++j) {
    if (spec.is_frozen(j)) {
      const Matrix& frozen = frozen_tables[j - spec.first_frozen()];
      if (frozen.rows() != I || frozen.cols() != spec.alphabet_sizes[j]) {
        throw InputError("frozen table for discrete feature " + std::to_string(j) + " has the wrong shape");
      }
      next.discrete_tables.push_back(frozen);
      continue;
    }
    Matrix table = stats.discrete_counts[j];
    for (std::size_t i = 0; i < I; ++i) normalize_or_uniform(table.row(i));
    next.discrete_tables.push_back(std::move(table));
  }

  for (double v : next.means.flat()) {
    if (!std::isfinite(v)) throw NumericError("non-finite mean after M-step");
  }
  return next;
}

}  // namespace hhmm
