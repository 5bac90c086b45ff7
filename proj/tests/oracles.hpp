#pragma once

// Independent reference computations for tests. Nothing here calls into the
// library's numerics or inference code: densities use Eigen's dense inverse and
// determinant, likelihoods and decodes enumerate every state path.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <random>
#include <vector>

#include "hhmm/model.hpp"

namespace hhmm::oracle {

inline Eigen::MatrixXd dense_cov(const Covariance& cov) {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(cov.dim, cov.dim);
  for (std::size_t r = 0; r < cov.dim; ++r) {
    for (std::size_t c = 0; c < cov.dim; ++c) {
      if (cov.type == CovarianceType::Spherical) {
        m(r, c) = r == c ? cov.values[0] : 0.0;
      } else if (cov.type == CovarianceType::Diagonal) {
        m(r, c) = r == c ? cov.values[r] : 0.0;
      } else {
        m(r, c) = cov.values[r * cov.dim + c];
      }
    }
  }
  return m;
}

/// log N(x_o; mu_o, S_oo) via explicit inverse and determinant.
inline double log_density(const std::vector<double>& x, const std::vector<std::uint8_t>& mask,
                          const std::vector<double>& mean, const Eigen::MatrixXd& cov) {
  std::vector<int> idx;
  for (std::size_t d = 0; d < x.size(); ++d) {
    if (mask[d]) idx.push_back(static_cast<int>(d));
  }
  if (idx.empty()) return 0.0;
  const int n = static_cast<int>(idx.size());
  Eigen::MatrixXd s(n, n);
  Eigen::VectorXd diff(n);
  for (int a = 0; a < n; ++a) {
    diff(a) = x[idx[a]] - mean[idx[a]];
    for (int b = 0; b < n; ++b) s(a, b) = cov(idx[a], idx[b]);
  }
  const double quad = diff.dot(s.inverse() * diff);
  return -0.5 * (n * std::log(2.0 * std::numbers::pi) + std::log(s.determinant()) + quad);
}

/// log p(y_t, l_t | s_t = i), written out factor by factor.
inline double log_emission(const ModelSpec& spec, const HHMMParams& p, const Sequence& seq, std::size_t t,
                           std::size_t i) {
  double v = 0.0;
  if (spec.n_continuous > 0) {
    std::vector<double> x(spec.n_continuous), mu(spec.n_continuous);
    std::vector<std::uint8_t> mask(spec.n_continuous);
    for (std::size_t d = 0; d < spec.n_continuous; ++d) {
      x[d] = seq.continuous(t, d);
      mask[d] = seq.mask(t, d);
      mu[d] = p.means(i, d);
    }
    v += log_density(x, mask, mu, dense_cov(p.covariance(i)));
  }
  for (std::size_t j = 0; j < spec.n_discrete(); ++j) {
    const int s = seq.discrete(t, j);
    if (s >= 0) v += std::log(p.discrete_tables[j](i, static_cast<std::size_t>(s)));
  }
  return v;
}

/// Calls fn(path, log p(path, data)) for every state path.
inline void for_each_path(const ModelSpec& spec, const HHMMParams& p, const Sequence& seq,
                          const std::function<void(const std::vector<std::size_t>&, double)>& fn) {
  const std::size_t T = seq.length();
  const std::size_t I = spec.n_states;
  std::vector<std::vector<double>> emis(T, std::vector<double>(I));
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t i = 0; i < I; ++i) emis[t][i] = log_emission(spec, p, seq, t, i);
  }
  std::vector<std::size_t> path(T, 0);
  for (;;) {
    double lp = std::log(p.pi[path[0]]) + emis[0][path[0]];
    for (std::size_t t = 1; t < T; ++t) lp += std::log(p.transitions(path[t - 1], path[t])) + emis[t][path[t]];
    fn(path, lp);
    std::size_t t = 0;
    while (t < T && ++path[t] == I) path[t++] = 0;
    if (t == T) break;
  }
}

struct Enumeration {
  double log_likelihood = 0.0;
  std::vector<std::vector<double>> gamma;  // T x I
  std::vector<std::size_t> best_path;
  double best_log_prob = -std::numeric_limits<double>::infinity();
};

inline Enumeration enumerate(const ModelSpec& spec, const HHMMParams& p, const Sequence& seq) {
  std::vector<std::pair<std::vector<std::size_t>, double>> all;
  for_each_path(spec, p, seq, [&](const std::vector<std::size_t>& path, double lp) { all.emplace_back(path, lp); });
  Enumeration e;
  double m = -std::numeric_limits<double>::infinity();
  for (const auto& [path, lp] : all) m = std::max(m, lp);
  long double sum = 0.0L;
  for (const auto& [path, lp] : all) sum += std::exp(static_cast<long double>(lp - m));
  e.log_likelihood = m + static_cast<double>(std::log(sum));
  e.gamma.assign(seq.length(), std::vector<double>(spec.n_states, 0.0));
  for (const auto& [path, lp] : all) {
    const double w = std::exp(lp - e.log_likelihood);
    for (std::size_t t = 0; t < path.size(); ++t) e.gamma[t][path[t]] += w;
    if (lp > e.best_log_prob) {
      e.best_log_prob = lp;
      e.best_path = path;
    }
  }
  return e;
}

// ---------------------------------------------------------------------------
// Random models and data for property tests.

using Rng = std::mt19937_64;

inline std::vector<double> dirichlet(Rng& rng, std::size_t n, double floor = 0.05) {
  std::gamma_distribution<double> g(1.0, 1.0);
  std::vector<double> v(n);
  double s = 0.0;
  for (double& x : v) {
    x = g(rng) + floor;
    s += x;
  }
  for (double& x : v) x /= s;
  return v;
}

inline Covariance random_covariance(Rng& rng, CovarianceType type, std::size_t M) {
  std::uniform_real_distribution<double> var(0.5, 2.0);
  std::normal_distribution<double> normal(0.0, 0.5);
  Covariance c = Covariance::scaled_identity(type, M, 1.0);
  if (type == CovarianceType::Spherical) {
    c.values[0] = var(rng);
  } else if (type == CovarianceType::Diagonal) {
    for (double& v : c.values) v = var(rng);
  } else {
    Eigen::MatrixXd b(M, M);
    for (std::size_t r = 0; r < M; ++r) {
      for (std::size_t k = 0; k < M; ++k) b(r, k) = normal(rng);
    }
    const Eigen::MatrixXd s = b * b.transpose() + 0.5 * Eigen::MatrixXd::Identity(M, M);
    for (std::size_t r = 0; r < M; ++r) {
      for (std::size_t k = 0; k < M; ++k) c.values[r * M + k] = 0.5 * (s(r, k) + s(k, r));
    }
  }
  return c;
}

inline ModelSpec make_spec(std::size_t I, std::size_t M, std::vector<std::size_t> K, CovarianceType type,
                           std::size_t frozen = 0) {
  ModelSpec spec;
  spec.n_states = I;
  spec.n_continuous = M;
  spec.alphabet_sizes = std::move(K);
  spec.covariance_type = type;
  spec.n_frozen_discrete = frozen;
  return spec;
}

inline HHMMParams random_params(Rng& rng, const ModelSpec& spec, double mean_spread = 2.0) {
  const std::size_t I = spec.n_states;
  const std::size_t M = spec.n_continuous;
  std::normal_distribution<double> normal(0.0, mean_spread);
  HHMMParams p;
  p.pi = dirichlet(rng, I);
  p.transitions = Matrix(I, I);
  for (std::size_t i = 0; i < I; ++i) {
    const auto row = dirichlet(rng, I);
    std::copy(row.begin(), row.end(), p.transitions.row(i).begin());
  }
  p.means = Matrix(I, M);
  for (double& v : p.means.flat()) v = normal(rng);
  const std::size_t n_cov = spec.covariance_type == CovarianceType::Tied ? 1 : I;
  for (std::size_t c = 0; c < n_cov; ++c) p.covariances.push_back(random_covariance(rng, spec.covariance_type, M));
  for (std::size_t K : spec.alphabet_sizes) {
    Matrix t(I, K);
    for (std::size_t i = 0; i < I; ++i) {
      const auto row = dirichlet(rng, K);
      std::copy(row.begin(), row.end(), t.row(i).begin());
    }
    p.discrete_tables.push_back(std::move(t));
  }
  return p;
}

/// Arbitrary (not model-generated) observations.
inline Sequence random_sequence(Rng& rng, const ModelSpec& spec, std::size_t T, double p_missing = 0.0) {
  Sequence seq(T, spec.n_continuous, spec.n_discrete());
  std::normal_distribution<double> normal(0.0, 2.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t d = 0; d < spec.n_continuous; ++d) {
      seq.continuous(t, d) = normal(rng);
      if (unit(rng) < p_missing) {
        seq.continuous(t, d) = std::numeric_limits<double>::quiet_NaN();
        seq.mask(t, d) = 0;
      }
    }
    for (std::size_t j = 0; j < spec.n_discrete(); ++j) {
      std::uniform_int_distribution<int> sym(0, static_cast<int>(spec.alphabet_sizes[j]) - 1);
      seq.discrete(t, j) = unit(rng) < p_missing ? Sequence::kMissingSymbol : sym(rng);
    }
  }
  return seq;
}

/// Marks each continuous cell missing with probability p (values become NaN).
inline void knock_out(Rng& rng, Sequence& seq, double p_continuous, double p_discrete = 0.0) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t t = 0; t < seq.length(); ++t) {
    for (std::size_t d = 0; d < seq.continuous.cols(); ++d) {
      if (unit(rng) < p_continuous) {
        seq.mask(t, d) = 0;
        seq.continuous(t, d) = std::numeric_limits<double>::quiet_NaN();
      }
    }
    for (std::size_t j = 0; j < seq.discrete.cols(); ++j) {
      if (unit(rng) < p_discrete) seq.discrete(t, j) = Sequence::kMissingSymbol;
    }
  }
}

/// Stationary distribution of a row-stochastic matrix: eigenvector of A^T for
/// eigenvalue 1.
inline std::vector<double> stationary(const Matrix& a) {
  const std::size_t n = a.rows();
  Eigen::MatrixXd at(n, n);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < n; ++c) at(c, r) = a(r, c);
  }
  Eigen::EigenSolver<Eigen::MatrixXd> es(at);
  std::size_t best = 0;
  for (std::size_t k = 1; k < n; ++k) {
    if (std::abs(es.eigenvalues()(k).real() - 1.0) < std::abs(es.eigenvalues()(best).real() - 1.0)) best = k;
  }
  Eigen::VectorXd v = es.eigenvectors().col(best).real();
  v /= v.sum();
  return std::vector<double>(v.data(), v.data() + n);
}

inline double relative_error(double got, double want) {
  if (got == want) return 0.0;
  return std::abs(got - want) / std::max(std::abs(want), 1e-300);
}

}  // namespace hhmm::oracle
