#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "hhmm/emissions.hpp"
#include "hhmm/error.hpp"
#include "hhmm/inference.hpp"
#include "hhmm/kernels.hpp"
#include "oracles.hpp"

using namespace hhmm;

namespace {

struct Case {
  ModelSpec spec;
  HHMMParams params;
  Sequence seq;
};

Case random_case(oracle::Rng& rng, std::size_t I, std::size_t T, std::size_t M, std::size_t J, double p_missing = 0.0) {
  std::vector<std::size_t> K;
  for (std::size_t j = 0; j < J; ++j) K.push_back(2 + j);
  if (M == 0 && K.empty()) K.push_back(3);
  Case c{oracle::make_spec(I, M, K, CovarianceType::Full), {}, {}};
  c.params = oracle::random_params(rng, c.spec);
  c.seq = oracle::random_sequence(rng, c.spec, T, p_missing);
  return c;
}

HHMMParams permute(const ModelSpec& spec, const HHMMParams& p, const std::vector<std::size_t>& sigma) {
  // State i of the original becomes state sigma[i].
  const std::size_t I = spec.n_states;
  HHMMParams q = p;
  for (std::size_t i = 0; i < I; ++i) {
    q.pi[sigma[i]] = p.pi[i];
    for (std::size_t j = 0; j < I; ++j) q.transitions(sigma[i], sigma[j]) = p.transitions(i, j);
    for (std::size_t d = 0; d < spec.n_continuous; ++d) q.means(sigma[i], d) = p.means(i, d);
    if (p.covariances.size() > 1) q.covariances[sigma[i]] = p.covariances[i];
    for (std::size_t j = 0; j < spec.n_discrete(); ++j) {
      for (std::size_t k = 0; k < spec.alphabet_sizes[j]; ++k) q.discrete_tables[j](sigma[i], k) = p.discrete_tables[j](i, k);
    }
  }
  return q;
}

}  // namespace

TEST_CASE("forward examples") {
  const ModelSpec spec = oracle::make_spec(1, 0, {2}, CovarianceType::Diagonal);
  HHMMParams p;
  p.pi = {1.0};
  p.transitions = Matrix(1, 1, 1.0);
  p.means = Matrix(1, 0);
  p.covariances = {Covariance::scaled_identity(CovarianceType::Diagonal, 0, 1.0)};
  p.discrete_tables = {Matrix(1, 2, 0.5)};
  Sequence seq(3, 0, 1);
  seq.discrete(1, 0) = 1;
  const auto f = forward(p.pi, p.transitions, emission_log_matrix(spec, p, seq));
  CHECK(f.log_likelihood == doctest::Approx(3.0 * std::log(0.5)).epsilon(1e-15));

  oracle::Rng rng(3);
  const Case c = random_case(rng, 3, 1, 2, 1);
  const Matrix logb = emission_log_matrix(c.spec, c.params, c.seq);
  std::vector<double> terms(3);
  for (std::size_t i = 0; i < 3; ++i) terms[i] = std::log(c.params.pi[i]) + logb(0, i);
  CHECK(forward(c.params.pi, c.params.transitions, logb).log_likelihood ==
        doctest::Approx(log_sum_exp(terms)).epsilon(1e-15));
}

TEST_CASE("backward examples and forward-backward consistency") {
  oracle::Rng rng(5);
  const Case single = random_case(rng, 1, 5, 2, 1, 0.2);
  const Matrix lb1 = emission_log_matrix(single.spec, single.params, single.seq);
  const Matrix beta1 = backward(single.params.transitions, lb1);
  double suffix = 0.0;
  for (std::size_t t = 5; t-- > 0;) {
    CHECK(beta1(t, 0) == doctest::Approx(suffix).epsilon(1e-14));
    suffix += lb1(t, 0);
  }

  for (int rep = 0; rep < 30; ++rep) {
    const Case c = random_case(rng, 2 + rep % 3, 1 + rep % 9, rep % 3, rep % 2, 0.15);
    const Matrix logb = emission_log_matrix(c.spec, c.params, c.seq);
    const auto f = forward(c.params.pi, c.params.transitions, logb);
    const Matrix beta = backward(c.params.transitions, logb);
    const std::size_t T = c.seq.length();
    for (std::size_t i = 0; i < c.spec.n_states; ++i) CHECK(beta(T - 1, i) == 0.0);
    for (std::size_t t = 0; t < T; ++t) {
      std::vector<double> v(c.spec.n_states);
      for (std::size_t i = 0; i < v.size(); ++i) v[i] = f.log_alpha(t, i) + beta(t, i);
      CHECK(std::abs(log_sum_exp(v) - f.log_likelihood) <= 1e-9);
    }
  }
}

TEST_CASE("inference matches path enumeration") {
  oracle::Rng rng(9);
  for (int rep = 0; rep < 40; ++rep) {
    const std::size_t I = 2 + rep % 2;
    const std::size_t T = 2 + rep % 5;
    const Case c = random_case(rng, I, T, rep % 3, (rep / 3) % 3, rep % 4 == 0 ? 0.3 : 0.0);
    CAPTURE(rep);
    const Matrix logb = emission_log_matrix(c.spec, c.params, c.seq);
    const oracle::Enumeration e = oracle::enumerate(c.spec, c.params, c.seq);

    const auto f = forward(c.params.pi, c.params.transitions, logb);
    CHECK(oracle::relative_error(f.log_likelihood, e.log_likelihood) <= 1e-10);

    const PosteriorResult post = posteriors(c.params.pi, c.params.transitions, logb);
    CHECK(oracle::relative_error(post.log_likelihood, e.log_likelihood) <= 1e-10);
    for (std::size_t t = 0; t < T; ++t) {
      double row = 0.0;
      for (std::size_t i = 0; i < I; ++i) {
        CHECK(std::abs(post.gamma(t, i) - e.gamma[t][i]) <= 1e-10);
        row += post.gamma(t, i);
      }
      CHECK(std::abs(row - 1.0) <= 1e-9);
    }
    double xi_total = 0.0;
    for (std::size_t i = 0; i < I; ++i) {
      double row = 0.0, gamma_prefix = 0.0;
      for (std::size_t j = 0; j < I; ++j) row += post.xi_sum(i, j);
      for (std::size_t t = 0; t + 1 < T; ++t) gamma_prefix += post.gamma(t, i);
      CHECK(std::abs(row - gamma_prefix) <= 1e-6);
      xi_total += row;
    }
    CHECK(std::abs(xi_total - static_cast<double>(T - 1)) <= 1e-6);

    const DecodeResult v = viterbi(c.params.pi, c.params.transitions, logb);
    CHECK(v.states == e.best_path);
    CHECK(oracle::relative_error(v.log_prob, e.best_log_prob) <= 1e-10);
    CHECK(v.log_prob <= f.log_likelihood);
  }
}

TEST_CASE("single-state posteriors and decodes") {
  oracle::Rng rng(13);
  const Case c = random_case(rng, 1, 6, 2, 1);
  const Matrix logb = emission_log_matrix(c.spec, c.params, c.seq);
  const auto post = posteriors(c.params.pi, c.params.transitions, logb);
  for (std::size_t t = 0; t < 6; ++t) CHECK(post.gamma(t, 0) == 1.0);
  CHECK(post.xi_sum(0, 0) == doctest::Approx(5.0).epsilon(1e-15));
  const auto v = viterbi(c.params.pi, c.params.transitions, logb);
  CHECK(v.states == std::vector<std::size_t>(6, 0));
  CHECK(v.log_prob == doctest::Approx(post.log_likelihood).epsilon(1e-14));
  CHECK(posterior_decode(c.params.pi, c.params.transitions, logb).states == std::vector<std::size_t>(6, 0));
}

TEST_CASE("uniform model gives uniform posteriors and lowest-index ties") {
  const std::size_t I = 3, T = 4;
  const std::vector<double> pi(I, 1.0 / I);
  const Matrix a(I, I, 1.0 / I);
  const Matrix logb(T, I, std::log(0.25));
  const auto post = posteriors(pi, a, logb);
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t i = 0; i < I; ++i) CHECK(post.gamma(t, i) == doctest::Approx(1.0 / I).epsilon(1e-14));
  }
  CHECK(posterior_decode(pi, a, logb).states == std::vector<std::size_t>(T, 0));
  CHECK(viterbi(pi, a, logb).states == std::vector<std::size_t>(T, 0));
}

TEST_CASE("posterior_decode picks the per-step maximum") {
  // I = 2, T = 1: gamma equals the normalized pi * emission product.
  const std::vector<double> pi{0.5, 0.5};
  const Matrix a(2, 2, 0.5);
  Matrix logb(1, 2);
  logb(0, 0) = std::log(0.4);
  logb(0, 1) = std::log(0.6);
  const auto d = posterior_decode(pi, a, logb);
  CHECK(d.states == std::vector<std::size_t>{1});
  CHECK(d.log_prob == doctest::Approx(std::log(0.5)).epsilon(1e-15));
  logb(0, 1) = std::log(0.4);
  CHECK(posterior_decode(pi, a, logb).states == std::vector<std::size_t>{0});
}

TEST_CASE("deterministic chain forces the viterbi path") {
  const std::vector<double> pi{0.0, 0.0, 1.0};
  Matrix a(3, 3, 0.0);
  a(0, 1) = 1.0;
  a(1, 2) = 1.0;
  a(2, 0) = 1.0;
  oracle::Rng rng(2);
  Matrix logb(7, 3);
  std::uniform_real_distribution<double> u(-5.0, 0.0);
  for (double& v : logb.flat()) v = u(rng);
  const auto v = viterbi(pi, a, logb);
  CHECK(v.states == std::vector<std::size_t>{2, 0, 1, 2, 0, 1, 2});
  double lp = 0.0;
  for (std::size_t t = 0; t < 7; ++t) lp += logb(t, v.states[t]);
  CHECK(v.log_prob == doctest::Approx(lp).epsilon(1e-14));
}

TEST_CASE("zero-probability data raises a numeric error") {
  const std::vector<double> pi{1.0, 0.0};
  const Matrix a = identity_matrix(2);
  Matrix logb(2, 2, 0.0);
  logb(0, 0) = -std::numeric_limits<double>::infinity();
  CHECK(forward(pi, a, logb).log_likelihood == -std::numeric_limits<double>::infinity());
  CHECK_THROWS_AS(posteriors(pi, a, logb), NumericError);
}

TEST_CASE("relabeling states permutes the viterbi path") {
  oracle::Rng rng(19);
  for (int rep = 0; rep < 20; ++rep) {
    const std::size_t I = 2 + rep % 3;
    const Case c = random_case(rng, I, 12, 2, 1, 0.1);
    std::vector<std::size_t> sigma(I);
    std::iota(sigma.begin(), sigma.end(), 0);
    std::shuffle(sigma.begin(), sigma.end(), rng);
    const HHMMParams q = permute(c.spec, c.params, sigma);

    const Matrix lp = emission_log_matrix(c.spec, c.params, c.seq);
    const Matrix lq = emission_log_matrix(c.spec, q, c.seq);
    CHECK(std::abs(forward(q.pi, q.transitions, lq).log_likelihood -
                   forward(c.params.pi, c.params.transitions, lp).log_likelihood) <= 1e-10);
    const auto vp = viterbi(c.params.pi, c.params.transitions, lp);
    const auto vq = viterbi(q.pi, q.transitions, lq);
    for (std::size_t t = 0; t < vp.states.size(); ++t) CHECK(vq.states[t] == sigma[vp.states[t]]);
  }
}

TEST_CASE("score examples") {
  oracle::Rng rng(23);
  const Case a = random_case(rng, 2, 4, 1, 1);
  Sequence b = oracle::random_sequence(rng, a.spec, 3);
  const Matrix la = emission_log_matrix(a.spec, a.params, a.seq);
  const double fa = forward(a.params.pi, a.params.transitions, la).log_likelihood;

  const std::vector<Sequence> one{a.seq};
  CHECK(score(a.spec, a.params, one) == fa);
  const std::vector<Sequence> twice{a.seq, a.seq};
  CHECK(score(a.spec, a.params, twice) == 2.0 * fa);

  const std::vector<Sequence> both{a.seq, b};
  const double want = oracle::enumerate(a.spec, a.params, a.seq).log_likelihood +
                      oracle::enumerate(a.spec, a.params, b).log_likelihood;
  CHECK(oracle::relative_error(score(a.spec, a.params, both), want) <= 1e-10);
  CHECK(score(a.spec, a.params, both, 4) == score(a.spec, a.params, both, 1));

  CHECK_THROWS_AS(score(a.spec, a.params, std::vector<Sequence>{}), InputError);
}

TEST_CASE("scalar and vector kernels give matching inference") {
  oracle::Rng rng(29);
  const Case c = random_case(rng, 4, 50, 3, 2, 0.1);
  const Matrix logb = emission_log_matrix(c.spec, c.params, c.seq);
  const auto original = kernels::active().isa;
  kernels::select(kernels::Isa::Scalar);
  const auto ref = posteriors(c.params.pi, c.params.transitions, logb);
  const auto ref_v = viterbi(c.params.pi, c.params.transitions, logb);
  kernels::select(kernels::best_available());
  const auto got = posteriors(c.params.pi, c.params.transitions, logb);
  const auto got_v = viterbi(c.params.pi, c.params.transitions, logb);
  kernels::select(original);
  CHECK(oracle::relative_error(got.log_likelihood, ref.log_likelihood) <= 1e-12);
  for (std::size_t k = 0; k < ref.gamma.size(); ++k) CHECK(std::abs(got.gamma.flat()[k] - ref.gamma.flat()[k]) <= 1e-12);
  CHECK(got_v.states == ref_v.states);
}
