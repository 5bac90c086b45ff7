#include <doctest.h>

#include <cmath>
#include <cstring>
#include <limits>

#include "hhmm/emissions.hpp"
#include "hhmm/generation.hpp"
#include "hhmm/inference.hpp"
#include "hhmm/numerics.hpp"
#include "oracles.hpp"

using namespace hhmm;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

bool same_bits(const Sequence& a, const Sequence& b) {
  return a.length() == b.length() && a.mask == b.mask && a.discrete == b.discrete &&
         a.continuous.size() == b.continuous.size() &&
         std::memcmp(a.continuous.data(), b.continuous.data(), a.continuous.size() * sizeof(double)) == 0;
}

HHMMParams two_state_chain(double stay) {
  HHMMParams p;
  p.pi = {0.5, 0.5};
  p.transitions = Matrix(2, 2);
  p.transitions(0, 0) = stay;
  p.transitions(0, 1) = 1.0 - stay;
  p.transitions(1, 0) = 1.0 - stay;
  p.transitions(1, 1) = stay;
  p.means = Matrix(2, 1);
  p.means(1, 0) = 4.0;
  p.covariances = {Covariance::scaled_identity(CovarianceType::Diagonal, 1, 1.0),
                   Covariance::scaled_identity(CovarianceType::Diagonal, 1, 1.0)};
  return p;
}

}  // namespace

TEST_CASE("degenerate chain and deterministic emissions") {
  const ModelSpec spec = oracle::make_spec(3, 1, {3}, CovarianceType::Spherical);
  oracle::Rng rng(1);
  HHMMParams p = oracle::random_params(rng, spec);
  p.pi = {0.0, 1.0, 0.0};
  p.transitions = identity_matrix(3);
  const SampleBatch b = sample(spec, p, 4, 30, 7);
  for (const auto& path : b.state_paths) CHECK(path == std::vector<std::size_t>(30, 1));

  // One-hot tables: symbol k emitted by state k, under a mixing chain.
  p.pi = {0.2, 0.3, 0.5};
  p.transitions = Matrix(3, 3, 1.0 / 3.0);
  p.discrete_tables[0] = identity_matrix(3);
  const SampleBatch c = sample(spec, p, 3, 50, 8);
  for (std::size_t n = 0; n < 3; ++n) {
    const Sequence& s = c.sequences[n];
    CHECK_FALSE(s.has_missing());
    for (std::size_t t = 0; t < 50; ++t) CHECK(static_cast<std::size_t>(s.discrete(t, 0)) == c.state_paths[n][t]);
  }
}

TEST_CASE("sampling is deterministic given the seed") {
  const ModelSpec spec = oracle::make_spec(3, 3, {2, 4}, CovarianceType::Full);
  oracle::Rng rng(2);
  const HHMMParams p = oracle::random_params(rng, spec);
  const SampleBatch a = sample(spec, p, 3, 20, 99);
  const SampleBatch b = sample(spec, p, 3, 20, 99);
  for (std::size_t n = 0; n < 3; ++n) CHECK(same_bits(a.sequences[n], b.sequences[n]));
  CHECK(a.state_paths == b.state_paths);
  CHECK_FALSE(same_bits(a.sequences[0], sample(spec, p, 1, 20, 100).sequences[0]));
  CHECK(sample(spec, p, 2, 1, 5).sequences[1].length() == 1);
}

TEST_CASE("sampled moments follow the state parameters") {
  const ModelSpec spec = oracle::make_spec(1, 2, {}, CovarianceType::Full);
  HHMMParams p;
  p.pi = {1.0};
  p.transitions = Matrix(1, 1, 1.0);
  p.means = Matrix(1, 2);
  p.means(0, 0) = 1.0;
  p.means(0, 1) = -2.0;
  Covariance cov = Covariance::scaled_identity(CovarianceType::Full, 2, 1.0);
  cov.values = {2.0, 0.8, 0.8, 1.0};
  p.covariances = {cov};
  const Sequence s = sample(spec, p, 1, 40000, 3).sequences[0];
  double m0 = 0, m1 = 0;
  for (std::size_t t = 0; t < s.length(); ++t) {
    m0 += s.continuous(t, 0);
    m1 += s.continuous(t, 1);
  }
  m0 /= s.length();
  m1 /= s.length();
  double c00 = 0, c01 = 0, c11 = 0;
  for (std::size_t t = 0; t < s.length(); ++t) {
    const double a = s.continuous(t, 0) - m0, b = s.continuous(t, 1) - m1;
    c00 += a * a;
    c01 += a * b;
    c11 += b * b;
  }
  const double n = static_cast<double>(s.length());
  CHECK(m0 == doctest::Approx(1.0).epsilon(0.03));
  CHECK(m1 == doctest::Approx(-2.0).epsilon(0.03));
  CHECK(c00 / n == doctest::Approx(2.0).epsilon(0.05));
  CHECK(c01 / n == doctest::Approx(0.8).epsilon(0.05));
  CHECK(c11 / n == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("state occupancy approaches the stationary distribution") {
  const ModelSpec spec = oracle::make_spec(2, 1, {}, CovarianceType::Diagonal);
  for (double stay : {0.7, 0.95}) {
    HHMMParams p = two_state_chain(stay);
    p.transitions(1, 1) = 0.8;  // make the chain asymmetric too
    p.transitions(1, 0) = 0.2;
    const auto stat = oracle::stationary(p.transitions);
    const SampleBatch b = sample(spec, p, 1, 10000, 17);
    double in0 = 0;
    for (std::size_t s : b.state_paths[0]) in0 += s == 0 ? 1.0 : 0.0;
    CHECK(std::abs(in0 / 10000.0 - stat[0]) <= 0.02);
  }
}

TEST_CASE("impute examples") {
  const ModelSpec spec = oracle::make_spec(2, 3, {3}, CovarianceType::Full);
  oracle::Rng rng(5);
  const HHMMParams p = oracle::random_params(rng, spec);
  const Sequence complete = sample(spec, p, 1, 15, 1).sequences[0];
  CHECK(same_bits(impute(spec, p, complete), complete));

  // Single state: a fully missing row becomes the mean.
  const ModelSpec one = oracle::make_spec(1, 2, {}, CovarianceType::Diagonal);
  const HHMMParams q = oracle::random_params(rng, one);
  Sequence s = sample(one, q, 1, 5, 2).sequences[0];
  s.mask(2, 0) = s.mask(2, 1) = 0;
  s.continuous(2, 0) = s.continuous(2, 1) = kNaN;
  const Sequence filled = impute(one, q, s);
  CHECK(filled.continuous(2, 0) == doctest::Approx(q.means(0, 0)).epsilon(1e-14));
  CHECK(filled.continuous(2, 1) == doctest::Approx(q.means(0, 1)).epsilon(1e-14));
  CHECK_FALSE(filled.has_missing());
}

TEST_CASE("impute matches the mixture of conditional means") {
  // I = 2, M = 2 full covariance, one partially missing cell at t = 1.
  const ModelSpec spec = oracle::make_spec(2, 2, {2}, CovarianceType::Full);
  HHMMParams p;
  p.pi = {0.7, 0.3};
  p.transitions = Matrix(2, 2);
  p.transitions(0, 0) = 0.8;
  p.transitions(0, 1) = 0.2;
  p.transitions(1, 0) = 0.3;
  p.transitions(1, 1) = 0.7;
  p.means = Matrix(2, 2);
  p.means(0, 0) = 0.0;
  p.means(0, 1) = 1.0;
  p.means(1, 0) = 2.0;
  p.means(1, 1) = -1.0;
  Covariance c0 = Covariance::scaled_identity(CovarianceType::Full, 2, 1.0);
  c0.values = {1.0, 0.5, 0.5, 2.0};
  Covariance c1 = Covariance::scaled_identity(CovarianceType::Full, 2, 1.0);
  c1.values = {0.5, -0.2, -0.2, 1.0};
  p.covariances = {c0, c1};
  Matrix d(2, 2);
  d(0, 0) = 0.9;
  d(0, 1) = 0.1;
  d(1, 0) = 0.25;
  d(1, 1) = 0.75;
  p.discrete_tables = {d};

  Sequence seq(3, 2, 1);
  const double vals[3][2] = {{0.1, 0.9}, {1.2, 0.0}, {1.8, -0.7}};
  const int syms[3] = {0, Sequence::kMissingSymbol, 1};
  for (std::size_t t = 0; t < 3; ++t) {
    seq.continuous(t, 0) = vals[t][0];
    seq.continuous(t, 1) = vals[t][1];
    seq.discrete(t, 0) = syms[t];
  }
  seq.mask(1, 1) = 0;
  seq.continuous(1, 1) = kNaN;

  // Posteriors from path enumeration; conditional means by hand.
  const auto e = oracle::enumerate(spec, p, seq);
  const double y0 = 1.2;
  const double cm0 = 1.0 + 0.5 / 1.0 * (y0 - 0.0);
  const double cm1 = -1.0 + (-0.2) / 0.5 * (y0 - 2.0);
  const double want = e.gamma[1][0] * cm0 + e.gamma[1][1] * cm1;
  const double w0 = e.gamma[1][0] * 0.9 + e.gamma[1][1] * 0.25;
  const double w1 = e.gamma[1][0] * 0.1 + e.gamma[1][1] * 0.75;

  const Sequence out = impute(spec, p, seq);
  CHECK(out.continuous(1, 1) == doctest::Approx(want).epsilon(1e-12));
  CHECK(out.discrete(1, 0) == (w1 > w0 ? 1 : 0));
  CHECK(out.continuous(1, 0) == 1.2);
  CHECK(out.discrete(0, 0) == 0);
  CHECK(out.discrete(2, 0) == 1);
  CHECK(std::memcmp(&out.continuous(2, 1), &seq.continuous(2, 1), sizeof(double)) == 0);
}

TEST_CASE("impute is idempotent and leaves no gaps") {
  oracle::Rng rng(7);
  for (auto type : {CovarianceType::Diagonal, CovarianceType::Full, CovarianceType::Tied, CovarianceType::Spherical}) {
    const ModelSpec spec = oracle::make_spec(3, 3, {2, 3}, type);
    const HHMMParams p = oracle::random_params(rng, spec);
    Sequence s = sample(spec, p, 1, 40, 3).sequences[0];
    oracle::knock_out(rng, s, 0.3, 0.3);
    const Sequence once = impute(spec, p, s);
    CHECK_FALSE(once.has_missing());
    for (double v : once.continuous.flat()) CHECK(std::isfinite(v));
    CHECK(same_bits(impute(spec, p, once), once));
    for (std::size_t t = 0; t < s.length(); ++t) {
      for (std::size_t dd = 0; dd < 3; ++dd) {
        if (s.mask(t, dd)) CHECK(once.continuous(t, dd) == s.continuous(t, dd));
      }
    }

    const Sequence drawn = impute_draw(spec, p, s, 5);
    CHECK_FALSE(drawn.has_missing());
    CHECK(same_bits(drawn, impute_draw(spec, p, s, 5)));
    for (std::size_t t = 0; t < s.length(); ++t) {
      for (std::size_t j = 0; j < 2; ++j) {
        if (s.discrete(t, j) >= 0) CHECK(drawn.discrete(t, j) == s.discrete(t, j));
      }
    }
  }
}

TEST_CASE("model-based imputation beats the global mean") {
  const ModelSpec spec = oracle::make_spec(2, 2, {2}, CovarianceType::Full);
  oracle::Rng rng(9);
  double model_se = 0.0, mean_se = 0.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const HHMMParams p = oracle::random_params(rng, spec, 3.0);
    const Sequence truth = sample(spec, p, 1, 300, seed).sequences[0];
    Sequence holes = truth;
    oracle::knock_out(rng, holes, 0.2);
    const Sequence filled = impute(spec, p, holes);
    for (std::size_t d = 0; d < 2; ++d) {
      double sum = 0.0, n = 0.0;
      for (std::size_t t = 0; t < 300; ++t) {
        if (holes.mask(t, d)) {
          sum += holes.continuous(t, d);
          n += 1.0;
        }
      }
      for (std::size_t t = 0; t < 300; ++t) {
        if (holes.mask(t, d)) continue;
        model_se += std::pow(filled.continuous(t, d) - truth.continuous(t, d), 2);
        mean_se += std::pow(sum / n - truth.continuous(t, d), 2);
      }
    }
  }
  CHECK(model_se < mean_se);
}
