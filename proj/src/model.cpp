#include "hhmm/model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "hhmm/error.hpp"

namespace hhmm {
namespace {

constexpr double kStochasticTolerance = 1e-9;

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(12);
  os << v;
  return os.str();
}

void check_distribution(std::span<const double> row, const std::string& what) {
  double sum = 0.0;
  for (double p : row) {
    if (!std::isfinite(p)) throw InputError("non-finite probability in " + what);
    if (p < 0.0) throw InputError("negative probability in " + what);
    sum += p;
  }
  if (std::abs(sum - 1.0) > kStochasticTolerance) {
    throw InputError(what + " sums to " + fmt(sum) + ", expected 1");
  }
}

void check_shape(const Matrix& m, std::size_t rows, std::size_t cols, const std::string& what) {
  if (m.rows() != rows || m.cols() != cols) {
    throw InputError("shape mismatch: " + what + " is " + std::to_string(m.rows()) + "x" +
                     std::to_string(m.cols()) + ", expected " + std::to_string(rows) + "x" +
                     std::to_string(cols));
  }
}

}  // namespace

void ModelSpec::check() const {
  if (n_states < 1) throw InputError("n_states must be at least 1");
  if (n_continuous + n_discrete() < 1) throw InputError("model needs at least one emission channel");
  for (std::size_t j = 0; j < alphabet_sizes.size(); ++j) {
    if (alphabet_sizes[j] < 2) {
      throw InputError("alphabet size of discrete feature " + std::to_string(j) + " must be at least 2");
    }
  }
  if (n_frozen_discrete > n_discrete()) {
    throw InputError("n_frozen_discrete exceeds the number of discrete features");
  }
}

GaussianComponent HHMMParams::component(std::size_t state) const {
  const auto mu = means.row(state);
  return GaussianComponent{std::vector<double>(mu.begin(), mu.end()), covariance(state)};
}

Sequence::Sequence(std::size_t length, std::size_t n_continuous, std::size_t n_discrete)
    : continuous(length, n_continuous, 0.0),
      mask(length, n_continuous, 1),
      discrete(length, n_discrete, 0),
      length_(length) {}

bool Sequence::has_missing() const {
  const auto m = mask.flat();
  const auto d = discrete.flat();
  return std::any_of(m.begin(), m.end(), [](std::uint8_t v) { return v == 0; }) ||
         std::any_of(d.begin(), d.end(), [](std::int32_t v) { return v == kMissingSymbol; });
}

void validate(const ModelSpec& spec, const HHMMParams& params) {
  spec.check();
  const std::size_t I = spec.n_states;
  const std::size_t M = spec.n_continuous;

  if (params.pi.size() != I) {
    throw InputError("shape mismatch: pi has length " + std::to_string(params.pi.size()) + ", expected " +
                     std::to_string(I));
  }
  check_distribution(params.pi, "pi");

  check_shape(params.transitions, I, I, "transition matrix");
  for (std::size_t i = 0; i < I; ++i) check_distribution(params.transitions.row(i), "transition row " + std::to_string(i));

  check_shape(params.means, I, M, "means");
  for (double v : params.means.flat()) {
    if (!std::isfinite(v)) throw InputError("non-finite mean");
  }
  const std::size_t n_cov = spec.covariance_type == CovarianceType::Tied ? 1 : I;
  if (params.covariances.size() != n_cov) {
    throw InputError("shape mismatch: " + std::to_string(params.covariances.size()) + " covariances, expected " +
                     std::to_string(n_cov));
  }
  for (std::size_t c = 0; c < n_cov; ++c) {
    const Covariance& cov = params.covariances[c];
    if (cov.type != spec.covariance_type || cov.dim != M ||
        cov.values.size() != Covariance::storage_size(spec.covariance_type, M)) {
      throw InputError("shape mismatch: covariance " + std::to_string(c) + " does not match spec");
    }
    if (M == 0) continue;
    if (cov.is_dense()) {
      for (std::size_t r = 0; r < M; ++r) {
        for (std::size_t k = r + 1; k < M; ++k) {
          if (cov.at(r, k) != cov.at(k, r)) throw InputError("covariance " + std::to_string(c) + " is not symmetric");
        }
      }
    }
    try {
      Cholesky chol(cov.dense());
    } catch (const NumericError&) {
      throw InputError("covariance " + std::to_string(c) + " is not positive-definite");
    }
  }

  if (params.discrete_tables.size() != spec.n_discrete()) {
    throw InputError("shape mismatch: " + std::to_string(params.discrete_tables.size()) +
                     " discrete tables, expected " + std::to_string(spec.n_discrete()));
  }
  for (std::size_t j = 0; j < spec.n_discrete(); ++j) {
    const std::string name = "discrete table " + std::to_string(j);
    check_shape(params.discrete_tables[j], I, spec.alphabet_sizes[j], name);
    for (std::size_t i = 0; i < I; ++i) check_distribution(params.discrete_tables[j].row(i), name + " row " + std::to_string(i));
  }
}

void validate_sequence(const ModelSpec& spec, const Sequence& seq) {
  const std::size_t T = seq.length();
  if (T == 0) throw InputError("sequence is empty");
  if (seq.continuous.rows() != T || seq.continuous.cols() != spec.n_continuous || seq.mask.rows() != T ||
      seq.mask.cols() != spec.n_continuous) {
    throw InputError("sequence continuous block does not match the model's dimension");
  }
  if (seq.discrete.rows() != T || seq.discrete.cols() != spec.n_discrete()) {
    throw InputError("sequence discrete block does not match the model's feature count");
  }
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t j = 0; j < spec.n_discrete(); ++j) {
      const std::int32_t v = seq.discrete(t, j);
      if (v == Sequence::kMissingSymbol) continue;
      if (v < 0 || static_cast<std::size_t>(v) >= spec.alphabet_sizes[j]) {
        throw InputError("discrete symbol " + std::to_string(v) + " out of range for feature " + std::to_string(j) +
                         " at step " + std::to_string(t));
      }
    }
    for (std::size_t d = 0; d < spec.n_continuous; ++d) {
      if (seq.continuous_observed(t, d) && !std::isfinite(seq.continuous(t, d))) {
        throw InputError("non-finite observed value at step " + std::to_string(t));
      }
    }
  }
}

std::size_t count_free_parameters(const ModelSpec& spec) {
  const std::size_t I = spec.n_states;
  const std::size_t M = spec.n_continuous;
  std::size_t dof = (I - 1) + I * (I - 1) + I * M;
  switch (spec.covariance_type) {
    case CovarianceType::Diagonal:
      dof += I * M;
      break;
    case CovarianceType::Full:
      dof += I * M * (M + 1) / 2;
      break;
    case CovarianceType::Tied:
      dof += M * (M + 1) / 2;
      break;
    case CovarianceType::Spherical:
      dof += M > 0 ? I : 0;
      break;
  }
  for (std::size_t j = 0; j < spec.first_frozen(); ++j) dof += I * (spec.alphabet_sizes[j] - 1);
  return dof;
}

}  // namespace hhmm
