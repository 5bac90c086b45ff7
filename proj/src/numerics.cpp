#include "hhmm/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "hhmm/error.hpp"
#include "hhmm/kernels.hpp"

namespace hhmm {
namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

[[noreturn]] void throw_singular() { throw NumericError("singular covariance"); }

double checked_variance(double v) {
  if (!(v > 0.0) || !std::isfinite(v)) throw_singular();
  return v;
}

// Observed-coordinate buffers, reused per thread.
struct Scratch {
  std::vector<double> x;
  std::vector<double> mean;
  std::vector<double> weight;
  std::vector<std::size_t> index;
};

Scratch& scratch() {
  thread_local Scratch s;
  return s;
}

}  // namespace

std::string_view to_string(CovarianceType type) {
  switch (type) {
    case CovarianceType::Diagonal:
      return "diagonal";
    case CovarianceType::Full:
      return "full";
    case CovarianceType::Tied:
      return "tied";
    case CovarianceType::Spherical:
      return "spherical";
  }
  return "unknown";
}

CovarianceType parse_covariance_type(std::string_view name) {
  if (name == "diagonal" || name == "diag") return CovarianceType::Diagonal;
  if (name == "full") return CovarianceType::Full;
  if (name == "tied") return CovarianceType::Tied;
  if (name == "spherical") return CovarianceType::Spherical;
  throw InputError("unknown covariance type '" + std::string(name) +
                   "' (expected diagonal, full, tied or spherical)");
}

std::size_t Covariance::storage_size(CovarianceType type, std::size_t dim) {
  switch (type) {
    case CovarianceType::Spherical:
      return 1;
    case CovarianceType::Diagonal:
      return dim;
    case CovarianceType::Full:
    case CovarianceType::Tied:
      return dim * dim;
  }
  return 0;
}

Covariance Covariance::scaled_identity(CovarianceType type, std::size_t dim, double scale) {
  Covariance c{type, dim, std::vector<double>(storage_size(type, dim), 0.0)};
  if (type == CovarianceType::Spherical) {
    c.values[0] = scale;
  } else if (type == CovarianceType::Diagonal) {
    std::fill(c.values.begin(), c.values.end(), scale);
  } else {
    for (std::size_t d = 0; d < dim; ++d) c.values[d * dim + d] = scale;
  }
  return c;
}

double Covariance::at(std::size_t r, std::size_t c) const {
  switch (type) {
    case CovarianceType::Spherical:
      return r == c ? values[0] : 0.0;
    case CovarianceType::Diagonal:
      return r == c ? values[r] : 0.0;
    case CovarianceType::Full:
    case CovarianceType::Tied:
      return values[r * dim + c];
  }
  return 0.0;
}

Matrix Covariance::dense() const {
  Matrix m(dim, dim, 0.0);
  for (std::size_t r = 0; r < dim; ++r) {
    for (std::size_t c = 0; c < dim; ++c) m(r, c) = at(r, c);
  }
  return m;
}

Cholesky::Cholesky(const Matrix& a) : lower_(a.rows(), a.rows(), 0.0) {
  const std::size_t n = a.rows();
  if (a.cols() != n) throw InputError("Cholesky: matrix is not square");
  for (std::size_t j = 0; j < n; ++j) {
    double diag = a(j, j) - kernels::dot(lower_.row(j).first(j), lower_.row(j).first(j));
    if (!(diag > 0.0) || !std::isfinite(diag)) throw_singular();
    const double ljj = std::sqrt(diag);
    lower_(j, j) = ljj;
    log_det_ += 2.0 * std::log(ljj);
    for (std::size_t i = j + 1; i < n; ++i) {
      const double s = a(i, j) - kernels::dot(lower_.row(i).first(j), lower_.row(j).first(j));
      lower_(i, j) = s / ljj;
    }
  }
}

void Cholesky::solve_lower_in_place(std::span<double> b) const {
  const std::size_t n = dim();
  for (std::size_t i = 0; i < n; ++i) {
    b[i] = (b[i] - kernels::dot(lower_.row(i).first(i), b.first(i))) / lower_(i, i);
  }
}

void Cholesky::solve_in_place(std::span<double> b) const {
  solve_lower_in_place(b);
  const std::size_t n = dim();
  for (std::size_t ii = n; ii-- > 0;) {
    double s = b[ii];
    for (std::size_t k = ii + 1; k < n; ++k) s -= lower_(k, ii) * b[k];
    b[ii] = s / lower_(ii, ii);
  }
}

double log_sum_exp(std::span<const double> values) {
  if (values.empty()) throw InputError("empty reduction");
  const auto& k = kernels::active();
  const double m = k.max_value(values.data(), values.size());
  if (m == -std::numeric_limits<double>::infinity()) return m;
  if (!std::isfinite(m)) return m;
  return m + std::log(k.sum_exp_shifted(values.data(), values.size(), m));
}

double gaussian_log_density(std::span<const double> x, std::span<const std::uint8_t> observed_mask,
                            const GaussianComponent& comp) {
  const std::size_t dim = comp.mean.size();
  if (x.size() != dim || observed_mask.size() != dim || comp.covariance.dim != dim) {
    throw InputError("gaussian_log_density: dimension mismatch");
  }
  Scratch& s = scratch();
  s.index.clear();
  for (std::size_t d = 0; d < dim; ++d) {
    if (observed_mask[d]) s.index.push_back(d);
  }
  const std::size_t n = s.index.size();
  if (n == 0) return 0.0;

  s.x.resize(n);
  s.mean.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    s.x[k] = x[s.index[k]];
    s.mean[k] = comp.mean[s.index[k]];
  }

  const Covariance& cov = comp.covariance;
  double log_det = 0.0;
  double quad = 0.0;
  if (!cov.is_dense()) {
    s.weight.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
      const double v = checked_variance(cov.at(s.index[k], s.index[k]));
      s.weight[k] = 1.0 / v;
      log_det += std::log(v);
    }
    quad = kernels::active().weighted_sq_dist(s.x.data(), s.mean.data(), s.weight.data(), n);
  } else {
    Matrix sub(n, n);
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t c = 0; c < n; ++c) sub(r, c) = cov.at(s.index[r], s.index[c]);
    }
    const Cholesky chol(sub);
    for (std::size_t k = 0; k < n; ++k) s.x[k] -= s.mean[k];
    chol.solve_lower_in_place(s.x);
    quad = kernels::dot(s.x, s.x);
    log_det = chol.log_determinant();
  }
  return -0.5 * (static_cast<double>(n) * kLog2Pi + log_det + quad);
}

ConditionalGaussian conditional_gaussian(const GaussianComponent& comp,
                                         std::span<const std::size_t> observed_dims,
                                         std::span<const double> observed_values) {
  const std::size_t dim = comp.mean.size();
  const Covariance& cov = comp.covariance;
  if (observed_dims.size() != observed_values.size()) {
    throw InputError("conditional_gaussian: observed dims/values length mismatch");
  }
  std::vector<std::uint8_t> is_observed(dim, 0);
  for (std::size_t d : observed_dims) {
    if (d >= dim || is_observed[d]) throw InputError("conditional_gaussian: invalid observed dimension");
    is_observed[d] = 1;
  }

  ConditionalGaussian out;
  for (std::size_t d = 0; d < dim; ++d) {
    if (!is_observed[d]) out.missing_dims.push_back(d);
  }
  const std::size_t nm = out.missing_dims.size();
  const std::size_t no = observed_dims.size();
  out.mean.resize(nm);
  out.covariance = Matrix(nm, nm, 0.0);
  for (std::size_t a = 0; a < nm; ++a) {
    out.mean[a] = comp.mean[out.missing_dims[a]];
    for (std::size_t b = 0; b < nm; ++b) out.covariance(a, b) = cov.at(out.missing_dims[a], out.missing_dims[b]);
  }
  if (nm == 0 || no == 0 || !cov.is_dense()) {
    if (!cov.is_dense()) {
      for (std::size_t a = 0; a < nm; ++a) checked_variance(out.covariance(a, a));
    }
    return out;
  }

  Matrix obs_cov(no, no);
  for (std::size_t r = 0; r < no; ++r) {
    for (std::size_t c = 0; c < no; ++c) obs_cov(r, c) = cov.at(observed_dims[r], observed_dims[c]);
  }
  const Cholesky chol(obs_cov);

  std::vector<double> resid(no);
  for (std::size_t k = 0; k < no; ++k) resid[k] = observed_values[k] - comp.mean[observed_dims[k]];

  // gain(a, :) = Sigma_oo^{-1} Sigma_{o, m_a}
  Matrix gain(nm, no);
  for (std::size_t a = 0; a < nm; ++a) {
    auto g = gain.row(a);
    for (std::size_t k = 0; k < no; ++k) g[k] = cov.at(observed_dims[k], out.missing_dims[a]);
    chol.solve_in_place(g);
    out.mean[a] += kernels::dot(g, resid);
  }
  for (std::size_t a = 0; a < nm; ++a) {
    for (std::size_t b = a; b < nm; ++b) {
      double cross = 0.0;
      for (std::size_t k = 0; k < no; ++k) cross += cov.at(out.missing_dims[a], observed_dims[k]) * gain(b, k);
      const double v = cov.at(out.missing_dims[a], out.missing_dims[b]) - cross;
      out.covariance(a, b) = v;
      out.covariance(b, a) = v;
    }
  }
  return out;
}

Covariance regularize_covariance(Covariance cov, double floor) {
  if (!(floor > 0.0)) throw InputError("covariance floor must be positive");
  switch (cov.type) {
    case CovarianceType::Spherical:
    case CovarianceType::Diagonal:
      for (double& v : cov.values) v += floor;
      break;
    case CovarianceType::Full:
    case CovarianceType::Tied:
      for (std::size_t d = 0; d < cov.dim; ++d) cov.values[d * cov.dim + d] += floor;
      break;
  }
  return cov;
}

GaussianDensity::GaussianDensity(GaussianComponent comp) : comp_(std::move(comp)) {
  const std::size_t dim = comp_.mean.size();
  if (comp_.covariance.dim != dim ||
      comp_.covariance.values.size() != Covariance::storage_size(comp_.covariance.type, dim)) {
    throw InputError("GaussianDensity: covariance shape does not match mean");
  }
  double log_det = 0.0;
  if (!comp_.covariance.is_dense()) {
    inverse_variance_.resize(dim);
    for (std::size_t d = 0; d < dim; ++d) {
      const double v = checked_variance(comp_.covariance.at(d, d));
      inverse_variance_[d] = 1.0 / v;
      log_det += std::log(v);
    }
  } else if (dim > 0) {
    const Cholesky chol(comp_.covariance.dense());
    lower_ = chol.lower();
    log_det = chol.log_determinant();
  }
  log_norm_ = -0.5 * (static_cast<double>(dim) * kLog2Pi + log_det);
}

double GaussianDensity::log_density_complete(std::span<const double> x) const {
  const std::size_t dim = comp_.mean.size();
  if (dim == 0) return 0.0;
  if (!comp_.covariance.is_dense()) {
    return log_norm_ - 0.5 * kernels::active().weighted_sq_dist(x.data(), comp_.mean.data(),
                                                                 inverse_variance_.data(), dim);
  }
  thread_local std::vector<double> z;
  z.resize(dim);
  for (std::size_t d = 0; d < dim; ++d) {
    z[d] = (x[d] - comp_.mean[d] - kernels::dot(lower_.row(d).first(d), std::span<const double>(z).first(d))) /
           lower_(d, d);
  }
  return log_norm_ - 0.5 * kernels::dot(z, z);
}

double GaussianDensity::log_density(std::span<const double> x,
                                    std::span<const std::uint8_t> observed_mask) const {
  const bool complete = std::all_of(observed_mask.begin(), observed_mask.end(), [](std::uint8_t m) { return m != 0; });
  if (complete) return log_density_complete(x);
  return gaussian_log_density(x, observed_mask, comp_);
}

}  // namespace hhmm
