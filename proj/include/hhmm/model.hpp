#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "hhmm/matrix.hpp"
#include "hhmm/numerics.hpp"

namespace hhmm {

/// Structural hyperparameters of a heterogeneous HMM.
///
/// The discrete channel has one feature per entry of `alphabet_sizes`; the last
/// `n_frozen_discrete` of them are held fixed during training.
struct ModelSpec {
  std::size_t n_states = 1;
  std::size_t n_continuous = 0;
  std::vector<std::size_t> alphabet_sizes;
  CovarianceType covariance_type = CovarianceType::Diagonal;
  std::size_t n_frozen_discrete = 0;

  std::size_t n_discrete() const { return alphabet_sizes.size(); }
  bool is_frozen(std::size_t feature) const { return feature + n_frozen_discrete >= n_discrete(); }
  std::size_t first_frozen() const { return n_discrete() - n_frozen_discrete; }

  /// Throws InputError if the structural invariants are violated.
  void check() const;

  bool operator==(const ModelSpec&) const = default;
};

struct HHMMParams {
  std::vector<double> pi;
  Matrix transitions;   // I x I, row-stochastic
  Matrix means;         // I x M
  std::vector<Covariance> covariances;  // I entries, or one shared entry when tied
  std::vector<Matrix> discrete_tables;  // J tables, each I x K_j

  const Covariance& covariance(std::size_t state) const {
    return covariances.size() == 1 ? covariances[0] : covariances[state];
  }
  GaussianComponent component(std::size_t state) const;

  bool operator==(const HHMMParams&) const = default;
};

/// One observation sequence. Continuous cells with mask 0 are missing and
/// their stored value is meaningless; discrete cells equal to kMissingSymbol
/// are missing.
struct Sequence {
  static constexpr std::int32_t kMissingSymbol = -1;

  Matrix continuous;     // T x M
  MaskMatrix mask;       // T x M, 1 = observed
  SymbolMatrix discrete; // T x J

  Sequence() = default;
  Sequence(std::size_t length, std::size_t n_continuous, std::size_t n_discrete);

  std::size_t length() const { return length_; }
  bool continuous_observed(std::size_t t, std::size_t d) const { return mask(t, d) != 0; }
  bool has_missing() const;

 private:
  std::size_t length_ = 0;
};

/// Throws InputError naming the first violated constraint.
void validate(const ModelSpec& spec, const HHMMParams& params);

/// Throws InputError if the sequence shape or symbols disagree with spec.
void validate_sequence(const ModelSpec& spec, const Sequence& seq);

/// Number of independently fitted scalars: stochastic rows lose one degree of
/// freedom each and frozen discrete tables contribute nothing.
std::size_t count_free_parameters(const ModelSpec& spec);

using ModelMetadata = std::map<std::string, std::string>;

struct StoredModel {
  ModelSpec spec;
  HHMMParams params;
  ModelMetadata metadata;
};

inline constexpr int kModelSchemaVersion = 1;

/// Versioned text format. Floats use shortest round-trip decimal form, so
/// load(save(x)) reproduces every value bit-for-bit.
std::string save_model(const ModelSpec& spec, const HHMMParams& params, const ModelMetadata& metadata = {});
StoredModel load_model(std::string_view text);

/// Human-readable parameter tables.
std::string model_summary(const ModelSpec& spec, const HHMMParams& params);

}  // namespace hhmm
