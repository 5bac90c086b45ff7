#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hhmm/dataset.hpp"
#include "hhmm/model.hpp"
#include "hhmm/training.hpp"

namespace hhmm::cli {

/// Keys accepted in a run config file and as --<key> flags.
const std::vector<std::string>& config_keys();

/// Flat key=value settings. Later sources override earlier ones.
class RunConfig {
 public:
  /// Parses "key = value" lines; '#' starts a comment. Unknown keys are rejected.
  static RunConfig parse(const std::string& text, const std::string& origin);
  static RunConfig from_file(const std::string& path);

  void set(const std::string& key, const std::string& value);
  std::optional<std::string> get(const std::string& key) const;

 private:
  std::map<std::string, std::string> values_;
};

struct TrainSetup {
  ModelSpec spec;
  TrainConfig config;
  std::optional<std::string> model_out;
};

/// Builds the model spec and training config. Channel counts come from the
/// dataset header and must agree with any that the config states; alphabet
/// sizes default to one past the largest symbol seen (at least 2).
TrainSetup build_train_setup(const RunConfig& cfg, const Dataset& data);

/// Frozen emission tables: numeric rows, tables separated by blank lines,
/// '#' comments.
std::vector<Matrix> parse_frozen_tables(const std::string& text, const std::string& origin);

}  // namespace hhmm::cli
