#include "hhmm/run_config.hpp"

#include <algorithm>
#include <charconv>
#include <sstream>

#include "hhmm/error.hpp"

namespace hhmm::cli {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const auto res = std::from_chars(value.data(), value.data() + value.size(), out);
  if (res.ec != std::errc{} || res.ptr != value.data() + value.size()) {
    throw InputError("invalid value '" + value + "' for " + key);
  }
  return out;
}

std::size_t parse_count(const std::string& key, const std::string& value) {
  if (!value.empty() && value[0] == '-') throw InputError(key + " must be non-negative");
  return parse_number<std::size_t>(key, value);
}

std::vector<std::size_t> parse_size_list(const std::string& key, std::string value) {
  std::replace(value.begin(), value.end(), ',', ' ');
  std::istringstream in(value);
  std::vector<std::size_t> out;
  std::string tok;
  while (in >> tok) out.push_back(parse_count(key, tok));
  return out;
}

}  // namespace

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = {
      "n_states", "n_continuous", "n_discrete", "alphabet_sizes", "covariance_type", "n_frozen_discrete",
      "n_init",   "n_iter",       "thres",      "conv_iter",      "init_type",       "seed",
      "cov_floor", "frozen_tables", "model_out", "threads"};
  return keys;
}

RunConfig RunConfig::parse(const std::string& text, const std::string& origin) {
  RunConfig cfg;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = origin + ":" + std::to_string(line_no);
    if (eq == std::string::npos) throw InputError(where + ": expected key=value");
    const std::string key = trim(line.substr(0, eq));
    try {
      cfg.set(key, trim(line.substr(eq + 1)));
    } catch (const InputError& e) {
      throw InputError(where + ": " + e.what());
    }
  }
  return cfg;
}

RunConfig RunConfig::from_file(const std::string& path) { return parse(read_file(path), path); }

void RunConfig::set(const std::string& key, const std::string& value) {
  const auto& keys = config_keys();
  if (std::find(keys.begin(), keys.end(), key) == keys.end()) throw InputError("unknown config key '" + key + "'");
  values_[key] = value;
}

std::optional<std::string> RunConfig::get(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  return it->second;
}

std::vector<Matrix> parse_frozen_tables(const std::string& text, const std::string& origin) {
  std::vector<Matrix> tables;
  std::vector<std::vector<double>> rows;
  auto flush = [&] {
    if (rows.empty()) return;
    Matrix m(rows.size(), rows.front().size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (rows[r].size() != m.cols()) throw InputError(origin + ": ragged rows in frozen table " + std::to_string(tables.size()));
      std::copy(rows[r].begin(), rows[r].end(), m.row(r).begin());
    }
    tables.push_back(std::move(m));
    rows.clear();
  };
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    const bool comment_only = hash != std::string::npos && trim(line.substr(0, hash)).empty();
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) {
      if (!comment_only) flush();
      continue;
    }
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream fields(line);
    std::vector<double> row;
    std::string tok;
    while (fields >> tok) {
      row.push_back(parse_number<double>(origin + ":" + std::to_string(line_no), tok));
    }
    rows.push_back(std::move(row));
  }
  flush();
  return tables;
}

TrainSetup build_train_setup(const RunConfig& cfg, const Dataset& data) {
  TrainSetup setup;
  ModelSpec& spec = setup.spec;
  TrainConfig& tc = setup.config;

  const auto n_states = cfg.get("n_states");
  if (!n_states) throw InputError("n_states is required");
  spec.n_states = parse_count("n_states", *n_states);

  spec.n_continuous = data.layout.n_continuous;
  if (auto v = cfg.get("n_continuous"); v && parse_count("n_continuous", *v) != spec.n_continuous) {
    throw InputError("n_continuous=" + *v + " but the data has " + std::to_string(spec.n_continuous) +
                     " continuous columns");
  }
  const std::size_t J = data.layout.n_discrete;
  if (auto v = cfg.get("n_discrete"); v && parse_count("n_discrete", *v) != J) {
    throw InputError("n_discrete=" + *v + " but the data has " + std::to_string(J) + " discrete columns");
  }
  if (auto v = cfg.get("alphabet_sizes")) {
    spec.alphabet_sizes = parse_size_list("alphabet_sizes", *v);
    if (spec.alphabet_sizes.size() != J) {
      throw InputError("alphabet_sizes lists " + std::to_string(spec.alphabet_sizes.size()) +
                       " features but the data has " + std::to_string(J));
    }
  } else {
    spec.alphabet_sizes.assign(J, 2);
    for (const SequenceFile& f : data.files) {
      for (std::size_t t = 0; t < f.sequence.length(); ++t) {
        for (std::size_t j = 0; j < J; ++j) {
          const std::int32_t s = f.sequence.discrete(t, j);
          if (s >= 0) spec.alphabet_sizes[j] = std::max(spec.alphabet_sizes[j], static_cast<std::size_t>(s) + 1);
        }
      }
    }
  }
  if (auto v = cfg.get("covariance_type")) spec.covariance_type = parse_covariance_type(*v);
  if (auto v = cfg.get("n_frozen_discrete")) spec.n_frozen_discrete = parse_count("n_frozen_discrete", *v);
  spec.check();

  if (auto v = cfg.get("n_init")) tc.n_init = parse_count("n_init", *v);
  if (auto v = cfg.get("n_iter")) tc.n_iter = parse_count("n_iter", *v);
  if (auto v = cfg.get("thres")) tc.thres = parse_number<double>("thres", *v);
  if (auto v = cfg.get("conv_iter")) tc.conv_iter = parse_count("conv_iter", *v);
  if (auto v = cfg.get("init_type")) tc.init_type = parse_init_type(*v);
  if (auto v = cfg.get("seed")) tc.seed = parse_number<std::uint64_t>("seed", *v);
  if (auto v = cfg.get("cov_floor")) tc.cov_floor = parse_number<double>("cov_floor", *v);
  if (auto v = cfg.get("threads")) {
    tc.threads = static_cast<unsigned>(parse_count("threads", *v));
    if (tc.threads < 1) throw InputError("threads must be at least 1");
  }
  if (auto v = cfg.get("frozen_tables")) tc.frozen_tables = parse_frozen_tables(read_file(*v), *v);
  if (spec.n_frozen_discrete > 0 && tc.frozen_tables.empty()) {
    throw InputError("n_frozen_discrete > 0 requires frozen_tables=<path>");
  }
  if (auto v = cfg.get("model_out")) setup.model_out = *v;
  tc.check(spec);
  return setup;
}

}  // namespace hhmm::cli
