#include <charconv>
#include <cstdio>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include "hhmm/error.hpp"
#include "hhmm/model.hpp"

namespace hhmm {
namespace {

constexpr std::string_view kMagic = "hhmm-model";

void put_double(std::string& out, double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, res.ptr);
}

void put_values(std::string& out, std::span<const double> values) {
  for (double v : values) {
    out += ' ';
    put_double(out, v);
  }
}

[[noreturn]] void malformed(std::size_t line, const std::string& why) {
  throw InputError("malformed model file (line " + std::to_string(line) + "): " + why);
}

class LineReader {
 public:
  explicit LineReader(std::string_view text) : text_(text) {}

  // Returns false at end of input.
  bool next(std::vector<std::string_view>& tokens) {
    tokens.clear();
    if (pos_ >= text_.size()) return false;
    std::size_t end = text_.find('\n', pos_);
    if (end == std::string_view::npos) end = text_.size();
    current_ = text_.substr(pos_, end - pos_);
    pos_ = end + 1;
    ++line_;
    std::size_t i = 0;
    while (i < current_.size()) {
      while (i < current_.size() && current_[i] == ' ') ++i;
      const std::size_t start = i;
      while (i < current_.size() && current_[i] != ' ') ++i;
      if (i > start) tokens.push_back(current_.substr(start, i - start));
    }
    return true;
  }

  std::vector<std::string_view> expect(std::string_view keyword) {
    std::vector<std::string_view> tokens;
    if (!next(tokens)) malformed(line_, "unexpected end of file, expected '" + std::string(keyword) + "'");
    if (tokens.empty() || tokens[0] != keyword) {
      malformed(line_, "expected '" + std::string(keyword) + "'");
    }
    return tokens;
  }

  std::string_view current_line() const { return current_; }
  std::size_t line() const { return line_; }

 private:
  std::string_view text_;
  std::string_view current_;
  std::size_t pos_ = 0;
  std::size_t line_ = 0;
};

double parse_double(std::string_view tok, std::size_t line) {
  double v = 0.0;
  const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (res.ec != std::errc{} || res.ptr != tok.data() + tok.size()) malformed(line, "bad number '" + std::string(tok) + "'");
  return v;
}

std::size_t parse_size(std::string_view tok, std::size_t line) {
  std::size_t v = 0;
  const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (res.ec != std::errc{} || res.ptr != tok.data() + tok.size()) malformed(line, "bad integer '" + std::string(tok) + "'");
  return v;
}

std::size_t single_size(LineReader& in, std::string_view keyword) {
  const auto tokens = in.expect(keyword);
  if (tokens.size() != 2) malformed(in.line(), "expected one value after '" + std::string(keyword) + "'");
  return parse_size(tokens[1], in.line());
}

// keyword [index...] v0 v1 ...; checks the leading indices and value count.
void read_values(LineReader& in, std::string_view keyword, std::initializer_list<std::size_t> indices,
                 std::span<double> dest) {
  const auto tokens = in.expect(keyword);
  const std::size_t n_idx = indices.size();
  if (tokens.size() != 1 + n_idx + dest.size()) {
    malformed(in.line(), "wrong number of values for '" + std::string(keyword) + "'");
  }
  std::size_t k = 1;
  for (std::size_t idx : indices) {
    if (parse_size(tokens[k++], in.line()) != idx) malformed(in.line(), "unexpected index");
  }
  for (std::size_t i = 0; i < dest.size(); ++i) dest[i] = parse_double(tokens[k + i], in.line());
}

}  // namespace

std::string save_model(const ModelSpec& spec, const HHMMParams& params, const ModelMetadata& metadata) {
  validate(spec, params);
  std::string out;
  out += std::string(kMagic) + ' ' + std::to_string(kModelSchemaVersion) + '\n';
  out += "n_states " + std::to_string(spec.n_states) + '\n';
  out += "n_continuous " + std::to_string(spec.n_continuous) + '\n';
  out += "alphabet_sizes";
  for (std::size_t k : spec.alphabet_sizes) out += ' ' + std::to_string(k);
  out += '\n';
  out += "covariance_type " + std::string(to_string(spec.covariance_type)) + '\n';
  out += "n_frozen_discrete " + std::to_string(spec.n_frozen_discrete) + '\n';
  for (const auto& [key, value] : metadata) {
    if (key.empty() || key.find_first_of(" \n") != std::string::npos || value.find('\n') != std::string::npos) {
      throw InputError("metadata keys must be single tokens and values single lines");
    }
    out += "meta " + key + ' ' + value + '\n';
  }

  out += "pi";
  put_values(out, params.pi);
  out += '\n';
  for (std::size_t i = 0; i < spec.n_states; ++i) {
    out += "transition " + std::to_string(i);
    put_values(out, params.transitions.row(i));
    out += '\n';
  }
  for (std::size_t i = 0; i < spec.n_states; ++i) {
    out += "mean " + std::to_string(i);
    put_values(out, params.means.row(i));
    out += '\n';
  }
  for (std::size_t c = 0; c < params.covariances.size(); ++c) {
    out += "covariance " + std::to_string(c);
    put_values(out, params.covariances[c].values);
    out += '\n';
  }
  for (std::size_t j = 0; j < spec.n_discrete(); ++j) {
    for (std::size_t i = 0; i < spec.n_states; ++i) {
      out += "discrete " + std::to_string(j) + ' ' + std::to_string(i);
      put_values(out, params.discrete_tables[j].row(i));
      out += '\n';
    }
  }
  out += "end\n";
  return out;
}

StoredModel load_model(std::string_view text) {
  LineReader in(text);
  StoredModel model;
  ModelSpec& spec = model.spec;
  HHMMParams& params = model.params;

  {
    std::vector<std::string_view> tokens;
    if (!in.next(tokens) || tokens.size() != 2 || tokens[0] != kMagic) malformed(in.line(), "missing header");
    const std::size_t version = parse_size(tokens[1], in.line());
    if (version != static_cast<std::size_t>(kModelSchemaVersion)) {
      throw InputError("unsupported schema version " + std::string(tokens[1]));
    }
  }
  spec.n_states = single_size(in, "n_states");
  spec.n_continuous = single_size(in, "n_continuous");
  {
    const auto tokens = in.expect("alphabet_sizes");
    for (std::size_t k = 1; k < tokens.size(); ++k) spec.alphabet_sizes.push_back(parse_size(tokens[k], in.line()));
  }
  {
    const auto tokens = in.expect("covariance_type");
    if (tokens.size() != 2) malformed(in.line(), "expected covariance type");
    try {
      spec.covariance_type = parse_covariance_type(tokens[1]);
    } catch (const InputError& e) {
      malformed(in.line(), e.what());
    }
  }
  spec.n_frozen_discrete = single_size(in, "n_frozen_discrete");
  try {
    spec.check();
  } catch (const InputError& e) {
    malformed(in.line(), e.what());
  }
  if (spec.n_states > 100000 || spec.n_continuous > 100000) malformed(in.line(), "implausible dimensions");

  const std::size_t I = spec.n_states;
  const std::size_t M = spec.n_continuous;

  std::vector<std::string_view> tokens;
  for (;;) {
    if (!in.next(tokens)) malformed(in.line(), "unexpected end of file");
    if (tokens.empty() || tokens[0] != "meta") break;
    if (tokens.size() < 2) malformed(in.line(), "metadata line without key");
    const std::string_view line = in.current_line();
    const std::size_t key_end = static_cast<std::size_t>(tokens[1].data() - line.data()) + tokens[1].size();
    const std::string_view value = key_end < line.size() ? line.substr(key_end + 1) : std::string_view{};
    model.metadata.emplace(std::string(tokens[1]), std::string(value));
  }

  if (tokens.empty() || tokens[0] != "pi" || tokens.size() != 1 + I) malformed(in.line(), "expected 'pi'");
  params.pi.resize(I);
  for (std::size_t i = 0; i < I; ++i) params.pi[i] = parse_double(tokens[1 + i], in.line());

  params.transitions = Matrix(I, I);
  for (std::size_t i = 0; i < I; ++i) read_values(in, "transition", {i}, params.transitions.row(i));
  params.means = Matrix(I, M);
  for (std::size_t i = 0; i < I; ++i) read_values(in, "mean", {i}, params.means.row(i));
  const std::size_t n_cov = spec.covariance_type == CovarianceType::Tied ? 1 : I;
  for (std::size_t c = 0; c < n_cov; ++c) {
    Covariance cov{spec.covariance_type, M,
                   std::vector<double>(Covariance::storage_size(spec.covariance_type, M))};
    read_values(in, "covariance", {c}, cov.values);
    params.covariances.push_back(std::move(cov));
  }
  for (std::size_t j = 0; j < spec.n_discrete(); ++j) {
    Matrix table(I, spec.alphabet_sizes[j]);
    for (std::size_t i = 0; i < I; ++i) read_values(in, "discrete", {j, i}, table.row(i));
    params.discrete_tables.push_back(std::move(table));
  }
  const auto end = in.expect("end");
  if (end.size() != 1) malformed(in.line(), "trailing tokens after 'end'");
  if (in.next(tokens) && !(tokens.empty() && in.current_line().empty())) malformed(in.line(), "content after 'end'");

  try {
    validate(spec, params);
  } catch (const InputError& e) {
    throw InputError(std::string("model validation failed: ") + e.what());
  }
  return model;
}

std::string model_summary(const ModelSpec& spec, const HHMMParams& params) {
  std::ostringstream os;
  char buf[64];
  auto cell = [&](double v) {
    std::snprintf(buf, sizeof(buf), " %12.6g", v);
    return std::string(buf);
  };
  os << "states: " << spec.n_states << "  continuous dims: " << spec.n_continuous
     << "  discrete features: " << spec.n_discrete() << "  covariance: " << to_string(spec.covariance_type)
     << "  frozen tables: " << spec.n_frozen_discrete << "\n\n";
  os << "initial distribution\n";
  for (std::size_t i = 0; i < spec.n_states; ++i) os << "  s" << i << cell(params.pi[i]) << '\n';
  os << "\ntransitions (row = from, column = to)\n";
  for (std::size_t i = 0; i < spec.n_states; ++i) {
    os << "  s" << i;
    for (double v : params.transitions.row(i)) os << cell(v);
    os << '\n';
  }
  if (spec.n_continuous > 0) {
    os << "\nmeans\n";
    for (std::size_t i = 0; i < spec.n_states; ++i) {
      os << "  s" << i;
      for (double v : params.means.row(i)) os << cell(v);
      os << '\n';
    }
    os << "\ncovariances (" << to_string(spec.covariance_type) << ")\n";
    for (std::size_t c = 0; c < params.covariances.size(); ++c) {
      const Matrix dense = params.covariances[c].dense();
      os << (params.covariances.size() == 1 ? "  shared\n" : "  s" + std::to_string(c) + "\n");
      for (std::size_t r = 0; r < dense.rows(); ++r) {
        os << "   ";
        for (double v : dense.row(r)) os << cell(v);
        os << '\n';
      }
    }
  }
  for (std::size_t j = 0; j < spec.n_discrete(); ++j) {
    os << "\ndiscrete feature d" << j << (spec.is_frozen(j) ? " (frozen)" : "") << '\n';
    for (std::size_t i = 0; i < spec.n_states; ++i) {
      os << "  s" << i;
      for (double v : params.discrete_tables[j].row(i)) os << cell(v);
      os << '\n';
    }
  }
  return os.str();
}

}  // namespace hhmm
