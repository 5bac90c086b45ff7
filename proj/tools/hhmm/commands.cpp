#include "hhmm/commands.hpp"

#include <CLI11.hpp>

#include <charconv>
#include <filesystem>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>

#include "hhmm/dataset.hpp"
#include "hhmm/error.hpp"
#include "hhmm/hhmm.hpp"
#include "hhmm/run_config.hpp"

namespace hhmm::cli {
namespace {

namespace fs = std::filesystem;

struct Options {
  // shared
  std::string config_path;
  std::map<std::string, std::string> overrides;
  std::vector<std::string> inputs;
  std::string model_path;
  std::string out_path;
  unsigned threads = 1;
  std::uint64_t seed = 0;
  // train
  std::string export_summary;
  // decode
  std::string algorithm = "viterbi";
  // sample
  std::size_t n_sequences = 1;
  std::size_t n_samples = 100;
  // select
  std::string states;
  std::string criterion = "bic";
  // impute
  bool draw = false;
};

void add_config_flags(CLI::App* sub, Options& opt) {
  for (const std::string& key : config_keys()) {
    std::string dashed = key;
    std::replace(dashed.begin(), dashed.end(), '_', '-');
    std::string names = "--" + key;
    if (dashed != key) names += ",--" + dashed;
    sub->add_option_function<std::string>(
        names, [&opt, key](const std::string& v) { opt.overrides[key] = v; }, "override config key '" + key + "'");
  }
}

RunConfig merged_config(const Options& opt) {
  RunConfig cfg = opt.config_path.empty() ? RunConfig{} : RunConfig::from_file(opt.config_path);
  for (const auto& [k, v] : opt.overrides) cfg.set(k, v);
  return cfg;
}

void check_layout(const ModelSpec& spec, const Dataset& data) {
  if (data.layout.n_continuous != spec.n_continuous || data.layout.n_discrete != spec.n_discrete()) {
    throw InputError("data has " + std::to_string(data.layout.n_continuous) + " continuous and " +
                     std::to_string(data.layout.n_discrete) + " discrete columns; the model expects " +
                     std::to_string(spec.n_continuous) + " and " + std::to_string(spec.n_discrete()));
  }
}

std::string data_header(const ModelSpec& spec) {
  std::vector<std::string> cols;
  for (std::size_t d = 0; d < spec.n_continuous; ++d) cols.push_back("g" + std::to_string(d));
  for (std::size_t j = 0; j < spec.n_discrete(); ++j) cols.push_back("d" + std::to_string(j));
  return join(cols);
}

std::string numbered(const std::string& stem, std::size_t n, std::size_t total) {
  std::size_t width = 4;
  for (std::size_t v = total; v >= 10000; v /= 10) ++width;
  std::ostringstream os;
  os << stem << '_' << std::setw(static_cast<int>(width)) << std::setfill('0') << n << ".csv";
  return os.str();
}

// ---------------------------------------------------------------------------

int cmd_train(const Options& opt, std::ostream& out, std::ostream& err) {
  RunConfig cfg = merged_config(opt);
  if (!opt.overrides.count("threads")) cfg.set("threads", std::to_string(opt.threads));
  const Dataset data = load_dataset(opt.inputs);
  TrainSetup setup = build_train_setup(cfg, data);
  if (!setup.model_out) throw InputError("--model-out is required");

  const std::vector<Sequence> seqs = data.sequences();
  const FitReport report = em_fit(setup.spec, seqs, setup.config);

  for (std::size_t r = 0; r < report.restart_traces.size(); ++r) {
    const auto& trace = report.restart_traces[r];
    for (std::size_t k = 0; k < trace.size(); ++k) {
      out << "restart " << r << " iter " << (k + 1) << " log_likelihood " << format_number(trace[k]) << '\n';
    }
  }
  const double final_ll = report.loglik_trace.back();
  const std::size_t dof = count_free_parameters(setup.spec);
  out << "final_log_likelihood " << format_number(final_ll) << '\n';
  out << "converged " << (report.converged ? "true" : "false") << '\n';
  out << "best_restart " << report.best_restart << '\n';
  out << "iterations " << report.loglik_trace.size() << '\n';
  out << "dof " << dof << '\n';
  out << "aic " << format_number(aic(final_ll, dof)) << '\n';
  out << "bic " << format_number(bic(final_ll, dof, data.total_steps())) << '\n';

  char ll[64];
  std::snprintf(ll, sizeof(ll), "%.17g", final_ll);
  const ModelMetadata meta = {
      {"best_restart", std::to_string(report.best_restart)},
      {"converged", report.converged ? "true" : "false"},
      {"init_type", std::string(to_string(setup.config.init_type))},
      {"iterations", std::to_string(report.loglik_trace.size())},
      {"log_likelihood", ll},
      {"n_observations", std::to_string(data.total_steps())},
      {"seed", std::to_string(setup.config.seed)},
  };
  write_file(*setup.model_out, save_model(setup.spec, report.params, meta));
  if (!opt.export_summary.empty()) write_file(opt.export_summary, model_summary(setup.spec, report.params));
  err << "model written to " << *setup.model_out << '\n';
  return kExitOk;
}

int cmd_score(const Options& opt, std::ostream& out, std::ostream&) {
  const StoredModel model = load_model(read_file(opt.model_path));
  const Dataset data = load_dataset(opt.inputs);
  check_layout(model.spec, data);
  const std::vector<Sequence> seqs = data.sequences();
  const std::vector<double> each = score_each(model.spec, model.params, seqs, opt.threads);
  double total = 0.0;
  for (std::size_t n = 0; n < each.size(); ++n) {
    out << data.files[n].path << ' ' << format_number(each[n]) << '\n';
    total += each[n];
  }
  out << "total " << format_number(total) << '\n';
  return kExitOk;
}

int cmd_decode(const Options& opt, std::ostream& out, std::ostream&) {
  if (opt.algorithm != "viterbi" && opt.algorithm != "map") {
    throw InputError("unknown algorithm '" + opt.algorithm + "' (valid: viterbi, map)");
  }
  const StoredModel model = load_model(read_file(opt.model_path));
  const Dataset data = load_dataset(opt.inputs);
  check_layout(model.spec, data);
  if (data.files.size() != 1) throw InputError("decode takes exactly one data file");
  const SequenceFile& file = data.files.front();
  validate_sequence(model.spec, file.sequence);

  const Matrix log_b = emission_log_matrix(model.spec, model.params, file.sequence);
  const DecodeResult res = opt.algorithm == "viterbi" ? viterbi(model.params.pi, model.params.transitions, log_b)
                                                       : posterior_decode(model.params.pi, model.params.transitions, log_b);

  std::string csv = join(data.header) + ",state\n";
  for (std::size_t t = 0; t < file.cells.size(); ++t) csv += join(file.cells[t]) + ',' + std::to_string(res.states[t]) + '\n';
  write_file(opt.out_path, csv);

  out << "algorithm " << opt.algorithm << '\n';
  out << "score " << (opt.algorithm == "viterbi" ? "path_log_probability" : "data_log_likelihood") << '\n';
  out << "log_prob " << format_number(res.log_prob) << '\n';
  return kExitOk;
}

int cmd_sample(const Options& opt, std::ostream& out, std::ostream&) {
  if (opt.n_sequences < 1 || opt.n_samples < 1) throw InputError("--n-sequences and --n-samples must be positive");
  const StoredModel model = load_model(read_file(opt.model_path));
  const SampleBatch batch = sample(model.spec, model.params, opt.n_sequences, opt.n_samples, opt.seed);

  std::error_code ec;
  const fs::path state_dir = fs::path(opt.out_path) / "states";
  fs::create_directories(state_dir, ec);
  if (ec) throw InputError("cannot create output directory '" + opt.out_path + "': " + ec.message());

  const std::string header = data_header(model.spec);
  const std::size_t M = model.spec.n_continuous;
  const std::size_t J = model.spec.n_discrete();
  for (std::size_t n = 0; n < batch.sequences.size(); ++n) {
    const Sequence& seq = batch.sequences[n];
    std::string csv = header + '\n';
    std::string states = "state\n";
    for (std::size_t t = 0; t < seq.length(); ++t) {
      std::vector<std::string> row;
      for (std::size_t d = 0; d < M; ++d) row.push_back(format_number(seq.continuous(t, d)));
      for (std::size_t j = 0; j < J; ++j) row.push_back(std::to_string(seq.discrete(t, j)));
      csv += join(row) + '\n';
      states += std::to_string(batch.state_paths[n][t]) + '\n';
    }
    const fs::path seq_path = fs::path(opt.out_path) / numbered("sequence", n, batch.sequences.size());
    const fs::path state_path = state_dir / numbered("states", n, batch.sequences.size());
    write_file(seq_path.string(), csv);
    write_file(state_path.string(), states);
    out << "wrote " << seq_path.filename().string() << " states/" << state_path.filename().string() << '\n';
  }
  return kExitOk;
}

void parse_state_range(const std::string& text, std::size_t& lo, std::size_t& hi) {
  const auto dots = text.find("..");
  auto parse = [&](const std::string& s) {
    std::size_t v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
      throw InputError("invalid --states '" + text + "' (expected a..b)");
    }
    return v;
  };
  if (dots == std::string::npos) {
    lo = hi = parse(text);
  } else {
    lo = parse(text.substr(0, dots));
    hi = parse(text.substr(dots + 2));
  }
  if (lo < 1 || hi < lo) throw InputError("empty state range '" + text + "'");
}

int cmd_select(const Options& opt, std::ostream& out, std::ostream&) {
  if (opt.criterion != "aic" && opt.criterion != "bic") {
    throw InputError("unknown criterion '" + opt.criterion + "' (valid: aic, bic)");
  }
  std::size_t lo = 0, hi = 0;
  parse_state_range(opt.states, lo, hi);
  RunConfig cfg = merged_config(opt);
  if (!cfg.get("n_states")) cfg.set("n_states", std::to_string(lo));
  if (!opt.overrides.count("threads")) cfg.set("threads", std::to_string(opt.threads));
  const Dataset data = load_dataset(opt.inputs);
  const TrainSetup setup = build_train_setup(cfg, data);
  const std::vector<Sequence> seqs = data.sequences();
  const SelectionReport report = order_sweep(setup.spec, seqs, lo, hi, setup.config);

  out << std::setw(8) << "n_states" << std::setw(8) << "dof" << std::setw(22) << "log_likelihood" << std::setw(22)
      << "aic" << std::setw(22) << "bic" << std::setw(11) << "converged" << '\n';
  std::string csv = "n_states,dof,log_likelihood,aic,bic,converged,failed\n";
  for (const SelectionRow& row : report.rows) {
    if (row.failed) {
      out << std::setw(8) << row.n_states << std::setw(8) << row.dof << "  failed: " << row.error << '\n';
    } else {
      out << std::setw(8) << row.n_states << std::setw(8) << row.dof << std::setw(22) << format_number(row.log_likelihood)
          << std::setw(22) << format_number(row.aic) << std::setw(22) << format_number(row.bic) << std::setw(11)
          << (row.converged ? "true" : "false") << '\n';
    }
    csv += std::to_string(row.n_states) + ',' + std::to_string(row.dof) + ',' + format_number(row.log_likelihood) + ',' +
           format_number(row.aic) + ',' + format_number(row.bic) + ',' + (row.converged ? "true" : "false") + ',' +
           (row.failed ? "true" : "false") + '\n';
  }
  out << "best_by_aic " << report.best_by_aic << '\n';
  out << "best_by_bic " << report.best_by_bic << '\n';
  const std::size_t selected = opt.criterion == "aic" ? report.best_by_aic : report.best_by_bic;
  out << "selected " << selected << " (" << opt.criterion << ")\n";
  if (!opt.out_path.empty()) write_file(opt.out_path, csv);
  if (selected == 0) throw NumericError("every candidate fit failed");
  return kExitOk;
}

int cmd_impute(const Options& opt, std::ostream& out, std::ostream&) {
  const StoredModel model = load_model(read_file(opt.model_path));
  const Dataset data = load_dataset(opt.inputs);
  check_layout(model.spec, data);
  if (data.files.size() != 1) throw InputError("impute takes exactly one data file");
  const SequenceFile& file = data.files.front();
  const Sequence completed = opt.draw ? impute_draw(model.spec, model.params, file.sequence, opt.seed)
                                      : impute(model.spec, model.params, file.sequence);

  std::size_t filled = 0;
  std::string csv = join(data.header) + '\n';
  for (std::size_t t = 0; t < file.cells.size(); ++t) {
    std::vector<std::string> row = file.cells[t];
    for (std::size_t k = 0; k < row.size(); ++k) {
      const Column& col = data.layout.columns[k];
      if (col.continuous && !file.sequence.continuous_observed(t, col.index)) {
        row[k] = format_number(completed.continuous(t, col.index));
        ++filled;
      } else if (!col.continuous && file.sequence.discrete(t, col.index) == Sequence::kMissingSymbol) {
        row[k] = std::to_string(completed.discrete(t, col.index));
        ++filled;
      }
    }
    csv += join(row) + '\n';
  }
  write_file(opt.out_path, csv);
  out << "imputed_cells " << filled << '\n';
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Heterogeneous hidden Markov models: train, score, decode, sample, select, impute"};
  app.require_subcommand(1);
  Options opt;

  auto* train = app.add_subcommand("train", "Fit a model with Baum-Welch EM");
  train->add_option("--config", opt.config_path, "key=value run config file");
  add_config_flags(train, opt);
  train->add_option("--export-summary", opt.export_summary, "write human-readable parameter tables here");
  train->add_option("data", opt.inputs, "sequence CSV files or directories")->required();

  auto* score_cmd = app.add_subcommand("score", "Log-likelihood of sequences under a model");
  score_cmd->add_option("--model", opt.model_path)->required();
  score_cmd->add_option("--threads", opt.threads);
  score_cmd->add_option("data", opt.inputs)->required();

  auto* decode = app.add_subcommand("decode", "Most likely hidden states per time step");
  decode->add_option("--model", opt.model_path)->required();
  decode->add_option("--algorithm", opt.algorithm, "viterbi or map");
  decode->add_option("--out", opt.out_path, "output CSV (input columns plus 'state')")->required();
  decode->add_option("--threads", opt.threads);
  decode->add_option("data", opt.inputs)->required();

  auto* sample_cmd = app.add_subcommand("sample", "Generate synthetic sequences");
  sample_cmd->add_option("--model", opt.model_path)->required();
  sample_cmd->add_option("--n-sequences", opt.n_sequences);
  sample_cmd->add_option("--n-samples", opt.n_samples);
  sample_cmd->add_option("--seed", opt.seed);
  sample_cmd->add_option("--out", opt.out_path, "output directory")->required();
  sample_cmd->add_option("--threads", opt.threads);

  auto* select = app.add_subcommand("select", "Choose the number of states by AIC/BIC");
  select->add_option("--config", opt.config_path);
  add_config_flags(select, opt);
  select->add_option("--states", opt.states, "candidate range a..b")->required();
  select->add_option("--criterion", opt.criterion, "aic or bic");
  select->add_option("--out", opt.out_path, "write report rows as CSV");
  select->add_option("data", opt.inputs)->required();

  auto* impute_cmd = app.add_subcommand("impute", "Fill missing cells from the model posterior");
  impute_cmd->add_option("--model", opt.model_path)->required();
  impute_cmd->add_option("--out", opt.out_path)->required();
  impute_cmd->add_flag("--draw", opt.draw, "sample missing values instead of using conditional means");
  impute_cmd->add_option("--seed", opt.seed);
  impute_cmd->add_option("--threads", opt.threads);
  impute_cmd->add_option("data", opt.inputs)->required();

  try {
    std::vector<std::string> rest(args.rbegin(), args.rend() - (args.empty() ? 0 : 1));
    app.parse(rest);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitInput;
  }
  if (opt.threads < 1) {
    err << "error: --threads must be at least 1\n";
    return kExitInput;
  }

  try {
    if (train->parsed()) return cmd_train(opt, out, err);
    if (score_cmd->parsed()) return cmd_score(opt, out, err);
    if (decode->parsed()) return cmd_decode(opt, out, err);
    if (sample_cmd->parsed()) return cmd_sample(opt, out, err);
    if (select->parsed()) return cmd_select(opt, out, err);
    if (impute_cmd->parsed()) return cmd_impute(opt, out, err);
  } catch (const InputError& e) {
    err << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const NumericError& e) {
    err << "numeric failure: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const std::exception& e) {
    err << "numeric failure: " << e.what() << '\n';
    return kExitNumeric;
  }
  return kExitInput;
}

}  // namespace hhmm::cli
