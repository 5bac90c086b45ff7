#include "hhmm/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "hhmm/error.hpp"

namespace hhmm::cli {
namespace fs = std::filesystem;
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    const std::string_view field = line.substr(start, comma == std::string_view::npos ? line.npos : comma - start);
    out.emplace_back(trim(field));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

bool is_missing_continuous(std::string_view cell) {
  return cell.empty() || cell == "NaN" || cell == "nan" || cell == "NAN";
}

[[noreturn]] void fail(const std::string& path, std::size_t line, const std::string& msg) {
  throw InputError(path + ":" + std::to_string(line) + ": " + msg);
}

}  // namespace

ColumnLayout parse_header(const std::vector<std::string>& header, const std::string& where) {
  ColumnLayout layout;
  std::vector<std::size_t> g_seen, d_seen;
  for (const std::string& name : header) {
    std::size_t idx = 0;
    const bool ok = name.size() >= 2 && (name[0] == 'g' || name[0] == 'd') &&
                    std::from_chars(name.data() + 1, name.data() + name.size(), idx).ptr == name.data() + name.size() &&
                    (name.size() == 2 || name[1] != '0');
    if (!ok) throw InputError(where + ": unexpected column '" + name + "' (expected g<k> or d<k>)");
    const bool continuous = name[0] == 'g';
    auto& seen = continuous ? g_seen : d_seen;
    if (std::find(seen.begin(), seen.end(), idx) != seen.end()) {
      throw InputError(where + ": duplicate column '" + name + "'");
    }
    seen.push_back(idx);
    layout.columns.push_back({continuous, idx});
  }
  layout.n_continuous = g_seen.size();
  layout.n_discrete = d_seen.size();
  for (std::size_t k = 0; k < layout.columns.size(); ++k) {
    const Column& c = layout.columns[k];
    if (c.index >= (c.continuous ? layout.n_continuous : layout.n_discrete)) {
      throw InputError(where + ": column '" + header[k] + "' leaves a gap in the numbering");
    }
  }
  if (layout.columns.empty()) throw InputError(where + ": header has no columns");
  return layout;
}

std::vector<Sequence> Dataset::sequences() const {
  std::vector<Sequence> out;
  out.reserve(files.size());
  for (const SequenceFile& f : files) out.push_back(f.sequence);
  return out;
}

std::size_t Dataset::total_steps() const {
  std::size_t n = 0;
  for (const SequenceFile& f : files) n += f.sequence.length();
  return n;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + path + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write '" + path + "'");
  out << content;
  if (!out) throw InputError("failed writing '" + path + "'");
}

SequenceFile parse_sequence_file(const std::string& path, const std::string& text) {
  SequenceFile file;
  file.path = path;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  std::vector<std::size_t> row_lines;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    std::vector<std::string> fields = split_csv_line(line);
    if (!have_header) {
      file.header = std::move(fields);
      file.layout = parse_header(file.header, path + ":" + std::to_string(line_no));
      have_header = true;
      continue;
    }
    if (fields.size() != file.header.size()) {
      fail(path, line_no, "expected " + std::to_string(file.header.size()) + " fields, found " +
                              std::to_string(fields.size()));
    }
    file.cells.push_back(std::move(fields));
    row_lines.push_back(line_no);
  }
  if (!have_header) throw InputError(path + ": missing header row");
  if (file.cells.empty()) throw InputError(path + ": no data rows");

  const ColumnLayout& layout = file.layout;
  Sequence seq(file.cells.size(), layout.n_continuous, layout.n_discrete);
  for (std::size_t t = 0; t < file.cells.size(); ++t) {
    for (std::size_t k = 0; k < layout.columns.size(); ++k) {
      const std::string& cell = file.cells[t][k];
      const Column& col = layout.columns[k];
      if (col.continuous) {
        if (is_missing_continuous(cell)) {
          seq.continuous(t, col.index) = std::numeric_limits<double>::quiet_NaN();
          seq.mask(t, col.index) = 0;
          continue;
        }
        double v = 0.0;
        const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
        if (res.ec != std::errc{} || res.ptr != cell.data() + cell.size() || !std::isfinite(v)) {
          fail(path, row_lines[t], "invalid continuous value '" + cell + "' in column " + file.header[k]);
        }
        seq.continuous(t, col.index) = v;
      } else {
        std::int32_t v = 0;
        const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
        if (res.ec != std::errc{} || res.ptr != cell.data() + cell.size() || v < -1) {
          fail(path, row_lines[t], "invalid discrete value '" + cell + "' in column " + file.header[k] +
                                       " (expected a non-negative integer or -1)");
        }
        seq.discrete(t, col.index) = v;
      }
    }
  }
  file.sequence = std::move(seq);
  return file;
}

std::vector<std::string> expand_inputs(const std::vector<std::string>& inputs) {
  std::vector<std::string> files;
  for (const std::string& in : inputs) {
    std::error_code ec;
    if (fs::is_directory(in, ec)) {
      std::vector<std::string> found;
      for (const auto& entry : fs::directory_iterator(in)) {
        if (entry.is_regular_file() && entry.path().extension() == ".csv") found.push_back(entry.path().string());
      }
      std::sort(found.begin(), found.end());
      if (found.empty()) throw InputError("directory '" + in + "' contains no .csv files");
      files.insert(files.end(), found.begin(), found.end());
    } else {
      files.push_back(in);
    }
  }
  if (files.empty()) throw InputError("no data files given");
  return files;
}

Dataset load_dataset(const std::vector<std::string>& inputs) {
  Dataset ds;
  for (const std::string& path : expand_inputs(inputs)) {
    SequenceFile f = parse_sequence_file(path, read_file(path));
    if (ds.files.empty()) {
      ds.header = f.header;
      ds.layout = f.layout;
    } else if (f.header != ds.header) {
      throw InputError("header mismatch: '" + ds.files.front().path + "' has [" + join(ds.header) + "] but '" + path +
                       "' has [" + join(f.header) + "]");
    }
    ds.files.push_back(std::move(f));
  }
  return ds;
}

std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

std::string join(const std::vector<std::string>& fields, char sep) {
  std::string out;
  for (std::size_t k = 0; k < fields.size(); ++k) {
    if (k) out += sep;
    out += fields[k];
  }
  return out;
}

}  // namespace hhmm::cli
