#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "hhmm/model.hpp"

namespace hhmm::cli {

/// Where each CSV column goes: continuous dimension gK or discrete feature dK.
struct Column {
  bool continuous = true;
  std::size_t index = 0;
};

struct ColumnLayout {
  std::vector<Column> columns;  // header order
  std::size_t n_continuous = 0;
  std::size_t n_discrete = 0;
};

/// Parses a header such as "g0,g1,d0". Names must be exactly g0..g{M-1} and
/// d0..d{J-1}, in any order.
ColumnLayout parse_header(const std::vector<std::string>& header, const std::string& where);

/// One sequence file with its cells kept verbatim, so commands that echo
/// observed values can write them back unchanged.
struct SequenceFile {
  std::string path;
  std::vector<std::string> header;
  ColumnLayout layout;
  std::vector<std::vector<std::string>> cells;  // data rows
  Sequence sequence;
};

struct Dataset {
  std::vector<std::string> header;
  ColumnLayout layout;
  std::vector<SequenceFile> files;

  std::vector<Sequence> sequences() const;
  std::size_t total_steps() const;
};

/// Expands directories to their *.csv files (sorted by name); plain files are
/// kept in the given order.
std::vector<std::string> expand_inputs(const std::vector<std::string>& inputs);

/// Reads every file; all headers must match. Errors carry file:line.
Dataset load_dataset(const std::vector<std::string>& inputs);

SequenceFile parse_sequence_file(const std::string& path, const std::string& text);

/// Continuous values print with 12 significant digits.
std::string format_number(double v);

std::string join(const std::vector<std::string>& fields, char sep = ',');

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);

}  // namespace hhmm::cli
