#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include "tfgw/graph.hpp"

namespace tfgw {

/// Parse failure inside a TU text file; carries file and 1-based line.
class ParseError : public DataError {
public:
  ParseError(const std::filesystem::path& file, std::size_t line, const std::string& what);
  const std::filesystem::path& file() const { return file_; }
  std::size_t line() const { return line_; }

private:
  std::filesystem::path file_;
  std::size_t line_;
};

struct TuLoadOptions {
  /// Degree one-hot cap for datasets without node labels or attributes; <= 0 means
  /// the dataset's maximum degree.
  int max_degree = 0;
};

/// Reads `<name>_A.txt`, `<name>_graph_indicator.txt`, `<name>_graph_labels.txt`
/// and the optional node label/attribute files. An empty name is inferred from
/// the single `*_A.txt` file in the directory.
LabeledDataset load_tu_dataset(const std::filesystem::path& directory, std::string name = {},
                               const TuLoadOptions& options = {});

std::string infer_tu_name(const std::filesystem::path& directory);

/// Writes the dataset in TU text format. Node features are written as
/// comma-separated attributes. `metadata` goes to `<name>_meta.txt` as key=value lines.
void save_tu_dataset(const LabeledDataset& ds, const std::filesystem::path& directory,
                     const std::map<std::string, std::string>& metadata = {});

std::map<std::string, std::string> read_key_values(const std::filesystem::path& file);

}  // namespace tfgw
