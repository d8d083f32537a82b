#include "tfgw/tu_format.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace fs = std::filesystem;

namespace tfgw {

ParseError::ParseError(const fs::path& file, std::size_t line, const std::string& what)
    : DataError(file.filename().string() + ":" + std::to_string(line) + ": " + what),
      file_(file),
      line_(line) {}

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

/// Non-empty lines of a file; trailing blank lines are dropped, interior ones rejected.
std::vector<std::string> read_lines(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw DataError("cannot open " + file.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  while (!lines.empty() && trim(lines.back()).empty()) lines.pop_back();
  for (std::size_t i = 0; i < lines.size(); ++i)
    if (trim(lines[i]).empty()) throw ParseError(file, i + 1, "unexpected blank line");
  return lines;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma == std::string_view::npos ? line.npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

long long parse_int(std::string_view field, const fs::path& file, std::size_t line) {
  long long value = 0;
  const auto* end = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(field.data(), end, value);
  if (ec != std::errc() || ptr != end || field.empty())
    throw ParseError(file, line, "expected an integer, got '" + std::string(field) + "'");
  return value;
}

double parse_real(std::string_view field, const fs::path& file, std::size_t line) {
  double value = 0;
  const auto* end = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(field.data(), end, value);
  if (ec != std::errc() || ptr != end || field.empty())
    throw ParseError(file, line, "expected a real number, got '" + std::string(field) + "'");
  return value;
}

std::string format_real(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

fs::path member(const fs::path& dir, const std::string& name, const char* suffix) {
  return dir / (name + suffix);
}

}  // namespace

std::string infer_tu_name(const fs::path& directory) {
  if (!fs::is_directory(directory)) throw DataError("not a directory: " + directory.string());
  std::vector<std::string> names;
  for (const auto& entry : fs::directory_iterator(directory)) {
    const auto file = entry.path().filename().string();
    constexpr std::string_view suffix = "_A.txt";
    if (file.size() > suffix.size() && file.ends_with(suffix))
      names.push_back(file.substr(0, file.size() - suffix.size()));
  }
  if (names.size() != 1)
    throw DataError("expected exactly one *_A.txt file in " + directory.string() + ", found " +
                    std::to_string(names.size()));
  return names.front();
}

LabeledDataset load_tu_dataset(const fs::path& directory, std::string name, const TuLoadOptions& options) {
  if (name.empty()) name = infer_tu_name(directory);
  const auto edges_file = member(directory, name, "_A.txt");
  const auto indicator_file = member(directory, name, "_graph_indicator.txt");
  const auto labels_file = member(directory, name, "_graph_labels.txt");
  const auto node_labels_file = member(directory, name, "_node_labels.txt");
  const auto attributes_file = member(directory, name, "_node_attributes.txt");
  for (const auto& required : {edges_file, indicator_file, labels_file})
    if (!fs::exists(required)) throw DataError("missing required file " + required.string());

  // Node -> graph assignment.
  const auto indicator = read_lines(indicator_file);
  const std::size_t node_total = indicator.size();
  std::vector<std::size_t> node_graph(node_total), node_local(node_total);
  std::vector<std::size_t> graph_sizes;
  for (std::size_t v = 0; v < node_total; ++v) {
    const auto gid = parse_int(trim(indicator[v]), indicator_file, v + 1);
    if (gid < 1) throw ParseError(indicator_file, v + 1, "graph id must be 1-based");
    const auto g = static_cast<std::size_t>(gid - 1);
    if (g >= graph_sizes.size()) graph_sizes.resize(g + 1, 0);
    node_graph[v] = g;
    node_local[v] = graph_sizes[g]++;
  }
  const std::size_t graph_count = graph_sizes.size();
  for (std::size_t g = 0; g < graph_count; ++g)
    if (graph_sizes[g] == 0) throw DataError("graph " + std::to_string(g + 1) + " has no nodes");

  const auto label_lines = read_lines(labels_file);
  if (label_lines.size() != graph_count)
    throw DataError(labels_file.filename().string() + ": " + std::to_string(label_lines.size()) +
                    " labels for " + std::to_string(graph_count) + " graphs");
  std::vector<long long> raw_labels;
  for (std::size_t g = 0; g < graph_count; ++g)
    raw_labels.push_back(parse_int(trim(label_lines[g]), labels_file, g + 1));

  std::vector<Matrix> adjacency(graph_count);
  for (std::size_t g = 0; g < graph_count; ++g) {
    const auto n = static_cast<Eigen::Index>(graph_sizes[g]);
    adjacency[g] = Matrix::Zero(n, n);
  }
  const auto edge_lines = read_lines(edges_file);
  for (std::size_t l = 0; l < edge_lines.size(); ++l) {
    const auto fields = split_fields(edge_lines[l]);
    if (fields.size() != 2) throw ParseError(edges_file, l + 1, "expected 'i, j'");
    const auto a = parse_int(fields[0], edges_file, l + 1);
    const auto b = parse_int(fields[1], edges_file, l + 1);
    for (auto v : {a, b})
      if (v < 1 || static_cast<std::size_t>(v) > node_total)
        throw ParseError(edges_file, l + 1, "node index " + std::to_string(v) + " out of range [1, " +
                                                std::to_string(node_total) + "]");
    const auto u = static_cast<std::size_t>(a - 1), v = static_cast<std::size_t>(b - 1);
    if (node_graph[u] != node_graph[v])
      throw ParseError(edges_file, l + 1, "edge endpoints belong to different graphs");
    if (u == v) continue;  // self loops are not part of the structure
    auto& adj = adjacency[node_graph[u]];
    const auto i = static_cast<Eigen::Index>(node_local[u]), j = static_cast<Eigen::Index>(node_local[v]);
    adj(i, j) = adj(j, i) = 1.0;
  }

  // Discrete node labels -> one-hot over the sorted distinct values.
  std::vector<long long> node_labels;
  std::map<long long, Eigen::Index> label_slot;
  if (fs::exists(node_labels_file)) {
    const auto lines = read_lines(node_labels_file);
    if (lines.size() != node_total)
      throw ParseError(node_labels_file, lines.size(), "node label count differs from node count");
    for (std::size_t v = 0; v < node_total; ++v) {
      const auto fields = split_fields(lines[v]);
      node_labels.push_back(parse_int(fields.front(), node_labels_file, v + 1));
      label_slot[node_labels.back()] = 0;
    }
    Eigen::Index slot = 0;
    for (auto& [value, index] : label_slot) index = slot++;
  }
  std::vector<std::vector<double>> attributes;
  std::size_t attribute_dim = 0;
  if (fs::exists(attributes_file)) {
    const auto lines = read_lines(attributes_file);
    if (lines.size() != node_total)
      throw ParseError(attributes_file, lines.size(), "attribute row count differs from node count");
    for (std::size_t v = 0; v < node_total; ++v) {
      const auto fields = split_fields(lines[v]);
      if (v == 0) attribute_dim = fields.size();
      if (fields.size() != attribute_dim)
        throw ParseError(attributes_file, v + 1, "inconsistent attribute count");
      std::vector<double> row;
      for (auto f : fields) row.push_back(parse_real(f, attributes_file, v + 1));
      attributes.push_back(std::move(row));
    }
  }

  const auto one_hot_dim = static_cast<Eigen::Index>(label_slot.size());
  const bool use_degree = node_labels.empty() && attributes.empty();
  int degree_cap = options.max_degree;
  if (use_degree && degree_cap <= 0) {
    degree_cap = 1;
    for (const auto& adj : adjacency) degree_cap = std::max(degree_cap, max_degree(adj));
  }

  std::vector<Matrix> features(graph_count);
  for (std::size_t g = 0; g < graph_count; ++g) {
    const auto n = static_cast<Eigen::Index>(graph_sizes[g]);
    features[g] = use_degree ? degree_features(adjacency[g], degree_cap)
                             : Matrix::Zero(n, one_hot_dim + static_cast<Eigen::Index>(attribute_dim));
  }
  if (!use_degree) {
    for (std::size_t v = 0; v < node_total; ++v) {
      auto& f = features[node_graph[v]];
      const auto i = static_cast<Eigen::Index>(node_local[v]);
      if (!node_labels.empty()) f(i, label_slot.at(node_labels[v])) = 1.0;
      for (std::size_t a = 0; a < attribute_dim; ++a) f(i, one_hot_dim + static_cast<Eigen::Index>(a)) = attributes[v][a];
    }
  }

  std::set<long long> distinct(raw_labels.begin(), raw_labels.end());
  std::map<long long, int> class_of;
  for (auto value : distinct) class_of.emplace(value, static_cast<int>(class_of.size()));

  LabeledDataset ds;
  ds.name = name;
  ds.class_count = static_cast<int>(class_of.size());
  ds.structure_kind = StructureKind::Adjacency;
  for (std::size_t g = 0; g < graph_count; ++g) {
    ds.graphs.push_back(make_graph(adjacency[g], std::move(features[g])));
    ds.labels.push_back(class_of.at(raw_labels[g]));
  }
  ds.adjacency = std::move(adjacency);
  return ds;
}

void save_tu_dataset(const LabeledDataset& ds, const fs::path& directory,
                     const std::map<std::string, std::string>& metadata) {
  validate_dataset(ds);
  if (ds.adjacency.size() != ds.graphs.size()) throw ValidationError("dataset has no adjacency matrices to save");
  fs::create_directories(directory);
  const auto& name = ds.name;
  std::ofstream edges(member(directory, name, "_A.txt"), std::ios::binary);
  std::ofstream indicator(member(directory, name, "_graph_indicator.txt"), std::ios::binary);
  std::ofstream labels(member(directory, name, "_graph_labels.txt"), std::ios::binary);
  std::ofstream attributes(member(directory, name, "_node_attributes.txt"), std::ios::binary);
  if (!edges || !indicator || !labels || !attributes) throw DataError("cannot write into " + directory.string());

  std::size_t offset = 0;
  for (std::size_t g = 0; g < ds.graphs.size(); ++g) {
    const auto& adj = ds.adjacency[g];
    const auto& f = ds.graphs[g].features;
    const auto n = adj.rows();
    for (Eigen::Index i = 0; i < n; ++i) {
      indicator << (g + 1) << '\n';
      for (Eigen::Index c = 0; c < f.cols(); ++c) attributes << (c ? ", " : "") << format_real(f(i, c));
      attributes << '\n';
      for (Eigen::Index j = 0; j < n; ++j)
        if (adj(i, j) != 0.0) edges << (offset + i + 1) << ", " << (offset + j + 1) << '\n';
    }
    labels << ds.labels[g] << '\n';
    offset += static_cast<std::size_t>(n);
  }

  std::ofstream meta(member(directory, name, "_meta.txt"), std::ios::binary);
  meta << "name=" << name << '\n';
  meta << "structure_kind=" << to_string(ds.structure_kind) << '\n';
  for (const auto& [key, value] : metadata)
    if (key != "name" && key != "structure_kind") meta << key << '=' << value << '\n';
}

std::map<std::string, std::string> read_key_values(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw DataError("cannot open " + file.string());
  std::map<std::string, std::string> out;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    auto view = trim(line);
    if (const auto hash = view.find('#'); hash != std::string_view::npos) view = trim(view.substr(0, hash));
    if (view.empty()) continue;
    const auto eq = view.find('=');
    if (eq == std::string_view::npos) throw ParseError(file, number, "expected key=value");
    out[std::string(trim(view.substr(0, eq)))] = std::string(trim(view.substr(eq + 1)));
  }
  return out;
}

}  // namespace tfgw
