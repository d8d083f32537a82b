#include "tfgw/checkpoint.hpp"

#include <bit>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

namespace tfgw {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

template <typename T>
void put(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof value);
}

template <typename T>
T get(std::istream& in, const std::string& what) {
  T value{};
  if (!in.read(reinterpret_cast<char*>(&value), sizeof value)) throw DataError("truncated checkpoint while reading " + what);
  return value;
}

using Blocks = std::vector<std::pair<std::string, Matrix>>;

void add_linear(Blocks& b, const std::string& prefix, const Linear& l) {
  b.emplace_back(prefix + ".weight", l.weight);
  b.emplace_back(prefix + ".bias", l.bias);
}

Matrix take(std::map<std::string, Matrix>& blocks, const std::string& name) {
  auto it = blocks.find(name);
  if (it == blocks.end()) throw DataError("checkpoint block '" + name + "' missing");
  Matrix m = std::move(it->second);
  blocks.erase(it);
  return m;
}

Linear take_linear(std::map<std::string, Matrix>& blocks, const std::string& prefix) {
  return {take(blocks, prefix + ".weight"), take(blocks, prefix + ".bias")};
}

}  // namespace

void save_model(const TfgwModel& model, const std::filesystem::path& file) {
  auto meta = to_key_values(model.config);
  meta["class_count"] = std::to_string(model.class_count);
  meta["input_dim"] = std::to_string(model.input_dim);
  meta["template_count"] = std::to_string(model.templates.size());
  meta["gin_layer_count"] = std::to_string(model.gin.layers.size());
  meta["head_layer_count"] = std::to_string(model.head.layers.size());
  std::string meta_text;
  for (const auto& [k, v] : meta) meta_text += k + "=" + v + "\n";

  Blocks blocks;
  for (std::size_t l = 0; l < model.gin.layers.size(); ++l) {
    const auto& layer = model.gin.layers[l];
    const std::string p = "gin." + std::to_string(l);
    add_linear(blocks, p + ".first", layer.first);
    blocks.emplace_back(p + ".norm.scale", layer.norm.scale);
    blocks.emplace_back(p + ".norm.shift", layer.norm.shift);
    blocks.emplace_back(p + ".norm.running_mean", layer.norm.running_mean);
    blocks.emplace_back(p + ".norm.running_var", layer.norm.running_var);
    add_linear(blocks, p + ".second", layer.second);
  }
  for (std::size_t k = 0; k < model.templates.size(); ++k) {
    const std::string p = "template." + std::to_string(k);
    blocks.emplace_back(p + ".structure", model.templates[k].structure);
    blocks.emplace_back(p + ".features", model.templates[k].features);
    blocks.emplace_back(p + ".weights", model.templates[k].weights);
  }
  blocks.emplace_back("alpha", Matrix::Constant(1, 1, model.alpha));
  for (std::size_t l = 0; l < model.head.layers.size(); ++l)
    add_linear(blocks, "head." + std::to_string(l), model.head.layers[l]);

  std::ofstream out(file, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint " + file.string());
  out.write("TFGW", 4);
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint64_t>(out, meta_text.size());
  out.write(meta_text.data(), static_cast<std::streamsize>(meta_text.size()));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(blocks.size()));
  for (const auto& [name, m] : blocks) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put<std::uint64_t>(out, static_cast<std::uint64_t>(m.rows()));
    put<std::uint64_t>(out, static_cast<std::uint64_t>(m.cols()));
    out.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double)));
  }
  if (!out) throw DataError("failed writing checkpoint " + file.string());
}

TfgwModel load_model(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + file.string());
  char magic[4];
  if (!in.read(magic, 4) || std::string(magic, 4) != "TFGW") throw DataError(file.string() + " is not a TFGW checkpoint");
  const auto version = get<std::uint32_t>(in, "version");
  if (version != kCheckpointVersion) throw DataError("unsupported checkpoint version " + std::to_string(version));
  const auto meta_len = get<std::uint64_t>(in, "meta length");
  if (meta_len > (1u << 20)) throw DataError("checkpoint meta block too large");
  std::string meta_text(meta_len, '\0');
  if (!in.read(meta_text.data(), static_cast<std::streamsize>(meta_len))) throw DataError("truncated checkpoint meta");

  std::map<std::string, std::string> meta;
  std::istringstream lines(meta_text);
  for (std::string line; std::getline(lines, line);) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw DataError("malformed checkpoint meta line '" + line + "'");
    meta[line.substr(0, eq)] = line.substr(eq + 1);
  }
  auto pop = [&](const std::string& key) {
    auto it = meta.find(key);
    if (it == meta.end()) throw DataError("checkpoint meta key '" + key + "' missing");
    std::string v = it->second;
    meta.erase(it);
    return std::stoull(v);
  };
  TfgwModel model;
  model.class_count = static_cast<int>(pop("class_count"));
  model.input_dim = static_cast<Eigen::Index>(pop("input_dim"));
  const auto template_count = pop("template_count");
  const auto gin_layers = pop("gin_layer_count");
  const auto head_layers = pop("head_layer_count");
  try {
    apply_overrides(model.config, meta);
  } catch (const ValidationError& e) {
    throw DataError(std::string("checkpoint config: ") + e.what());
  }

  std::map<std::string, Matrix> blocks;
  const auto count = get<std::uint32_t>(in, "block count");
  for (std::uint32_t b = 0; b < count; ++b) {
    const auto name_len = get<std::uint32_t>(in, "block name length");
    if (name_len > 4096) throw DataError("checkpoint block name too long");
    std::string name(name_len, '\0');
    if (!in.read(name.data(), name_len)) throw DataError("truncated checkpoint block name");
    const auto rows = get<std::uint64_t>(in, name + " rows");
    const auto cols = get<std::uint64_t>(in, name + " cols");
    if (rows > (1u << 24) || cols > (1u << 24) || rows * cols > (1u << 28))
      throw DataError("checkpoint block '" + name + "' has implausible shape");
    Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    if (!in.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double))))
      throw DataError("truncated checkpoint block '" + name + "'");
    blocks[name] = std::move(m);
  }

  for (std::size_t l = 0; l < gin_layers; ++l) {
    const std::string p = "gin." + std::to_string(l);
    GinLayer layer;
    layer.first = take_linear(blocks, p + ".first");
    layer.norm.scale = take(blocks, p + ".norm.scale");
    layer.norm.shift = take(blocks, p + ".norm.shift");
    layer.norm.running_mean = take(blocks, p + ".norm.running_mean");
    layer.norm.running_var = take(blocks, p + ".norm.running_var");
    layer.second = take_linear(blocks, p + ".second");
    model.gin.layers.push_back(std::move(layer));
  }
  for (std::size_t k = 0; k < template_count; ++k) {
    const std::string p = "template." + std::to_string(k);
    Template t;
    t.structure = take(blocks, p + ".structure");
    t.features = take(blocks, p + ".features");
    Matrix w = take(blocks, p + ".weights");
    if (w.cols() != 1) throw DataError("template weights must be a column");
    t.weights = w.col(0);
    model.templates.push_back(std::move(t));
  }
  model.alpha = take(blocks, "alpha")(0, 0);
  model.head.dropout = model.config.dropout;
  for (std::size_t l = 0; l < head_layers; ++l) model.head.layers.push_back(take_linear(blocks, "head." + std::to_string(l)));
  if (!blocks.empty()) throw DataError("unexpected checkpoint block '" + blocks.begin()->first + "'");
  return model;
}

std::string history_line(const HistoryRecord& r) {
  nlohmann::ordered_json j;
  j["epoch"] = r.epoch;
  j["fold"] = r.fold;
  j["train_loss"] = r.train_loss;
  j["val_acc"] = r.val_acc ? nlohmann::ordered_json(*r.val_acc) : nlohmann::ordered_json(nullptr);
  j["alpha"] = r.alpha;
  return j.dump();
}

void write_history(const std::vector<HistoryRecord>& records, std::ostream& out) {
  for (const auto& r : records) out << history_line(r) << '\n';
}

}  // namespace tfgw
