#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <map>
#include <string>
#include <vector>

#include "tfgw/checkpoint.hpp"
#include "tfgw/generators.hpp"
#include "tfgw/parallel.hpp"
#include "tfgw/trainer.hpp"
#include "tfgw/tu_format.hpp"

namespace fs = std::filesystem;
using namespace tfgw;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void log_line(const std::string& msg) { std::cerr << "[tfgw] " << msg << '\n'; }

std::map<std::string, std::string> parse_sets(const std::vector<std::string>& sets) {
  std::map<std::string, std::string> out;
  for (const auto& s : sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) throw UsageError("--set expects key=value, got '" + s + "'");
    out[s.substr(0, eq)] = s.substr(eq + 1);
  }
  return out;
}

TrainConfig resolve_config(const std::string& file, const std::vector<std::string>& sets, int threads) {
  std::map<std::string, std::string> values;
  if (!file.empty()) {
    if (!fs::exists(file)) throw DataError("config file not found: " + file);
    values = read_key_values(file);
  }
  for (auto& [k, v] : parse_sets(sets)) values[k] = v;
  if (threads > 0) values["threads"] = std::to_string(threads);
  TrainConfig c;
  apply_overrides(c, values);
  return c;
}

std::pair<fs::path, std::size_t> parse_graph_ref(const std::string& ref) {
  const auto colon = ref.rfind(':');
  if (colon != std::string::npos && colon + 1 < ref.size() &&
      ref.find_first_not_of("0123456789", colon + 1) == std::string::npos)
    return {ref.substr(0, colon), std::stoul(ref.substr(colon + 1))};
  return {ref, 0};
}

void write_text(const fs::path& file, const std::string& text) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw DataError("cannot write " + file.string());
  out << text;
}

std::string csv_number(double v) { return format_double(v); }

int cmd_dataset_gen(const std::string& kind, const std::string& out, std::uint64_t seed, int copies, int graphs,
                    int nodes) {
  LabeledDataset ds;
  std::map<std::string, std::string> meta{{"kind", kind}, {"seed", std::to_string(seed)}};
  if (kind == "skip-circles") {
    ds = gen_skip_circles(copies, seed);
    meta["copies"] = std::to_string(copies);
  } else if (kind == "four-cycles") {
    ds = gen_four_cycles(graphs, nodes, seed);
    meta["graphs"] = std::to_string(graphs);
    meta["nodes"] = std::to_string(nodes);
  } else {
    throw UsageError("unknown dataset kind '" + kind + "' (expected four-cycles or skip-circles)");
  }
  fs::create_directories(out);
  save_tu_dataset(ds, out, meta);
  std::cout << "wrote " << ds.size() << " graphs (" << ds.class_count << " classes) to " << out << '\n';
  return 0;
}

int cmd_dataset_info(const std::string& dir) {
  const LabeledDataset ds = load_tu_dataset(dir);
  std::vector<std::size_t> per_class(static_cast<std::size_t>(ds.class_count));
  for (int y : ds.labels) ++per_class[static_cast<std::size_t>(y)];
  std::size_t min_n = SIZE_MAX, max_n = 0;
  double edges = 0.0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    min_n = std::min(min_n, ds.graphs[i].node_count());
    max_n = std::max(max_n, ds.graphs[i].node_count());
    edges += ds.adjacency[i].sum() / 2.0;
  }
  std::cout << "name: " << ds.name << '\n'
            << "graphs: " << ds.size() << '\n'
            << "classes: " << ds.class_count << '\n'
            << "class_counts:";
  for (auto c : per_class) std::cout << ' ' << c;
  std::cout << '\n'
            << "nodes_min: " << min_n << '\n'
            << "nodes_median: " << median_node_count(ds) << '\n'
            << "nodes_max: " << max_n << '\n'
            << "edges_mean: " << format_double(edges / static_cast<double>(ds.size())) << '\n'
            << "feature_dim: " << ds.feature_dim() << '\n';
  return 0;
}

int cmd_dist(const std::string& a_ref, const std::string& b_ref, double alpha, const std::string& structure,
             int restarts, std::uint64_t seed) {
  const StructureKind kind = parse_structure_kind(structure);
  auto load_one = [&](const std::string& ref) {
    const auto [dir, index] = parse_graph_ref(ref);
    const LabeledDataset ds = with_structure(load_tu_dataset(dir), kind);
    if (index >= ds.size())
      throw DataError("graph index " + std::to_string(index) + " out of range for " + dir.string() + " (" +
                      std::to_string(ds.size()) + " graphs)");
    return ds.graphs[index];
  };
  const Graph a = load_one(a_ref);
  const Graph b = load_one(b_ref);
  if (a.feature_dim() != b.feature_dim()) throw DataError("feature dimensions differ");
  CgOptions o;
  o.restarts = restarts;
  o.restart_seed = seed;
  const FgwResult r = solve_fgw(a, b, alpha, o);
  std::cout << "value: " << format_double(r.value) << '\n'
            << "gw_part: " << format_double(r.gw_part) << '\n'
            << "w_part: " << format_double(r.w_part) << '\n'
            << "iterations: " << r.iterations << '\n'
            << "converged: " << (r.converged ? "true" : "false") << '\n';
  return 0;
}

int cmd_train(const std::string& data, const TrainConfig& cfg, const std::string& out, double val_fraction) {
  const LabeledDataset ds = load_tu_dataset(data);
  fs::create_directories(out);
  LabeledDataset train_split = ds;
  LabeledDataset val_split;
  if (val_fraction > 0.0) {
    const auto parts = stratified_split(ds.labels, {1.0 - val_fraction, val_fraction}, cfg.seed);
    train_split = subset(ds, parts[0]);
    val_split = subset(ds, parts[1]);
  }
  TrainHooks hooks;
  hooks.log = log_line;
  hooks.on_record = [](const HistoryRecord& r) { log_line(history_line(r)); };
  const TrainResult r = train(train_split, val_split.size() ? &val_split : nullptr, cfg, hooks);
  save_model(r.model, fs::path(out) / "model.ckpt");
  std::ofstream hist(fs::path(out) / "history.jsonl", std::ios::binary);
  write_history(r.history, hist);
  nlohmann::ordered_json summary;
  summary["selected_epoch"] = r.selected_epoch;
  summary["best_val"] = r.best_val ? nlohmann::ordered_json(*r.best_val) : nlohmann::ordered_json(nullptr);
  summary["train_accuracy"] = evaluate(r.model, train_split, cfg.threads);
  summary["skipped_batches"] = r.skipped_batches;
  summary["alpha"] = r.model.alpha;
  write_text(fs::path(out) / "summary.json", summary.dump(2) + "\n");
  log_line("training took " + format_double(r.seconds) + " s");
  std::cout << "selected_epoch: " << r.selected_epoch << '\n'
            << "train_accuracy: " << format_double(summary["train_accuracy"].get<double>()) << '\n';
  return 0;
}

int cmd_cv(const std::string& data, const std::vector<TrainConfig>& grid, const std::string& out) {
  const LabeledDataset ds = load_tu_dataset(data);
  fs::create_directories(out);
  std::ofstream hist(fs::path(out) / "history.jsonl", std::ios::binary);
  TrainHooks hooks;
  hooks.log = log_line;
  hooks.on_record = [&](const HistoryRecord& r) { hist << history_line(r) << '\n'; };
  const CvReport report = cross_validate(ds, grid, hooks);
  std::ofstream folds(fs::path(out) / "folds.jsonl", std::ios::binary);
  for (const auto& fr : report.reports) {
    nlohmann::ordered_json j;
    j["config"] = fr.config_index;
    j["fold"] = fr.fold;
    j["selected_epoch"] = fr.selected_epoch;
    j["best_val"] = fr.best_val;
    j["holdout_accuracy"] = fr.holdout_accuracy;
    auto curve = nlohmann::ordered_json::array();
    for (const auto& [epoch, acc] : fr.curve) curve.push_back({epoch, acc});
    j["curve"] = curve;
    folds << j.dump() << '\n';
    log_line("config " + std::to_string(fr.config_index) + " fold " + std::to_string(fr.fold) + ": " +
             format_double(fr.seconds) + " s, " + format_double(fr.seconds_per_epoch) + " s/epoch");
  }
  nlohmann::ordered_json summary;
  summary["selected_config"] = report.selected_config;
  summary["mean_validation"] = report.mean_validation;
  summary["holdout_size"] = report.holdout.size();
  summary["holdout_accuracy"] = report.holdout_accuracy;
  write_text(fs::path(out) / "summary.json", summary.dump(2) + "\n");
  std::cout << "selected_config: " << report.selected_config << '\n'
            << "holdout_accuracy: " << format_double(report.holdout_accuracy) << '\n';
  return 0;
}

int cmd_eval(const std::string& model_path, const std::string& data, int threads) {
  const TfgwModel model = load_model(model_path);
  const LabeledDataset ds = load_tu_dataset(data);
  const double acc = evaluate(model, ds, threads);
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", acc);
  std::cout << "accuracy: " << buf << '\n';
  return 0;
}

int cmd_embed(const std::string& model_path, const std::string& data, const std::string& out, int threads) {
  const TfgwModel model = load_model(model_path);
  const LabeledDataset ds = load_tu_dataset(data);
  const Matrix E = embed(model, ds, threads);
  const Matrix T = template_self_embeddings(model, threads);
  const auto K = E.cols();
  const int per_class = static_cast<int>(K) / std::max(1, model.class_count);

  std::string header = "kind,index,label";
  for (Eigen::Index k = 0; k < K; ++k) header += ",d" + std::to_string(k);
  std::string text = header + "\n";
  auto row = [&](const std::string& kind, Eigen::Index i, int label, const Matrix& m) {
    std::string line = kind + "," + std::to_string(i) + "," + std::to_string(label);
    for (Eigen::Index k = 0; k < K; ++k) line += "," + csv_number(m(i, k));
    text += line + "\n";
  };
  for (Eigen::Index i = 0; i < E.rows(); ++i) row("graph", i, ds.labels[static_cast<std::size_t>(i)], E);
  for (Eigen::Index i = 0; i < T.rows(); ++i) row("template", i, static_cast<int>(i) / std::max(1, per_class), T);
  write_text(out, text);

  const PcaResult pca = pca_project(E, 2);
  const Matrix tp = (T.rowwise() - pca.mean.transpose()) * pca.components;
  std::string ptext = "kind,index,label,pc1,pc2\n";
  for (Eigen::Index i = 0; i < E.rows(); ++i)
    ptext += "graph," + std::to_string(i) + "," + std::to_string(ds.labels[static_cast<std::size_t>(i)]) + "," +
             csv_number(pca.projected(i, 0)) + "," + csv_number(pca.projected(i, 1)) + "\n";
  for (Eigen::Index i = 0; i < tp.rows(); ++i)
    ptext += "template," + std::to_string(i) + "," + std::to_string(static_cast<int>(i) / std::max(1, per_class)) +
             "," + csv_number(tp(i, 0)) + "," + csv_number(tp(i, 1)) + "\n";
  fs::path pca_path(out);
  pca_path.replace_filename(pca_path.stem().string() + "_pca" + pca_path.extension().string());
  write_text(pca_path, ptext);
  std::cout << "wrote " << E.rows() << " graph and " << T.rows() << " template rows to " << out << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Template-based fused Gromov-Wasserstein graph classification"};
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads, "Worker threads (default: TFGW_THREADS or all cores)")->check(CLI::NonNegativeNumber);

  auto* dataset = app.add_subcommand("dataset", "Generate or inspect datasets");
  dataset->require_subcommand(1);
  auto* gen = dataset->add_subcommand("gen", "Generate a synthetic dataset in TU format");
  std::string kind, gen_out;
  std::uint64_t gen_seed = 0;
  int copies = 15, graphs = 200, nodes = 12;
  gen->add_option("--kind", kind, "four-cycles or skip-circles")->required();
  gen->add_option("--out", gen_out, "Output directory")->required();
  gen->add_option("--seed", gen_seed, "Random seed");
  gen->add_option("--copies", copies, "Permuted copies per class (skip-circles)")->check(CLI::PositiveNumber);
  gen->add_option("--graphs", graphs, "Number of graphs (four-cycles)")->check(CLI::PositiveNumber);
  gen->add_option("--nodes", nodes, "Nodes per graph (four-cycles)")->check(CLI::PositiveNumber);
  auto* info = dataset->add_subcommand("info", "Print dataset statistics");
  std::string info_dir;
  info->add_option("dir", info_dir, "Dataset directory")->required();

  auto* dist = app.add_subcommand("dist", "FGW distance between two graphs");
  std::string dist_a, dist_b, structure = "adj";
  double alpha = 0.5;
  int restarts = 1;
  std::uint64_t dist_seed = 0;
  dist->add_option("--a", dist_a, "First graph as DIR[:index]")->required();
  dist->add_option("--b", dist_b, "Second graph as DIR[:index]")->required();
  dist->add_option("--alpha", alpha, "Trade-off in [0, 1]")->check(CLI::Range(0.0, 1.0));
  dist->add_option("--structure", structure, "adj or sp")->check(CLI::IsMember({"adj", "sp"}));
  dist->add_option("--restarts", restarts, "Solver starts")->check(CLI::PositiveNumber);
  dist->add_option("--seed", dist_seed, "Seed for extra starts");

  std::string data, config_file, out, model_path;
  std::vector<std::string> sets;
  std::vector<std::string> grid_files;
  double val_fraction = 0.1;
  auto* train_cmd = app.add_subcommand("train", "Train a model");
  train_cmd->add_option("--data", data, "TU dataset directory")->required();
  train_cmd->add_option("--config", config_file, "key=value config file");
  train_cmd->add_option("--out", out, "Output directory")->required();
  train_cmd->add_option("--set", sets, "Config override key=value (repeatable)");
  train_cmd->add_option("--val-fraction", val_fraction, "Stratified validation fraction")->check(CLI::Range(0.0, 0.9));

  auto* cv = app.add_subcommand("cv", "Cross-validation with a holdout test set");
  cv->add_option("--data", data, "TU dataset directory")->required();
  cv->add_option("--config", config_file, "key=value config file");
  cv->add_option("--grid", grid_files, "Additional config files forming the selection grid");
  cv->add_option("--out", out, "Output directory")->required();
  cv->add_option("--set", sets, "Config override key=value (repeatable, applied to every grid entry)");

  auto* eval = app.add_subcommand("eval", "Accuracy of a checkpoint on a dataset");
  eval->add_option("--model", model_path, "Checkpoint file")->required();
  eval->add_option("--data", data, "TU dataset directory")->required();

  auto* emb = app.add_subcommand("embed", "Export TFGW embeddings and their PCA projection");
  emb->add_option("--model", model_path, "Checkpoint file")->required();
  emb->add_option("--data", data, "TU dataset directory")->required();
  emb->add_option("--out", out, "CSV file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (threads > 0) threads = resolve_threads(threads);
    if (*gen) return cmd_dataset_gen(kind, gen_out, gen_seed, copies, graphs, nodes);
    if (*info) return cmd_dataset_info(info_dir);
    if (*dist) return cmd_dist(dist_a, dist_b, alpha, structure, restarts, dist_seed);
    if (*train_cmd) return cmd_train(data, resolve_config(config_file, sets, threads), out, val_fraction);
    if (*cv) {
      std::vector<TrainConfig> grid{resolve_config(config_file, sets, threads)};
      for (const auto& g : grid_files) grid.push_back(resolve_config(g, sets, threads));
      return cmd_cv(data, grid, out);
    }
    if (*eval) return cmd_eval(model_path, data, threads);
    if (*emb) return cmd_embed(model_path, data, out, threads);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 2;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
