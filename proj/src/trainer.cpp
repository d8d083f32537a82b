#include "tfgw/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>

#include <Eigen/Eigenvalues>

#include "tfgw/parallel.hpp"

namespace tfgw {

namespace {

std::mt19937_64 make_rng(std::uint64_t seed, std::uint32_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), stream};
  return std::mt19937_64(seq);
}

const LabeledDataset& as_kind(const LabeledDataset& ds, StructureKind kind, LabeledDataset& storage) {
  if (ds.structure_kind == kind) return ds;
  storage = with_structure(ds, kind);
  return storage;
}

void require_adjacency(const LabeledDataset& ds) {
  if (ds.adjacency.size() != ds.graphs.size())
    throw ValidationError("dataset '" + ds.name + "' carries no adjacency matrices");
}

GinBatch batch_of(const LabeledDataset& ds, const std::vector<std::size_t>& idx) {
  require_adjacency(ds);
  std::vector<const Matrix*> adj;
  std::vector<const Matrix*> feats;
  for (auto i : idx) {
    adj.push_back(&ds.adjacency[i]);
    feats.push_back(&ds.graphs[i].features);
  }
  return make_batch(adj, feats);
}

/// Node features after the feature extractor; one matrix per listed graph.
std::vector<Matrix> split_rows(const Matrix& h, const GinBatch& batch) {
  std::vector<Matrix> out;
  for (std::size_t g = 0; g + 1 < batch.offsets.size(); ++g)
    out.emplace_back(h.middleRows(batch.offsets[g], batch.offsets[g + 1] - batch.offsets[g]));
  return out;
}

std::vector<Matrix> processed_features(const TfgwModel& model, const LabeledDataset& ds) {
  std::vector<std::size_t> all(ds.size());
  std::iota(all.begin(), all.end(), 0);
  if (model.gin.layers.empty()) {
    std::vector<Matrix> out;
    for (const auto& g : ds.graphs) out.push_back(g.features);
    return out;
  }
  const GinBatch batch = batch_of(ds, all);
  return split_rows(gin_infer(batch, model.gin), batch);
}

Matrix distances_for(const TfgwModel& model, const LabeledDataset& ds, const std::vector<Matrix>& features,
                     int threads) {
  Matrix out(static_cast<Eigen::Index>(ds.size()), static_cast<Eigen::Index>(model.templates.size()));
  const CgOptions options = model.config.solver_options();
  parallel_for(ds.size(), threads, [&](std::size_t i) {
    const Graph g{ds.graphs[i].structure, features[i], ds.graphs[i].weights};
    out.row(static_cast<Eigen::Index>(i)) = tfgw_forward(g, model.templates, model.alpha, options).distances.transpose();
  });
  return out;
}

struct BatchOutcome {
  double loss = 0.0;
  bool skipped = false;
};

BatchOutcome run_batch(const TfgwModel& model, const LabeledDataset& ds, const std::vector<std::size_t>& idx,
                       std::mt19937_64& rng, ModelGrads* grads, int threads, GinParams* running_stats) {
  const auto B = idx.size();
  const auto K = model.templates.size();
  const bool has_gin = !model.gin.layers.empty();

  GinBatch gbatch;
  GinCache gcache;
  std::vector<Matrix> feats;
  if (has_gin) {
    gbatch = batch_of(ds, idx);
    const Matrix h = running_stats ? gin_forward(gbatch, *running_stats, Mode::Train, &gcache)
                                   : gin_forward_batch_stats(gbatch, model.gin, &gcache);
    feats = split_rows(h, gbatch);
  } else {
    for (auto i : idx) feats.push_back(ds.graphs[i].features);
  }

  const CgOptions options = model.config.solver_options();
  std::vector<TfgwForwardRecord> records(B);
  parallel_for(B, threads, [&](std::size_t b) {
    const Graph g{ds.graphs[idx[b]].structure, feats[b], ds.graphs[idx[b]].weights};
    records[b] = tfgw_forward(g, model.templates, model.alpha, options);
  });
  Matrix E(static_cast<Eigen::Index>(B), static_cast<Eigen::Index>(K));
  for (std::size_t b = 0; b < B; ++b) E.row(static_cast<Eigen::Index>(b)) = records[b].distances.transpose();
  if (!E.allFinite()) return {0.0, true};

  std::vector<int> labels;
  for (auto i : idx) labels.push_back(ds.labels[i]);
  MlpCache mcache;
  const Matrix logits = mlp_forward(E, model.head, Mode::Train, &rng, &mcache);
  LossResult ce = cross_entropy(logits, labels);
  if (!grads) return {ce.loss, false};

  grads->head = zeros_like(model.head);
  const Matrix dE = mlp_backward(mcache, model.head, ce.grad, grads->head);

  std::vector<TfgwGrads> per(B);
  parallel_for(B, threads, [&](std::size_t b) {
    const Graph g{ds.graphs[idx[b]].structure, feats[b], ds.graphs[idx[b]].weights};
    per[b] = tfgw_backward(g, model.templates, model.alpha, records[b], dE.row(static_cast<Eigen::Index>(b)).transpose());
  });
  TfgwGrads total = zero_grads(model.templates, 0, model.template_feature_dim());
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t k = 0; k < K; ++k) {
      total.templates[k].structure += per[b].templates[k].structure;
      total.templates[k].features += per[b].templates[k].features;
      total.templates[k].weights += per[b].templates[k].weights;
    }
    total.alpha += per[b].alpha;
  }
  grads->templates = std::move(total.templates);
  grads->alpha = total.alpha;

  grads->gin = zeros_like(model.gin);
  if (has_gin) {
    Matrix dH(gbatch.features.rows(), model.gin.output_dim());
    for (std::size_t b = 0; b < B; ++b)
      dH.middleRows(gbatch.offsets[b], gbatch.offsets[b + 1] - gbatch.offsets[b]) = per[b].features;
    gin_backward(gcache, model.gin, dH, grads->gin);
  }
  return {ce.loss, false};
}

std::vector<ParamSlot> model_slots(TfgwModel& model, const ModelGrads& g) {
  std::vector<ParamSlot> slots;
  collect_slots(model.gin, g.gin, slots);
  const auto& cfg = model.config;
  if (cfg.learn_templates) {
    for (std::size_t k = 0; k < model.templates.size(); ++k) {
      slots.push_back(slot(model.templates[k].structure, g.templates[k].structure));
      slots.push_back(slot(model.templates[k].features, g.templates[k].features));
      if (cfg.template_weights == WeightMode::Learned)
        slots.push_back(slot(model.templates[k].weights, g.templates[k].weights));
    }
  }
  if (cfg.alpha_mode == AlphaMode::Learned) slots.push_back({&model.alpha, &g.alpha, 1});
  collect_slots(model.head, g.head, slots);
  return slots;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

int median_node_count(const LabeledDataset& ds) {
  if (ds.size() == 0) throw ValidationError("median of an empty split");
  std::vector<std::size_t> sizes;
  for (const auto& g : ds.graphs) sizes.push_back(g.node_count());
  std::sort(sizes.begin(), sizes.end());
  const auto n = sizes.size();
  if (n % 2 == 1) return static_cast<int>(sizes[n / 2]);
  return static_cast<int>((sizes[n / 2 - 1] + sizes[n / 2] + 1) / 2);
}

std::vector<Template> init_templates(const LabeledDataset& train, int count, StructureKind kind, std::uint64_t seed,
                                     const GinParams* gin) {
  if (train.size() == 0) throw ValidationError("init_templates: empty training split");
  const int C = train.class_count;
  if (count <= 0 || C <= 0 || count % C != 0)
    throw ValidationError("init_templates: template count " + std::to_string(count) +
                          " is not a positive multiple of the class count " + std::to_string(C));
  require_adjacency(train);
  auto rng = make_rng(seed, 1);
  std::vector<std::size_t> chosen;
  for (int c = 0; c < C; ++c) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < train.size(); ++i)
      if (train.labels[i] == c) members.push_back(i);
    if (members.empty()) throw ValidationError("init_templates: class " + std::to_string(c) + " absent from split");
    std::shuffle(members.begin(), members.end(), rng);
    for (int j = 0; j < count / C; ++j) chosen.push_back(members[static_cast<std::size_t>(j) % members.size()]);
  }

  std::vector<Matrix> feats;
  if (gin && !gin->layers.empty()) {
    const GinBatch batch = batch_of(train, chosen);
    feats = split_rows(gin_forward_batch_stats(batch, *gin), batch);
  } else {
    for (auto i : chosen) feats.push_back(train.graphs[i].features);
  }

  const Eigen::Index m = median_node_count(train);
  std::vector<Template> out;
  for (std::size_t t = 0; t < chosen.size(); ++t) {
    const Matrix& adj = train.adjacency[chosen[t]];
    const Eigen::Index keep = std::min(m, adj.rows());
    Matrix a = Matrix::Zero(m, m);
    a.topLeftCorner(keep, keep) = adj.topLeftCorner(keep, keep);
    Matrix f = Matrix::Zero(m, feats[t].cols());
    f.topRows(keep) = feats[t].topRows(keep);
    Template tpl;
    tpl.structure = kind == StructureKind::Adjacency ? a : shortest_path_matrix(a);
    tpl.features = std::move(f);
    tpl.weights = uniform_weights(static_cast<std::size_t>(m));
    out.push_back(std::move(tpl));
  }
  return out;
}

TfgwModel init_model(const LabeledDataset& train, const TrainConfig& config) {
  validate_config(config);
  if (train.size() == 0) throw ValidationError("empty training split");
  TfgwModel m;
  m.config = config;
  m.class_count = train.class_count;
  m.input_dim = static_cast<Eigen::Index>(train.feature_dim());
  auto gin_rng = make_rng(config.seed, 2);
  m.gin = init_gin(m.input_dim, config.gin_hidden, config.gin_layers, gin_rng);
  const int K = config.template_count(m.class_count);
  m.templates = init_templates(train, K, config.structure, config.seed, &m.gin);
  m.alpha = config.alpha;
  auto head_rng = make_rng(config.seed, 3);
  std::vector<Eigen::Index> hidden(config.mlp_hidden.begin(), config.mlp_hidden.end());
  m.head = init_mlp(K, hidden, m.class_count, config.dropout, head_rng);
  return m;
}

Matrix embed(const TfgwModel& model, const LabeledDataset& ds, int threads) {
  LabeledDataset storage;
  const LabeledDataset& d = as_kind(ds, model.config.structure, storage);
  if (d.size() > 0 && static_cast<Eigen::Index>(d.feature_dim()) != model.input_dim)
    throw ValidationError("dataset feature dimension " + std::to_string(d.feature_dim()) +
                          " does not match model input dimension " + std::to_string(model.input_dim));
  return distances_for(model, d, processed_features(model, d), resolve_threads(threads));
}

Matrix template_self_embeddings(const TfgwModel& model, int threads) {
  const auto K = model.templates.size();
  Matrix out(static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(K));
  const CgOptions options = model.config.solver_options();
  parallel_for(K, resolve_threads(threads), [&](std::size_t k) {
    const Template& t = model.templates[k];
    std::vector<Eigen::Index> idx;
    for (Eigen::Index i = 0; i < t.weights.size(); ++i)
      if (t.weights[i] > 0.0) idx.push_back(i);
    const auto n = static_cast<Eigen::Index>(idx.size());
    Graph g{Matrix(n, n), Matrix(n, t.features.cols()), Vector(n)};
    for (Eigen::Index a = 0; a < n; ++a) {
      g.weights[a] = t.weights[idx[a]];
      g.features.row(a) = t.features.row(idx[a]);
      for (Eigen::Index b = 0; b < n; ++b) g.structure(a, b) = t.structure(idx[a], idx[b]);
    }
    g.weights /= g.weights.sum();
    out.row(static_cast<Eigen::Index>(k)) = tfgw_forward(g, model.templates, model.alpha, options).distances.transpose();
  });
  return out;
}

std::vector<int> predict_from_embeddings(const TfgwModel& model, const Matrix& embeddings) {
  const Matrix logits = mlp_forward(embeddings, model.head, Mode::Eval);
  std::vector<int> out;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    Eigen::Index best = 0;
    logits.row(i).maxCoeff(&best);
    out.push_back(static_cast<int>(best));
  }
  return out;
}

std::vector<int> predict(const TfgwModel& model, const LabeledDataset& ds, int threads) {
  return predict_from_embeddings(model, embed(model, ds, threads));
}

double accuracy(const std::vector<int>& predicted, const std::vector<int>& labels) {
  if (predicted.empty() || predicted.size() != labels.size())
    throw ValidationError("accuracy: empty or mismatched prediction list");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hits += predicted[i] == labels[i];
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

double evaluate(const TfgwModel& model, const LabeledDataset& ds, int threads) {
  if (ds.size() == 0) throw ValidationError("evaluate: empty split");
  return accuracy(predict(model, ds, threads), ds.labels);
}

double batch_loss_and_grads(const TfgwModel& model, const LabeledDataset& ds, const std::vector<std::size_t>& batch,
                            std::mt19937_64& rng, ModelGrads* grads, int threads) {
  LabeledDataset storage;
  const LabeledDataset& d = as_kind(ds, model.config.structure, storage);
  const BatchOutcome r = run_batch(model, d, batch, rng, grads, threads, nullptr);
  return r.skipped ? std::numeric_limits<double>::quiet_NaN() : r.loss;
}

TrainResult train(const LabeledDataset& train_in, const LabeledDataset* val_in, const TrainConfig& cfg,
                  const TrainHooks& hooks) {
  const auto start = std::chrono::steady_clock::now();
  validate_config(cfg);
  if (train_in.size() == 0) throw ValidationError("empty training split");
  if (val_in && val_in->size() == 0) throw ValidationError("empty validation split");
  LabeledDataset train_storage;
  LabeledDataset val_storage;
  const LabeledDataset& train_ds = as_kind(train_in, cfg.structure, train_storage);
  const LabeledDataset* val_ds = val_in ? &as_kind(*val_in, cfg.structure, val_storage) : nullptr;
  const int threads = resolve_threads(cfg.threads);

  TrainResult result;
  TfgwModel model = init_model(train_ds, cfg);
  const bool frozen = cfg.gin_layers == 0 && !cfg.learn_templates && cfg.alpha_mode == AlphaMode::Fixed;
  Matrix train_embeddings;
  Matrix val_embeddings;
  if (frozen) {
    train_embeddings = embed(model, train_ds, threads);
    if (val_ds) val_embeddings = embed(model, *val_ds, threads);
  }

  auto rng = make_rng(cfg.seed, 4);
  AdamState adam;
  adam.options.learning_rate = cfg.learning_rate;
  const std::size_t n = train_ds.size();
  const std::size_t batch_size =
      cfg.batch_size == 0 ? n : std::min<std::size_t>(n, static_cast<std::size_t>(cfg.batch_size));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  const bool project_weights = cfg.learn_templates && cfg.template_weights == WeightMode::Learned;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    if (batch_size < n) std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    std::size_t seen = 0;
    for (std::size_t first = 0; first < n; first += batch_size) {
      const std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(first),
                                         order.begin() + static_cast<std::ptrdiff_t>(std::min(n, first + batch_size)));
      ModelGrads grads;
      double loss = 0.0;
      if (frozen) {
        Matrix E(static_cast<Eigen::Index>(idx.size()), train_embeddings.cols());
        std::vector<int> labels;
        for (std::size_t b = 0; b < idx.size(); ++b) {
          E.row(static_cast<Eigen::Index>(b)) = train_embeddings.row(static_cast<Eigen::Index>(idx[b]));
          labels.push_back(train_ds.labels[idx[b]]);
        }
        MlpCache cache;
        const LossResult ce = cross_entropy(mlp_forward(E, model.head, Mode::Train, &rng, &cache), labels);
        grads.head = zeros_like(model.head);
        mlp_backward(cache, model.head, ce.grad, grads.head);
        grads.gin = zeros_like(model.gin);
        loss = ce.loss;
      } else {
        const BatchOutcome r = run_batch(model, train_ds, idx, rng, &grads, threads, &model.gin);
        if (r.skipped) {
          ++result.skipped_batches;
          if (hooks.log) hooks.log("epoch " + std::to_string(epoch) + ": non-finite FGW value, batch skipped");
          continue;
        }
        loss = r.loss;
      }
      if (!std::isfinite(loss)) throw std::runtime_error("non-finite training loss at epoch " + std::to_string(epoch));
      adam_step(model_slots(model, grads), adam);
      apply_constraints(model.templates, model.alpha, cfg.structure, project_weights);
      loss_sum += loss * static_cast<double>(idx.size());
      seen += idx.size();
    }

    if (epoch % cfg.validation_period == 0 || epoch == cfg.epochs) {
      HistoryRecord rec;
      rec.epoch = epoch;
      rec.fold = hooks.fold;
      rec.train_loss = seen ? loss_sum / static_cast<double>(seen) : std::numeric_limits<double>::quiet_NaN();
      rec.alpha = model.alpha;
      if (val_ds) {
        const double acc = frozen ? accuracy(predict_from_embeddings(model, val_embeddings), val_ds->labels)
                                  : evaluate(model, *val_ds, threads);
        rec.val_acc = acc;
        if (!result.best_val || acc > *result.best_val) {
          result.best_val = acc;
          result.model = model;
          result.selected_epoch = epoch;
        }
      }
      result.history.push_back(rec);
      if (hooks.on_record) hooks.on_record(rec);
    }
  }
  if (!val_ds) {
    result.model = std::move(model);
    result.selected_epoch = cfg.epochs;
  }
  result.seconds = seconds_since(start);
  return result;
}

std::vector<std::vector<std::size_t>> stratified_split(const std::vector<int>& labels,
                                                       const std::vector<double>& fractions, std::uint64_t seed) {
  if (fractions.empty()) throw ValidationError("stratified_split: no fractions");
  double total = 0.0;
  for (double f : fractions) {
    if (f < 0.0) throw ValidationError("stratified_split: negative fraction");
    total += f;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ValidationError("stratified_split: fractions must sum to 1");
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
  auto rng = make_rng(seed, 5);
  std::vector<std::vector<std::size_t>> parts(fractions.size());
  for (auto& [label, members] : by_class) {
    std::shuffle(members.begin(), members.end(), rng);
    double cum = 0.0;
    std::size_t from = 0;
    for (std::size_t p = 0; p < fractions.size(); ++p) {
      cum += fractions[p];
      const std::size_t to = p + 1 == fractions.size()
                                 ? members.size()
                                 : static_cast<std::size_t>(std::lround(cum * static_cast<double>(members.size())));
      for (std::size_t j = from; j < std::max(from, to); ++j) parts[p].push_back(members[j]);
      from = std::max(from, to);
    }
  }
  for (auto& p : parts) std::sort(p.begin(), p.end());
  return parts;
}

std::vector<std::vector<std::size_t>> stratified_folds(const std::vector<int>& labels, int folds, std::uint64_t seed) {
  if (folds < 2) throw ValidationError("stratified_folds: need at least 2 folds");
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
  auto rng = make_rng(seed, 6);
  std::vector<std::vector<std::size_t>> out(static_cast<std::size_t>(folds));
  std::size_t dealt = 0;
  for (auto& [label, members] : by_class) {
    if (members.size() < static_cast<std::size_t>(folds))
      throw ValidationError("class " + std::to_string(label) + " has " + std::to_string(members.size()) +
                            " samples, fewer than " + std::to_string(folds) + " folds");
    std::shuffle(members.begin(), members.end(), rng);
    for (auto i : members) out[dealt++ % out.size()].push_back(i);
  }
  for (auto& f : out) std::sort(f.begin(), f.end());
  return out;
}

CvReport cross_validate(const LabeledDataset& ds, const std::vector<TrainConfig>& grid, const TrainHooks& hooks) {
  if (grid.empty()) throw ValidationError("cross_validate: empty config grid");
  const TrainConfig& base = grid.front();
  CvReport report;
  std::vector<std::size_t> rest;
  if (base.holdout_fraction > 0.0) {
    auto parts = stratified_split(ds.labels, {1.0 - base.holdout_fraction, base.holdout_fraction}, base.seed);
    rest = std::move(parts[0]);
    report.holdout = std::move(parts[1]);
  } else {
    rest.resize(ds.size());
    std::iota(rest.begin(), rest.end(), 0);
  }
  std::vector<int> rest_labels;
  for (auto i : rest) rest_labels.push_back(ds.labels[i]);
  for (auto& fold : stratified_folds(rest_labels, base.folds, base.seed)) {
    std::vector<std::size_t> mapped;
    for (auto j : fold) mapped.push_back(rest[j]);
    report.folds.push_back(std::move(mapped));
  }
  const LabeledDataset holdout = subset(ds, report.holdout);

  for (std::size_t ci = 0; ci < grid.size(); ++ci) {
    double val_sum = 0.0;
    for (std::size_t f = 0; f < report.folds.size(); ++f) {
      std::vector<std::size_t> train_idx;
      for (std::size_t g = 0; g < report.folds.size(); ++g)
        if (g != f) train_idx.insert(train_idx.end(), report.folds[g].begin(), report.folds[g].end());
      std::sort(train_idx.begin(), train_idx.end());
      const LabeledDataset train_split = subset(ds, train_idx);
      const LabeledDataset val_split = subset(ds, report.folds[f]);
      TrainHooks fold_hooks = hooks;
      fold_hooks.fold = static_cast<int>(f);
      const TrainResult r = train(train_split, &val_split, grid[ci], fold_hooks);
      FoldReport fr;
      fr.config_index = static_cast<int>(ci);
      fr.fold = static_cast<int>(f);
      for (const auto& h : r.history)
        if (h.val_acc) fr.curve.emplace_back(h.epoch, *h.val_acc);
      fr.selected_epoch = r.selected_epoch;
      fr.best_val = r.best_val.value_or(0.0);
      fr.holdout_accuracy = holdout.size() ? evaluate(r.model, holdout, grid[ci].threads) : 0.0;
      fr.seconds = r.seconds;
      fr.seconds_per_epoch = r.seconds / grid[ci].epochs;
      val_sum += fr.best_val;
      report.reports.push_back(std::move(fr));
    }
    report.mean_validation.push_back(val_sum / static_cast<double>(report.folds.size()));
  }
  report.selected_config = static_cast<int>(
      std::max_element(report.mean_validation.begin(), report.mean_validation.end()) - report.mean_validation.begin());
  double holdout_sum = 0.0;
  for (const auto& fr : report.reports)
    if (fr.config_index == report.selected_config) holdout_sum += fr.holdout_accuracy;
  report.holdout_accuracy = holdout_sum / static_cast<double>(report.folds.size());
  return report;
}

PcaResult pca_project(const Matrix& samples, int dims) {
  if (dims <= 0 || samples.rows() < dims || samples.cols() < dims)
    throw ValidationError("pca_project: need at least " + std::to_string(dims) + " samples and dimensions");
  PcaResult r;
  r.mean = samples.colwise().mean().transpose();
  const Matrix centered = samples.rowwise() - r.mean.transpose();
  const double denom = samples.rows() > 1 ? static_cast<double>(samples.rows() - 1) : 1.0;
  const Matrix cov = centered.transpose() * centered / denom;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(cov);
  const auto D = cov.rows();
  r.components.resize(D, dims);
  r.explained_variance.resize(dims);
  for (int j = 0; j < dims; ++j) {
    Vector v = eig.eigenvectors().col(D - 1 - j);
    Eigen::Index at = 0;
    v.cwiseAbs().maxCoeff(&at);
    if (v[at] < 0.0) v = -v;
    r.components.col(j) = v;
    r.explained_variance[j] = std::max(0.0, eig.eigenvalues()[D - 1 - j]);
  }
  r.projected = centered * r.components;
  return r;
}

}  // namespace tfgw
