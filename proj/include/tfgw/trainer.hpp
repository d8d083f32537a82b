#pragma once

#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "tfgw/config.hpp"
#include "tfgw/nn.hpp"
#include "tfgw/tfgw_layer.hpp"

namespace tfgw {

/// Full parameter set: GIN feature extractor (identity when it has no
/// layers), templates, global alpha and classifier head.
struct TfgwModel {
  TrainConfig config;
  int class_count = 0;
  Eigen::Index input_dim = 0;
  GinParams gin;
  std::vector<Template> templates;
  double alpha = 0.5;
  MlpParams head;

  Eigen::Index template_feature_dim() const { return gin.layers.empty() ? input_dim : gin.output_dim(); }
};

/// Median node count of the split, halves rounded up.
int median_node_count(const LabeledDataset& ds);

/// Samples the same number of graphs per class, resizes each to the median
/// size (dropping highest-index nodes or padding isolated zero-feature
/// nodes) and uses uniform weights. With a non-empty `gin`, template features
/// come from a batch-statistics forward pass of the sampled graphs.
std::vector<Template> init_templates(const LabeledDataset& train, int count, StructureKind kind,
                                     std::uint64_t seed, const GinParams* gin = nullptr);

TfgwModel init_model(const LabeledDataset& train, const TrainConfig& config);

/// Eval-mode TFGW embeddings, one row per graph.
Matrix embed(const TfgwModel& model, const LabeledDataset& ds, int threads = 0);
/// Embeddings of the templates themselves (each template seen as a graph).
Matrix template_self_embeddings(const TfgwModel& model, int threads = 0);

std::vector<int> predict(const TfgwModel& model, const LabeledDataset& ds, int threads = 0);
std::vector<int> predict_from_embeddings(const TfgwModel& model, const Matrix& embeddings);
double accuracy(const std::vector<int>& predicted, const std::vector<int>& labels);
double evaluate(const TfgwModel& model, const LabeledDataset& ds, int threads = 0);

struct HistoryRecord {
  int epoch = 0;
  int fold = 0;
  double train_loss = 0.0;
  std::optional<double> val_acc;
  double alpha = 0.0;
};

struct TrainHooks {
  int fold = 0;
  std::function<void(const HistoryRecord&)> on_record;
  std::function<void(const std::string&)> log;
};

struct TrainResult {
  /// Best-validation parameters (last epoch when there is no validation split).
  TfgwModel model;
  std::vector<HistoryRecord> history;
  int selected_epoch = 0;
  std::optional<double> best_val;
  int skipped_batches = 0;
  double seconds = 0.0;
};

/// Differentiable pieces of one training batch, exposed for gradient checks.
struct ModelGrads {
  GinParams gin;
  std::vector<TemplateGrads> templates;
  double alpha = 0.0;
  MlpParams head;
};

/// Loss of a batch with fresh gradients. Train-mode GIN (batch statistics,
/// running statistics left untouched) and dropout driven by `rng`.
double batch_loss_and_grads(const TfgwModel& model, const LabeledDataset& ds, const std::vector<std::size_t>& batch,
                            std::mt19937_64& rng, ModelGrads* grads, int threads = 1);

TrainResult train(const LabeledDataset& train_split, const LabeledDataset* validation, const TrainConfig& config,
                  const TrainHooks& hooks = {});

/// Index partition by class with per-class cuts at the cumulative fractions.
std::vector<std::vector<std::size_t>> stratified_split(const std::vector<int>& labels,
                                                       const std::vector<double>& fractions, std::uint64_t seed);

/// Stratified k-fold partition: members of each class are dealt round-robin.
std::vector<std::vector<std::size_t>> stratified_folds(const std::vector<int>& labels, int folds,
                                                       std::uint64_t seed);

struct FoldReport {
  int config_index = 0;
  int fold = 0;
  std::vector<std::pair<int, double>> curve;
  int selected_epoch = 0;
  double best_val = 0.0;
  double holdout_accuracy = 0.0;
  double seconds = 0.0;
  double seconds_per_epoch = 0.0;
};

struct CvReport {
  std::vector<std::size_t> holdout;
  std::vector<std::vector<std::size_t>> folds;
  std::vector<FoldReport> reports;
  int selected_config = 0;
  /// Mean fold-averaged best validation accuracy per config.
  std::vector<double> mean_validation;
  /// Mean holdout accuracy of the selected config's per-fold best checkpoints.
  double holdout_accuracy = 0.0;
};

CvReport cross_validate(const LabeledDataset& ds, const std::vector<TrainConfig>& grid, const TrainHooks& hooks = {});

struct PcaResult {
  Matrix projected;
  Matrix components;  // D x dims, orthonormal columns
  Vector explained_variance;
  Vector mean;
};

PcaResult pca_project(const Matrix& samples, int dims = 2);

}  // namespace tfgw
