#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "tfgw/types.hpp"

namespace tfgw {

enum class Mode : std::uint8_t { Train, Eval };

/// Affine map y = x W + b on row-major batches (one sample per row).
struct Linear {
  Matrix weight;  // in x out
  Matrix bias;    // 1 x out
};

struct BatchNorm {
  Matrix scale;  // 1 x H
  Matrix shift;  // 1 x H
  Matrix running_mean;
  Matrix running_var;
  double momentum = 0.1;
  double eps = 1e-5;
};

struct GinLayer {
  Linear first;
  BatchNorm norm;
  Linear second;
  double epsilon = 0.0;
};

struct GinParams {
  std::vector<GinLayer> layers;
  std::size_t layer_count() const { return layers.size(); }
  Eigen::Index output_dim() const;
};

struct MlpParams {
  std::vector<Linear> layers;  // hidden..., output
  double dropout = 0.0;
};

Linear init_linear(Eigen::Index in, Eigen::Index out, std::mt19937_64& rng);
GinParams init_gin(Eigen::Index input_dim, Eigen::Index hidden, int layers, std::mt19937_64& rng);
MlpParams init_mlp(Eigen::Index input_dim, const std::vector<Eigen::Index>& hidden, Eigen::Index classes,
                   double dropout, std::mt19937_64& rng);

/// Zero-valued parameter containers shaped like the given ones (used for gradients).
GinParams zeros_like(const GinParams& p);
MlpParams zeros_like(const MlpParams& p);

/// Variable-size batch: graph g owns rows [offsets[g], offsets[g+1]) of `features`.
struct GinBatch {
  std::vector<const Matrix*> adjacency;
  std::vector<Eigen::Index> offsets;
  Matrix features;
};

GinBatch make_batch(const std::vector<const Matrix*>& adjacency, const std::vector<const Matrix*>& features);

/// (1 + eps) x_i + sum over neighbours x_j, per graph block.
Matrix gin_aggregate(const GinBatch& batch, const Matrix& x, double epsilon);

struct GinLayerCache {
  Matrix input, aggregated, pre_norm, normalized, inv_std, post_norm, hidden, pre_out;
};

struct GinCache {
  const GinBatch* batch = nullptr;
  std::vector<GinLayerCache> layers;
};

/// Node embeddings of width L * hidden (concatenated layer outputs). In train
/// mode batch statistics are used and running statistics are updated.
Matrix gin_forward(const GinBatch& batch, GinParams& params, Mode mode, GinCache* cache = nullptr);

/// Train-mode forward (batch statistics) that leaves running statistics untouched.
Matrix gin_forward_batch_stats(const GinBatch& batch, const GinParams& params, GinCache* cache = nullptr);

/// Eval-mode forward with no side effects.
Matrix gin_infer(const GinBatch& batch, const GinParams& params);

/// Accumulates parameter gradients into `grads` and returns input feature gradients.
Matrix gin_backward(const GinCache& cache, const GinParams& params, const Matrix& upstream, GinParams& grads);

struct MlpCache {
  std::vector<Matrix> inputs;
  std::vector<Matrix> pre_activations;
  std::vector<Matrix> masks;  // dropout multipliers (0 or 1/(1-p)) per hidden layer
};

Matrix mlp_forward(const Matrix& x, const MlpParams& params, Mode mode, std::mt19937_64* rng = nullptr,
                   MlpCache* cache = nullptr);
Matrix mlp_backward(const MlpCache& cache, const MlpParams& params, const Matrix& upstream, MlpParams& grads);

struct LossResult {
  double loss = 0.0;
  Matrix grad;
};

/// Mean cross-entropy over rows of `logits`; gradient of the mean.
LossResult cross_entropy(const Matrix& logits, const std::vector<int>& labels);

/// View of one parameter tensor and its gradient.
struct ParamSlot {
  double* value = nullptr;
  const double* grad = nullptr;
  Eigen::Index size = 0;
};

template <typename Dense, typename DenseGrad>
ParamSlot slot(Dense& value, const DenseGrad& grad) {
  if (value.size() != grad.size()) throw ValidationError("parameter/gradient size mismatch");
  return {value.data(), grad.data(), value.size()};
}

void collect_slots(GinParams& p, const GinParams& g, std::vector<ParamSlot>& out);
void collect_slots(MlpParams& p, const MlpParams& g, std::vector<ParamSlot>& out);

struct AdamOptions {
  double learning_rate = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  AdamOptions options;
  std::vector<Eigen::ArrayXd> first;
  std::vector<Eigen::ArrayXd> second;
  long step = 0;
};

/// Bias-corrected Adam update; moments are created on the first call and the
/// slot list must keep the same layout afterwards.
void adam_step(const std::vector<ParamSlot>& slots, AdamState& state);

}  // namespace tfgw
