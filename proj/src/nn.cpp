#include "tfgw/nn.hpp"

#include <cmath>
#include <string>

namespace tfgw {

namespace {

Matrix relu(const Matrix& x) { return x.cwiseMax(0.0); }

Matrix relu_grad(const Matrix& upstream, const Matrix& pre) {
  return (pre.array() > 0.0).select(upstream, 0.0);
}

Matrix affine(const Matrix& x, const Linear& l) {
  if (x.cols() != l.weight.rows())
    throw ValidationError("affine: input width " + std::to_string(x.cols()) + " != " +
                          std::to_string(l.weight.rows()));
  return (x * l.weight).rowwise() + l.bias.row(0);
}

void affine_backward(const Matrix& x, const Matrix& dy, Linear& grad) {
  grad.weight.noalias() += x.transpose() * dy;
  grad.bias += dy.colwise().sum();
}

Linear zeros_like(const Linear& l) {
  return {Matrix::Zero(l.weight.rows(), l.weight.cols()), Matrix::Zero(1, l.bias.cols())};
}

}  // namespace

Eigen::Index GinParams::output_dim() const {
  Eigen::Index d = 0;
  for (const auto& l : layers) d += l.second.weight.cols();
  return d;
}

Linear init_linear(Eigen::Index in, Eigen::Index out, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(std::max<Eigen::Index>(in, 1)));
  std::uniform_real_distribution<double> u(-bound, bound);
  Linear l{Matrix(in, out), Matrix(1, out)};
  for (Eigen::Index j = 0; j < out; ++j)
    for (Eigen::Index i = 0; i < in; ++i) l.weight(i, j) = u(rng);
  for (Eigen::Index j = 0; j < out; ++j) l.bias(0, j) = u(rng);
  return l;
}

GinParams init_gin(Eigen::Index input_dim, Eigen::Index hidden, int layers, std::mt19937_64& rng) {
  if (layers < 0 || hidden <= 0 || input_dim <= 0) throw ValidationError("init_gin: invalid sizes");
  GinParams p;
  Eigen::Index in = input_dim;
  for (int l = 0; l < layers; ++l) {
    GinLayer layer;
    layer.first = init_linear(in, hidden, rng);
    layer.norm.scale = Matrix::Ones(1, hidden);
    layer.norm.shift = Matrix::Zero(1, hidden);
    layer.norm.running_mean = Matrix::Zero(1, hidden);
    layer.norm.running_var = Matrix::Ones(1, hidden);
    layer.second = init_linear(hidden, hidden, rng);
    p.layers.push_back(std::move(layer));
    in = hidden;
  }
  return p;
}

MlpParams init_mlp(Eigen::Index input_dim, const std::vector<Eigen::Index>& hidden, Eigen::Index classes,
                   double dropout, std::mt19937_64& rng) {
  if (dropout < 0.0 || dropout >= 1.0) throw ValidationError("dropout must lie in [0, 1)");
  MlpParams p;
  p.dropout = dropout;
  Eigen::Index in = input_dim;
  for (auto h : hidden) {
    p.layers.push_back(init_linear(in, h, rng));
    in = h;
  }
  p.layers.push_back(init_linear(in, classes, rng));
  return p;
}

GinParams zeros_like(const GinParams& p) {
  GinParams z;
  for (const auto& l : p.layers) {
    GinLayer g;
    g.first = zeros_like(l.first);
    g.second = zeros_like(l.second);
    g.norm.scale = Matrix::Zero(1, l.norm.scale.cols());
    g.norm.shift = Matrix::Zero(1, l.norm.shift.cols());
    g.norm.running_mean = Matrix::Zero(1, l.norm.running_mean.cols());
    g.norm.running_var = Matrix::Zero(1, l.norm.running_var.cols());
    g.epsilon = 0.0;
    z.layers.push_back(std::move(g));
  }
  return z;
}

MlpParams zeros_like(const MlpParams& p) {
  MlpParams z;
  z.dropout = p.dropout;
  for (const auto& l : p.layers) z.layers.push_back(zeros_like(l));
  return z;
}

GinBatch make_batch(const std::vector<const Matrix*>& adjacency, const std::vector<const Matrix*>& features) {
  if (adjacency.size() != features.size() || adjacency.empty())
    throw ValidationError("make_batch: need one feature matrix per adjacency matrix");
  GinBatch b;
  b.adjacency = adjacency;
  b.offsets.push_back(0);
  const auto d = features.front()->cols();
  for (std::size_t g = 0; g < adjacency.size(); ++g) {
    if (adjacency[g]->rows() != features[g]->rows() || features[g]->cols() != d)
      throw ValidationError("make_batch: graph " + std::to_string(g) + " has inconsistent dimensions");
    b.offsets.push_back(b.offsets.back() + features[g]->rows());
  }
  b.features.resize(b.offsets.back(), d);
  for (std::size_t g = 0; g < adjacency.size(); ++g)
    b.features.middleRows(b.offsets[g], features[g]->rows()) = *features[g];
  return b;
}

Matrix gin_aggregate(const GinBatch& batch, const Matrix& x, double epsilon) {
  Matrix z(x.rows(), x.cols());
  for (std::size_t g = 0; g < batch.adjacency.size(); ++g) {
    const auto start = batch.offsets[g];
    const auto n = batch.offsets[g + 1] - start;
    z.middleRows(start, n).noalias() = (1.0 + epsilon) * x.middleRows(start, n);
    z.middleRows(start, n).noalias() += *batch.adjacency[g] * x.middleRows(start, n);
  }
  return z;
}

namespace {

Matrix gin_aggregate_transpose(const GinBatch& batch, const Matrix& dz, double epsilon) {
  Matrix dx(dz.rows(), dz.cols());
  for (std::size_t g = 0; g < batch.adjacency.size(); ++g) {
    const auto start = batch.offsets[g];
    const auto n = batch.offsets[g + 1] - start;
    dx.middleRows(start, n).noalias() = (1.0 + epsilon) * dz.middleRows(start, n);
    dx.middleRows(start, n).noalias() += batch.adjacency[g]->transpose() * dz.middleRows(start, n);
  }
  return dx;
}

Matrix run_gin(const GinBatch& batch, const GinParams& params, Mode mode, GinParams* stats, GinCache* cache) {
  if (batch.features.rows() != batch.offsets.back()) throw ValidationError("gin_forward: malformed batch");
  const auto N = batch.features.rows();
  Matrix out(N, params.output_dim());
  Matrix x = batch.features;
  Eigen::Index col = 0;
  if (cache) {
    cache->batch = &batch;
    cache->layers.clear();
  }
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const GinLayer& layer = params.layers[l];
    GinLayerCache c;
    c.input = x;
    c.aggregated = gin_aggregate(batch, x, layer.epsilon);
    c.pre_norm = affine(c.aggregated, layer.first);
    Matrix mean;
    Matrix var;
    if (mode == Mode::Train) {
      mean = c.pre_norm.colwise().mean();
      var = (c.pre_norm.rowwise() - mean.row(0)).array().square().colwise().mean().matrix();
      if (stats) {
        auto& norm = stats->layers[l].norm;
        const double unbias = N > 1 ? static_cast<double>(N) / static_cast<double>(N - 1) : 1.0;
        norm.running_mean = (1.0 - norm.momentum) * norm.running_mean + norm.momentum * mean;
        norm.running_var = (1.0 - norm.momentum) * norm.running_var + norm.momentum * unbias * var;
      }
    } else {
      mean = layer.norm.running_mean;
      var = layer.norm.running_var;
    }
    c.inv_std = (var.array() + layer.norm.eps).rsqrt().matrix();
    c.normalized = ((c.pre_norm.rowwise() - mean.row(0)).array().rowwise() * c.inv_std.row(0).array()).matrix();
    c.post_norm = ((c.normalized.array().rowwise() * layer.norm.scale.row(0).array()).rowwise() +
                   layer.norm.shift.row(0).array())
                      .matrix();
    c.hidden = relu(c.post_norm);
    c.pre_out = affine(c.hidden, layer.second);
    x = relu(c.pre_out);
    out.middleCols(col, x.cols()) = x;
    col += x.cols();
    if (cache) cache->layers.push_back(std::move(c));
  }
  return out;
}

}  // namespace

Matrix gin_forward(const GinBatch& batch, GinParams& params, Mode mode, GinCache* cache) {
  return run_gin(batch, params, mode, &params, cache);
}

Matrix gin_forward_batch_stats(const GinBatch& batch, const GinParams& params, GinCache* cache) {
  return run_gin(batch, params, Mode::Train, nullptr, cache);
}

Matrix gin_infer(const GinBatch& batch, const GinParams& params) {
  return run_gin(batch, params, Mode::Eval, nullptr, nullptr);
}

Matrix gin_backward(const GinCache& cache, const GinParams& params, const Matrix& upstream, GinParams& grads) {
  if (!cache.batch || cache.layers.size() != params.layers.size())
    throw ValidationError("gin_backward: cache does not match parameters");
  if (upstream.rows() != cache.batch->features.rows() || upstream.cols() != params.output_dim())
    throw ValidationError("gin_backward: upstream shape mismatch");
  const auto N = static_cast<double>(upstream.rows());
  Eigen::Index col = params.output_dim();
  Matrix carry = Matrix::Zero(upstream.rows(), params.layers.empty() ? cache.batch->features.cols() : 0);
  for (std::size_t l = params.layers.size(); l-- > 0;) {
    const GinLayer& layer = params.layers[l];
    const GinLayerCache& c = cache.layers[l];
    GinLayer& g = grads.layers[l];
    const auto width = layer.second.weight.cols();
    col -= width;
    Matrix dout = upstream.middleCols(col, width);
    if (carry.cols() == width) dout += carry;

    const Matrix dpre_out = relu_grad(dout, c.pre_out);
    affine_backward(c.hidden, dpre_out, g.second);
    const Matrix dhidden = dpre_out * layer.second.weight.transpose();
    const Matrix dpost = relu_grad(dhidden, c.post_norm);
    g.norm.scale += dpost.cwiseProduct(c.normalized).colwise().sum();
    g.norm.shift += dpost.colwise().sum();
    const Matrix dnorm = (dpost.array().rowwise() * layer.norm.scale.row(0).array()).matrix();
    const Matrix sum_d = dnorm.colwise().sum();
    const Matrix sum_dx = dnorm.cwiseProduct(c.normalized).colwise().sum();
    Matrix dpre = N * dnorm;
    dpre.rowwise() -= sum_d.row(0);
    dpre -= (c.normalized.array().rowwise() * sum_dx.row(0).array()).matrix();
    dpre = (dpre.array().rowwise() * (c.inv_std.row(0).array() / N)).matrix();
    affine_backward(c.aggregated, dpre, g.first);
    const Matrix dagg = dpre * layer.first.weight.transpose();
    carry = gin_aggregate_transpose(*cache.batch, dagg, layer.epsilon);
  }
  return carry;
}

Matrix mlp_forward(const Matrix& x, const MlpParams& params, Mode mode, std::mt19937_64* rng, MlpCache* cache) {
  if (params.layers.empty()) throw ValidationError("mlp_forward: no layers");
  const bool drop = mode == Mode::Train && params.dropout > 0.0;
  if (drop && !rng) throw ValidationError("mlp_forward: dropout in train mode needs a generator");
  if (cache) *cache = MlpCache{};
  Matrix h = x;
  const auto hidden = params.layers.size() - 1;
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    if (cache) cache->inputs.push_back(h);
    Matrix pre = affine(h, params.layers[l]);
    if (l == hidden) return pre;
    h = relu(pre);
    Matrix mask;
    if (drop) {
      std::bernoulli_distribution keep(1.0 - params.dropout);
      const double scale = 1.0 / (1.0 - params.dropout);
      mask.resize(h.rows(), h.cols());
      for (Eigen::Index j = 0; j < h.cols(); ++j)
        for (Eigen::Index i = 0; i < h.rows(); ++i) mask(i, j) = keep(*rng) ? scale : 0.0;
      h = h.cwiseProduct(mask);
    }
    if (cache) {
      cache->pre_activations.push_back(std::move(pre));
      cache->masks.push_back(std::move(mask));
    }
  }
  return h;
}

Matrix mlp_backward(const MlpCache& cache, const MlpParams& params, const Matrix& upstream, MlpParams& grads) {
  if (cache.inputs.size() != params.layers.size()) throw ValidationError("mlp_backward: stale cache");
  Matrix d = upstream;
  for (std::size_t l = params.layers.size(); l-- > 0;) {
    if (l + 1 < params.layers.size()) {
      if (cache.masks[l].size() > 0) d = d.cwiseProduct(cache.masks[l]);
      d = relu_grad(d, cache.pre_activations[l]);
    }
    affine_backward(cache.inputs[l], d, grads.layers[l]);
    d = d * params.layers[l].weight.transpose();
  }
  return d;
}

LossResult cross_entropy(const Matrix& logits, const std::vector<int>& labels) {
  if (static_cast<std::size_t>(logits.rows()) != labels.size() || labels.empty())
    throw ValidationError("cross_entropy: one label per logit row required");
  LossResult r;
  r.grad.resize(logits.rows(), logits.cols());
  const double B = static_cast<double>(logits.rows());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const int y = labels[static_cast<std::size_t>(i)];
    if (y < 0 || y >= logits.cols()) throw ValidationError("cross_entropy: label " + std::to_string(y) + " out of range");
    const double top = logits.row(i).maxCoeff();
    const Eigen::RowVectorXd e = (logits.row(i).array() - top).exp().matrix();
    const double z = e.sum();
    r.loss += std::log(z) + top - logits(i, y);
    r.grad.row(i) = e / z;
    r.grad(i, y) -= 1.0;
  }
  r.loss /= B;
  r.grad /= B;
  return r;
}

void collect_slots(GinParams& p, const GinParams& g, std::vector<ParamSlot>& out) {
  if (p.layers.size() != g.layers.size()) throw ValidationError("collect_slots: layer count mismatch");
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    auto& a = p.layers[l];
    const auto& b = g.layers[l];
    out.push_back(slot(a.first.weight, b.first.weight));
    out.push_back(slot(a.first.bias, b.first.bias));
    out.push_back(slot(a.norm.scale, b.norm.scale));
    out.push_back(slot(a.norm.shift, b.norm.shift));
    out.push_back(slot(a.second.weight, b.second.weight));
    out.push_back(slot(a.second.bias, b.second.bias));
  }
}

void collect_slots(MlpParams& p, const MlpParams& g, std::vector<ParamSlot>& out) {
  if (p.layers.size() != g.layers.size()) throw ValidationError("collect_slots: layer count mismatch");
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    out.push_back(slot(p.layers[l].weight, g.layers[l].weight));
    out.push_back(slot(p.layers[l].bias, g.layers[l].bias));
  }
}

void adam_step(const std::vector<ParamSlot>& slots, AdamState& state) {
  if (state.first.empty()) {
    for (const auto& s : slots) {
      state.first.push_back(Eigen::ArrayXd::Zero(s.size));
      state.second.push_back(Eigen::ArrayXd::Zero(s.size));
    }
  }
  if (state.first.size() != slots.size()) throw ValidationError("adam_step: parameter layout changed");
  ++state.step;
  const auto& o = state.options;
  const double c1 = 1.0 - std::pow(o.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(o.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < slots.size(); ++i) {
    const auto& s = slots[i];
    if (state.first[i].size() != s.size) throw ValidationError("adam_step: moment shape mismatch");
    Eigen::Map<Eigen::ArrayXd> value(s.value, s.size);
    Eigen::Map<const Eigen::ArrayXd> grad(s.grad, s.size);
    state.first[i] = o.beta1 * state.first[i] + (1.0 - o.beta1) * grad;
    state.second[i] = o.beta2 * state.second[i] + (1.0 - o.beta2) * grad.square();
    value -= o.learning_rate * (state.first[i] / c1) / ((state.second[i] / c2).sqrt() + o.eps);
  }
}

}  // namespace tfgw
