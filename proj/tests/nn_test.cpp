#include <gtest/gtest.h>

#include "test_util.hpp"
#include "tfgw/nn.hpp"

using namespace tfgw;
using namespace tfgw::testing;

namespace {

Matrix triangle() {
  Matrix a = Matrix::Ones(3, 3);
  a.diagonal().setZero();
  return a;
}

struct GinFixture {
  std::vector<Matrix> adjacency;
  std::vector<Matrix> features;
  GinBatch batch;
};

GinFixture random_batch(std::mt19937_64& rng, int graphs, int d) {
  GinFixture f;
  std::uniform_int_distribution<int> size(2, 5);
  for (int g = 0; g < graphs; ++g) {
    const int n = g == 0 ? 5 : size(rng);
    f.adjacency.push_back(random_adjacency(n, 0.5, rng));
    f.features.push_back(random_matrix(n, d, rng, -1.0, 1.0));
  }
  std::vector<const Matrix*> a, x;
  for (int g = 0; g < graphs; ++g) a.push_back(&f.adjacency[static_cast<std::size_t>(g)]), x.push_back(&f.features[static_cast<std::size_t>(g)]);
  f.batch = make_batch(a, x);
  return f;
}

/// Randomises every GIN parameter, including the normalisation affine terms.
void perturb(GinParams& p, std::mt19937_64& rng) {
  for (auto& l : p.layers) {
    l.norm.scale = random_matrix(1, static_cast<int>(l.norm.scale.cols()), rng, 0.5, 1.5);
    l.norm.shift = random_matrix(1, static_cast<int>(l.norm.shift.cols()), rng, -0.5, 0.5);
  }
}

/// Some ReLU input lies close enough to zero for a finite-difference probe to cross it.
bool near_relu_kink(const GinCache& cache) {
  for (const auto& l : cache.layers)
    if (l.post_norm.cwiseAbs().minCoeff() < 1e-3 || l.pre_out.cwiseAbs().minCoeff() < 1e-3) return true;
  return false;
}

bool close(double analytic, double fd, double tol) {
  return std::abs(analytic - fd) <= tol * std::max({1e-2, std::abs(analytic), std::abs(fd)});
}

/// Entrywise central differences of `loss` against every slot's gradient.
template <typename Loss>
void check_slots(const std::vector<ParamSlot>& slots, Loss loss, double step, double tol, const std::string& tag) {
  for (std::size_t s = 0; s < slots.size(); ++s) {
    for (Eigen::Index i = 0; i < slots[s].size; ++i) {
      double& v = slots[s].value[i];
      const double keep = v;
      v = keep + step;
      const double up = loss();
      v = keep - step;
      const double down = loss();
      v = keep;
      const double fd = (up - down) / (2 * step);
      EXPECT_TRUE(close(slots[s].grad[i], fd, tol)) << tag << " slot " << s << " entry " << i << ": "
                                                    << slots[s].grad[i] << " vs " << fd;
    }
  }
}

}  // namespace

TEST(GinAggregate, TriangleWithOnes) {
  const Matrix a = triangle();
  const Matrix x = Matrix::Ones(3, 1);
  const GinBatch b = make_batch({&a}, {&x});
  EXPECT_EQ(gin_aggregate(b, b.features, 0.0), Matrix::Constant(3, 1, 3.0));
}

TEST(GinAggregate, AdjointIsTransposedOperator) {
  std::mt19937_64 rng(1);
  auto f = random_batch(rng, 3, 2);
  const Matrix y = random_matrix(static_cast<int>(f.batch.features.rows()), 2, rng);
  const double eps = 0.3;
  double lhs = (gin_aggregate(f.batch, f.batch.features, eps).array() * y.array()).sum();
  double rhs = 0.0;
  for (std::size_t g = 0; g < f.adjacency.size(); ++g) {
    const auto start = f.batch.offsets[g], n = f.batch.offsets[g + 1] - start;
    const Matrix op = f.adjacency[g] + (1 + eps) * Matrix::Identity(n, n);
    rhs += (f.features[g].array() * (op.transpose() * y.middleRows(start, n)).array()).sum();
  }
  EXPECT_NEAR(lhs, rhs, 1e-12);
}

TEST(GinForward, IdentityLayerOnTriangle) {
  std::mt19937_64 rng(2);
  GinParams p = init_gin(1, 1, 1, rng);
  p.layers[0].first = {Matrix::Identity(1, 1), Matrix::Zero(1, 1)};
  p.layers[0].second = {Matrix::Identity(1, 1), Matrix::Zero(1, 1)};
  const Matrix a = triangle();
  const Matrix x = Matrix::Ones(3, 1);
  const GinBatch b = make_batch({&a}, {&x});
  // Eval mode uses the initial running statistics (mean 0, variance 1).
  const Matrix out = gin_infer(b, p);
  EXPECT_NEAR(out(0, 0), 3.0 / std::sqrt(1.0 + 1e-5), 1e-12);
}

TEST(GinForward, EdgelessGraphSeesOnlyItself) {
  std::mt19937_64 rng(3);
  const GinParams p = init_gin(2, 4, 1, rng);
  const Matrix a = Matrix::Zero(3, 3);
  const Matrix x = random_matrix(3, 2, rng);
  const GinBatch b = make_batch({&a}, {&x});
  const auto& l = p.layers[0];
  Matrix pre = (x * l.first.weight).rowwise() + l.first.bias.row(0);
  Matrix normed = ((pre.rowwise() - l.norm.running_mean.row(0)).array().rowwise() /
                   (l.norm.running_var.array() + l.norm.eps).sqrt().row(0))
                      .matrix();
  normed = normed.cwiseMax(0.0);
  const Matrix expected = ((normed * l.second.weight).rowwise() + l.second.bias.row(0)).cwiseMax(0.0);
  EXPECT_LE((gin_infer(b, p) - expected).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(GinForward, OutputConcatenatesLayers) {
  std::mt19937_64 rng(4);
  GinParams p = init_gin(3, 7, 3, rng);
  auto f = random_batch(rng, 2, 3);
  GinCache cache;
  const Matrix out = gin_forward(f.batch, p, Mode::Train, &cache);
  EXPECT_EQ(out.cols(), 21);
  EXPECT_EQ(out.rows(), f.batch.features.rows());
  EXPECT_EQ(out.middleCols(14, 7), cache.layers[2].pre_out.cwiseMax(0.0));
}

TEST(GinForward, TrainModeUpdatesRunningStatistics) {
  std::mt19937_64 rng(5);
  GinParams p = init_gin(2, 3, 1, rng);
  auto f = random_batch(rng, 2, 2);
  GinCache cache;
  gin_forward(f.batch, p, Mode::Train, &cache);
  const Matrix& pre = cache.layers[0].pre_norm;
  const Matrix mean = pre.colwise().mean();
  EXPECT_LE((p.layers[0].norm.running_mean - 0.1 * mean).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(GinForward, EvalModeIsPureAndDeterministic) {
  std::mt19937_64 rng(6);
  const GinParams p = init_gin(2, 4, 2, rng);
  auto f = random_batch(rng, 3, 2);
  const GinParams before = p;
  EXPECT_EQ(gin_infer(f.batch, p), gin_infer(f.batch, p));
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    EXPECT_EQ(p.layers[l].norm.running_mean, before.layers[l].norm.running_mean);
    EXPECT_EQ(p.layers[l].norm.running_var, before.layers[l].norm.running_var);
  }
}

TEST(GinForward, PermutationEquivariant) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    GinParams p = init_gin(3, 5, 2, rng);
    const Matrix a = random_adjacency(6, 0.4, rng);
    const Matrix x = random_matrix(6, 3, rng);
    const auto perm = random_permutation(6, rng);
    const Matrix pa = permute_symmetric(a, perm);
    const Matrix px = permute_rows(x, perm);
    const Matrix out = gin_forward_batch_stats(make_batch({&a}, {&x}), p);
    const Matrix pout = gin_forward_batch_stats(make_batch({&pa}, {&px}), p);
    EXPECT_LE((pout - permute_rows(out, perm)).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(GinBackward, ZeroUpstreamGivesZeroGradients) {
  std::mt19937_64 rng(8);
  GinParams p = init_gin(2, 4, 2, rng);
  auto f = random_batch(rng, 2, 2);
  GinCache cache;
  const Matrix out = gin_forward(f.batch, p, Mode::Train, &cache);
  GinParams g = zeros_like(p);
  const Matrix dx = gin_backward(cache, p, Matrix::Zero(out.rows(), out.cols()), g);
  EXPECT_EQ(dx.cwiseAbs().maxCoeff(), 0.0);
  std::vector<ParamSlot> slots;
  collect_slots(p, g, slots);
  for (const auto& s : slots)
    for (Eigen::Index i = 0; i < s.size; ++i) EXPECT_EQ(s.grad[i], 0.0);
}

TEST(GinBackward, MatchesFiniteDifferences) {
  std::mt19937_64 rng(9);
  int checked = 0;
  for (int trial = 0; trial < 1000 && checked < 50; ++trial) {
    GinParams p = init_gin(3, 4, 2, rng);
    perturb(p, rng);
    auto f = random_batch(rng, 1 + trial % 3, 3);
    const Matrix probe = random_matrix(static_cast<int>(f.batch.features.rows()), 8, rng, -1.0, 1.0);
    auto loss = [&] { return (gin_forward_batch_stats(f.batch, p).array() * probe.array()).sum(); };
    GinCache cache;
    gin_forward_batch_stats(f.batch, p, &cache);
    if (near_relu_kink(cache)) continue;
    ++checked;
    GinParams g = zeros_like(p);
    const Matrix dx = gin_backward(cache, p, probe, g);
    std::vector<ParamSlot> slots;
    collect_slots(p, g, slots);
    slots.push_back(slot(f.batch.features, dx));
    check_slots(slots, loss, 1e-5, 1e-4, "trial " + std::to_string(trial));
  }
  EXPECT_EQ(checked, 50);
}

TEST(GinBackward, RejectsMismatchedUpstream) {
  std::mt19937_64 rng(10);
  GinParams p = init_gin(2, 3, 1, rng);
  auto f = random_batch(rng, 1, 2);
  GinCache cache;
  gin_forward(f.batch, p, Mode::Train, &cache);
  GinParams g = zeros_like(p);
  EXPECT_THROW(gin_backward(cache, p, Matrix::Zero(1, 3), g), ValidationError);
}

TEST(Mlp, NoDropoutMeansTrainEqualsEval) {
  std::mt19937_64 rng(11);
  const MlpParams p = init_mlp(5, {8, 8}, 3, 0.0, rng);
  const Matrix x = random_matrix(4, 5, rng);
  EXPECT_EQ(mlp_forward(x, p, Mode::Train, &rng), mlp_forward(x, p, Mode::Eval));
}

TEST(Mlp, ZeroInputZeroBiasesGiveZeroLogits) {
  std::mt19937_64 rng(12);
  MlpParams p = init_mlp(5, {8, 8}, 3, 0.0, rng);
  for (auto& l : p.layers) l.bias.setZero();
  EXPECT_EQ(mlp_forward(Matrix::Zero(2, 5), p, Mode::Eval), Matrix::Zero(2, 3));
}

TEST(Mlp, InvertedDropoutScalesKeptUnits) {
  std::mt19937_64 rng(13);
  const MlpParams p = init_mlp(3, {2000}, 2, 0.5, rng);
  MlpCache cache;
  mlp_forward(Matrix::Ones(1, 3), p, Mode::Train, &rng, &cache);
  const Matrix& mask = cache.masks[0];
  const auto kept = (mask.array() > 0).count();
  EXPECT_NEAR(static_cast<double>(kept) / 2000.0, 0.5, 0.05);
  EXPECT_EQ(mask.maxCoeff(), 2.0);
}

TEST(Mlp, BackwardMatchesFiniteDifferences) {
  std::mt19937_64 rng(14);
  for (int trial = 0; trial < 50; ++trial) {
    const double rate = trial % 3 == 0 ? 0.0 : (trial % 3 == 1 ? 0.2 : 0.5);
    MlpParams p = init_mlp(4, {6, 5}, 3, rate, rng);
    Matrix x = random_matrix(3, 4, rng, -1.0, 1.0);
    const Matrix probe = random_matrix(3, 3, rng, -1.0, 1.0);
    const auto mask_seed = rng();
    auto loss = [&] {
      std::mt19937_64 masks(mask_seed);
      return (mlp_forward(x, p, Mode::Train, &masks).array() * probe.array()).sum();
    };
    std::mt19937_64 masks(mask_seed);
    MlpCache cache;
    mlp_forward(x, p, Mode::Train, &masks, &cache);
    MlpParams g = zeros_like(p);
    const Matrix dx = mlp_backward(cache, p, probe, g);
    std::vector<ParamSlot> slots;
    collect_slots(p, g, slots);
    slots.push_back(slot(x, dx));
    check_slots(slots, loss, 1e-5, 1e-4, "trial " + std::to_string(trial));
  }
}

TEST(Mlp, RejectsDimensionMismatch) {
  std::mt19937_64 rng(15);
  const MlpParams p = init_mlp(4, {6}, 2, 0.0, rng);
  EXPECT_THROW(mlp_forward(Matrix::Zero(1, 5), p, Mode::Eval), ValidationError);
}

TEST(CrossEntropy, UniformLogitsTwoClasses) {
  const auto r = cross_entropy(Matrix::Zero(1, 2), {1});
  EXPECT_NEAR(r.loss, std::log(2.0), 1e-15);
}

TEST(CrossEntropy, GradientRowsSumToZero) {
  std::mt19937_64 rng(16);
  const auto r = cross_entropy(random_matrix(5, 4, rng, -3, 3), {0, 1, 2, 3, 0});
  for (Eigen::Index i = 0; i < 5; ++i) EXPECT_NEAR(r.grad.row(i).sum(), 0.0, 1e-15);
}

TEST(CrossEntropy, MatchesFiniteDifferences) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 50; ++trial) {
    Matrix logits = random_matrix(3, 4, rng, -3, 3);
    const std::vector<int> labels{static_cast<int>(rng() % 4), static_cast<int>(rng() % 4), static_cast<int>(rng() % 4)};
    const auto r = cross_entropy(logits, labels);
    for (Eigen::Index i = 0; i < logits.size(); ++i) {
      const double keep = logits.data()[i];
      logits.data()[i] = keep + 1e-6;
      const double up = cross_entropy(logits, labels).loss;
      logits.data()[i] = keep - 1e-6;
      const double down = cross_entropy(logits, labels).loss;
      logits.data()[i] = keep;
      EXPECT_NEAR(r.grad.data()[i], (up - down) / 2e-6, 1e-6);
    }
  }
}

TEST(CrossEntropy, RejectsLabelOutOfRange) {
  EXPECT_THROW(cross_entropy(Matrix::Zero(1, 2), {2}), ValidationError);
  EXPECT_THROW(cross_entropy(Matrix::Zero(1, 2), {-1}), ValidationError);
}

TEST(Adam, ZeroGradientLeavesParameters) {
  Matrix w = Matrix::Constant(2, 2, 0.7);
  const Matrix g = Matrix::Zero(2, 2);
  AdamState s;
  adam_step({slot(w, g)}, s);
  EXPECT_EQ(w, Matrix::Constant(2, 2, 0.7));
  EXPECT_EQ(s.step, 1);
}

TEST(Adam, FirstStepIsSignedLearningRate) {
  Matrix w = Matrix::Zero(1, 3);
  Matrix g(1, 3);
  g << 0.5, -2.0, 1e-3;
  AdamState s;
  s.options.learning_rate = 0.01;
  adam_step({slot(w, g)}, s);
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(w(0, i), -0.01 * g(0, i) / (std::abs(g(0, i)) + 1e-8), 1e-15);
}

TEST(Adam, IdenticalRunsAreBitIdentical) {
  auto run = [] {
    std::mt19937_64 rng(18);
    Matrix w = random_matrix(3, 3, rng);
    AdamState s;
    for (int step = 0; step < 20; ++step) {
      const Matrix g = random_matrix(3, 3, rng, -1, 1);
      adam_step({slot(w, g)}, s);
    }
    return w;
  };
  EXPECT_EQ(run(), run());
}
