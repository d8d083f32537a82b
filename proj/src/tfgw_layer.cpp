#include "tfgw/tfgw_layer.hpp"

#include <algorithm>
#include <functional>
#include <string>

namespace tfgw {

namespace {

std::vector<Eigen::Index> active_nodes(const Template& t) {
  std::vector<Eigen::Index> idx;
  for (Eigen::Index k = 0; k < t.weights.size(); ++k)
    if (t.weights[k] > 0.0) idx.push_back(k);
  return idx;
}

void check_template(const Template& t, std::size_t k, Eigen::Index feature_dim) {
  const auto n = t.weights.size();
  if (t.structure.rows() != n || t.structure.cols() != n || t.features.rows() != n)
    throw ValidationError("template " + std::to_string(k) + ": inconsistent sizes");
  if (t.features.cols() != feature_dim)
    throw ValidationError("template " + std::to_string(k) + ": feature dimension " +
                          std::to_string(t.features.cols()) + " != graph feature dimension " +
                          std::to_string(feature_dim));
  if ((t.weights.array() < 0.0).any()) throw ValidationError("template " + std::to_string(k) + ": negative weight");
  if (std::abs(t.weights.sum() - 1.0) > 1e-9)
    throw ValidationError("template " + std::to_string(k) + ": weights do not sum to 1");
  if (t.active_size() == 0) throw ValidationError("template " + std::to_string(k) + ": no node with positive weight");
}

}  // namespace

TfgwForwardRecord tfgw_forward(const Graph& graph, const std::vector<Template>& templates, double alpha,
                               const CgOptions& options) {
  if (templates.empty()) throw ValidationError("at least one template is required");
  const auto feature_dim = graph.features.cols();
  TfgwForwardRecord rec;
  const auto K = templates.size();
  rec.distances.resize(static_cast<Eigen::Index>(K));
  rec.couplings.resize(K);
  rec.parts.resize(K);
  rec.degenerate.resize(K);
  for (std::size_t k = 0; k < K; ++k) {
    const Template& t = templates[k];
    check_template(t, k, feature_dim);
    const auto idx = active_nodes(t);
    const auto m = static_cast<Eigen::Index>(idx.size());
    Matrix sub_structure(m, m);
    Matrix sub_features(m, feature_dim);
    Vector sub_weights(m);
    for (Eigen::Index a = 0; a < m; ++a) {
      sub_weights[a] = t.weights[idx[a]];
      sub_features.row(a) = t.features.row(idx[a]);
      for (Eigen::Index b = 0; b < m; ++b) sub_structure(a, b) = t.structure(idx[a], idx[b]);
    }
    sub_weights /= sub_weights.sum();
    const Matrix cost = feature_cost(graph.features, sub_features);
    FgwResult r = solve_fgw(graph.structure, graph.weights, sub_structure, sub_weights, cost, alpha, options);

    Coupling full;
    full.plan = Matrix::Zero(graph.structure.rows(), t.weights.size());
    full.target_marginal = Vector::Zero(t.weights.size());
    for (Eigen::Index a = 0; a < m; ++a) {
      full.plan.col(idx[a]) = r.coupling.plan.col(a);
      full.target_marginal[idx[a]] = r.coupling.target_marginal[a];
    }
    full.source_marginal = r.coupling.source_marginal;
    rec.distances[static_cast<Eigen::Index>(k)] = r.value;
    rec.couplings[k] = std::move(full);
    rec.parts[k] = {r.gw_part, r.w_part};
    rec.degenerate[k] = r.degenerate;
  }
  return rec;
}

TfgwGrads zero_grads(const std::vector<Template>& templates, Eigen::Index nodes, Eigen::Index feature_dim) {
  TfgwGrads g;
  g.templates.reserve(templates.size());
  for (const auto& t : templates)
    g.templates.push_back({Matrix::Zero(t.structure.rows(), t.structure.cols()),
                           Matrix::Zero(t.features.rows(), t.features.cols()), Vector::Zero(t.weights.size())});
  g.features = Matrix::Zero(nodes, feature_dim);
  return g;
}

TfgwGrads tfgw_backward(const Graph& graph, const std::vector<Template>& templates, double alpha,
                        const TfgwForwardRecord& record, const Vector& upstream) {
  const auto K = templates.size();
  if (record.couplings.size() != K || static_cast<std::size_t>(upstream.size()) != K)
    throw ValidationError("tfgw_backward: record/upstream size does not match template count");
  TfgwGrads g = zero_grads(templates, graph.structure.rows(), graph.features.cols());
  const Matrix& C = graph.structure;
  const Matrix& F = graph.features;
  const Vector& h = graph.weights;
  for (std::size_t k = 0; k < K; ++k) {
    const double w = upstream[static_cast<Eigen::Index>(k)];
    if (w == 0.0) continue;
    const Template& t = templates[k];
    const Matrix& T = record.couplings[k].plan;
    const Vector& hb = t.weights;
    const Matrix& Cb = t.structure;
    const Matrix& Fb = t.features;
    auto& out = g.templates[k];

    const Matrix TtCT = T.transpose() * C * T;
    out.structure = w * 2.0 * alpha * (Cb.cwiseProduct(hb * hb.transpose()) - TtCT);
    out.features = w * 2.0 * (1.0 - alpha) * (hb.asDiagonal() * Fb - T.transpose() * F);
    out.weights = w * (2.0 * alpha * (Cb.cwiseProduct(Cb) * hb) +
                       (1.0 - alpha) * Fb.rowwise().squaredNorm());
    const auto [gw, wp] = record.parts[k];
    g.alpha += w * (gw - wp);
    g.features += w * 2.0 * (1.0 - alpha) * (h.asDiagonal() * F - T * Fb);
  }
  return g;
}

Vector simplex_project(const Vector& v) {
  const auto n = v.size();
  if (n == 0) throw ValidationError("cannot project an empty vector");
  if (!v.allFinite()) throw ValidationError("cannot project a non-finite vector");
  if ((v.array() >= 0.0).all() && std::abs(v.sum() - 1.0) <= 1e-15) return v;
  std::vector<double> s(v.data(), v.data() + n);
  std::sort(s.begin(), s.end(), std::greater<>());
  double running = 0.0;
  double theta = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) {
    running += s[static_cast<std::size_t>(j)];
    const double candidate = (running - 1.0) / static_cast<double>(j + 1);
    if (s[static_cast<std::size_t>(j)] - candidate > 0.0) theta = candidate;
  }
  return (v.array() - theta).cwiseMax(0.0).matrix();
}

void apply_constraints(std::vector<Template>& templates, double& alpha, StructureKind kind, bool project_weights) {
  for (auto& t : templates) {
    Matrix sym = 0.5 * (t.structure + t.structure.transpose());
    sym = sym.cwiseMax(0.0);
    if (kind == StructureKind::Adjacency) sym = sym.cwiseMin(1.0);
    t.structure = std::move(sym);
    if (project_weights) t.weights = simplex_project(t.weights);
  }
  alpha = std::clamp(alpha, 0.0, 1.0);
}

}  // namespace tfgw
