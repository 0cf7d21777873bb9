#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "ctxrr/errors.hpp"
#include "ctxrr/graph.hpp"
#include "ctxrr/ops.hpp"
#include "test_util.hpp"

namespace ctxrr {
namespace {

using Matrix = std::vector<std::vector<double>>;

Matrix to_matrix(const Tensor& t) {
  Matrix m(t.rows(), std::vector<double>(t.cols()));
  for (std::size_t i = 0; i < t.rows(); ++i) {
    for (std::size_t j = 0; j < t.cols(); ++j) m[i][j] = t.at(i, j);
  }
  return m;
}

Matrix product(const Matrix& a, const Matrix& b) {
  Matrix out(a.size(), std::vector<double>(b[0].size(), 0.0));
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t k = 0; k < b.size(); ++k) {
      for (std::size_t j = 0; j < b[0].size(); ++j) out[i][j] += a[i][k] * b[k][j];
    }
  }
  return out;
}

ContextGraph graph_from(std::vector<double> x, std::size_t nodes, AdjacencyNorm norm = AdjacencyNorm::symmetric) {
  const std::size_t f = x.size() / nodes;
  Tensor adjacency = star_adjacency(nodes);
  return {nodes, f, Tensor::matrix(nodes, f, std::move(x)), adjacency, normalize_adjacency(adjacency, norm)};
}

ContextGraph random_graph(std::size_t nodes, std::size_t f, Rng& rng) {
  std::normal_distribution<double> n(0.0, 0.5);
  std::vector<double> x(nodes * f);
  for (double& v : x) v = n(rng);
  return graph_from(std::move(x), nodes);
}

GcnConfig small_config(std::size_t k, std::size_t width = 16) {
  GcnConfig cfg;
  cfg.k = k;
  cfg.readout_width = width;
  return cfg;
}

TEST(Adjacency, StarGraphWithThreeContexts) {
  const Tensor a = star_adjacency(4);
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = 0; j < 4; ++j) {
      EXPECT_EQ(a.at(i, j), (i == 0 || j == 0 || i == j) ? 1.0 : 0.0);
    }
  }
  const Tensor s = normalize_adjacency(a, AdjacencyNorm::symmetric);
  EXPECT_NEAR(s.at(0, 0), 0.25, 1e-15);
  for (std::size_t j = 1; j < 4; ++j) {
    EXPECT_NEAR(s.at(0, j), 0.35355339059327373, 1e-12);
    EXPECT_NEAR(s.at(j, 0), 0.35355339059327373, 1e-12);
    EXPECT_NEAR(s.at(j, j), 0.5, 1e-15);
  }
  EXPECT_EQ(s.at(1, 2), 0.0);
}

TEST(Adjacency, SingleContextIsAllHalves) {
  const Tensor s = normalize_adjacency(star_adjacency(2), AdjacencyNorm::symmetric);
  for (double v : s.data()) EXPECT_NEAR(v, 0.5, 1e-15);
}

TEST(Adjacency, NormalizationsAgreeWithDegreeFormulas) {
  for (std::size_t n = 2; n <= 8; ++n) {
    const Tensor sym = normalize_adjacency(star_adjacency(n), AdjacencyNorm::symmetric);
    const Tensor row = normalize_adjacency(star_adjacency(n), AdjacencyNorm::row);
    const auto deg = [n](std::size_t i) { return i == 0 ? double(n) : 2.0; };
    for (std::size_t i = 0; i < n; ++i) {
      double row_sum = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        const double a = (i == 0 || j == 0 || i == j) ? 1.0 : 0.0;
        EXPECT_NEAR(sym.at(i, j), a / std::sqrt(deg(i) * deg(j)), 1e-14);
        EXPECT_EQ(sym.at(i, j), sym.at(j, i));
        row_sum += row.at(i, j);
      }
      EXPECT_NEAR(row_sum, 1.0, 1e-14);
    }
  }
}

TEST(BuildGraph, NodeLayout) {
  Rng rng(1);
  const Scene p = testing::make_scene("p", {0, 1, 2}, 3, rng);
  const Scene g = testing::make_scene("g", {0, 3, 4}, 3, rng);
  ExpandedPair ep{&p.instances[0], &g.instances[0], {{&p.instances[2], &g.instances[1], 0.5}}, 1, false};
  const ContextGraph graph = build_graph(ep, small_config(1));
  ASSERT_EQ(graph.nodes, 2u);
  ASSERT_EQ(graph.feature_dim, 6u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(graph.x.at(0, i), p.instances[0].embedding.part(Part::whole)[i]);
    EXPECT_EQ(graph.x.at(0, 3 + i), g.instances[0].embedding.part(Part::whole)[i]);
    EXPECT_EQ(graph.x.at(1, i), p.instances[2].embedding.part(Part::whole)[i]);
    EXPECT_EQ(graph.x.at(1, 3 + i), g.instances[1].embedding.part(Part::whole)[i]);
  }
  GcnConfig all = small_config(1);
  all.features = NodeFeatures::all_parts;
  EXPECT_EQ(build_graph(ep, all).feature_dim, 24u);
  EXPECT_THROW(build_graph(ep, small_config(2)), DataError);
  ep.degenerate = true;
  EXPECT_THROW(build_graph(ep, small_config(1)), DataError);
}

TEST(Gcn, LinearPropagationMatchesMatrixProducts) {
  Rng rng(2);
  GcnConfig cfg = small_config(3);
  cfg.relu = false;
  const GcnParams params = GcnParams::glorot(cfg, 6, rng);
  const ContextGraph g = random_graph(4, 6, rng);
  Matrix want = to_matrix(g.x);
  const Matrix a = to_matrix(g.a_hat);
  for (const Tensor& w : params.layers) want = product(product(a, want), to_matrix(w));
  const Tensor got = gcn_propagate(params, g);
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = 0; j < 6; ++j) EXPECT_NEAR(got.at(i, j), want[i][j], 1e-12);
  }
}

TEST(Gcn, ForwardMatchesExplicitReadout) {
  Rng rng(3);
  const GcnConfig cfg = small_config(2, 8);
  const GcnParams params = GcnParams::glorot(cfg, 4, rng);
  const ContextGraph g = random_graph(3, 4, rng);
  Matrix z = to_matrix(g.x);
  const Matrix a = to_matrix(g.a_hat);
  for (const Tensor& w : params.layers) {
    z = product(product(a, z), to_matrix(w));
    for (auto& row : z) {
      for (double& v : row) v = std::max(v, 0.0);
    }
  }
  std::vector<double> flat;
  for (const auto& row : z) flat.insert(flat.end(), row.begin(), row.end());
  std::vector<double> hidden(8);
  for (std::size_t o = 0; o < 8; ++o) {
    double s = params.readout_b.at(o);
    for (std::size_t i = 0; i < flat.size(); ++i) s += params.readout_w.at(o, i) * flat[i];
    hidden[o] = std::max(s, 0.0);
  }
  double logit[2];
  for (std::size_t c = 0; c < 2; ++c) {
    logit[c] = params.cls_b.at(c);
    for (std::size_t o = 0; o < 8; ++o) logit[c] += params.cls_w.at(c, o) * hidden[o];
  }
  const GcnOutput out = gcn_forward(params, g);
  EXPECT_NEAR(out.logits.at(0), logit[0], 1e-12);
  EXPECT_NEAR(out.logits.at(1), logit[1], 1e-12);
  EXPECT_NEAR(out.score, 1.0 / (1.0 + std::exp(logit[0] - logit[1])), 1e-12);
}

TEST(Gcn, ScoresAreProbabilitiesAndBatchingIsExact) {
  Rng rng(4);
  const GcnParams params = GcnParams::glorot(small_config(3), 6, rng);
  std::vector<ContextGraph> graphs;
  for (int i = 0; i < 20; ++i) graphs.push_back(random_graph(4, 6, rng));
  std::vector<const ContextGraph*> ptrs;
  for (const auto& g : graphs) ptrs.push_back(&g);
  const auto scores = gcn_scores(params, ptrs);
  for (std::size_t i = 0; i < graphs.size(); ++i) {
    EXPECT_GT(scores[i], 0.0);
    EXPECT_LT(scores[i], 1.0);
    EXPECT_NEAR(scores[i], gcn_forward(params, graphs[i]).score, 1e-12);
  }
}

TEST(Gcn, ZeroFeaturesGiveTheBiasOnlyScore) {
  Rng rng(5);
  GcnParams params = GcnParams::glorot(small_config(3), 6, rng);
  params.readout_b.mutable_data()[0] = 0.7;
  params.cls_b.mutable_data()[1] = -0.2;
  const ContextGraph sym = graph_from(std::vector<double>(24, 0.0), 4);
  const ContextGraph row = graph_from(std::vector<double>(24, 0.0), 4, AdjacencyNorm::row);
  double l[2];
  for (std::size_t c = 0; c < 2; ++c) l[c] = params.cls_b.at(c) + params.cls_w.at(c, 0) * 0.7;
  const double want = 1.0 / (1.0 + std::exp(l[0] - l[1]));
  EXPECT_NEAR(gcn_forward(params, sym).score, want, 1e-12);
  EXPECT_EQ(gcn_forward(params, sym).score, gcn_forward(params, row).score);
}

TEST(Gcn, RejectsMismatchedGraphs) {
  Rng rng(6);
  const GcnParams params = GcnParams::glorot(small_config(3), 6, rng);
  EXPECT_THROW(gcn_forward(params, random_graph(3, 6, rng)), ConfigError);
  EXPECT_THROW(gcn_forward(params, random_graph(4, 4, rng)), DimensionError);
}

TEST(Gcn, CheckpointRoundTrip) {
  Rng rng(7);
  GcnConfig cfg = small_config(2, 12);
  cfg.layers = 2;
  cfg.norm = AdjacencyNorm::row;
  const GcnParams params = GcnParams::glorot(cfg, 4, rng);
  const auto bytes = encode_checkpoint(params.to_checkpoint());
  const GcnParams back = GcnParams::from_checkpoint(decode_checkpoint(bytes));
  EXPECT_EQ(back.config.k, 2u);
  EXPECT_EQ(back.config.layers, 2u);
  EXPECT_EQ(back.config.norm, AdjacencyNorm::row);
  EXPECT_EQ(encode_checkpoint(back.to_checkpoint()), bytes);
  const ContextGraph g = random_graph(3, 4, rng);
  EXPECT_EQ(gcn_forward(back, g).score, gcn_forward(params, g).score);
}

TEST(FeatureTransform, RelabelsEveryBlock) {
  Rng rng(8);
  const FeatureTransform t = random_feature_transform(5, rng);
  std::vector<std::size_t> sorted = t.perm;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < 5; ++i) {
    EXPECT_EQ(sorted[i], i);
    EXPECT_EQ(std::abs(t.sign[i]), 1.0);
  }
  std::vector<double> v(30);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = double(i) + 1.0;
  const Tensor x = Tensor::matrix(3, 10, v);
  const Tensor y = transform_features(x, t);
  for (std::size_t block = 0; block < 6; ++block) {
    for (std::size_t i = 0; i < 5; ++i) {
      EXPECT_EQ(y.data()[block * 5 + i], t.sign[i] * v[block * 5 + t.perm[i]]);
    }
  }
  EXPECT_THROW(transform_features(Tensor::matrix(2, 4, std::vector<double>(8)), t), DimensionError);
}

TEST(FeatureTransform, AugmentationNeedsAView) {
  EXPECT_THROW((GraphAugmentation{0, true}.validate()), ConfigError);
  EXPECT_NO_THROW((GraphAugmentation{3, false}.validate()));
}

// Label 1 graphs are shifted up along the first coordinate, label 0 down.
std::vector<GraphSample> separable_samples(std::size_t n, Rng& rng) {
  std::vector<GraphSample> out;
  std::normal_distribution<double> noise(0.0, 0.3);
  for (std::size_t i = 0; i < n; ++i) {
    const int label = int(i % 2);
    std::vector<double> x(2 * 4);
    for (double& v : x) v = noise(rng);
    for (std::size_t node = 0; node < 2; ++node) x[node * 4] += label ? 1.0 : -1.0;
    out.push_back({graph_from(std::move(x), 2), label});
  }
  return out;
}

TEST(GcnTraining, SeparableGraphsAreLearned) {
  Rng rng(9);
  const auto samples = separable_samples(200, rng);
  const GcnConfig cfg = small_config(1, 16);
  const GcnTrainResult r = train_gcn(samples, SgdConfig{}, cfg);
  ASSERT_EQ(r.epoch_loss.size(), 20u);
  EXPECT_LT(r.epoch_loss.back(), r.epoch_loss.front());
  EXPECT_GT(r.train_accuracy, 0.95);
  EXPECT_DOUBLE_EQ(gcn_accuracy(r.params, samples), r.train_accuracy);
}

TEST(GcnTraining, DeterministicForASeed) {
  Rng rng(10);
  const auto samples = separable_samples(40, rng);
  SgdConfig sgd;
  sgd.epochs = 2;
  const auto a = train_gcn(samples, sgd, small_config(1, 8), {2, true});
  const auto b = train_gcn(samples, sgd, small_config(1, 8), {2, true});
  EXPECT_EQ(a.epoch_loss, b.epoch_loss);
  EXPECT_EQ(encode_checkpoint(a.params.to_checkpoint()), encode_checkpoint(b.params.to_checkpoint()));
}

TEST(GcnTraining, NeedsBothClasses) {
  Rng rng(11);
  auto samples = separable_samples(10, rng);
  for (auto& s : samples) s.label = 1;
  EXPECT_THROW(train_gcn(samples, SgdConfig{}, small_config(1, 8)), DataError);
}

}  // namespace
}  // namespace ctxrr
