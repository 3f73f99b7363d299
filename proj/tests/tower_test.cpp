// Copyright 2026 The relmatch Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "relmatch/error.hpp"
#include "relmatch/encoder/encoder.hpp"
#include "relmatch/tower/tower.hpp"
#include "support/fixtures.hpp"
#include "support/gradcheck.hpp"

namespace relmatch {
namespace {

using ad::Graph;
using ad::ParamStore;
using ad::Tensor;
using ad::Var;
using testing::grad_check;
using testing::MiniWorld;
using testing::project;
using testing::tiny_encoder;

constexpr double kTol = 1e-4;

std::vector<text::EncodedSequence> encode_instances(const MiniWorld& w, std::size_t len) {
  std::vector<text::EncodedSequence> out;
  for (const auto& inst : w.instances) out.push_back(text::encode_instance(inst, w.vocab, len));
  return out;
}

std::vector<text::EncodedSequence> encode_descriptions(const MiniWorld& w, std::size_t len) {
  std::vector<text::EncodedSequence> out;
  for (const auto& d : w.descriptions) out.push_back(text::encode_description(d, w.vocab, len));
  return out;
}

TEST(Encoder, InitIsDeterministicPerSeed) {
  encoder::Encoder<double> enc(tiny_encoder(30), "e");
  ParamStore<double> a, b, c;
  enc.init_params(a, 1);
  enc.init_params(b, 1);
  enc.init_params(c, 2);
  EXPECT_EQ(a.checksum(), b.checksum());
  EXPECT_NE(a.checksum(), c.checksum());
  EXPECT_EQ(a.names(), c.names());
}

TEST(Encoder, ConfigValidation) {
  auto c = tiny_encoder(30);
  c.heads = 3;
  EXPECT_THROW(c.validate(), ConfigError);
  c = tiny_encoder(0);
  EXPECT_THROW(c.validate(), ConfigError);
  c = tiny_encoder(30);
  c.max_len = 7;
  EXPECT_THROW(c.validate(), ConfigError);
  c = tiny_encoder(30);
  c.dropout = 1.0;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Encoder, TrailingPadsDoNotChangeRealPositions) {
  MiniWorld w;
  encoder::Encoder<double> enc(tiny_encoder(w.vocab.size(), 16), "e");
  ParamStore<double> p;
  enc.init_params(p, 3);
  auto& inst = w.instances[0];
  text::EncodedSequence short_seq = text::encode_instance(inst, w.vocab, 8);
  text::EncodedSequence long_seq = text::encode_instance(inst, w.vocab, 12);
  Graph<double> g(ad::GradMode::kInference);
  const Tensor<double>& a = enc.forward(g, p, short_seq, false).value();
  const Tensor<double>& b = enc.forward(g, p, long_seq, false).value();
  for (std::size_t pos = 0; pos < short_seq.length; ++pos) {
    for (std::size_t c = 0; c < 16; ++c) EXPECT_NEAR(a.at(pos, c), b.at(pos, c), 1e-12);
  }
  // Batched with a longer sequence gives the same states as alone.
  const auto others = encode_instances(w, 12);
  const text::EncodedSequence* both[] = {&long_seq, &others[1]};
  auto bh = enc.forward_batch(g, p, both, false);
  for (std::size_t pos = 0; pos < long_seq.length; ++pos) {
    for (std::size_t c = 0; c < 16; ++c) EXPECT_NEAR(bh.hidden.value().at(bh.row(0, pos), c), b.at(pos, c), 1e-12);
  }
}

TEST(Encoder, SwappingTokensChangesOutput) {
  MiniWorld w;
  encoder::Encoder<double> enc(tiny_encoder(w.vocab.size(), 16), "e");
  ParamStore<double> p;
  enc.init_params(p, 4);
  text::EncodedSequence s = text::encode_instance(w.instances[1], w.vocab, 12);
  text::EncodedSequence t = s;
  std::swap(t.ids[4], t.ids[5]);
  Graph<double> g(ad::GradMode::kInference);
  const Tensor<double>& a = enc.forward(g, p, s, false).value();
  const Tensor<double>& b = enc.forward(g, p, t, false).value();
  double diff = 0;
  for (std::size_t c = 0; c < 16; ++c) diff += std::abs(a.at(0, c) - b.at(0, c));
  EXPECT_GT(diff, 1e-6);
}

TEST(Encoder, InitialActivationScaleIsSane) {
  MiniWorld w;
  auto cfg = tiny_encoder(w.vocab.size(), 32);
  cfg.heads = 4;
  encoder::Encoder<double> enc(cfg, "e");
  ParamStore<double> p;
  enc.init_params(p, 5);
  Graph<double> g(ad::GradMode::kInference);
  for (const auto& s : encode_instances(w, 12)) {
    const Tensor<double>& h = enc.forward(g, p, s, false).value();
    double sum = 0, sq = 0;
    for (double v : h.values()) {
      sum += v;
      sq += v * v;
    }
    const double n = static_cast<double>(h.size());
    const double sd = std::sqrt(sq / n - (sum / n) * (sum / n));
    EXPECT_GE(sd, 0.1);
    EXPECT_LE(sd, 10.0);
  }
}

TEST(Encoder, GradientMatchesFiniteDifferences) {
  MiniWorld w;
  auto cfg = tiny_encoder(w.vocab.size(), 16);
  cfg.heads = 4;
  encoder::Encoder<double> enc(cfg, "e");
  ParamStore<double> p;
  enc.init_params(p, 6);
  auto seqs = encode_instances(w, 12);
  auto ptrs = encoder::pointers(seqs);
  auto r = grad_check(p, [&](Graph<double>& g, ParamStore<double>& ps) {
    return project(g, enc.forward_batch(g, ps, ptrs, true).hidden);
  }, {}, 24);
  EXPECT_LT(r.relative_error, kTol) << r.worst;
  EXPECT_GT(r.checked, 200u);
}

TEST(WeightPool, SingleRealTokenTakesAllWeight) {
  Graph<double> g;
  Var<double> h = g.constant(Tensor<double>({3, 2}, {1, 2, 3, 4, 5, 6}));
  Var<double> wt = g.constant(Tensor<double>({2, 1}, {0.3, -0.7}));
  Var<double> b = g.constant(Tensor<double>::scalar(0.1));
  const std::vector<std::uint8_t> mask{0, 1, 0};
  auto pooled = tower::weight_pool(h, mask, wt, b);
  EXPECT_EQ(pooled.weights.value().values()[1], 1.0);
  EXPECT_DOUBLE_EQ(pooled.vector.value()[0], 3.0);
  EXPECT_DOUBLE_EQ(pooled.vector.value()[1], 4.0);
}

TEST(WeightPool, ZeroHeadGivesMaskedMean) {
  std::mt19937_64 rng(7);
  Graph<double> g;
  Tensor<double> hv = ad::random_normal<double>({6, 4}, 1.0, rng);
  Var<double> h = g.constant(hv);
  Var<double> wt = g.constant(Tensor<double>({4, 1}));
  Var<double> b = g.constant(Tensor<double>::scalar(0.0));
  const std::vector<std::uint8_t> mask{1, 1, 0, 1, 1, 0};
  auto pooled = tower::weight_pool(h, mask, wt, b);
  double wsum = 0;
  for (std::size_t i = 0; i < 6; ++i) {
    const double a = pooled.weights.value()[i];
    wsum += a;
    if (mask[i]) {
      EXPECT_NEAR(a, 0.25, 1e-12);
    } else {
      EXPECT_EQ(a, 0.0);
    }
  }
  EXPECT_NEAR(wsum, 1.0, 1e-12);
  for (std::size_t c = 0; c < 4; ++c) {
    const double mean = (hv.at(0, c) + hv.at(1, c) + hv.at(3, c) + hv.at(4, c)) / 4;
    EXPECT_NEAR(pooled.vector.value()[c], mean, 1e-12);
  }
  const std::vector<std::uint8_t> none(6, 0);
  EXPECT_THROW(tower::weight_pool(h, none, wt, b), DataError);
}

TEST(WeightPool, HandComputedThreeTokens) {
  Graph<double> g;
  const double ln2 = std::log(2.0);
  Var<double> h = g.constant(Tensor<double>({3, 2}, {ln2, 1, 0, 2, 0, 3}));
  Var<double> wt = g.constant(Tensor<double>({2, 1}, {1, 0}));
  Var<double> b = g.constant(Tensor<double>::scalar(0.0));
  const std::vector<std::uint8_t> mask{1, 1, 1};
  auto pooled = tower::weight_pool(h, mask, wt, b);
  EXPECT_NEAR(pooled.weights.value()[0], 0.5, 1e-12);
  EXPECT_NEAR(pooled.weights.value()[1], 0.25, 1e-12);
  EXPECT_NEAR(pooled.weights.value()[2], 0.25, 1e-12);
  EXPECT_NEAR(pooled.vector.value()[0], 0.5 * ln2, 1e-12);
  EXPECT_NEAR(pooled.vector.value()[1], 0.5 * 1 + 0.25 * 2 + 0.25 * 3, 1e-12);
}

TEST(WeightPool, MatchesScalarLoop) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 2 + rng() % 8, d = 1 + rng() % 6;
    Tensor<double> hv = ad::random_normal<double>({n, d}, 1.0, rng);
    Tensor<double> wv = ad::random_normal<double>({d, 1}, 1.0, rng);
    const double bias = 0.3;
    std::vector<std::uint8_t> mask(n, 1);
    mask[rng() % n] = 0;
    Graph<double> g;
    auto pooled = tower::weight_pool(g.constant(hv), mask, g.constant(wv), g.constant(Tensor<double>::scalar(bias)));
    std::vector<double> score(n), weight(n, 0.0);
    double mx = -1e300;
    for (std::size_t i = 0; i < n; ++i) {
      score[i] = bias;
      for (std::size_t c = 0; c < d; ++c) score[i] += hv.at(i, c) * wv[c];
      if (mask[i]) mx = std::max(mx, score[i]);
    }
    double z = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (mask[i]) z += weight[i] = std::exp(score[i] - mx);
    }
    for (std::size_t c = 0; c < d; ++c) {
      double v = 0;
      for (std::size_t i = 0; i < n; ++i) v += weight[i] / z * hv.at(i, c);
      EXPECT_NEAR(pooled.vector.value()[c], v, 1e-12);
    }
  }
}

TEST(SpanMean, OneTokenAndAllTokens) {
  std::mt19937_64 rng(9);
  Graph<double> g;
  Tensor<double> hv = ad::random_normal<double>({4, 3}, 1.0, rng);
  Var<double> h = g.constant(hv);
  const Tensor<double>& one = tower::span_mean(h, {2, 2}).value();
  const Tensor<double>& all = tower::span_mean(h, {0, 3}).value();
  for (std::size_t c = 0; c < 3; ++c) {
    EXPECT_EQ(one[c], hv.at(2, c));
    EXPECT_NEAR(all[c], (hv.at(0, c) + hv.at(1, c) + hv.at(2, c) + hv.at(3, c)) / 4, 1e-12);
  }
  EXPECT_THROW(tower::span_mean(h, {3, 4}), DataError);
}

class TowerTest : public ::testing::Test {
 protected:
  MiniWorld w;
  std::vector<text::EncodedSequence> insts = encode_instances(w, 12);
  std::vector<text::EncodedSequence> descs = encode_descriptions(w, 10);
};

TEST_F(TowerTest, InstanceVectorSlicesBackToParts) {
  tower::DualTower<double> t(tiny_encoder(w.vocab.size()), "recall", tower::DescriptionPooling::kVirtualEntity);
  ParamStore<double> p;
  t.init_params(p, 10);
  auto rep = t.represent_instance(p, insts[0]);
  ASSERT_EQ(rep.vec.size(), 24u);
  for (std::size_t i = 0; i < 8; ++i) {
    EXPECT_EQ(rep.vec[i], rep.context[i]);
    EXPECT_EQ(rep.vec[8 + i], rep.head[i]);
    EXPECT_EQ(rep.vec[16 + i], rep.tail[i]);
  }
  Graph<double> g(ad::GradMode::kInference);
  const Tensor<double>& h = t.encoder().forward(g, p, insts[0], false).value();
  for (std::size_t i = 0; i < 8; ++i) {
    EXPECT_EQ(rep.head[i], h.at(*insts[0].head_marker, i));
    EXPECT_EQ(rep.tail[i], h.at(*insts[0].tail_marker, i));
  }
}

TEST_F(TowerTest, TailEntityChangesTailSlot) {
  tower::DualTower<double> t(tiny_encoder(w.vocab.size()), "recall", tower::DescriptionPooling::kVirtualEntity);
  ParamStore<double> p;
  t.init_params(p, 11);
  text::Instance other = w.instances[0];
  other.tokens[2] = "globex";
  auto a = t.represent_instance(p, insts[0]);
  auto b = t.represent_instance(p, text::encode_instance(other, w.vocab, 12));
  EXPECT_NE(a.tail, b.tail);
}

TEST_F(TowerTest, PoolingHeadsSymmetryAndWeights) {
  tower::DualTower<double> t(tiny_encoder(w.vocab.size()), "recall", tower::DescriptionPooling::kVirtualEntity);
  ParamStore<double> p;
  t.init_params(p, 12);
  for (const auto& s : descs) {
    auto rep = t.represent_description(p, s);
    EXPECT_NE(rep.head, rep.tail);
    ASSERT_EQ(rep.head_weights.size(), s.length - 1);
    EXPECT_NEAR(std::accumulate(rep.head_weights.begin(), rep.head_weights.end(), 0.0), 1.0, 1e-9);
    EXPECT_NEAR(std::accumulate(rep.tail_weights.begin(), rep.tail_weights.end(), 0.0), 1.0, 1e-9);
  }
  // Batched descriptions are padded to the longest one: pads get weight 0.
  Graph<double> g(ad::GradMode::kInference);
  auto ptrs = encoder::pointers(descs);
  std::vector<std::pair<Var<double>, Var<double>>> weights;
  t.description_vectors(g, p, ptrs, false, nullptr, &weights);
  for (std::size_t b = 0; b < descs.size(); ++b) {
    const auto& hw = weights[b].first.value();
    double sum = 0;
    for (std::size_t i = 0; i < hw.size(); ++i) {
      sum += hw[i];
      if (i + 1 >= descs[b].length) EXPECT_EQ(hw[i], 0.0);
    }
    EXPECT_NEAR(sum, 1.0, 1e-9);
  }
  p.at(t.head_weight_name(1)).values()[0] = 0;
  std::copy(p.at(t.head_weight_name(0)).values().begin(), p.at(t.head_weight_name(0)).values().end(),
            p.at(t.head_weight_name(1)).values().begin());
  p.at(t.head_bias_name(1))[0] = p.at(t.head_bias_name(0))[0];
  auto same = t.represent_description(p, descs[0]);
  EXPECT_EQ(same.head, same.tail);
}

TEST_F(TowerTest, AnnotatedAndMeanPooling) {
  tower::DualTower<double> ann(tiny_encoder(w.vocab.size()), "recall", tower::DescriptionPooling::kAnnotatedSpans);
  tower::DualTower<double> mean(tiny_encoder(w.vocab.size()), "recall", tower::DescriptionPooling::kMeanPool);
  ParamStore<double> p;
  ann.init_params(p, 13);
  Graph<double> g(ad::GradMode::kInference);
  const auto& s = descs[1];  // "city is capital of country", spans at 1 and 5
  const Tensor<double>& h = ann.encoder().forward(g, p, s, false).value();
  auto a = ann.represent_description(p, s);
  auto m = mean.represent_description(p, s);
  for (std::size_t c = 0; c < 8; ++c) {
    EXPECT_EQ(a.head[c], h.at(1, c));
    EXPECT_EQ(a.tail[c], h.at(5, c));
    double mu = 0;
    for (std::size_t pos = 1; pos < s.length; ++pos) mu += h.at(pos, c);
    EXPECT_NEAR(m.head[c], mu / static_cast<double>(s.length - 1), 1e-12);
    EXPECT_EQ(m.head[c], m.tail[c]);
    EXPECT_EQ(a.context[c], h.at(0, c));
  }
  EXPECT_TRUE(a.head_weights.empty());
  text::EncodedSequence bare = text::encode_description(testing::description("x", "city is capital"), w.vocab, 10);
  EXPECT_THROW(ann.represent_description(p, bare), DataError);
}

TEST_F(TowerTest, InstanceTowerGradient) {
  tower::DualTower<double> t(tiny_encoder(w.vocab.size()), "recall", tower::DescriptionPooling::kVirtualEntity);
  ParamStore<double> p;
  t.init_params(p, 14);
  auto ptrs = encoder::pointers(insts);
  auto r = grad_check(p, [&](Graph<double>& g, ParamStore<double>& ps) {
    return project(g, t.instance_vectors(g, ps, ptrs, true));
  }, t.encoder().param_names(), 24);
  EXPECT_LT(r.relative_error, kTol) << r.worst;
}

TEST_F(TowerTest, DescriptionTowerGradientForEveryPooling) {
  auto ptrs = encoder::pointers(descs);
  for (auto pooling : {tower::DescriptionPooling::kVirtualEntity, tower::DescriptionPooling::kAnnotatedSpans,
                       tower::DescriptionPooling::kMeanPool}) {
    tower::DualTower<double> t(tiny_encoder(w.vocab.size()), "recall", pooling);
    ParamStore<double> p;
    t.init_params(p, 15);
    auto r = grad_check(p, [&](Graph<double>& g, ParamStore<double>& ps) {
      return project(g, t.description_vectors(g, ps, ptrs, true));
    }, t.trainable_names(), 24);
    EXPECT_LT(r.relative_error, kTol) << tower::to_string(pooling) << " " << r.worst;
  }
}

TEST(Pooling, ParseRoundTrip) {
  for (auto p : {tower::DescriptionPooling::kVirtualEntity, tower::DescriptionPooling::kAnnotatedSpans,
                 tower::DescriptionPooling::kMeanPool}) {
    EXPECT_EQ(tower::parse_pooling(tower::to_string(p)), p);
  }
  EXPECT_THROW(tower::parse_pooling("max"), ConfigError);
}

}  // namespace
}  // namespace relmatch
