// Copyright 2026 The relmatch Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "relmatch/error.hpp"
#include "relmatch/rerank/model.hpp"
#include "relmatch/rerank/rerank.hpp"
#include "relmatch/rerank/training.hpp"
#include "support/fixtures.hpp"
#include "support/gradcheck.hpp"

namespace relmatch::rerank {
namespace {

using ad::Graph;
using ad::ParamStore;
using ad::Tensor;
using ad::Var;
using testing::MiniWorld;
using testing::tiny_encoder;

double scalar_cross_entropy(const std::vector<double>& logits, std::size_t gold) {
  double z = 0;
  for (double l : logits) z += std::exp(l);
  return -std::log(std::exp(logits[gold]) / z);
}

TEST(RerankLoss, UniformLogitsGiveLogTwo) {
  const std::vector<double> zero{0.0, 0.0};
  EXPECT_NEAR(rerank_loss(zero, 0), std::log(2.0), 1e-12);
  EXPECT_NEAR(std::log(2.0), 0.6931, 1e-4);
  const std::vector<double> three{1.5, 1.5, 1.5};
  EXPECT_NEAR(rerank_loss(three, 2), std::log(3.0), 1e-12);
}

TEST(RerankLoss, DecreasesAsGoldLogitGrows) {
  double prev = 1e300;
  for (double g = -5; g <= 30; g += 0.5) {
    const std::vector<double> logits{0.3, g, -1.0};
    const double l = rerank_loss(logits, 1);
    EXPECT_LT(l, prev);
    EXPECT_GE(l, 0.0);
    prev = l;
  }
  EXPECT_LT(prev, 1e-12);
}

TEST(RerankLoss, MatchesScalarComputationAndRejectsBadGold) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> nd(0.0, 3.0);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t k = 2 + rng() % 5;
    std::vector<double> logits(k);
    for (double& l : logits) l = nd(rng);
    const std::size_t gold = rng() % k;
    EXPECT_NEAR(rerank_loss(logits, gold), scalar_cross_entropy(logits, gold), 1e-9);
  }
  const std::vector<double> two{0.0, 1.0};
  EXPECT_THROW(rerank_loss(two, 2), ConfigError);
}

TEST(TrainingCandidates, GoldPlusBestNegative) {
  std::mt19937_64 rng(2);
  const std::vector<double> scores{0.1, 0.9, 0.5, 0.7};
  const std::vector<std::string> rels{"a", "b", "c", "d"};
  for (int i = 0; i < 50; ++i) {
    TrainingCandidates tc = select_training_candidates(scores, 1, rels, 2, rng);
    std::set<std::size_t> got(tc.order.begin(), tc.order.end());
    EXPECT_EQ(got, (std::set<std::size_t>{1, 3}));
    EXPECT_EQ(tc.order[tc.gold_position], 1u);
  }
  // Gold carrying the lowest score is still included; ties go to the smaller id.
  const std::vector<double> tied{0.5, 0.5, 0.5, 0.1};
  TrainingCandidates tc = select_training_candidates(tied, 3, rels, 3, rng);
  std::set<std::size_t> got(tc.order.begin(), tc.order.end());
  EXPECT_EQ(got, (std::set<std::size_t>{0, 1, 3}));
  EXPECT_THROW(select_training_candidates(scores, 0, rels, 5, rng), DataError);
  EXPECT_THROW(select_training_candidates(scores, 4, rels, 2, rng), ConfigError);
}

TEST(TrainingCandidates, GoldNeverRepeatsAndPositionIsUniform) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> nd;
  const std::vector<std::string> rels{"a", "b", "c", "d", "e", "f"};
  for (std::size_t k : {2u, 3u, 4u}) {
    std::vector<int> counts(k, 0);
    const int draws = 1000;
    for (int i = 0; i < draws; ++i) {
      std::vector<double> scores(6);
      for (double& s : scores) s = nd(rng);
      const std::size_t gold = rng() % 6;
      TrainingCandidates tc = select_training_candidates(scores, gold, rels, k, rng);
      ASSERT_EQ(tc.order.size(), k);
      EXPECT_EQ(std::count(tc.order.begin(), tc.order.end(), gold), 1);
      EXPECT_EQ(std::set<std::size_t>(tc.order.begin(), tc.order.end()).size(), k);
      ++counts[tc.gold_position];
    }
    for (int c : counts) {
      EXPECT_NEAR(static_cast<double>(c) / draws, 1.0 / static_cast<double>(k), 0.05) << "k=" << k;
    }
  }
}

class CrossEncoderTest : public ::testing::Test {
 protected:
  MiniWorld w;
  encoder::EncoderConfig cfg = tiny_encoder(w.vocab.size());

  std::vector<text::EncodedSequence> pairs(const text::Instance& inst, const std::vector<std::string>& rels) {
    std::vector<text::EncodedSequence> out;
    for (const auto& r : rels) out.push_back(text::encode_pair(inst, w.catalog.at(r), w.vocab, 12));
    return out;
  }
};

// The head output starts at zero; gradient checks need it nonzero so every
// upstream parameter receives a gradient.
void randomize_head_output(ParamStore<double>& p, const std::string& prefix, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (const char* n : {".mlp.w2", ".mlp.b2"}) {
    Tensor<double>& t = p.entry(prefix + n).tensor;
    t = ad::random_normal<double>(t.shape(), 0.5, rng);
  }
}

TEST_F(CrossEncoderTest, FreshHeadIsUniform) {
  CrossEncoder<double> cross(cfg, "rerank", 3, 16);
  ParamStore<double> p;
  cross.init_params(p, 4);
  CandidateSet cands;
  cands.relations = {"capital", "founder", "river"};
  for (const auto& inst : w.instances) {
    for (double v : rerank_forward(cross, p, inst, cands, w.catalog, w.vocab, 12)) EXPECT_EQ(v, 1.0 / 3.0);
  }
}

TEST_F(CrossEncoderTest, ProbabilitiesFormASimplex) {
  CrossEncoder<double> cross(cfg, "rerank", 3, 16);
  ParamStore<double> p;
  cross.init_params(p, 4);
  randomize_head_output(p, "rerank", 5);
  CandidateSet cands;
  cands.relations = {"capital", "founder", "river"};
  encoder::EncodingCounter counter;
  for (const auto& inst : w.instances) {
    auto probs = rerank_forward(cross, p, inst, cands, w.catalog, w.vocab, 12, &counter);
    ASSERT_EQ(probs.size(), 3u);
    for (double v : probs) EXPECT_GE(v, 0.0);
    EXPECT_NEAR(std::accumulate(probs.begin(), probs.end(), 0.0), 1.0, 1e-9);
  }
  EXPECT_EQ(counter.pairs(), 3 * w.instances.size());
  CandidateSet two;
  two.relations = {"capital", "founder"};
  EXPECT_THROW(rerank_forward(cross, p, w.instances[0], two, w.catalog, w.vocab, 12), ConfigError);
}

TEST_F(CrossEncoderTest, DuplicatedCandidateWithZeroHeadIsUniform) {
  for (std::size_t k : {2u, 3u, 4u}) {
    CrossEncoder<double> cross(cfg, "rerank", k, 16);
    ParamStore<double> p;
    cross.init_params(p, 5);
    for (const auto& n : cross.head_names()) {
      for (double& v : p.at(n).values()) v = 0;
    }
    CandidateSet cands;
    cands.relations.assign(k, "founder");
    auto probs = rerank_forward(cross, p, w.instances[0], cands, w.catalog, w.vocab, 12);
    for (double v : probs) EXPECT_NEAR(v, 1.0 / static_cast<double>(k), 1e-12);
    // Only the head needs to be symmetric: any head on identical slots gives equal
    // inputs, so a zeroed second layer alone also yields 1/k.
    cross.init_params(p = ParamStore<double>(), 6);
    for (const auto& n : {cross.head_names()[2], cross.head_names()[3]}) {
      for (double& v : p.at(n).values()) v = 0;
    }
    probs = rerank_forward(cross, p, w.instances[0], cands, w.catalog, w.vocab, 12);
    for (double v : probs) EXPECT_NEAR(v, 1.0 / static_cast<double>(k), 1e-12);
  }
}

TEST_F(CrossEncoderTest, HeadRecordsItsK) {
  CrossEncoder<double> two(cfg, "rerank", 2, 16);
  CrossEncoder<double> three(cfg, "rerank", 3, 16);
  ParamStore<double> p;
  two.init_params(p, 7);
  EXPECT_NO_THROW(two.check_head(p));
  EXPECT_THROW(three.check_head(p), ConfigError);
  EXPECT_THROW(CrossEncoder<double>(cfg, "rerank", 1, 16), ConfigError);
  EXPECT_THROW(CrossEncoder<double>(cfg, "rerank", 2, 0), ConfigError);
}

TEST(SlotOrders, PermutationsThenRotations) {
  EXPECT_EQ(slot_orders(2).size(), 2u);
  EXPECT_EQ(slot_orders(3).size(), 6u);
  EXPECT_EQ(slot_orders(kMaxPermutedK).size(), 120u);
  const auto rot = slot_orders(kMaxPermutedK + 2);
  ASSERT_EQ(rot.size(), kMaxPermutedK + 2);
  // Every candidate occupies every slot exactly once.
  for (std::size_t s = 0; s < rot.size(); ++s) {
    std::set<std::size_t> seen;
    for (const auto& o : rot) seen.insert(o[s]);
    EXPECT_EQ(seen.size(), rot.size());
  }
}

TEST_F(CrossEncoderTest, ProbabilitiesFollowCandidatesNotSlots) {
  for (std::size_t k : {2u, 3u}) {
    CrossEncoder<double> cross(cfg, "rerank", k, 16);
    ParamStore<double> p;
    cross.init_params(p, 6);
    randomize_head_output(p, "rerank", 7);
    std::mt19937_64 rng(8);
    for (const auto& inst : w.instances) {
      CandidateSet cands;
      cands.relations = {"capital", "founder", "river"};
      cands.relations.resize(k);
      const auto base = rerank_forward(cross, p, inst, cands, w.catalog, w.vocab, 12);
      CandidateSet perm = cands;
      text::shuffle(perm.relations.begin(), perm.relations.end(), rng);
      const auto moved = rerank_forward(cross, p, inst, perm, w.catalog, w.vocab, 12);
      for (std::size_t a = 0; a < k; ++a) {
        const auto b = static_cast<std::size_t>(
            std::find(perm.relations.begin(), perm.relations.end(), cands.relations[a]) - perm.relations.begin());
        EXPECT_NEAR(base[a], moved[b], 1e-12) << "k " << k << " " << cands.relations[a];
      }
      EXPECT_GT(*std::max_element(base.begin(), base.end()) - *std::min_element(base.begin(), base.end()), 1e-6);
    }
  }
}

TEST_F(CrossEncoderTest, PairEncoderAndHeadGradient) {
  CrossEncoder<double> cross(cfg, "rerank", 2, 6);
  ParamStore<double> p;
  cross.init_params(p, 8);
  randomize_head_output(p, "rerank", 9);
  std::vector<text::EncodedSequence> seqs = pairs(w.instances[0], {"founder", "capital"});
  for (auto& s : pairs(w.instances[2], {"river", "birthplace"})) seqs.push_back(s);
  const auto ptrs = encoder::pointers(seqs);
  const std::vector<std::size_t> gold{0, 1};
  auto r = testing::grad_check(p, [&](Graph<double>& g, ParamStore<double>& ps) {
    return ad::log_softmax_cross_entropy(cross.logits(g, ps, ptrs, true), std::span<const std::size_t>(gold));
  }, {}, 24);
  EXPECT_LT(r.relative_error, 1e-4) << r.worst;
}

ModelConfig tiny_model(const MiniWorld& w, std::size_t k, bool reranker = true) {
  ModelConfig c;
  c.encoder = tiny_encoder(w.vocab.size());
  c.encoder.dropout = 0;
  c.instance_len = 12;
  c.description_len = 10;
  c.pair_len = 12;
  c.k = k;
  c.reranker = reranker;
  c.rerank_hidden = 6;
  return c;
}

text::ContrastiveBatch mini_batch(const MiniWorld& w) {
  const std::vector<std::size_t> items{0, 1, 2, 3};
  return text::make_batch(w.instances, items, w.catalog, w.vocab, 12, 10);
}

TEST(StepLosses, JointTotalIsWeightedSumOfStageLosses) {
  MiniWorld w;
  MatchModel<double> model(tiny_model(w, 2), 9);
  text::ContrastiveBatch batch = mini_batch(w);
  TrainOptions opts;
  opts.recall_weight = 0.7;
  opts.rerank_weight = 1.3;
  std::mt19937_64 rng(10);
  Graph<double> g;
  StepLosses<double> l = step_losses(g, model, batch, w.instances, w.catalog, w.vocab, opts, true, true, rng);
  EXPECT_NEAR(l.total.value().item(), 0.7 * l.recall.value().item() + 1.3 * l.rerank.value().item(), 1e-9);

  // Recall loss against the scalar InfoNCE on the tower's own vectors.
  Graph<double> inf(ad::GradMode::kInference);
  const auto xs = encoder::pointers(batch.instances);
  const auto ds = encoder::pointers(batch.descriptions);
  const Tensor<double>& x = model.tower().instance_vectors(inf, model.params(), xs, false).value();
  const Tensor<double>& d = model.tower().description_vectors(inf, model.params(), ds, false).value();
  double want = 0;
  const std::size_t n = batch.size();
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> s(n);
    for (std::size_t j = 0; j < n; ++j) {
      double dot = 0, nx = 0, nd = 0;
      for (std::size_t c = 0; c < x.cols(); ++c) {
        dot += x.at(i, c) * d.at(j, c);
        nx += x.at(i, c) * x.at(i, c);
        nd += d.at(j, c) * d.at(j, c);
      }
      s[j] = dot / std::sqrt(nx * nd) / opts.temperature;
    }
    want += scalar_cross_entropy(s, i);
  }
  EXPECT_NEAR(l.recall.value().item(), want / static_cast<double>(n), 1e-9);

  // Rerank loss against the scalar cross entropy on independently encoded pairs.
  double rerank_want = 0;
  for (std::size_t i = 0; i < n; ++i) {
    ASSERT_EQ(l.candidates[i].size(), 2u);
    EXPECT_EQ(l.candidates[i][l.gold_positions[i]], i);
    std::vector<text::EncodedSequence> seqs;
    for (std::size_t idx : l.candidates[i]) {
      seqs.push_back(text::encode_pair(w.instances[batch.items[i]], w.catalog.at(batch.relations[idx]), w.vocab, 12));
    }
    const auto ptrs = encoder::pointers(seqs);
    Graph<double> pg(ad::GradMode::kInference);
    const Tensor<double>& logits = model.reranker()->logits(pg, model.params(), ptrs, false).value();
    rerank_want += scalar_cross_entropy({logits[0], logits[1]}, l.gold_positions[i]);
  }
  EXPECT_NEAR(l.rerank.value().item(), rerank_want / static_cast<double>(n), 1e-9);
}

TEST(StepLosses, JointGraphGradientMatchesFiniteDifferences) {
  MiniWorld w;
  ModelConfig cfg = tiny_model(w, 2);
  cfg.encoder.dropout = 0.1;
  MatchModel<double> model(cfg, 11);
  text::ContrastiveBatch batch = mini_batch(w);
  TrainOptions opts;
  opts.temperature = 0.5;
  ParamStore<double>& p = model.params();
  randomize_head_output(p, "rerank", 12);
  auto r = testing::grad_check(p, [&](Graph<double>& g, ParamStore<double>&) {
    std::mt19937_64 rng(12);
    return step_losses(g, model, batch, w.instances, w.catalog, w.vocab, opts, true, true, rng).total;
  }, {}, 12);
  EXPECT_LT(r.relative_error, 1e-4) << r.worst;
}

TEST(StepLosses, FrozenRecallSendsNoGradientToTower) {
  MiniWorld w;
  MatchModel<double> model(tiny_model(w, 2), 13);
  text::ContrastiveBatch batch = mini_batch(w);
  std::mt19937_64 rng(14);
  Graph<double> g;
  StepLosses<double> l = step_losses(g, model, batch, w.instances, w.catalog, w.vocab, TrainOptions{}, true, false, rng);
  g.backward(l.total);
  for (const auto& n : model.recall_param_names()) EXPECT_FALSE(model.params().at(n).has_grad()) << n;
  for (const auto& n : model.rerank_param_names()) EXPECT_TRUE(model.params().at(n).has_grad()) << n;
  EXPECT_NEAR(l.total.value().item(), l.rerank.value().item(), 1e-12);
}

class PredictTest : public ::testing::Test {
 protected:
  MiniWorld w;
};

TEST_F(PredictTest, KOneIsRecallTopOne) {
  MatchModel<double> model(tiny_model(w, 1), 15);
  EXPECT_EQ(model.reranker(), nullptr);
  auto index = model.build_index(w.catalog, w.vocab);
  for (const auto& inst : w.instances) {
    Prediction p = predict(model, index, w.catalog, inst, w.vocab, true);
    auto top = recall::recall_topk(model.tower(), model.params(), index, inst, w.vocab, 12, 1);
    EXPECT_EQ(p.relation, top[0].relation);
    EXPECT_TRUE(p.probabilities.empty());
  }
}

TEST_F(PredictTest, UniformRerankFallsBackToRecallOrder) {
  MatchModel<double> model(tiny_model(w, 3), 16);
  for (const auto& n : model.reranker()->head_names()) {
    for (double& v : model.params().at(n).values()) v = 0;
  }
  auto index = model.build_index(w.catalog, w.vocab);
  for (const auto& inst : w.instances) {
    Prediction p = predict(model, index, w.catalog, inst, w.vocab, true);
    ASSERT_EQ(p.candidates.size(), 3u);
    EXPECT_EQ(p.relation, p.candidates[0].relation);
    for (double v : p.probabilities) EXPECT_NEAR(v, 1.0 / 3, 1e-12);
  }
}

TEST_F(PredictTest, GoldOutsideTopKIsAlwaysWrong) {
  // Index restricted to relations other than the gold one.
  MatchModel<double> model(tiny_model(w, 2), 17);
  text::Catalog no_founder = w.catalog.subset({"capital", "birthplace", "river"});
  auto index = model.build_index(no_founder, w.vocab);
  Prediction p = predict(model, index, no_founder, w.instances[0], w.vocab, true);
  EXPECT_NE(p.relation, "founder");
  for (const auto& c : p.candidates) EXPECT_NE(c.relation, "founder");
}

TEST_F(PredictTest, CountsOneInstanceAndKPairEncodingsPerQuery) {
  MatchModel<double> model(tiny_model(w, 3), 18);
  auto index = model.build_index(w.catalog, w.vocab);
  EXPECT_EQ(model.counter().descriptions(), 4u);
  model.counter().reset();
  StageTimes times;
  auto preds = predict_batch(model, index, w.catalog, w.instances, w.vocab, true, &times);
  EXPECT_EQ(preds.size(), w.instances.size());
  EXPECT_EQ(model.counter().instances(), w.instances.size());
  EXPECT_EQ(model.counter().pairs(), 3 * w.instances.size());
  EXPECT_EQ(model.counter().descriptions(), 0u);
  EXPECT_GE(times.recall_seconds, 0.0);
  model.counter().reset();
  predict_batch(model, index, w.catalog, w.instances, w.vocab, false);
  EXPECT_EQ(model.counter().pairs(), 0u);
}

TEST_F(PredictTest, ReloadedParametersRefuseAMismatchedHead) {
  MatchModel<double> model(tiny_model(w, 2), 19);
  ParamStore<double> copy = model.params().snapshot();
  EXPECT_NO_THROW(MatchModel<double>(tiny_model(w, 2), model.params().snapshot()));
  EXPECT_THROW(MatchModel<double>(tiny_model(w, 3), std::move(copy)), ConfigError);
}

}  // namespace
}  // namespace relmatch::rerank
