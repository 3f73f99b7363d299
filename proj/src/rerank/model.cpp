// Copyright 2026 The relmatch Authors
// SPDX-License-Identifier: Apache-2.0

#include "relmatch/rerank/model.hpp"

#include <algorithm>
#include <chrono>

#include "relmatch/text/encoding.hpp"

namespace relmatch::rerank {

namespace {
constexpr std::size_t kPairChunk = 16;  // instances per pair-encoding graph
}  // namespace

void ModelConfig::validate() const {
  encoder.validate();
  for (std::size_t len : {instance_len, description_len, pair_len}) {
    if (len < text::kMinSequenceLength) throw ConfigError("sequence lengths must be at least 8");
    if (len > encoder.max_len) {
      throw ConfigError("sequence length " + std::to_string(len) + " exceeds encoder max_len " +
                        std::to_string(encoder.max_len));
    }
  }
  if (k < 1) throw ConfigError("k must be at least 1");
  if (rerank_hidden == 0) throw ConfigError("rerank hidden width must be positive");
}

namespace {

template <class T>
std::optional<CrossEncoder<T>> make_cross(const ModelConfig& c) {
  if (!c.reranker || c.k < 2) return std::nullopt;
  return CrossEncoder<T>(c.encoder, "rerank", c.k, c.rerank_hidden);
}

}  // namespace

template <class T>
MatchModel<T>::MatchModel(ModelConfig config, std::uint64_t seed)
    : config_(std::move(config)), tower_(config_.encoder, "recall", config_.pooling), cross_(make_cross<T>(config_)) {
  config_.validate();
  tower_.init_params(params_, seed);
  if (cross_) cross_->init_params(params_, seed + 0x5851F42D4C957F2DULL);
}

template <class T>
MatchModel<T>::MatchModel(ModelConfig config, ad::ParamStore<T> params)
    : config_(std::move(config)),
      params_(std::move(params)),
      tower_(config_.encoder, "recall", config_.pooling),
      cross_(make_cross<T>(config_)) {
  config_.validate();
  for (const auto& n : tower_.trainable_names()) params_.at(n);
  if (cross_) {
    for (const auto& n : cross_->trainable_names()) params_.at(n);
    cross_->check_head(params_);
  }
}

template <class T>
std::vector<std::string> MatchModel<T>::rerank_param_names() const {
  return cross_ ? cross_->trainable_names() : std::vector<std::string>{};
}

template <class T>
recall::DescriptionIndex MatchModel<T>::build_index(const text::Catalog& catalog, const text::Vocabulary& vocab) {
  return recall::build_index(tower_, params_, std::span<const text::RelationDescription>(catalog.entries()), vocab,
                             config_.description_len, counter_.get());
}

template <class T>
std::vector<Prediction> predict_batch(MatchModel<T>& model, const recall::DescriptionIndex& index,
                                      const text::Catalog& catalog, const std::vector<text::Instance>& instances,
                                      const text::Vocabulary& vocab, bool use_reranker, StageTimes* times) {
  using Clock = std::chrono::steady_clock;
  auto t0 = Clock::now();
  const ModelConfig& cfg = model.config();
  const CrossEncoder<T>* cross = use_reranker ? model.reranker() : nullptr;
  const std::size_t k = cross ? cross->k() : 1;
  std::vector<text::EncodedSequence> seqs;
  seqs.reserve(instances.size());
  for (const auto& inst : instances) seqs.push_back(text::encode_instance(inst, vocab, cfg.instance_len));
  const auto vecs = recall::instance_vectors(model.tower(), model.params(), std::span<const text::EncodedSequence>(seqs),
                                             &model.counter());

  std::vector<Prediction> out(instances.size());
  for (std::size_t i = 0; i < instances.size(); ++i) {
    out[i].candidates = recall::top_k(index, vecs[i], cross ? k : std::min<std::size_t>(cfg.k, index.size()));
    out[i].relation = out[i].candidates.front().relation;
  }
  auto t1 = Clock::now();
  if (times) times->recall_seconds += std::chrono::duration<double>(t1 - t0).count();
  if (!cross) return out;

  for (std::size_t start = 0; start < instances.size(); start += kPairChunk) {
    const std::size_t end = std::min(instances.size(), start + kPairChunk);
    std::vector<text::EncodedSequence> pairs;
    for (std::size_t i = start; i < end; ++i) {
      for (const auto& c : out[i].candidates) {
        pairs.push_back(text::encode_pair(instances[i], catalog.at(c.relation), vocab, cfg.pair_len));
      }
    }
    ad::Graph<T> graph(ad::GradMode::kInference);
    const auto ptrs = encoder::pointers(pairs);
    const ad::Tensor<T>& probs =
        ad::softmax(cross->logits(graph, model.params(), ptrs, false, &model.counter()), 1).value();
    for (std::size_t i = start; i < end; ++i) {
      Prediction& p = out[i];
      p.probabilities.resize(k);
      for (std::size_t j = 0; j < k; ++j) p.probabilities[j] = static_cast<double>(probs.at(i - start, j));
      // Candidates are already ordered by recall score then id, so the first
      // maximum implements both tie-breaks.
      const auto best = std::max_element(p.probabilities.begin(), p.probabilities.end()) - p.probabilities.begin();
      p.relation = p.candidates[static_cast<std::size_t>(best)].relation;
    }
  }
  if (times) times->rerank_seconds += std::chrono::duration<double>(Clock::now() - t1).count();
  return out;
}

template <class T>
Prediction predict(MatchModel<T>& model, const recall::DescriptionIndex& index, const text::Catalog& catalog,
                   const text::Instance& inst, const text::Vocabulary& vocab, bool use_reranker) {
  return predict_batch(model, index, catalog, std::vector<text::Instance>{inst}, vocab, use_reranker).front();
}

template class MatchModel<float>;
template class MatchModel<double>;

#define RELMATCH_INSTANTIATE(T)                                                                                     \
  template std::vector<Prediction> predict_batch(MatchModel<T>&, const recall::DescriptionIndex&,                 \
                                                 const text::Catalog&, const std::vector<text::Instance>&,         \
                                                 const text::Vocabulary&, bool, StageTimes*);                      \
  template Prediction predict(MatchModel<T>&, const recall::DescriptionIndex&, const text::Catalog&,              \
                              const text::Instance&, const text::Vocabulary&, bool);

RELMATCH_INSTANTIATE(float)
RELMATCH_INSTANTIATE(double)

#undef RELMATCH_INSTANTIATE

}  // namespace relmatch::rerank
