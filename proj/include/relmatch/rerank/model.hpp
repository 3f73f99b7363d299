// Copyright 2026 The relmatch Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "relmatch/recall/recall.hpp"
#include "relmatch/rerank/rerank.hpp"
#include "relmatch/tower/tower.hpp"

namespace relmatch::rerank {

struct ModelConfig {
  encoder::EncoderConfig encoder;
  std::size_t instance_len = 64;
  std::size_t description_len = 64;
  std::size_t pair_len = 64;
  tower::DescriptionPooling pooling = tower::DescriptionPooling::kVirtualEntity;
  bool reranker = true;
  std::size_t k = 2;
  std::size_t rerank_hidden = 64;

  void validate() const;
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// The two-stage matcher: a shared-encoder dual tower for recall and a
/// separately parameterized cross-encoder for reranking, with all
/// parameters in one store ("recall.*" and "rerank.*").
template <class T>
class MatchModel {
 public:
  MatchModel(ModelConfig config, std::uint64_t seed);
  MatchModel(ModelConfig config, ad::ParamStore<T> params);

  const ModelConfig& config() const { return config_; }
  ad::ParamStore<T>& params() { return params_; }
  const ad::ParamStore<T>& params() const { return params_; }
  const tower::DualTower<T>& tower() const { return tower_; }
  /// Null when the model has no reranker (disabled, or k = 1).
  const CrossEncoder<T>* reranker() const { return cross_ ? &*cross_ : nullptr; }
  encoder::EncodingCounter& counter() const { return *counter_; }

  std::vector<std::string> recall_param_names() const { return tower_.trainable_names(); }
  std::vector<std::string> rerank_param_names() const;

  recall::DescriptionIndex build_index(const text::Catalog& catalog, const text::Vocabulary& vocab);

 private:
  ModelConfig config_;
  ad::ParamStore<T> params_;
  tower::DualTower<T> tower_;
  std::optional<CrossEncoder<T>> cross_;
  std::unique_ptr<encoder::EncodingCounter> counter_ = std::make_unique<encoder::EncodingCounter>();
};

extern template class MatchModel<float>;
extern template class MatchModel<double>;

struct Prediction {
  std::string relation;
  recall::RecallResult candidates;   // recall top-k, score order
  std::vector<double> probabilities;  // rerank output per candidate; empty when recall-only
};

struct StageTimes {
  double recall_seconds = 0;  // instance encoding and top-k search
  double rerank_seconds = 0;  // pair encoding and the head
};

/// Recall top-k from the index, then (when `use_reranker` and the model has
/// one) rerank; the highest probability wins, ties broken by the higher
/// recall score, then the smaller relation id. Recall-only takes top-1.
/// Costs one instance encoding per instance and k pair encodings per
/// reranked instance.
template <class T>
std::vector<Prediction> predict_batch(MatchModel<T>& model, const recall::DescriptionIndex& index,
                                      const text::Catalog& catalog, const std::vector<text::Instance>& instances,
                                      const text::Vocabulary& vocab, bool use_reranker,
                                      StageTimes* times = nullptr);

template <class T>
Prediction predict(MatchModel<T>& model, const recall::DescriptionIndex& index, const text::Catalog& catalog,
                   const text::Instance& inst, const text::Vocabulary& vocab, bool use_reranker);

}  // namespace relmatch::rerank
