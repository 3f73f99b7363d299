// Copyright 2026 The relmatch Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "relmatch/autodiff/ops.hpp"
#include "relmatch/autodiff/params.hpp"
#include "relmatch/encoder/encoder.hpp"
#include "relmatch/text/batching.hpp"

namespace relmatch::rerank {

/// An instance with k candidate relations in presentation order.
struct CandidateSet {
  std::vector<std::string> relations;
  std::vector<double> recall_scores;
  std::optional<std::size_t> gold;  // 0-based position of d+, training only

  std::size_t size() const { return relations.size(); }
};

/// Cross-encoder over <instance ⊕ description> pairs. The [CLS] state of
/// each of the k pairs is concatenated and an MLP maps the k·d vector to k
/// logits. The head is built for a fixed k. Each pair is encoded once; the
/// MLP runs over every slot order of `slot_orders(k)` and a candidate's logit
/// is its mean over those orders, so no slot carries a learnable preference.
/// Largest k whose k! slot orders are all used; beyond it the k cyclic
/// rotations, which still put every candidate in every slot once.
inline constexpr std::size_t kMaxPermutedK = 5;

/// Slot orders the head averages over: order[s] is the candidate in slot s.
std::vector<std::vector<std::size_t>> slot_orders(std::size_t k);

template <class T>
class CrossEncoder {
 public:
  CrossEncoder(encoder::EncoderConfig config, std::string prefix, std::size_t k, std::size_t hidden,
               ad::Activation activation = ad::Activation::kTanh);

  const encoder::Encoder<T>& encoder() const { return encoder_; }
  std::size_t k() const { return k_; }
  std::size_t hidden() const { return hidden_; }

  /// The MLP output layer starts at zero, so an untrained head is uniform.
  void init_params(ad::ParamStore<T>& store, std::uint64_t seed) const;
  std::vector<std::string> trainable_names() const;
  std::vector<std::string> head_names() const;

  /// Throws ConfigError unless the stored head maps k·d inputs to k outputs.
  void check_head(const ad::ParamStore<T>& store) const;

  /// Logits [B x k] for B groups of k pair sequences, group-major, in
  /// candidate order.
  ad::Var<T> logits(ad::Graph<T>& graph, ad::ParamStore<T>& store, std::span<const text::EncodedSequence* const> pairs,
                    bool train, encoder::EncodingCounter* counter = nullptr) const;

 private:
  encoder::Encoder<T> encoder_;
  std::string prefix_;
  std::size_t k_;
  std::size_t hidden_;
  ad::Activation activation_;
};

extern template class CrossEncoder<float>;
extern template class CrossEncoder<double>;

/// Candidate probabilities (softmax of the logits) for one candidate set.
template <class T>
std::vector<double> rerank_forward(const CrossEncoder<T>& cross, ad::ParamStore<T>& store, const text::Instance& inst,
                                   const CandidateSet& cands, const text::Catalog& catalog,
                                   const text::Vocabulary& vocab, std::size_t pair_len,
                                   encoder::EncodingCounter* counter = nullptr);

/// -log softmax(logits)[gold], gold 0-based.
double rerank_loss(std::span<const double> logits, std::size_t gold);

/// Candidate selection for training: d+ (index `gold` of the batch) plus
/// the k-1 highest-scoring other batch descriptions (ties by relation id),
/// presented in a uniformly random order.
struct TrainingCandidates {
  std::vector<std::size_t> order;  // batch description indices
  std::size_t gold_position = 0;
};

TrainingCandidates select_training_candidates(std::span<const double> scores, std::size_t gold,
                                              std::span<const std::string> relations, std::size_t k,
                                              std::mt19937_64& rng);

}  // namespace relmatch::rerank
