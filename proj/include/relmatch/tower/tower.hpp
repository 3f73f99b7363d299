// Copyright 2026 The relmatch Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "relmatch/autodiff/ops.hpp"
#include "relmatch/encoder/encoder.hpp"
#include "relmatch/text/types.hpp"

namespace relmatch::tower {

/// How the head/tail slots of a description vector are filled.
enum class DescriptionPooling {
  kVirtualEntity,   // two learned weight-pooling heads
  kAnnotatedSpans,  // mean over annotated hypernym spans (ablation)
  kMeanPool,        // plain mean over all description tokens (ablation)
};

std::string to_string(DescriptionPooling p);
DescriptionPooling parse_pooling(const std::string& s);

/// Result of attention pooling over one sequence.
template <class T>
struct Pooled {
  ad::Var<T> vector;   // [1 x d]
  ad::Var<T> weights;  // [n x 1], one weight per pooled position
};

/// Attention pooling: scores = H W + b (b broadcast over positions), weights
/// = softmax over positions with mask 1, result = weights^T H.
///
/// `hidden` holds the candidate positions (the [CLS] row excluded), `mask`
/// one entry per row. Throws DataError when no position is real.
template <class T>
Pooled<T> weight_pool(ad::Var<T> hidden, std::span<const std::uint8_t> mask, ad::Var<T> weight, ad::Var<T> bias);

/// Mean of rows [span.start, span.end] of a sequence's hidden states.
template <class T>
ad::Var<T> span_mean(ad::Var<T> hidden, const text::Span& span);

template <class T>
struct InstanceRepresentation {
  ad::Tensor<T> context;
  ad::Tensor<T> head;
  ad::Tensor<T> tail;
  ad::Tensor<T> vec;
};

template <class T>
struct DescriptionRepresentation {
  ad::Tensor<T> context;
  ad::Tensor<T> head;
  ad::Tensor<T> tail;
  ad::Tensor<T> vec;
  std::vector<T> head_weights;  // over positions 1..length-1; empty unless pooled by heads
  std::vector<T> tail_weights;
};

/// Shared-encoder dual tower. Instances map to [CLS] ⊕ [E_h] ⊕ [E_t] states;
/// descriptions map to [CLS] ⊕ virtual head ⊕ virtual tail.
template <class T>
class DualTower {
 public:
  DualTower(encoder::EncoderConfig config, std::string prefix, DescriptionPooling pooling);

  const encoder::Encoder<T>& encoder() const { return encoder_; }
  DescriptionPooling pooling() const { return pooling_; }
  std::size_t dim() const { return encoder_.config().dim; }
  std::size_t vector_dim() const { return 3 * dim(); }

  /// Encoder parameters plus both pooling heads.
  void init_params(ad::ParamStore<T>& store, std::uint64_t seed) const;

  /// Parameters that receive gradients under the configured pooling.
  std::vector<std::string> trainable_names() const;

  std::string head_weight_name(int which) const;
  std::string head_bias_name(int which) const;

  /// x^vec rows, [B x 3d].
  ad::Var<T> instance_vectors(ad::Graph<T>& graph, ad::ParamStore<T>& store,
                              std::span<const text::EncodedSequence* const> seqs, bool train,
                              encoder::EncodingCounter* counter = nullptr) const;

  /// d^vec rows, [B x 3d]. When `weights` is given and pooling uses the
  /// learned heads, receives per-sequence (head, tail) pooling weights.
  ad::Var<T> description_vectors(ad::Graph<T>& graph, ad::ParamStore<T>& store,
                                 std::span<const text::EncodedSequence* const> seqs, bool train,
                                 encoder::EncodingCounter* counter = nullptr,
                                 std::vector<std::pair<ad::Var<T>, ad::Var<T>>>* weights = nullptr) const;

  /// Inference-mode convenience wrappers for a single sequence.
  InstanceRepresentation<T> represent_instance(ad::ParamStore<T>& store, const text::EncodedSequence& seq) const;
  DescriptionRepresentation<T> represent_description(ad::ParamStore<T>& store,
                                                     const text::EncodedSequence& seq) const;

 private:
  encoder::Encoder<T> encoder_;
  std::string prefix_;
  DescriptionPooling pooling_;
};

extern template class DualTower<float>;
extern template class DualTower<double>;

}  // namespace relmatch::tower
