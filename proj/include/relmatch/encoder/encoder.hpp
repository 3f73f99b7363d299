// Copyright 2026 The relmatch Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <atomic>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "relmatch/autodiff/graph.hpp"
#include "relmatch/autodiff/ops.hpp"
#include "relmatch/autodiff/params.hpp"
#include "relmatch/text/types.hpp"

namespace relmatch::encoder {

struct EncoderConfig {
  std::size_t dim = 64;
  std::size_t layers = 2;
  std::size_t heads = 4;
  std::size_t ff_dim = 256;
  std::size_t max_len = 64;
  std::size_t vocab_size = 0;
  double dropout = 0.1;
  ad::Activation activation = ad::Activation::kGelu;

  /// Throws ConfigError unless every size is positive, dim divides by
  /// heads and max_len >= 8.
  void validate() const;

  friend bool operator==(const EncoderConfig&, const EncoderConfig&) = default;
};

enum class EncodeSite : std::size_t { kInstance = 0, kDescription = 1, kPair = 2 };

/// Encoder forward passes per call site, one count per encoded sequence.
class EncodingCounter {
 public:
  void add(EncodeSite site, std::uint64_t n = 1) { counts_[static_cast<std::size_t>(site)] += n; }
  std::uint64_t count(EncodeSite site) const { return counts_[static_cast<std::size_t>(site)].load(); }
  std::uint64_t instances() const { return count(EncodeSite::kInstance); }
  std::uint64_t descriptions() const { return count(EncodeSite::kDescription); }
  std::uint64_t pairs() const { return count(EncodeSite::kPair); }
  void reset() {
    for (auto& c : counts_) c = 0;
  }

 private:
  std::array<std::atomic<std::uint64_t>, 3> counts_{};
};

/// Hidden states of a batch packed row-wise: sequence b, position p lives at
/// row b * seq_len + p. `seq_len` is the longest real length in the batch;
/// trailing padding beyond it is never computed.
template <class T>
struct BatchHidden {
  ad::Var<T> hidden;
  std::size_t seq_len = 0;
  std::size_t count = 0;

  std::size_t row(std::size_t b, std::size_t pos) const { return b * seq_len + pos; }
};

/// Post-LN transformer encoder (token + learned position embeddings,
/// multi-head self-attention, feed-forward). Parameters live in an external
/// ParamStore under `prefix`; the encoder object itself is stateless.
template <class T>
class Encoder {
 public:
  Encoder(EncoderConfig config, std::string prefix);

  const EncoderConfig& config() const { return config_; }
  const std::string& prefix() const { return prefix_; }

  /// Scaled normal initialization, deterministic per seed.
  void init_params(ad::ParamStore<T>& store, std::uint64_t seed) const;

  std::vector<std::string> param_names() const;

  /// Encodes a batch. Pad keys receive zero attention weight, so states at
  /// real positions do not depend on the amount of padding.
  BatchHidden<T> forward_batch(ad::Graph<T>& graph, ad::ParamStore<T>& store,
                               std::span<const text::EncodedSequence* const> seqs, bool train) const;

  /// All padded positions of one sequence, [padded_length x dim].
  ad::Var<T> forward(ad::Graph<T>& graph, ad::ParamStore<T>& store, const text::EncodedSequence& seq,
                     bool train) const;

 private:
  BatchHidden<T> run(ad::Graph<T>& graph, ad::ParamStore<T>& store, std::span<const text::EncodedSequence* const> seqs,
                     std::size_t seq_len, bool train) const;
  std::string name(const std::string& leaf) const { return prefix_ + "." + leaf; }

  EncoderConfig config_;
  std::string prefix_;
};

extern template class Encoder<float>;
extern template class Encoder<double>;

/// Pointers to each element, for the span-of-pointers batch interfaces.
inline std::vector<const text::EncodedSequence*> pointers(const std::vector<text::EncodedSequence>& seqs) {
  std::vector<const text::EncodedSequence*> out;
  out.reserve(seqs.size());
  for (const auto& s : seqs) out.push_back(&s);
  return out;
}

}  // namespace relmatch::encoder
