// Copyright 2026 The relmatch Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "relmatch/autodiff/ops.hpp"
#include "relmatch/autodiff/params.hpp"
#include "relmatch/encoder/encoder.hpp"
#include "relmatch/text/batching.hpp"
#include "relmatch/tower/tower.hpp"

namespace relmatch::recall {

/// In-batch InfoNCE: row i of `x` is paired with row i of `d`; every other
/// row of `d` is a negative. Cosine similarities are divided by
/// `temperature`; the per-row losses are averaged.
template <class T>
ad::Var<T> info_nce_loss(ad::Var<T> x, ad::Var<T> d, T temperature) {
  if (x.rows() < 2) throw ShapeError("InfoNCE needs at least 2 pairs");
  if (x.value().shape() != d.value().shape()) {
    throw ShapeError("InfoNCE operands differ in shape: " + ad::to_string(x.shape()) + " vs " + ad::to_string(d.shape()));
  }
  if (!(temperature > 0)) throw ConfigError("temperature must be positive");
  std::vector<std::size_t> diagonal(x.rows());
  for (std::size_t i = 0; i < diagonal.size(); ++i) diagonal[i] = i;
  return ad::log_softmax_cross_entropy(ad::scale(ad::cosine_matrix(x, d), T{1} / temperature),
                                       std::span<const std::size_t>(diagonal));
}

/// Precomputed, unit-normalized description vectors, one row per relation.
class DescriptionIndex {
 public:
  DescriptionIndex() = default;
  DescriptionIndex(std::vector<std::string> relations, std::size_t dim, std::vector<double> rows,
                   std::uint64_t fingerprint);

  std::size_t size() const { return relations_.size(); }
  std::size_t dim() const { return dim_; }
  std::uint64_t fingerprint() const { return fingerprint_; }
  const std::vector<std::string>& relations() const { return relations_; }
  std::span<const double> row(std::size_t i) const { return {rows_.data() + i * dim_, dim_}; }
  const std::vector<double>& data() const { return rows_; }

  /// Header (magic "RMIX", u32 version, u64 n, u64 dim, u64 fingerprint),
  /// relation-id table, row-major little-endian f64 matrix.
  void save(const std::filesystem::path& path) const;
  static DescriptionIndex load(const std::filesystem::path& path);

  friend bool operator==(const DescriptionIndex&, const DescriptionIndex&) = default;

 private:
  std::vector<std::string> relations_;
  std::size_t dim_ = 0;
  std::vector<double> rows_;
  std::uint64_t fingerprint_ = 0;
};

struct ScoredRelation {
  std::string relation;
  double score = 0;
};

using RecallResult = std::vector<ScoredRelation>;

/// Scales to unit norm; throws NumericError on a zero vector.
std::vector<double> unit(std::span<const double> v);

/// Top-k rows of `index` by cosine with `query`, descending by score, ties by
/// ascending relation id. `query` need not be normalized.
RecallResult top_k(const DescriptionIndex& index, std::span<const double> query, std::size_t k);

/// Encodes every description once and L2-normalizes the d^vec rows. The
/// fingerprint is the checksum of `params`. Duplicate relation ids throw.
template <class T>
DescriptionIndex build_index(const tower::DualTower<T>& tower, ad::ParamStore<T>& params,
                             std::span<const text::RelationDescription> descriptions, const text::Vocabulary& vocab,
                             std::size_t description_len, encoder::EncodingCounter* counter = nullptr);

/// x^vec rows for `instances` in inference mode, one encoder pass each.
template <class T>
std::vector<std::vector<double>> instance_vectors(const tower::DualTower<T>& tower, ad::ParamStore<T>& params,
                                                  std::span<const text::EncodedSequence> seqs,
                                                  encoder::EncodingCounter* counter = nullptr);

/// One instance-tower forward, then exhaustive cosine ranking.
template <class T>
RecallResult recall_topk(const tower::DualTower<T>& tower, ad::ParamStore<T>& params, const DescriptionIndex& index,
                         const text::Instance& inst, const text::Vocabulary& vocab, std::size_t instance_len,
                         std::size_t k, encoder::EncodingCounter* counter = nullptr);

/// Fraction of instances whose gold relation is among the top-k.
template <class T>
double hits_at_k(const tower::DualTower<T>& tower, ad::ParamStore<T>& params, const DescriptionIndex& index,
                 const std::vector<text::Instance>& instances, const text::Vocabulary& vocab, std::size_t instance_len,
                 std::size_t k);

}  // namespace relmatch::recall
