// Copyright 2026 The relmatch Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <map>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "relmatch/text/encoding.hpp"
#include "relmatch/text/types.hpp"

namespace relmatch::text {

/// Relation descriptions keyed by relation id, one per relation.
class Catalog {
 public:
  Catalog() = default;
  explicit Catalog(std::vector<RelationDescription> descriptions);

  const RelationDescription& at(const std::string& relation) const;
  bool contains(const std::string& relation) const { return index_.count(relation) != 0; }
  const std::vector<RelationDescription>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }

  /// Sub-catalog restricted to `relations`, in catalog order.
  Catalog subset(const std::vector<std::string>& relations) const;

 private:
  std::vector<RelationDescription> entries_;
  std::map<std::string, std::size_t> index_;
};

/// Groups instance indices into contrastive batches in which every relation
/// id occurs at most once, so each off-diagonal description is a true
/// negative.
class BatchSampler {
 public:
  BatchSampler(const std::vector<Instance>& instances, std::size_t batch_size);

  std::size_t batch_size() const { return batch_size_; }
  std::size_t distinct_relations() const { return by_relation_.size(); }

  /// Shuffled pass over all instances. Items that cannot complete a batch of
  /// distinct relations at the end of the pass are dropped.
  std::vector<std::vector<std::size_t>> epoch(std::mt19937_64& rng) const;

  /// One batch: `batch_size` distinct relations drawn uniformly, one random
  /// instance of each.
  std::vector<std::size_t> sample(std::mt19937_64& rng) const;

 private:
  const std::vector<Instance>* instances_;
  std::size_t batch_size_;
  std::map<std::string, std::vector<std::size_t>> by_relation_;
};

/// N (instance, gold description) pairs; instance i's positive is
/// description i.
struct ContrastiveBatch {
  std::vector<std::size_t> items;
  std::vector<std::string> relations;
  std::vector<EncodedSequence> instances;
  std::vector<EncodedSequence> descriptions;

  std::size_t size() const { return items.size(); }
};

/// Throws DataError on fewer than two items or a repeated relation.
ContrastiveBatch make_batch(const std::vector<Instance>& instances, std::span<const std::size_t> items,
                            const Catalog& catalog, const Vocabulary& vocab, std::size_t instance_len,
                            std::size_t description_len);

/// Fisher-Yates shuffle with an explicit rejection sampler, so sequences are
/// identical across standard library implementations.
std::size_t uniform_below(std::mt19937_64& rng, std::size_t n);

template <class It>
void shuffle(It first, It last, std::mt19937_64& rng) {
  const auto n = static_cast<std::size_t>(last - first);
  for (std::size_t i = n; i > 1; --i) {
    std::swap(first[i - 1], first[uniform_below(rng, i)]);
  }
}

}  // namespace relmatch::text
