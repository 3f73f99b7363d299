// Copyright 2026 The relmatch Authors
// SPDX-License-Identifier: Apache-2.0

#include "relmatch/text/batching.hpp"

#include <algorithm>
#include <limits>
#include <set>

#include "relmatch/error.hpp"

namespace relmatch::text {

std::size_t uniform_below(std::mt19937_64& rng, std::size_t n) {
  if (n == 0) throw Error("uniform_below(0)");
  const std::uint64_t bound = static_cast<std::uint64_t>(n);
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return static_cast<std::size_t>(x % bound);
}

Catalog::Catalog(std::vector<RelationDescription> descriptions) : entries_(std::move(descriptions)) {
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    validate(entries_[i]);
    if (!index_.emplace(entries_[i].relation, i).second) {
      throw DataError("duplicate description for relation " + entries_[i].relation);
    }
  }
}

const RelationDescription& Catalog::at(const std::string& relation) const {
  auto it = index_.find(relation);
  if (it == index_.end()) throw DataError("relation " + relation + " has no description");
  return entries_[it->second];
}

Catalog Catalog::subset(const std::vector<std::string>& relations) const {
  std::set<std::string> keep(relations.begin(), relations.end());
  std::vector<RelationDescription> out;
  for (const auto& d : entries_) {
    if (keep.count(d.relation)) out.push_back(d);
  }
  for (const auto& r : relations) at(r);
  return Catalog(std::move(out));
}

BatchSampler::BatchSampler(const std::vector<Instance>& instances, std::size_t batch_size)
    : instances_(&instances), batch_size_(batch_size) {
  if (batch_size < 2) throw DataError("contrastive batches need at least 2 items");
  for (std::size_t i = 0; i < instances.size(); ++i) by_relation_[instances[i].relation].push_back(i);
  if (by_relation_.size() < batch_size) {
    throw DataError("batch size " + std::to_string(batch_size) + " exceeds the " + std::to_string(by_relation_.size()) +
                    " distinct relations available");
  }
}

std::vector<std::vector<std::size_t>> BatchSampler::epoch(std::mt19937_64& rng) const {
  std::vector<std::size_t> pending(instances_->size());
  for (std::size_t i = 0; i < pending.size(); ++i) pending[i] = i;
  shuffle(pending.begin(), pending.end(), rng);

  std::vector<std::vector<std::size_t>> batches;
  while (pending.size() >= batch_size_) {
    std::vector<std::size_t> batch;
    std::set<std::string> used;
    std::vector<std::size_t> rest;
    rest.reserve(pending.size());
    for (std::size_t idx : pending) {
      const std::string& rel = (*instances_)[idx].relation;
      if (batch.size() < batch_size_ && used.insert(rel).second) {
        batch.push_back(idx);
      } else {
        rest.push_back(idx);
      }
    }
    if (batch.size() < batch_size_) break;
    batches.push_back(std::move(batch));
    pending = std::move(rest);
  }
  return batches;
}

std::vector<std::size_t> BatchSampler::sample(std::mt19937_64& rng) const {
  std::vector<const std::vector<std::size_t>*> groups;
  for (const auto& [_, g] : by_relation_) groups.push_back(&g);
  // Partial Fisher-Yates: the first batch_size_ groups are a uniform draw.
  for (std::size_t i = 0; i < batch_size_; ++i) {
    std::swap(groups[i], groups[i + uniform_below(rng, groups.size() - i)]);
  }
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < batch_size_; ++i) {
    out.push_back((*groups[i])[uniform_below(rng, groups[i]->size())]);
  }
  return out;
}

ContrastiveBatch make_batch(const std::vector<Instance>& instances, std::span<const std::size_t> items,
                            const Catalog& catalog, const Vocabulary& vocab, std::size_t instance_len,
                            std::size_t description_len) {
  if (items.size() < 2) throw DataError("contrastive batches need at least 2 items");
  ContrastiveBatch batch;
  std::set<std::string> seen;
  for (std::size_t idx : items) {
    const Instance& inst = instances.at(idx);
    if (!seen.insert(inst.relation).second) throw DataError("relation " + inst.relation + " repeated in batch");
    batch.items.push_back(idx);
    batch.relations.push_back(inst.relation);
    batch.instances.push_back(encode_instance(inst, vocab, instance_len));
    batch.descriptions.push_back(encode_description(catalog.at(inst.relation), vocab, description_len));
  }
  return batch;
}

}  // namespace relmatch::text
