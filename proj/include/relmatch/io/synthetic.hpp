// Copyright 2026 The relmatch Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "relmatch/io/corpus.hpp"

namespace relmatch::io {

/// Desk-scale stand-in for a relation corpus. Each relation owns a disjoint
/// set of signature words and an ordered (head type, tail type) pair over a
/// small shared pool. With more relations than pairs, some relations share a
/// pair and only their signatures separate them.
struct SyntheticCorpusSpec {
  std::size_t relations = 20;
  std::size_t per_relation = 50;
  std::size_t vocab_size = 200;  // filler words
  std::size_t signature_tokens = 4;
  double noise = 0.1;  // per context token replacement rate
  std::size_t type_count = 4;
  std::size_t name_count = 60;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SyntheticCorpus {
  Corpus corpus;
  /// Bag-of-words nearest-centroid accuracy, centroids from each relation's
  /// instances.
  double oracle_accuracy = 0;
  /// Bag-of-words nearest-description accuracy.
  double description_oracle_accuracy = 0;
};

/// Instance texts hold the typed head and tail entities ("<type> <name>"),
/// a random subset of the signature, and filler words; each context token is
/// replaced by a random filler or signature word at the noise rate.
/// Descriptions hold the two type words (annotated as hypernym spans), the
/// whole signature and fillers. Throws DataError on a signature collision,
/// or when noise <= 0.1 and the nearest-centroid oracle scores below 0.95.
SyntheticCorpus gen_synthetic(const SyntheticCorpusSpec& spec);

/// Nearest-centroid accuracy of `instances` (cosine over token counts).
double centroid_oracle_accuracy(const std::vector<text::Instance>& instances);

/// Nearest-description accuracy (cosine over token counts), ties to the
/// smaller relation id.
double description_oracle_accuracy(const std::vector<text::Instance>& instances, const text::Catalog& catalog);

}  // namespace relmatch::io
