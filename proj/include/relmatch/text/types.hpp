// Copyright 2026 The relmatch Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace relmatch::text {

/// Inclusive token range [start, end].
struct Span {
  std::size_t start = 0;
  std::size_t end = 0;

  std::size_t length() const { return end - start + 1; }
  bool overlaps(const Span& o) const { return start <= o.end && o.start <= end; }
  friend bool operator==(const Span&, const Span&) = default;
};

/// A sentence with marked head and tail entities and its gold relation.
struct Instance {
  std::vector<std::string> tokens;
  Span head;
  Span tail;
  std::string relation;

  friend bool operator==(const Instance&, const Instance&) = default;
};

/// Natural-language description of one relation. The hypernym spans are
/// optional annotations used only by the annotated-pooling ablation.
struct RelationDescription {
  std::string relation;
  std::vector<std::string> tokens;
  std::optional<Span> head_hypernym;
  std::optional<Span> tail_hypernym;

  friend bool operator==(const RelationDescription&, const RelationDescription&) = default;
};

/// Token ids padded to a fixed length, with the positions the towers read.
struct EncodedSequence {
  std::vector<std::int32_t> ids;
  std::vector<std::uint8_t> mask;
  std::size_t length = 0;  // real (unpadded) tokens, [CLS] included
  std::optional<std::size_t> head_marker;
  std::optional<std::size_t> tail_marker;
  std::optional<std::size_t> separator;  // first [SEP] of a pair sequence
  // Encoded positions of annotated hypernyms (descriptions) or of the
  // entity tokens themselves (instances), when they survive truncation.
  std::optional<Span> head_span;
  std::optional<Span> tail_span;

  std::size_t padded_length() const { return ids.size(); }
};

/// Throws DataError when spans are empty, out of bounds or overlapping.
void validate(const Instance& inst);
void validate(const RelationDescription& desc);

}  // namespace relmatch::text
