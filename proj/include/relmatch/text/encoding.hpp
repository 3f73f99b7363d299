// Copyright 2026 The relmatch Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "relmatch/text/types.hpp"
#include "relmatch/text/vocab.hpp"

namespace relmatch::text {

inline constexpr std::size_t kMinSequenceLength = 8;

/// [CLS] + instance tokens with [E_h]..[\E_h] and [E_t]..[\E_t] wrapped
/// around the entity spans, padded or truncated to `max_len`.
///
/// Truncation removes context tokens (never markers or entity tokens),
/// starting from the end of the sentence. Throws EncodingError when the
/// markers and entities alone do not fit.
EncodedSequence encode_instance(const Instance& inst, const Vocabulary& vocab, std::size_t max_len);

/// [CLS] + description tokens, truncated to max_len - 1 content tokens.
EncodedSequence encode_description(const RelationDescription& desc, const Vocabulary& vocab, std::size_t max_len);

/// [CLS] + marked instance + [SEP] + description + [SEP]. The description is
/// truncated first (down to one token), then instance context.
EncodedSequence encode_pair(const Instance& inst, const RelationDescription& desc, const Vocabulary& vocab,
                            std::size_t max_len);

/// Non-reserved tokens of the sequence in order: the original words of an
/// untruncated, fully in-vocabulary input.
std::vector<std::string> decode(const EncodedSequence& seq, const Vocabulary& vocab);

}  // namespace relmatch::text
