// Copyright 2026 The relmatch Authors
// SPDX-License-Identifier: Apache-2.0

#include "relmatch/text/encoding.hpp"

#include <algorithm>

#include "relmatch/error.hpp"

namespace relmatch::text {

void validate(const Instance& inst) {
  const std::size_t n = inst.tokens.size();
  auto check = [&](const Span& s, const char* what) {
    if (s.start > s.end) throw DataError(std::string(what) + " span is empty");
    if (s.end >= n) {
      throw DataError(std::string(what) + " span [" + std::to_string(s.start) + ", " + std::to_string(s.end) +
                      "] out of bounds for " + std::to_string(n) + " tokens");
    }
  };
  check(inst.head, "head");
  check(inst.tail, "tail");
  if (inst.head.overlaps(inst.tail)) throw DataError("head and tail spans overlap");
  if (inst.relation.empty()) throw DataError("instance without relation id");
}

void validate(const RelationDescription& desc) {
  if (desc.relation.empty()) throw DataError("description without relation id");
  if (desc.tokens.empty()) throw DataError("empty description for relation " + desc.relation);
  for (const auto* s : {&desc.head_hypernym, &desc.tail_hypernym}) {
    if (s->has_value() && ((*s)->start > (*s)->end || (*s)->end >= desc.tokens.size())) {
      throw DataError("hypernym span out of bounds in description of " + desc.relation);
    }
  }
}

namespace {

enum class Kind { kContext, kEntity, kMarker };

struct Piece {
  std::int32_t id;
  Kind kind;
};

std::vector<Piece> mark(const Instance& inst, const Vocabulary& vocab) {
  validate(inst);
  std::vector<Piece> out;
  out.reserve(inst.tokens.size() + 4);
  for (std::size_t i = 0; i < inst.tokens.size(); ++i) {
    if (i == inst.head.start) out.push_back({id_of(Special::kHeadStart), Kind::kMarker});
    if (i == inst.tail.start) out.push_back({id_of(Special::kTailStart), Kind::kMarker});
    const bool entity = (i >= inst.head.start && i <= inst.head.end) || (i >= inst.tail.start && i <= inst.tail.end);
    out.push_back({vocab.id(inst.tokens[i]), entity ? Kind::kEntity : Kind::kContext});
    if (i == inst.head.end) out.push_back({id_of(Special::kHeadEnd), Kind::kMarker});
    if (i == inst.tail.end) out.push_back({id_of(Special::kTailEnd), Kind::kMarker});
  }
  return out;
}

// Drops context tokens from the end until `pieces` fits in `budget`.
void fit_context(std::vector<Piece>& pieces, std::size_t budget) {
  while (pieces.size() > budget) {
    auto it = std::find_if(pieces.rbegin(), pieces.rend(), [](const Piece& p) { return p.kind == Kind::kContext; });
    if (it == pieces.rend()) {
      throw EncodingError("entity markers and entity tokens need " + std::to_string(pieces.size()) +
                          " positions, only " + std::to_string(budget) + " available");
    }
    pieces.erase(std::next(it).base());
  }
}

void check_len(std::size_t max_len) {
  if (max_len < kMinSequenceLength) {
    throw EncodingError("sequence length " + std::to_string(max_len) + " below minimum " +
                        std::to_string(kMinSequenceLength));
  }
}

// Appends instance pieces and records marker and entity positions.
void append_instance(EncodedSequence& seq, const std::vector<Piece>& pieces) {
  std::size_t head_first = 0, tail_first = 0;
  for (const Piece& p : pieces) {
    const std::size_t pos = seq.ids.size();
    seq.ids.push_back(p.id);
    if (p.id == id_of(Special::kHeadStart)) {
      seq.head_marker = pos;
      head_first = pos + 1;
    } else if (p.id == id_of(Special::kTailStart)) {
      seq.tail_marker = pos;
      tail_first = pos + 1;
    } else if (p.id == id_of(Special::kHeadEnd)) {
      seq.head_span = Span{head_first, pos - 1};
    } else if (p.id == id_of(Special::kTailEnd)) {
      seq.tail_span = Span{tail_first, pos - 1};
    }
  }
}

void pad(EncodedSequence& seq, std::size_t max_len) {
  seq.length = seq.ids.size();
  seq.mask.assign(seq.length, 1);
  seq.ids.resize(max_len, id_of(Special::kPad));
  seq.mask.resize(max_len, 0);
}

}  // namespace

EncodedSequence encode_instance(const Instance& inst, const Vocabulary& vocab, std::size_t max_len) {
  check_len(max_len);
  std::vector<Piece> pieces = mark(inst, vocab);
  fit_context(pieces, max_len - 1);
  EncodedSequence seq;
  seq.ids.reserve(max_len);
  seq.ids.push_back(id_of(Special::kCls));
  append_instance(seq, pieces);
  pad(seq, max_len);
  return seq;
}

EncodedSequence encode_description(const RelationDescription& desc, const Vocabulary& vocab, std::size_t max_len) {
  check_len(max_len);
  validate(desc);
  EncodedSequence seq;
  seq.ids.reserve(max_len);
  seq.ids.push_back(id_of(Special::kCls));
  const std::size_t n = std::min(desc.tokens.size(), max_len - 1);
  for (std::size_t i = 0; i < n; ++i) seq.ids.push_back(vocab.id(desc.tokens[i]));
  auto shifted = [n](const std::optional<Span>& s) -> std::optional<Span> {
    if (!s || s->end >= n) return std::nullopt;
    return Span{s->start + 1, s->end + 1};
  };
  seq.head_span = shifted(desc.head_hypernym);
  seq.tail_span = shifted(desc.tail_hypernym);
  pad(seq, max_len);
  return seq;
}

EncodedSequence encode_pair(const Instance& inst, const RelationDescription& desc, const Vocabulary& vocab,
                            std::size_t max_len) {
  check_len(max_len);
  validate(desc);
  std::vector<Piece> pieces = mark(inst, vocab);
  const std::size_t budget = max_len - 3;  // [CLS], [SEP], [SEP]
  std::size_t desc_n = desc.tokens.size();
  if (pieces.size() + desc_n > budget) {
    desc_n = budget > pieces.size() ? std::max<std::size_t>(1, budget - pieces.size()) : 1;
  }
  fit_context(pieces, budget - desc_n);

  EncodedSequence seq;
  seq.ids.reserve(max_len);
  seq.ids.push_back(id_of(Special::kCls));
  append_instance(seq, pieces);
  seq.separator = seq.ids.size();
  seq.ids.push_back(id_of(Special::kSep));
  for (std::size_t i = 0; i < desc_n; ++i) seq.ids.push_back(vocab.id(desc.tokens[i]));
  seq.ids.push_back(id_of(Special::kSep));
  pad(seq, max_len);
  return seq;
}

std::vector<std::string> decode(const EncodedSequence& seq, const Vocabulary& vocab) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < seq.length; ++i) {
    if (!vocab.is_reserved(seq.ids[i])) out.push_back(vocab.token(seq.ids[i]));
  }
  return out;
}

}  // namespace relmatch::text
