// Copyright 2026 The relmatch Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "relmatch/encoder/encoder.hpp"
#include "relmatch/text/batching.hpp"
#include "relmatch/text/encoding.hpp"
#include "relmatch/text/vocab.hpp"

namespace relmatch::testing {

inline std::vector<std::string> split_words(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> out;
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

inline text::Instance instance(const std::string& words, text::Span head, text::Span tail, const std::string& relation) {
  text::Instance inst;
  inst.tokens = split_words(words);
  inst.head = head;
  inst.tail = tail;
  inst.relation = relation;
  return inst;
}

inline text::RelationDescription description(const std::string& relation, const std::string& words,
                                             std::optional<text::Span> head = std::nullopt,
                                             std::optional<text::Span> tail = std::nullopt) {
  text::RelationDescription d;
  d.relation = relation;
  d.tokens = split_words(words);
  d.head_hypernym = head;
  d.tail_hypernym = tail;
  return d;
}

/// Tiny encoder for gradient checks: 2 layers, d = 8, 2 heads, L = 12.
inline encoder::EncoderConfig tiny_encoder(std::size_t vocab_size, std::size_t dim = 8) {
  encoder::EncoderConfig c;
  c.dim = dim;
  c.layers = 2;
  c.heads = 2;
  c.ff_dim = 2 * dim;
  c.max_len = 12;
  c.vocab_size = vocab_size;
  c.dropout = 0.1;
  return c;
}

/// Four relations over a handful of words, annotated hypernyms included.
struct MiniWorld {
  std::vector<text::Instance> instances;
  std::vector<text::RelationDescription> descriptions;
  text::Catalog catalog;
  text::Vocabulary vocab;

  MiniWorld() {
    instances = {
        instance("alice founded acme", {0, 0}, {2, 2}, "founder"),
        instance("paris is capital of france", {0, 0}, {4, 4}, "capital"),
        instance("bob was born in rome", {0, 0}, {4, 4}, "birthplace"),
        instance("the seine flows through paris", {1, 1}, {4, 4}, "river"),
        instance("carol started globex inc", {0, 0}, {2, 3}, "founder"),
        instance("berlin capital germany", {0, 0}, {2, 2}, "capital"),
    };
    descriptions = {
        description("founder", "person who founded organization", text::Span{0, 0}, text::Span{3, 3}),
        description("capital", "city is capital of country", text::Span{0, 0}, text::Span{4, 4}),
        description("birthplace", "person born in city", text::Span{0, 0}, text::Span{3, 3}),
        description("river", "river flows through city", text::Span{0, 0}, text::Span{3, 3}),
    };
    catalog = text::Catalog(descriptions);
    vocab = text::Vocabulary::build(instances, descriptions);
  }
};

}  // namespace relmatch::testing
