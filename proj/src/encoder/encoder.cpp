// Copyright 2026 The relmatch Authors
// SPDX-License-Identifier: Apache-2.0

#include "relmatch/encoder/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "relmatch/error.hpp"

namespace relmatch::encoder {

void EncoderConfig::validate() const {
  auto positive = [](std::size_t v, const char* what) {
    if (v == 0) throw ConfigError(std::string("encoder ") + what + " must be positive");
  };
  positive(dim, "dim");
  positive(layers, "layers");
  positive(heads, "heads");
  positive(ff_dim, "ff_dim");
  positive(vocab_size, "vocab_size");
  if (dim % heads != 0) {
    throw ConfigError("encoder dim " + std::to_string(dim) + " not divisible by " + std::to_string(heads) + " heads");
  }
  if (max_len < 8) throw ConfigError("encoder max_len must be at least 8");
  if (dropout < 0 || dropout >= 1) throw ConfigError("encoder dropout must lie in [0, 1)");
}

namespace {
constexpr double kInitStd = 0.02;
constexpr double kLayerNormEps = 1e-6;

const char* kLayerLeaves[] = {"qkv.weight", "qkv.bias", "out.weight", "out.bias", "ln1.gain", "ln1.bias",
                              "ff1.weight", "ff1.bias", "ff2.weight", "ff2.bias", "ln2.gain", "ln2.bias"};
}  // namespace

template <class T>
Encoder<T>::Encoder(EncoderConfig config, std::string prefix) : config_(config), prefix_(std::move(prefix)) {
  config_.validate();
}

template <class T>
std::vector<std::string> Encoder<T>::param_names() const {
  std::vector<std::string> out = {name("tok_emb"), name("pos_emb"), name("emb_ln.gain"), name("emb_ln.bias")};
  for (std::size_t l = 0; l < config_.layers; ++l) {
    for (const char* leaf : kLayerLeaves) out.push_back(name("layer" + std::to_string(l) + "." + leaf));
  }
  return out;
}

template <class T>
void Encoder<T>::init_params(ad::ParamStore<T>& store, std::uint64_t seed) const {
  std::mt19937_64 rng(seed);
  const std::size_t d = config_.dim;
  store.add(name("tok_emb"), ad::random_normal<T>({config_.vocab_size, d}, kInitStd, rng));
  store.add(name("pos_emb"), ad::random_normal<T>({config_.max_len, d}, kInitStd, rng));
  store.add(name("emb_ln.gain"), ad::filled<T>({d}, T{1}));
  store.add(name("emb_ln.bias"), ad::Tensor<T>({d}));
  for (std::size_t l = 0; l < config_.layers; ++l) {
    const std::string p = "layer" + std::to_string(l) + ".";
    store.add(name(p + "qkv.weight"), ad::random_normal<T>({d, 3 * d}, kInitStd, rng));
    store.add(name(p + "qkv.bias"), ad::Tensor<T>({3 * d}));
    store.add(name(p + "out.weight"), ad::random_normal<T>({d, d}, kInitStd, rng));
    store.add(name(p + "out.bias"), ad::Tensor<T>({d}));
    store.add(name(p + "ln1.gain"), ad::filled<T>({d}, T{1}));
    store.add(name(p + "ln1.bias"), ad::Tensor<T>({d}));
    store.add(name(p + "ff1.weight"), ad::random_normal<T>({d, config_.ff_dim}, kInitStd, rng));
    store.add(name(p + "ff1.bias"), ad::Tensor<T>({config_.ff_dim}));
    store.add(name(p + "ff2.weight"), ad::random_normal<T>({config_.ff_dim, d}, kInitStd, rng));
    store.add(name(p + "ff2.bias"), ad::Tensor<T>({d}));
    store.add(name(p + "ln2.gain"), ad::filled<T>({d}, T{1}));
    store.add(name(p + "ln2.bias"), ad::Tensor<T>({d}));
  }
}

template <class T>
BatchHidden<T> Encoder<T>::forward_batch(ad::Graph<T>& graph, ad::ParamStore<T>& store,
                                         std::span<const text::EncodedSequence* const> seqs, bool train) const {
  if (seqs.empty()) throw ShapeError("encoder batch is empty");
  std::size_t len = 1;
  for (const auto* s : seqs) len = std::max(len, s->length);
  return run(graph, store, seqs, len, train);
}

template <class T>
ad::Var<T> Encoder<T>::forward(ad::Graph<T>& graph, ad::ParamStore<T>& store, const text::EncodedSequence& seq,
                               bool train) const {
  const text::EncodedSequence* one[] = {&seq};
  return run(graph, store, one, seq.padded_length(), train).hidden;
}

template <class T>
BatchHidden<T> Encoder<T>::run(ad::Graph<T>& graph, ad::ParamStore<T>& store,
                               std::span<const text::EncodedSequence* const> seqs, std::size_t seq_len,
                               bool train) const {
  using ad::Var;
  const std::size_t d = config_.dim;
  const std::size_t heads = config_.heads;
  const std::size_t head_dim = d / heads;
  const T drop = static_cast<T>(config_.dropout);
  if (seq_len > config_.max_len) {
    throw EncodingError("sequence length " + std::to_string(seq_len) + " exceeds encoder max_len " +
                        std::to_string(config_.max_len));
  }

  std::vector<std::int32_t> ids;
  std::vector<std::int32_t> positions;
  ids.reserve(seqs.size() * seq_len);
  for (const auto* s : seqs) {
    if (s->ids.size() < seq_len) throw EncodingError("sequence shorter than batch length");
    ids.insert(ids.end(), s->ids.begin(), s->ids.begin() + static_cast<std::ptrdiff_t>(seq_len));
    for (std::size_t p = 0; p < seq_len; ++p) positions.push_back(static_cast<std::int32_t>(p));
  }

  auto P = [&](const std::string& leaf) { return graph.param(store.at(name(leaf))); };

  Var<T> x = ad::add(ad::embedding(P("tok_emb"), std::span<const std::int32_t>(ids)),
                     ad::embedding(P("pos_emb"), std::span<const std::int32_t>(positions)));
  x = ad::layernorm(x, P("emb_ln.gain"), P("emb_ln.bias"), T(kLayerNormEps));
  x = ad::dropout(x, drop, train);

  const T inv_sqrt = T{1} / std::sqrt(static_cast<T>(head_dim));
  for (std::size_t l = 0; l < config_.layers; ++l) {
    const std::string p = "layer" + std::to_string(l) + ".";
    Var<T> qkv = ad::add_bias(ad::matmul(x, P(p + "qkv.weight")), P(p + "qkv.bias"));
    std::vector<Var<T>> per_seq;
    per_seq.reserve(seqs.size());
    for (std::size_t b = 0; b < seqs.size(); ++b) {
      std::span<const std::uint8_t> mask(seqs[b]->mask.data(), seq_len);
      Var<T> block = ad::slice(qkv, b * seq_len, seq_len, 0, 3 * d);
      std::vector<Var<T>> per_head;
      per_head.reserve(heads);
      for (std::size_t h = 0; h < heads; ++h) {
        Var<T> q = ad::slice(block, 0, seq_len, h * head_dim, head_dim);
        Var<T> k = ad::slice(block, 0, seq_len, d + h * head_dim, head_dim);
        Var<T> v = ad::slice(block, 0, seq_len, 2 * d + h * head_dim, head_dim);
        Var<T> scores = ad::scale(ad::matmul(q, k, ad::Transpose::kYes), inv_sqrt);
        per_head.push_back(ad::matmul(ad::softmax(scores, 1, mask), v));
      }
      per_seq.push_back(heads == 1 ? per_head.front() : ad::concat(per_head, 1));
    }
    Var<T> ctx = seqs.size() == 1 ? per_seq.front() : ad::concat(per_seq, 0);
    Var<T> attn = ad::dropout(ad::add_bias(ad::matmul(ctx, P(p + "out.weight")), P(p + "out.bias")), drop, train);
    x = ad::layernorm(ad::add(x, attn), P(p + "ln1.gain"), P(p + "ln1.bias"), T(kLayerNormEps));

    Var<T> ff = ad::activate(ad::add_bias(ad::matmul(x, P(p + "ff1.weight")), P(p + "ff1.bias")), config_.activation);
    ff = ad::dropout(ad::add_bias(ad::matmul(ff, P(p + "ff2.weight")), P(p + "ff2.bias")), drop, train);
    x = ad::layernorm(ad::add(x, ff), P(p + "ln2.gain"), P(p + "ln2.bias"), T(kLayerNormEps));
  }
  return {x, seq_len, seqs.size()};
}

template class Encoder<float>;
template class Encoder<double>;

}  // namespace relmatch::encoder
