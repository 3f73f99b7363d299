// Copyright 2026 The relmatch Authors
// SPDX-License-Identifier: Apache-2.0

#include "relmatch/tower/tower.hpp"

#include <algorithm>
#include <random>

#include "relmatch/error.hpp"

namespace relmatch::tower {

std::string to_string(DescriptionPooling p) {
  switch (p) {
    case DescriptionPooling::kVirtualEntity: return "virtual";
    case DescriptionPooling::kAnnotatedSpans: return "annotated";
    case DescriptionPooling::kMeanPool: return "mean";
  }
  return "?";
}

DescriptionPooling parse_pooling(const std::string& s) {
  if (s == "virtual") return DescriptionPooling::kVirtualEntity;
  if (s == "annotated") return DescriptionPooling::kAnnotatedSpans;
  if (s == "mean") return DescriptionPooling::kMeanPool;
  throw ConfigError("unknown pooling '" + s + "' (expected virtual, annotated or mean)");
}

template <class T>
Pooled<T> weight_pool(ad::Var<T> hidden, std::span<const std::uint8_t> mask, ad::Var<T> weight, ad::Var<T> bias) {
  if (mask.size() != hidden.rows()) throw ShapeError("pooling mask length does not match hidden rows");
  if (std::none_of(mask.begin(), mask.end(), [](std::uint8_t m) { return m != 0; })) {
    throw DataError("weight pooling over a description with no real tokens");
  }
  ad::Var<T> scores = ad::add_bias(ad::matmul(hidden, weight), bias);  // [n x 1]
  ad::Var<T> weights = ad::softmax(scores, 0, mask);
  return {ad::matmul(ad::transpose(weights), hidden), weights};
}

template <class T>
ad::Var<T> span_mean(ad::Var<T> hidden, const text::Span& span) {
  if (span.start > span.end || span.end >= hidden.rows()) {
    throw DataError("pooling span [" + std::to_string(span.start) + ", " + std::to_string(span.end) +
                    "] outside sequence of " + std::to_string(hidden.rows()));
  }
  return ad::mean_rows(ad::slice(hidden, span.start, span.length(), 0, hidden.cols()));
}

template <class T>
DualTower<T>::DualTower(encoder::EncoderConfig config, std::string prefix, DescriptionPooling pooling)
    : encoder_(config, prefix + ".enc"), prefix_(std::move(prefix)), pooling_(pooling) {}

template <class T>
std::string DualTower<T>::head_weight_name(int which) const {
  return prefix_ + (which == 0 ? ".pool_head.weight" : ".pool_tail.weight");
}

template <class T>
std::string DualTower<T>::head_bias_name(int which) const {
  return prefix_ + (which == 0 ? ".pool_head.bias" : ".pool_tail.bias");
}

template <class T>
void DualTower<T>::init_params(ad::ParamStore<T>& store, std::uint64_t seed) const {
  encoder_.init_params(store, seed);
  std::mt19937_64 rng(seed ^ 0x9E3779B97F4A7C15ULL);
  for (int which = 0; which < 2; ++which) {
    store.add(head_weight_name(which), ad::random_normal<T>({dim(), 1}, 0.02, rng));
    store.add(head_bias_name(which), ad::Tensor<T>({1}));
  }
}

template <class T>
std::vector<std::string> DualTower<T>::trainable_names() const {
  std::vector<std::string> out = encoder_.param_names();
  if (pooling_ == DescriptionPooling::kVirtualEntity) {
    for (int which = 0; which < 2; ++which) {
      out.push_back(head_weight_name(which));
      out.push_back(head_bias_name(which));
    }
  }
  return out;
}

template <class T>
ad::Var<T> DualTower<T>::instance_vectors(ad::Graph<T>& graph, ad::ParamStore<T>& store,
                                          std::span<const text::EncodedSequence* const> seqs, bool train,
                                          encoder::EncodingCounter* counter) const {
  for (const auto* s : seqs) {
    if (!s->head_marker || !s->tail_marker) throw DataError("instance sequence without entity marker positions");
  }
  encoder::BatchHidden<T> h = encoder_.forward_batch(graph, store, seqs, train);
  if (counter) counter->add(encoder::EncodeSite::kInstance, seqs.size());
  std::vector<std::size_t> cls, head, tail;
  for (std::size_t b = 0; b < seqs.size(); ++b) {
    cls.push_back(h.row(b, 0));
    head.push_back(h.row(b, *seqs[b]->head_marker));
    tail.push_back(h.row(b, *seqs[b]->tail_marker));
  }
  return ad::concat<T>({ad::gather_rows(h.hidden, cls), ad::gather_rows(h.hidden, head), ad::gather_rows(h.hidden, tail)},
                       1);
}

template <class T>
ad::Var<T> DualTower<T>::description_vectors(ad::Graph<T>& graph, ad::ParamStore<T>& store,
                                             std::span<const text::EncodedSequence* const> seqs, bool train,
                                             encoder::EncodingCounter* counter,
                                             std::vector<std::pair<ad::Var<T>, ad::Var<T>>>* weights) const {
  encoder::BatchHidden<T> h = encoder_.forward_batch(graph, store, seqs, train);
  if (counter) counter->add(encoder::EncodeSite::kDescription, seqs.size());
  const std::size_t d = dim();
  const std::size_t len = h.seq_len;
  if (len < 2) throw DataError("description sequence without tokens after [CLS]");

  std::vector<std::size_t> cls;
  std::vector<ad::Var<T>> heads, tails;
  std::optional<ad::Var<T>> w[2], bias[2];
  if (pooling_ == DescriptionPooling::kVirtualEntity) {
    for (int which = 0; which < 2; ++which) {
      w[which] = graph.param(store.at(head_weight_name(which)));
      bias[which] = graph.param(store.at(head_bias_name(which)));
    }
  }
  for (std::size_t b = 0; b < seqs.size(); ++b) {
    const text::EncodedSequence& s = *seqs[b];
    cls.push_back(h.row(b, 0));
    ad::Var<T> body = ad::slice(h.hidden, h.row(b, 1), len - 1, 0, d);  // positions 1..len-1
    switch (pooling_) {
      case DescriptionPooling::kVirtualEntity: {
        std::span<const std::uint8_t> mask(s.mask.data() + 1, len - 1);
        Pooled<T> ph = weight_pool(body, mask, *w[0], *bias[0]);
        Pooled<T> pt = weight_pool(body, mask, *w[1], *bias[1]);
        heads.push_back(ph.vector);
        tails.push_back(pt.vector);
        if (weights) weights->emplace_back(ph.weights, pt.weights);
        break;
      }
      case DescriptionPooling::kAnnotatedSpans: {
        if (!s.head_span || !s.tail_span) throw DataError("description lacks annotated hypernym spans");
        ad::Var<T> seq_hidden = ad::slice(h.hidden, h.row(b, 0), len, 0, d);
        heads.push_back(span_mean(seq_hidden, *s.head_span));
        tails.push_back(span_mean(seq_hidden, *s.tail_span));
        break;
      }
      case DescriptionPooling::kMeanPool: {
        if (s.length < 2) throw DataError("description with no real tokens");
        ad::Var<T> mean = ad::mean_rows(ad::slice(h.hidden, h.row(b, 1), s.length - 1, 0, d));
        heads.push_back(mean);
        tails.push_back(mean);
        break;
      }
    }
  }
  ad::Var<T> dh = heads.size() == 1 ? heads.front() : ad::concat(heads, 0);
  ad::Var<T> dt = tails.size() == 1 ? tails.front() : ad::concat(tails, 0);
  return ad::concat<T>({ad::gather_rows(h.hidden, cls), dh, dt}, 1);
}

namespace {

template <class T>
ad::Tensor<T> columns(const ad::Tensor<T>& row, std::size_t from, std::size_t n) {
  std::vector<T> vals(row.values().begin() + static_cast<std::ptrdiff_t>(from),
                      row.values().begin() + static_cast<std::ptrdiff_t>(from + n));
  return ad::Tensor<T>({n}, std::move(vals));
}

}  // namespace

template <class T>
InstanceRepresentation<T> DualTower<T>::represent_instance(ad::ParamStore<T>& store,
                                                           const text::EncodedSequence& seq) const {
  ad::Graph<T> graph(ad::GradMode::kInference);
  const text::EncodedSequence* one[] = {&seq};
  const ad::Tensor<T>& v = instance_vectors(graph, store, one, false).value();
  const std::size_t d = dim();
  return {columns(v, 0, d), columns(v, d, d), columns(v, 2 * d, d), columns(v, 0, 3 * d)};
}

template <class T>
DescriptionRepresentation<T> DualTower<T>::represent_description(ad::ParamStore<T>& store,
                                                                 const text::EncodedSequence& seq) const {
  ad::Graph<T> graph(ad::GradMode::kInference);
  const text::EncodedSequence* one[] = {&seq};
  std::vector<std::pair<ad::Var<T>, ad::Var<T>>> weights;
  const ad::Tensor<T>& v = description_vectors(graph, store, one, false, nullptr, &weights).value();
  const std::size_t d = dim();
  DescriptionRepresentation<T> out{columns(v, 0, d), columns(v, d, d), columns(v, 2 * d, d), columns(v, 0, 3 * d), {}, {}};
  if (!weights.empty()) {
    const auto& hw = weights.front().first.value().values();
    const auto& tw = weights.front().second.value().values();
    out.head_weights.assign(hw.begin(), hw.end());
    out.tail_weights.assign(tw.begin(), tw.end());
  }
  return out;
}

template Pooled<float> weight_pool(ad::Var<float>, std::span<const std::uint8_t>, ad::Var<float>, ad::Var<float>);
template Pooled<double> weight_pool(ad::Var<double>, std::span<const std::uint8_t>, ad::Var<double>, ad::Var<double>);
template ad::Var<float> span_mean(ad::Var<float>, const text::Span&);
template ad::Var<double> span_mean(ad::Var<double>, const text::Span&);
template class DualTower<float>;
template class DualTower<double>;

}  // namespace relmatch::tower
