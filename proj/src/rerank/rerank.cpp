// Copyright 2026 The relmatch Authors
// SPDX-License-Identifier: Apache-2.0

#include "relmatch/rerank/rerank.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "relmatch/text/encoding.hpp"

namespace relmatch::rerank {

template <class T>
CrossEncoder<T>::CrossEncoder(encoder::EncoderConfig config, std::string prefix, std::size_t k, std::size_t hidden,
                              ad::Activation activation)
    : encoder_(config, prefix + ".enc"), prefix_(std::move(prefix)), k_(k), hidden_(hidden), activation_(activation) {
  if (k_ < 2) throw ConfigError("cross-encoder needs k >= 2, got " + std::to_string(k_));
  if (hidden_ == 0) throw ConfigError("rerank MLP hidden width must be positive");
}

template <class T>
std::vector<std::string> CrossEncoder<T>::head_names() const {
  return {prefix_ + ".mlp.w1", prefix_ + ".mlp.b1", prefix_ + ".mlp.w2", prefix_ + ".mlp.b2"};
}

template <class T>
void CrossEncoder<T>::init_params(ad::ParamStore<T>& store, std::uint64_t seed) const {
  encoder_.init_params(store, seed);
  std::mt19937_64 rng(seed ^ 0xC2B2AE3D27D4EB4FULL);
  const std::size_t in = k_ * encoder_.config().dim;
  const auto names = head_names();
  store.add(names[0], ad::random_normal<T>({in, hidden_}, 1.0 / std::sqrt(static_cast<double>(in)), rng));
  store.add(names[1], ad::Tensor<T>({hidden_}));
  // Zero output layer: the untrained head scores every slot equally, so
  // prediction falls back to recall order.
  store.add(names[2], ad::Tensor<T>({hidden_, k_}));
  store.add(names[3], ad::Tensor<T>({k_}));
}

template <class T>
std::vector<std::string> CrossEncoder<T>::trainable_names() const {
  std::vector<std::string> out = encoder_.param_names();
  for (auto& n : head_names()) out.push_back(std::move(n));
  return out;
}

template <class T>
void CrossEncoder<T>::check_head(const ad::ParamStore<T>& store) const {
  const auto names = head_names();
  const ad::Shape want_w1{k_ * encoder_.config().dim, hidden_};
  const ad::Shape want_w2{hidden_, k_};
  if (store.at(names[0]).shape() != want_w1 || store.at(names[2]).shape() != want_w2) {
    throw ConfigError("rerank head was trained for a different k or width: stored " +
                      ad::to_string(store.at(names[2]).shape()) + ", expected " + ad::to_string(want_w2));
  }
}

template <class T>
ad::Var<T> CrossEncoder<T>::logits(ad::Graph<T>& graph, ad::ParamStore<T>& store,
                                   std::span<const text::EncodedSequence* const> pairs, bool train,
                                   encoder::EncodingCounter* counter) const {
  if (pairs.empty() || pairs.size() % k_ != 0) {
    throw ShapeError("pair count " + std::to_string(pairs.size()) + " is not a multiple of k = " + std::to_string(k_));
  }
  encoder::BatchHidden<T> h = encoder_.forward_batch(graph, store, pairs, train);
  if (counter) counter->add(encoder::EncodeSite::kPair, pairs.size());
  std::vector<std::size_t> cls(pairs.size());
  for (std::size_t j = 0; j < pairs.size(); ++j) cls[j] = h.row(j, 0);
  const std::size_t groups = pairs.size() / k_;
  const auto names = head_names();
  auto P = [&](const std::string& n) { return graph.param(store.at(n)); };
  const ad::Var<T> w1 = P(names[0]), b1 = P(names[1]), w2 = P(names[2]), b2 = P(names[3]);
  const std::vector<std::vector<std::size_t>> orders = slot_orders(k_);
  ad::Var<T> sum;
  for (const auto& order : orders) {
    // Slot s of group g holds candidate order[s].
    std::vector<std::size_t> rows;
    rows.reserve(pairs.size());
    for (std::size_t g = 0; g < groups; ++g) {
      for (std::size_t s = 0; s < k_; ++s) rows.push_back(h.row(g * k_ + order[s], 0));
    }
    ad::Var<T> o = ad::reshape(ad::gather_rows(h.hidden, std::move(rows)), {groups, k_ * encoder_.config().dim});
    ad::Var<T> slot_logits = ad::add_bias(ad::matmul(ad::activate(ad::add_bias(ad::matmul(o, w1), b1), activation_), w2), b2);
    std::vector<std::size_t> back(k_);
    for (std::size_t s = 0; s < k_; ++s) back[order[s]] = s;
    ad::Var<T> cand_logits = ad::transpose(ad::gather_rows(ad::transpose(slot_logits), std::move(back)));
    sum = sum.graph ? ad::add(sum, cand_logits) : cand_logits;
  }
  return ad::scale(sum, T{1} / static_cast<T>(orders.size()));
}

std::vector<std::vector<std::size_t>> slot_orders(std::size_t k) {
  std::vector<std::size_t> order(k);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<std::vector<std::size_t>> out;
  if (k <= kMaxPermutedK) {
    do {
      out.push_back(order);
    } while (std::next_permutation(order.begin(), order.end()));
  } else {
    for (std::size_t r = 0; r < k; ++r) {
      out.push_back(order);
      std::rotate(order.begin(), order.begin() + 1, order.end());
    }
  }
  return out;
}

template <class T>
std::vector<double> rerank_forward(const CrossEncoder<T>& cross, ad::ParamStore<T>& store, const text::Instance& inst,
                                   const CandidateSet& cands, const text::Catalog& catalog,
                                   const text::Vocabulary& vocab, std::size_t pair_len,
                                   encoder::EncodingCounter* counter) {
  if (cands.size() != cross.k()) {
    throw ConfigError("candidate set of size " + std::to_string(cands.size()) + " for a head trained with k = " +
                      std::to_string(cross.k()));
  }
  std::vector<text::EncodedSequence> seqs;
  for (const auto& rel : cands.relations) seqs.push_back(text::encode_pair(inst, catalog.at(rel), vocab, pair_len));
  ad::Graph<T> graph(ad::GradMode::kInference);
  const auto ptrs = encoder::pointers(seqs);
  ad::Var<T> probs = ad::softmax(cross.logits(graph, store, ptrs, false, counter), 1);
  std::vector<double> out;
  for (T p : probs.value().values()) out.push_back(static_cast<double>(p));
  return out;
}

double rerank_loss(std::span<const double> logits, std::size_t gold) {
  if (gold >= logits.size()) {
    throw ConfigError("gold position " + std::to_string(gold) + " out of range for " + std::to_string(logits.size()) +
                      " candidates");
  }
  const double mx = *std::max_element(logits.begin(), logits.end());
  double z = 0;
  for (double l : logits) z += std::exp(l - mx);
  return mx + std::log(z) - logits[gold];
}

TrainingCandidates select_training_candidates(std::span<const double> scores, std::size_t gold,
                                              std::span<const std::string> relations, std::size_t k,
                                              std::mt19937_64& rng) {
  if (scores.size() != relations.size()) throw ShapeError("scores and relations differ in length");
  if (gold >= scores.size()) throw ConfigError("gold index out of range");
  if (k < 2 || k > scores.size()) {
    throw DataError("need k = " + std::to_string(k) + " distinct descriptions, batch has " +
                    std::to_string(scores.size()));
  }
  std::vector<std::size_t> others;
  for (std::size_t j = 0; j < scores.size(); ++j) {
    if (j != gold) others.push_back(j);
  }
  std::partial_sort(others.begin(), others.begin() + static_cast<std::ptrdiff_t>(k - 1), others.end(),
                    [&](std::size_t a, std::size_t b) {
                      return scores[a] != scores[b] ? scores[a] > scores[b] : relations[a] < relations[b];
                    });
  TrainingCandidates out;
  out.order.push_back(gold);
  out.order.insert(out.order.end(), others.begin(), others.begin() + static_cast<std::ptrdiff_t>(k - 1));
  text::shuffle(out.order.begin(), out.order.end(), rng);
  out.gold_position = static_cast<std::size_t>(std::find(out.order.begin(), out.order.end(), gold) - out.order.begin());
  return out;
}

template class CrossEncoder<float>;
template class CrossEncoder<double>;
template std::vector<double> rerank_forward(const CrossEncoder<float>&, ad::ParamStore<float>&, const text::Instance&,
                                            const CandidateSet&, const text::Catalog&, const text::Vocabulary&,
                                            std::size_t, encoder::EncodingCounter*);
template std::vector<double> rerank_forward(const CrossEncoder<double>&, ad::ParamStore<double>&,
                                            const text::Instance&, const CandidateSet&, const text::Catalog&,
                                            const text::Vocabulary&, std::size_t, encoder::EncodingCounter*);

}  // namespace relmatch::rerank
