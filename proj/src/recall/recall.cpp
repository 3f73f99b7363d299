// Copyright 2026 The relmatch Authors
// SPDX-License-Identifier: Apache-2.0

#include "relmatch/recall/recall.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <set>

#include "relmatch/io/binary.hpp"
#include "relmatch/text/encoding.hpp"

namespace relmatch::recall {

namespace {
constexpr char kMagic[4] = {'R', 'M', 'I', 'X'};
constexpr std::uint32_t kIndexVersion = 1;
constexpr std::size_t kInferenceChunk = 64;
}  // namespace

DescriptionIndex::DescriptionIndex(std::vector<std::string> relations, std::size_t dim, std::vector<double> rows,
                                   std::uint64_t fingerprint)
    : relations_(std::move(relations)), dim_(dim), rows_(std::move(rows)), fingerprint_(fingerprint) {
  if (rows_.size() != relations_.size() * dim_) throw ShapeError("index matrix does not match relation count");
  std::set<std::string> seen;
  for (const auto& r : relations_) {
    if (!seen.insert(r).second) throw DataError("duplicate relation id '" + r + "' in index");
  }
}

void DescriptionIndex::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write index " + path.string());
  io::BinaryWriter w(out);
  w.bytes(kMagic, 4);
  w.u32(kIndexVersion);
  w.u64(relations_.size());
  w.u64(dim_);
  w.u64(fingerprint_);
  for (const auto& r : relations_) w.str(r);
  for (double v : rows_) w.f64(v);
  if (!out) throw DataError("write failed for index " + path.string());
}

DescriptionIndex DescriptionIndex::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open index " + path.string());
  io::BinaryReader r(in, path.string());
  char magic[4];
  r.bytes(magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0) throw DataError(path.string() + ": not an index file");
  if (const auto v = r.u32(); v != kIndexVersion) {
    throw DataError(path.string() + ": unsupported index version " + std::to_string(v));
  }
  const std::uint64_t n = r.u64();
  const std::uint64_t dim = r.u64();
  const std::uint64_t fingerprint = r.u64();
  std::vector<std::string> relations(n);
  for (auto& rel : relations) rel = r.str();
  std::vector<double> rows(n * dim);
  for (double& v : rows) v = r.f64();
  r.expect_eof();
  return DescriptionIndex(std::move(relations), dim, std::move(rows), fingerprint);
}

std::vector<double> unit(std::span<const double> v) {
  double sq = 0;
  for (double x : v) sq += x * x;
  const double n = std::sqrt(sq);
  if (!(n > 0)) throw NumericError("cosine similarity of a zero vector");
  std::vector<double> out(v.begin(), v.end());
  for (double& x : out) x /= n;
  return out;
}

RecallResult top_k(const DescriptionIndex& index, std::span<const double> query, std::size_t k) {
  if (k < 1 || k > index.size()) {
    throw ConfigError("k = " + std::to_string(k) + " outside [1, " + std::to_string(index.size()) + "]");
  }
  if (query.size() != index.dim()) throw ShapeError("query dimension does not match index");
  const std::vector<double> q = unit(query);
  std::vector<ScoredRelation> all(index.size());
  for (std::size_t i = 0; i < index.size(); ++i) {
    std::span<const double> row = index.row(i);
    double s = 0;
    for (std::size_t j = 0; j < q.size(); ++j) s += q[j] * row[j];
    all[i] = {index.relations()[i], std::clamp(s, -1.0, 1.0)};
  }
  auto before = [](const ScoredRelation& a, const ScoredRelation& b) {
    return a.score != b.score ? a.score > b.score : a.relation < b.relation;
  };
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k), all.end(), before);
  all.resize(k);
  return all;
}

template <class T>
DescriptionIndex build_index(const tower::DualTower<T>& tower, ad::ParamStore<T>& params,
                             std::span<const text::RelationDescription> descriptions, const text::Vocabulary& vocab,
                             std::size_t description_len, encoder::EncodingCounter* counter) {
  if (descriptions.empty()) throw DataError("cannot index an empty catalog");
  std::vector<std::string> relations;
  std::set<std::string> seen;
  for (const auto& d : descriptions) {
    if (!seen.insert(d.relation).second) throw DataError("duplicate relation id '" + d.relation + "' in catalog");
    relations.push_back(d.relation);
  }
  const std::size_t dim = tower.vector_dim();
  std::vector<double> rows;
  rows.reserve(descriptions.size() * dim);
  for (std::size_t start = 0; start < descriptions.size(); start += kInferenceChunk) {
    const std::size_t end = std::min(descriptions.size(), start + kInferenceChunk);
    std::vector<text::EncodedSequence> seqs;
    for (std::size_t i = start; i < end; ++i) seqs.push_back(text::encode_description(descriptions[i], vocab, description_len));
    ad::Graph<T> graph(ad::GradMode::kInference);
    const auto ptrs = encoder::pointers(seqs);
    const ad::Tensor<T>& v = tower.description_vectors(graph, params, ptrs, false, counter).value();
    for (std::size_t r = 0; r < v.rows(); ++r) {
      std::vector<double> row(dim);
      for (std::size_t c = 0; c < dim; ++c) row[c] = static_cast<double>(v.at(r, c));
      const std::vector<double> u = unit(row);
      rows.insert(rows.end(), u.begin(), u.end());
    }
  }
  return DescriptionIndex(std::move(relations), dim, std::move(rows), params.checksum());
}

template <class T>
std::vector<std::vector<double>> instance_vectors(const tower::DualTower<T>& tower, ad::ParamStore<T>& params,
                                                  std::span<const text::EncodedSequence> seqs,
                                                  encoder::EncodingCounter* counter) {
  std::vector<std::vector<double>> out;
  out.reserve(seqs.size());
  for (std::size_t start = 0; start < seqs.size(); start += kInferenceChunk) {
    const std::size_t end = std::min(seqs.size(), start + kInferenceChunk);
    std::vector<const text::EncodedSequence*> ptrs;
    for (std::size_t i = start; i < end; ++i) ptrs.push_back(&seqs[i]);
    ad::Graph<T> graph(ad::GradMode::kInference);
    const ad::Tensor<T>& v = tower.instance_vectors(graph, params, ptrs, false, counter).value();
    for (std::size_t r = 0; r < v.rows(); ++r) {
      std::vector<double> row(v.cols());
      for (std::size_t c = 0; c < v.cols(); ++c) row[c] = static_cast<double>(v.at(r, c));
      out.push_back(std::move(row));
    }
  }
  return out;
}

template <class T>
RecallResult recall_topk(const tower::DualTower<T>& tower, ad::ParamStore<T>& params, const DescriptionIndex& index,
                         const text::Instance& inst, const text::Vocabulary& vocab, std::size_t instance_len,
                         std::size_t k, encoder::EncodingCounter* counter) {
  if (k < 1 || k > index.size()) {
    throw ConfigError("k = " + std::to_string(k) + " outside [1, " + std::to_string(index.size()) + "]");
  }
  const text::EncodedSequence seq = text::encode_instance(inst, vocab, instance_len);
  const auto vecs = instance_vectors(tower, params, std::span<const text::EncodedSequence>(&seq, 1), counter);
  return top_k(index, vecs.front(), k);
}

template <class T>
double hits_at_k(const tower::DualTower<T>& tower, ad::ParamStore<T>& params, const DescriptionIndex& index,
                 const std::vector<text::Instance>& instances, const text::Vocabulary& vocab, std::size_t instance_len,
                 std::size_t k) {
  if (instances.empty()) return 0.0;
  std::vector<text::EncodedSequence> seqs;
  for (const auto& inst : instances) seqs.push_back(text::encode_instance(inst, vocab, instance_len));
  const auto vecs = instance_vectors(tower, params, std::span<const text::EncodedSequence>(seqs));
  std::size_t hits = 0;
  for (std::size_t i = 0; i < instances.size(); ++i) {
    for (const auto& s : top_k(index, vecs[i], k)) {
      if (s.relation == instances[i].relation) {
        ++hits;
        break;
      }
    }
  }
  return static_cast<double>(hits) / static_cast<double>(instances.size());
}

#define RELMATCH_INSTANTIATE(T)                                                                                      \
  template DescriptionIndex build_index(const tower::DualTower<T>&, ad::ParamStore<T>&,                            \
                                        std::span<const text::RelationDescription>, const text::Vocabulary&,        \
                                        std::size_t, encoder::EncodingCounter*);                                    \
  template std::vector<std::vector<double>> instance_vectors(const tower::DualTower<T>&, ad::ParamStore<T>&,       \
                                                             std::span<const text::EncodedSequence>,                \
                                                             encoder::EncodingCounter*);                            \
  template RecallResult recall_topk(const tower::DualTower<T>&, ad::ParamStore<T>&, const DescriptionIndex&,       \
                                    const text::Instance&, const text::Vocabulary&, std::size_t, std::size_t,       \
                                    encoder::EncodingCounter*);                                                     \
  template double hits_at_k(const tower::DualTower<T>&, ad::ParamStore<T>&, const DescriptionIndex&,               \
                            const std::vector<text::Instance>&, const text::Vocabulary&, std::size_t, std::size_t);

RELMATCH_INSTANTIATE(float)
RELMATCH_INSTANTIATE(double)

#undef RELMATCH_INSTANTIATE

}  // namespace relmatch::recall
