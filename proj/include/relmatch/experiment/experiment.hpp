// Copyright 2026 The relmatch Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "relmatch/io/config.hpp"
#include "relmatch/io/corpus.hpp"
#include "relmatch/rerank/training.hpp"

namespace relmatch::experiment {

/// Train, validation and test relation sets, pairwise disjoint, each sorted.
struct ZeroShotSplit {
  std::uint64_t seed = 0;
  std::size_t m = 0;
  std::vector<std::string> train;
  std::vector<std::string> val;
  std::vector<std::string> test;
};

/// Seeded shuffle of `relations`; the first m go to validation, the next m
/// to test, the rest to training. Throws DataError unless
/// |relations| >= 2m + 2 and ids are distinct.
ZeroShotSplit make_split(std::vector<std::string> relations, std::size_t m, std::uint64_t seed);

struct SplitData {
  std::vector<text::Instance> train, val, test;
  text::Catalog train_catalog, val_catalog, test_catalog;
};

SplitData partition(const io::Corpus& corpus, const ZeroShotSplit& split);

struct RelationMetrics {
  std::string relation;
  double precision = 0;
  double recall = 0;
  double f1 = 0;
  std::size_t support = 0;    // gold count
  std::size_t predicted = 0;  // prediction count
};

struct MetricsReport {
  std::vector<RelationMetrics> per_relation;  // sorted by relation id
  double precision = 0;                       // macro averages
  double recall = 0;
  double f1 = 0;
};

/// Per-relation P/R/F1 over `unseen` and their unweighted means. A relation
/// with no prediction scores precision 0, with no gold recall 0. Throws
/// DataError on a length mismatch or a gold or prediction outside `unseen`.
MetricsReport evaluate(std::span<const std::string> predictions, std::span<const std::string> golds,
                       std::span<const std::string> unseen);

enum class Variant {
  kEmma,            // virtual-entity pooling, joint training, reranked
  kOnlyRecall,      // the same model, recall top-1 (w/o-Cla)
  kWithoutVirtual,  // annotated hypernym spans, reranked
  kWithoutBoth,     // mean pooling, no reranker
  kSeparate,        // virtual-entity pooling, separately trained stages
};

std::string to_string(Variant v);
Variant parse_variant(const std::string& s);
const std::vector<Variant>& all_variants();

struct EncodingCounts {
  std::uint64_t instances = 0;
  std::uint64_t descriptions = 0;
  std::uint64_t pairs = 0;
  friend bool operator==(const EncodingCounts&, const EncodingCounts&) = default;
};

/// One evaluated (seed, variant) cell.
struct RunRecord {
  std::uint64_t seed = 0;
  std::string config;
  std::size_t m = 0;
  std::size_t k = 0;
  MetricsReport metrics;
  double hits1 = 0;  // recall stage on the test relations
  double hits_k = 0;
  EncodingCounts counts;  // test-time encodings
  double train_seconds = 0;
  double eval_seconds = 0;
  std::vector<std::string> predictions;
};

using Logger = std::function<void(const std::string&)>;

/// Trains and evaluates one model on a prepared split. `vocab` must cover
/// the whole corpus. Variants sharing a trained model (EMMA and onlyRecall)
/// come from one training run.
std::vector<RunRecord> run_seed(const io::Corpus& corpus, const text::Vocabulary& vocab, const io::RunConfig& config,
                                std::uint64_t seed, const std::vector<Variant>& variants, const Logger& log = {});

/// Every seed of `config.seeds`, serially, in order.
std::vector<RunRecord> run_suite(const io::Corpus& corpus, const io::RunConfig& config,
                                 const std::vector<Variant>& variants, const Logger& log = {});

/// Mean of each numeric column per config, in first-appearance order.
struct MeanRow {
  std::string config;
  std::size_t k = 0;
  std::size_t seeds = 0;
  double precision = 0, recall = 0, f1 = 0, hits1 = 0, hits_k = 0;
  double train_seconds = 0;
};
std::vector<MeanRow> means(const std::vector<RunRecord>& rows);
const MeanRow& find_mean(const std::vector<MeanRow>& rows, const std::string& config, std::size_t k);

/// EMMA suite per k. One block of records per k, all seeds.
std::vector<RunRecord> k_sweep(const io::Corpus& corpus, const io::RunConfig& config, const std::vector<std::size_t>& ks,
                               const Logger& log = {});

/// "decreasing", "increasing", "flat" or "mixed" for F1 ordered by k.
std::string trend(const std::vector<MeanRow>& by_k);

struct BenchReport {
  std::size_t n = 0;  // relations indexed
  std::size_t m = 0;  // instances queried
  std::size_t k = 0;
  EncodingCounts measured;
  EncodingCounts expected;
  std::uint64_t prompt_match_pairs = 0;  // m * n
  double index_seconds = 0;
  double recall_seconds = 0;
  double rerank_seconds = 0;
};

/// Builds an index over `catalog` and predicts every instance through the
/// full pipeline with fresh counters. Throws Error when a measured count
/// differs from n descriptions, m instances and m*k pairs.
template <class T>
BenchReport efficiency_bench(rerank::MatchModel<T>& model, const text::Catalog& catalog,
                             const std::vector<text::Instance>& instances, const text::Vocabulary& vocab);

/// Closed-form encoding counts at 700 instances per relation, n in {5, 10, 15}:
/// description-vector matching, two-stage matching as published, the
/// pair-only baseline (700 n^2), and this implementation's n + 700n + 700nk.
struct ProjectionRow {
  std::size_t n = 0;
  std::uint64_t matching = 0;    // 700n + n
  std::uint64_t two_stage = 0;   // 700n + 700 + n
  std::uint64_t pair_only = 0;   // 700n^2
  std::uint64_t contract = 0;    // n + 700n + 700nk
};
std::vector<ProjectionRow> projection(std::size_t k, const std::vector<std::size_t>& ns = {5, 10, 15});

// Reports.
void write_table(std::ostream& out, const std::vector<RunRecord>& rows);
void write_means(std::ostream& out, const std::vector<MeanRow>& rows);
void write_tsv(std::ostream& out, const std::vector<RunRecord>& rows);
void write_per_relation(std::ostream& out, const MetricsReport& report);
void write_bench(std::ostream& out, const BenchReport& report, const std::vector<ProjectionRow>& proj);

}  // namespace relmatch::experiment
