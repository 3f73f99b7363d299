// Copyright 2026 The relmatch Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "relmatch/rerank/model.hpp"

namespace relmatch::rerank {

enum class TrainMode {
  kRecallOnly,  // InfoNCE only; any reranker stays at its initialization
  kJoint,       // one optimizer step on w_r * L_infoNCE + w_c * L_c per batch
  kSeparate,    // recall phase, then reranker phase on the frozen recall model
};

std::string to_string(TrainMode m);
TrainMode parse_train_mode(const std::string& s);

struct TrainOptions {
  TrainMode mode = TrainMode::kJoint;
  double temperature = 0.02;
  std::size_t batch_size = 16;  // clamped to the number of distinct train relations
  double learning_rate = 1e-3;
  std::size_t epochs = 10;
  std::size_t warmup_steps = 30;
  double weight_decay = 0.01;
  double recall_weight = 1.0;
  double rerank_weight = 1.0;
  bool freeze_token_embeddings = false;  // keep token tables at their initialization
  std::uint64_t seed = 0;

  friend bool operator==(const TrainOptions&, const TrainOptions&) = default;
};

/// Train split plus an optional validation split. Catalogs must describe
/// every relation of their instances.
struct TrainData {
  const std::vector<text::Instance>* train = nullptr;
  const text::Catalog* train_catalog = nullptr;
  const std::vector<text::Instance>* val = nullptr;  // may be null or empty
  const text::Catalog* val_catalog = nullptr;
  const text::Vocabulary* vocab = nullptr;
};

struct EpochLog {
  std::string phase;  // "recall", "rerank" or "joint"
  std::size_t epoch = 0;
  double recall_loss = 0;  // mean over the epoch's steps
  double rerank_loss = 0;
  double val_hits1 = 0;
  double val_accuracy = 0;  // pipeline accuracy; equals val_hits1 without a reranker
  double val_score = 0;     // val_accuracy when a reranker trains, else val_hits1
};

struct TrainReport {
  std::size_t batch_size = 0;
  std::size_t steps = 0;
  std::vector<double> step_losses;  // total loss per optimizer step
  std::vector<EpochLog> epochs;
  // One entry per selected stage, in order: recall stage 1-based, reranker
  // stage 0 for its pre-phase state. Holds a single 0 per phase without
  // validation data.
  std::vector<std::size_t> selected_epoch;
  double seconds = 0;
};

using EpochCallback = std::function<void(const EpochLog&)>;

/// Trains `model` in place. With validation data each phase ends with
/// stage-wise selection: the recall parameters of the epoch with the best
/// validation hits@1 are restored, then the reranker parameters (its state
/// before the phase included) with the best validation pipeline accuracy on
/// that recall model. Later snapshots win ties. Throws NumericError when a
/// loss becomes non-finite.
template <class T>
TrainReport train(MatchModel<T>& model, const TrainData& data, const TrainOptions& opts,
                  const EpochCallback& on_epoch = {});

/// One contrastive step's pieces, exposed for tests: the recall loss, the
/// classification loss on candidates built from the batch scores, and the
/// weighted total, all on one recorded graph.
template <class T>
struct StepLosses {
  ad::Var<T> recall;
  ad::Var<T> rerank;  // unset (graph == nullptr) without a reranker
  ad::Var<T> total;
  std::vector<std::vector<std::size_t>> candidates;  // batch description indices per instance
  std::vector<std::size_t> gold_positions;
};

template <class T>
StepLosses<T> step_losses(ad::Graph<T>& graph, MatchModel<T>& model, const text::ContrastiveBatch& batch,
                          const std::vector<text::Instance>& instances, const text::Catalog& catalog,
                          const text::Vocabulary& vocab, const TrainOptions& opts, bool with_rerank,
                          bool recall_trainable, std::mt19937_64& rng);

}  // namespace relmatch::rerank
