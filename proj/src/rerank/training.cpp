// Copyright 2026 The relmatch Authors
// SPDX-License-Identifier: Apache-2.0

#include "relmatch/rerank/training.hpp"

#include <chrono>
#include <cmath>
#include <optional>
#include <set>

#include "relmatch/autodiff/optim.hpp"
#include "relmatch/recall/recall.hpp"

namespace relmatch::rerank {

std::string to_string(TrainMode m) {
  switch (m) {
    case TrainMode::kRecallOnly:
      return "recall";
    case TrainMode::kJoint:
      return "joint";
    case TrainMode::kSeparate:
      return "separate";
  }
  return "?";
}

TrainMode parse_train_mode(const std::string& s) {
  if (s == "recall") return TrainMode::kRecallOnly;
  if (s == "joint") return TrainMode::kJoint;
  if (s == "separate") return TrainMode::kSeparate;
  throw ConfigError("unknown training mode '" + s + "' (expected recall, joint or separate)");
}

template <class T>
StepLosses<T> step_losses(ad::Graph<T>& graph, MatchModel<T>& model, const text::ContrastiveBatch& batch,
                          const std::vector<text::Instance>& instances, const text::Catalog& catalog,
                          const text::Vocabulary& vocab, const TrainOptions& opts, bool with_rerank,
                          bool recall_trainable, std::mt19937_64& rng) {
  const auto& tower = model.tower();
  const auto xs = encoder::pointers(batch.instances);
  const auto ds = encoder::pointers(batch.descriptions);
  const T tau = static_cast<T>(opts.temperature);

  StepLosses<T> out;
  std::vector<double> scores;
  const std::size_t n = batch.size();
  auto read_scores = [&](const ad::Tensor<T>& cos) {
    scores.resize(n * n);
    for (std::size_t i = 0; i < n * n; ++i) scores[i] = static_cast<double>(cos[i]);
  };
  if (recall_trainable) {
    ad::Var<T> x = tower.instance_vectors(graph, model.params(), xs, true, &model.counter());
    ad::Var<T> d = tower.description_vectors(graph, model.params(), ds, true, &model.counter());
    out.recall = recall::info_nce_loss(x, d, tau);
    if (with_rerank) read_scores(ad::cosine_matrix(x, d).value());
  } else {
    ad::Graph<T> frozen(ad::GradMode::kInference);
    ad::Var<T> x = tower.instance_vectors(frozen, model.params(), xs, false, &model.counter());
    ad::Var<T> d = tower.description_vectors(frozen, model.params(), ds, false, &model.counter());
    out.recall = graph.constant(recall::info_nce_loss(x, d, tau).value());
    if (with_rerank) read_scores(ad::cosine_matrix(x, d).value());
  }
  out.total = ad::scale(out.recall, static_cast<T>(opts.recall_weight));
  if (!with_rerank) return out;

  const CrossEncoder<T>* cross = model.reranker();
  if (cross == nullptr) throw ConfigError("reranking requested for a model without a reranker");
  const std::size_t k = cross->k();
  const std::size_t pair_len = model.config().pair_len;
  std::vector<text::EncodedSequence> pairs;
  pairs.reserve(n * k);
  for (std::size_t i = 0; i < n; ++i) {
    TrainingCandidates tc = select_training_candidates(std::span<const double>(scores).subspan(i * n, n), i,
                                                       std::span<const std::string>(batch.relations), k, rng);
    for (std::size_t idx : tc.order) {
      pairs.push_back(
          text::encode_pair(instances[batch.items[i]], catalog.at(batch.relations[idx]), vocab, pair_len));
    }
    out.candidates.push_back(std::move(tc.order));
    out.gold_positions.push_back(tc.gold_position);
  }
  const auto ptrs = encoder::pointers(pairs);
  ad::Var<T> logits = cross->logits(graph, model.params(), ptrs, true, &model.counter());
  out.rerank = ad::log_softmax_cross_entropy(logits, std::span<const std::size_t>(out.gold_positions));
  if (recall_trainable) {
    out.total = ad::add(out.total, ad::scale(out.rerank, static_cast<T>(opts.rerank_weight)));
  } else {
    out.total = ad::scale(out.rerank, static_cast<T>(opts.rerank_weight));
  }
  return out;
}

namespace {

struct Phase {
  std::string name;
  bool recall_trainable;
  bool rerank_trainable;
};

template <class T>
class Trainer {
 public:
  Trainer(MatchModel<T>& model, const TrainData& data, const TrainOptions& opts, const EpochCallback& cb)
      : model_(model), data_(data), opts_(opts), cb_(cb), rng_(opts.seed) {
    if (!data.train || !data.train_catalog || !data.vocab) throw ConfigError("training data is incomplete");
    std::set<std::string> rels;
    for (const auto& inst : *data.train) rels.insert(inst.relation);
    if (rels.size() < 2) throw DataError("training needs at least 2 distinct relations");
    if (opts.batch_size < 2) throw ConfigError("batch size must be at least 2");
    if (!(opts.temperature > 0)) throw ConfigError("temperature must be positive");
    if (opts.epochs == 0) throw ConfigError("epochs must be positive");
    report_.batch_size = std::min(opts.batch_size, rels.size());
    if (data.val && !data.val->empty()) {
      if (!data.val_catalog) throw ConfigError("validation instances without a validation catalog");
      val_ = data.val;
    }
  }

  TrainReport run() {
    const auto t0 = std::chrono::steady_clock::now();
    const bool has_cross = model_.reranker() != nullptr;
    switch (opts_.mode) {
      case TrainMode::kRecallOnly:
        run_phase({"recall", true, false});
        break;
      case TrainMode::kJoint:
        run_phase({has_cross ? "joint" : "recall", true, has_cross});
        break;
      case TrainMode::kSeparate:
        run_phase({"recall", true, false});
        if (has_cross) run_phase({"rerank", false, true});
        break;
    }
    report_.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return std::move(report_);
  }

 private:
  using Weights = std::vector<ad::Tensor<T>>;

  Weights copy_of(const std::vector<std::string>& names) {
    Weights out;
    out.reserve(names.size());
    for (const auto& n : names) out.push_back(model_.params().at(n));
    return out;
  }

  void restore(const std::vector<std::string>& names, const Weights& w) {
    for (std::size_t i = 0; i < names.size(); ++i) model_.params().entry(names[i]).tensor = w[i];
  }

  void run_phase(const Phase& phase) {
    std::vector<std::string> names;
    if (phase.recall_trainable) names = model_.recall_param_names();
    if (phase.rerank_trainable) {
      for (auto& n : model_.rerank_param_names()) names.push_back(std::move(n));
    }
    if (opts_.freeze_token_embeddings) {
      std::erase_if(names, [](const std::string& n) { return n.ends_with(".tok_emb"); });
    }
    const std::vector<std::string> recall_names = model_.recall_param_names();
    const std::vector<std::string> rerank_names =
        phase.rerank_trainable ? model_.rerank_param_names() : std::vector<std::string>{};
    // Stage-wise selection: the recall tower by val hits@1, then the reranker
    // (its starting point included) by val pipeline accuracy on that tower.
    std::optional<Weights> best_recall;
    double best_hits = -1;
    std::size_t best_epoch = 0;
    std::vector<Weights> rerank_history;
    if (val_ && phase.rerank_trainable) rerank_history.push_back(copy_of(rerank_names));
    std::int64_t step = 0;
    std::int64_t total_steps = 0;
    const ad::AdamWOptions adam{.weight_decay = opts_.weight_decay};
    const text::BatchSampler sampler(*data_.train, report_.batch_size);

    for (std::size_t epoch = 1; epoch <= opts_.epochs; ++epoch) {
      const auto batches = sampler.epoch(rng_);
      if (batches.empty()) throw DataError("an epoch produced no complete batch");
      if (total_steps == 0) total_steps = static_cast<std::int64_t>(batches.size() * opts_.epochs);
      EpochLog log{.phase = phase.name, .epoch = epoch};
      for (const auto& items : batches) {
        const text::ContrastiveBatch batch =
            text::make_batch(*data_.train, items, *data_.train_catalog, *data_.vocab, model_.config().instance_len,
                             model_.config().description_len);
        ad::Graph<T> graph(ad::GradMode::kRecord, rng_());
        StepLosses<T> l = step_losses(graph, model_, batch, *data_.train, *data_.train_catalog, *data_.vocab, opts_,
                                      phase.rerank_trainable, phase.recall_trainable, rng_);
        const double total = static_cast<double>(l.total.value().item());
        const double lr = static_cast<double>(l.recall.value().item());
        const double lc = phase.rerank_trainable ? static_cast<double>(l.rerank.value().item()) : 0.0;
        if (!std::isfinite(total)) {
          throw NumericError(phase.name + " loss is not finite at epoch " + std::to_string(epoch) + ", step " +
                             std::to_string(step + 1) + " (recall " + std::to_string(lr) + ", rerank " +
                             std::to_string(lc) + ")");
        }
        graph.backward(l.total);
        ++step;
        ad::adamw_step(model_.params(), names, adam,
                       ad::warmup_linear_lr(opts_.learning_rate, step, static_cast<std::int64_t>(opts_.warmup_steps),
                                            total_steps),
                       step);
        model_.params().clear_grads();
        report_.step_losses.push_back(total);
        log.recall_loss += lr;
        log.rerank_loss += lc;
      }
      log.recall_loss /= static_cast<double>(batches.size());
      log.rerank_loss /= static_cast<double>(batches.size());
      report_.steps += batches.size();
      if (val_) {
        validate(log, phase.rerank_trainable);
        if (phase.recall_trainable && log.val_hits1 >= best_hits) {
          best_hits = log.val_hits1;
          best_epoch = epoch;
          best_recall = copy_of(recall_names);
        }
        if (phase.rerank_trainable) rerank_history.push_back(copy_of(rerank_names));
      }
      report_.epochs.push_back(log);
      if (cb_) cb_(log);
    }
    if (!val_) {
      report_.selected_epoch.push_back(0);
      return;
    }
    if (phase.recall_trainable) {
      restore(recall_names, *best_recall);
      report_.selected_epoch.push_back(best_epoch);
    }
    if (phase.rerank_trainable) {
      const recall::DescriptionIndex index = model_.build_index(*data_.val_catalog, *data_.vocab);
      double best_acc = -1;
      std::size_t chosen = 0;
      for (std::size_t e = 0; e < rerank_history.size(); ++e) {
        restore(rerank_names, rerank_history[e]);
        const double acc = pipeline_accuracy(index, true);
        if (acc >= best_acc) {
          best_acc = acc;
          chosen = e;
        }
      }
      restore(rerank_names, rerank_history[chosen]);
      report_.selected_epoch.push_back(chosen);
    }
  }

  double pipeline_accuracy(const recall::DescriptionIndex& index, bool with_rerank) {
    const auto preds = predict_batch(model_, index, *data_.val_catalog, *val_, *data_.vocab, with_rerank);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) correct += preds[i].relation == (*val_)[i].relation;
    return static_cast<double>(correct) / static_cast<double>(preds.size());
  }

  void validate(EpochLog& log, bool with_rerank) {
    const recall::DescriptionIndex index = model_.build_index(*data_.val_catalog, *data_.vocab);
    const auto preds = predict_batch(model_, index, *data_.val_catalog, *val_, *data_.vocab, with_rerank);
    std::size_t hits = 0;
    std::size_t correct = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
      hits += preds[i].candidates.front().relation == (*val_)[i].relation;
      correct += preds[i].relation == (*val_)[i].relation;
    }
    const double n = static_cast<double>(preds.size());
    log.val_hits1 = static_cast<double>(hits) / n;
    log.val_accuracy = static_cast<double>(correct) / n;
    log.val_score = with_rerank ? log.val_accuracy : log.val_hits1;
  }

  MatchModel<T>& model_;
  const TrainData& data_;
  const TrainOptions& opts_;
  const EpochCallback& cb_;
  std::mt19937_64 rng_;
  const std::vector<text::Instance>* val_ = nullptr;
  TrainReport report_;
};

}  // namespace

template <class T>
TrainReport train(MatchModel<T>& model, const TrainData& data, const TrainOptions& opts, const EpochCallback& on_epoch) {
  return Trainer<T>(model, data, opts, on_epoch).run();
}

#define RELMATCH_INSTANTIATE(T)                                                                                    \
  template StepLosses<T> step_losses(ad::Graph<T>&, MatchModel<T>&, const text::ContrastiveBatch&,               \
                                     const std::vector<text::Instance>&, const text::Catalog&,                   \
                                     const text::Vocabulary&, const TrainOptions&, bool, bool, std::mt19937_64&); \
  template TrainReport train(MatchModel<T>&, const TrainData&, const TrainOptions&, const EpochCallback&);

RELMATCH_INSTANTIATE(float)
RELMATCH_INSTANTIATE(double)

#undef RELMATCH_INSTANTIATE

}  // namespace relmatch::rerank
