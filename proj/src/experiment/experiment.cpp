// Copyright 2026 The relmatch Authors
// SPDX-License-Identifier: Apache-2.0

#include "relmatch/experiment/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <iomanip>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

namespace relmatch::experiment {

ZeroShotSplit make_split(std::vector<std::string> relations, std::size_t m, std::uint64_t seed) {
  if (m < 1) throw DataError("m must be positive");
  if (relations.size() < 2 * m + 2) {
    throw DataError("a split with m = " + std::to_string(m) + " needs at least " + std::to_string(2 * m + 2) +
                    " relations, got " + std::to_string(relations.size()));
  }
  std::sort(relations.begin(), relations.end());
  if (std::adjacent_find(relations.begin(), relations.end()) != relations.end()) {
    throw DataError("relation ids must be distinct");
  }
  std::mt19937_64 rng(seed);
  text::shuffle(relations.begin(), relations.end(), rng);
  ZeroShotSplit s;
  s.seed = seed;
  s.m = m;
  const auto mid = static_cast<std::ptrdiff_t>(m);
  s.val.assign(relations.begin(), relations.begin() + mid);
  s.test.assign(relations.begin() + mid, relations.begin() + 2 * mid);
  s.train.assign(relations.begin() + 2 * mid, relations.end());
  for (auto* v : {&s.train, &s.val, &s.test}) std::sort(v->begin(), v->end());
  return s;
}

SplitData partition(const io::Corpus& corpus, const ZeroShotSplit& split) {
  std::map<std::string, int> role;
  for (const auto& r : split.train) role[r] = 0;
  for (const auto& r : split.val) role[r] = 1;
  for (const auto& r : split.test) role[r] = 2;
  SplitData d;
  for (const auto& inst : corpus.instances) {
    auto it = role.find(inst.relation);
    if (it == role.end()) throw DataError("instance relation '" + inst.relation + "' is not in the split");
    (it->second == 0 ? d.train : it->second == 1 ? d.val : d.test).push_back(inst);
  }
  d.train_catalog = corpus.catalog.subset(split.train);
  d.val_catalog = corpus.catalog.subset(split.val);
  d.test_catalog = corpus.catalog.subset(split.test);
  return d;
}

MetricsReport evaluate(std::span<const std::string> predictions, std::span<const std::string> golds,
                       std::span<const std::string> unseen) {
  if (predictions.size() != golds.size()) throw DataError("prediction and gold counts differ");
  std::map<std::string, std::size_t> slot;
  for (const auto& r : unseen) slot.emplace(r, 0);
  std::size_t i = 0;
  for (auto& [r, s] : slot) s = i++;
  const std::size_t n = slot.size();
  std::vector<std::size_t> tp(n), pred(n), gold(n);
  for (std::size_t j = 0; j < golds.size(); ++j) {
    auto g = slot.find(golds[j]);
    if (g == slot.end()) throw DataError("gold relation '" + golds[j] + "' is not an unseen relation");
    auto p = slot.find(predictions[j]);
    if (p == slot.end()) throw DataError("prediction '" + predictions[j] + "' is outside the unseen relation set");
    ++gold[g->second];
    ++pred[p->second];
    if (g->second == p->second) ++tp[g->second];
  }
  MetricsReport out;
  for (const auto& [r, s] : slot) {
    RelationMetrics rm{.relation = r, .support = gold[s], .predicted = pred[s]};
    rm.precision = pred[s] ? static_cast<double>(tp[s]) / static_cast<double>(pred[s]) : 0.0;
    rm.recall = gold[s] ? static_cast<double>(tp[s]) / static_cast<double>(gold[s]) : 0.0;
    rm.f1 = rm.precision + rm.recall > 0 ? 2 * rm.precision * rm.recall / (rm.precision + rm.recall) : 0.0;
    out.precision += rm.precision;
    out.recall += rm.recall;
    out.f1 += rm.f1;
    out.per_relation.push_back(rm);
  }
  if (n > 0) {
    out.precision /= static_cast<double>(n);
    out.recall /= static_cast<double>(n);
    out.f1 /= static_cast<double>(n);
  }
  return out;
}

std::string to_string(Variant v) {
  switch (v) {
    case Variant::kEmma:
      return "EMMA";
    case Variant::kOnlyRecall:
      return "onlyRecall";
    case Variant::kWithoutVirtual:
      return "w/o-Virt";
    case Variant::kWithoutBoth:
      return "w/o-both";
    case Variant::kSeparate:
      return "separate";
  }
  return "?";
}

Variant parse_variant(const std::string& s) {
  for (Variant v : all_variants()) {
    if (s == to_string(v)) return v;
  }
  if (s == "emma") return Variant::kEmma;
  if (s == "only-recall" || s == "w/o-Cla") return Variant::kOnlyRecall;
  if (s == "wo-virt") return Variant::kWithoutVirtual;
  if (s == "wo-both") return Variant::kWithoutBoth;
  throw ConfigError("unknown variant '" + s + "'");
}

const std::vector<Variant>& all_variants() {
  static const std::vector<Variant> v = {Variant::kEmma, Variant::kOnlyRecall, Variant::kWithoutVirtual,
                                         Variant::kWithoutBoth, Variant::kSeparate};
  return v;
}

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

/// One trained model serving one or more variants.
struct Training {
  std::string name;
  tower::DescriptionPooling pooling;
  bool reranker;
  rerank::TrainMode mode;
  std::vector<std::pair<Variant, bool>> evals;  // variant, use reranker
};

std::vector<Training> plan(const std::vector<Variant>& variants) {
  using P = tower::DescriptionPooling;
  using M = rerank::TrainMode;
  std::vector<Training> out;
  auto add = [&](const std::string& name, P pooling, bool reranker, M mode, Variant v, bool use) {
    for (auto& t : out) {
      if (t.name == name) {
        t.evals.emplace_back(v, use);
        return;
      }
    }
    out.push_back({name, pooling, reranker, mode, {{v, use}}});
  };
  for (Variant v : variants) {
    switch (v) {
      case Variant::kEmma:
        add("emma", P::kVirtualEntity, true, M::kJoint, v, true);
        break;
      case Variant::kOnlyRecall:
        add("emma", P::kVirtualEntity, true, M::kJoint, v, false);
        break;
      case Variant::kWithoutVirtual:
        add("wo-virt", P::kAnnotatedSpans, true, M::kJoint, v, true);
        break;
      case Variant::kWithoutBoth:
        add("wo-both", P::kMeanPool, false, M::kRecallOnly, v, false);
        break;
      case Variant::kSeparate:
        add("separate", P::kVirtualEntity, true, M::kSeparate, v, true);
        break;
    }
  }
  return out;
}

template <class T>
RunRecord evaluate_model(rerank::MatchModel<T>& model, const SplitData& data, const ZeroShotSplit& split,
                         const text::Vocabulary& vocab, bool use_reranker) {
  RunRecord rec;
  const auto t0 = Clock::now();
  model.counter().reset();
  const recall::DescriptionIndex index = model.build_index(data.test_catalog, vocab);
  const auto preds = rerank::predict_batch(model, index, data.test_catalog, data.test, vocab, use_reranker);
  rec.eval_seconds = since(t0);
  rec.counts = {model.counter().instances(), model.counter().descriptions(), model.counter().pairs()};
  std::vector<std::string> golds;
  std::size_t h1 = 0, hk = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    golds.push_back(data.test[i].relation);
    rec.predictions.push_back(preds[i].relation);
    h1 += preds[i].candidates.front().relation == golds.back();
    hk += std::any_of(preds[i].candidates.begin(), preds[i].candidates.end(),
                      [&](const recall::ScoredRelation& s) { return s.relation == golds.back(); });
  }
  const double n = static_cast<double>(std::max<std::size_t>(preds.size(), 1));
  rec.hits1 = static_cast<double>(h1) / n;
  rec.hits_k = static_cast<double>(hk) / n;
  rec.metrics = evaluate(rec.predictions, golds, split.test);
  return rec;
}

template <class T>
std::vector<RunRecord> run_training(const Training& t, const SplitData& data, const ZeroShotSplit& split,
                                    const text::Vocabulary& vocab, const io::RunConfig& config, std::uint64_t seed,
                                    const Logger& log) {
  rerank::ModelConfig mc = config.model;
  mc.encoder.vocab_size = vocab.size();
  mc.pooling = t.pooling;
  mc.reranker = t.reranker;
  rerank::TrainOptions opts = config.train;
  opts.mode = t.mode;
  opts.seed = seed;
  rerank::MatchModel<T> model(mc, seed);
  rerank::TrainData td{&data.train, &data.train_catalog, &data.val, &data.val_catalog, &vocab};
  const rerank::TrainReport report = rerank::train(model, td, opts, [&](const rerank::EpochLog& e) {
    if (!log) return;
    std::ostringstream s;
    s << std::fixed << std::setprecision(4) << "seed " << seed << " " << t.name << " " << e.phase << " epoch "
      << e.epoch << " recall_loss " << e.recall_loss << " rerank_loss " << e.rerank_loss << " val_hits1 "
      << e.val_hits1 << " val_acc " << e.val_accuracy;
    log(s.str());
  });
  std::vector<RunRecord> out;
  for (const auto& [variant, use] : t.evals) {
    RunRecord rec = evaluate_model(model, data, split, vocab, use);
    rec.seed = seed;
    rec.config = to_string(variant);
    rec.m = split.m;
    rec.k = mc.k;
    rec.train_seconds = report.seconds;
    if (log) {
      std::ostringstream s;
      s << std::fixed << std::setprecision(4) << "seed " << seed << " " << rec.config << " k " << rec.k << " F1 "
        << rec.metrics.f1 << " hits@1 " << rec.hits1 << " hits@k " << rec.hits_k;
      log(s.str());
    }
    out.push_back(std::move(rec));
  }
  return out;
}

}  // namespace

std::vector<RunRecord> run_seed(const io::Corpus& corpus, const text::Vocabulary& vocab, const io::RunConfig& config,
                                std::uint64_t seed, const std::vector<Variant>& variants, const Logger& log) {
  config.validate();
  std::vector<std::string> relations;
  for (const auto& d : corpus.catalog.entries()) relations.push_back(d.relation);
  const ZeroShotSplit split = make_split(relations, config.m, seed);
  const SplitData data = partition(corpus, split);
  if (data.test.empty()) throw DataError("the test relations have no instances");
  std::vector<RunRecord> out;
  for (const Training& t : plan(variants)) {
    auto recs = config.precision == io::Precision::kF32
                    ? run_training<float>(t, data, split, vocab, config, seed, log)
                    : run_training<double>(t, data, split, vocab, config, seed, log);
    for (auto& r : recs) out.push_back(std::move(r));
  }
  // Report in the requested variant order.
  std::vector<RunRecord> ordered;
  for (Variant v : variants) {
    for (auto& r : out) {
      if (r.config == to_string(v)) ordered.push_back(r);
    }
  }
  return ordered;
}

std::vector<RunRecord> run_suite(const io::Corpus& corpus, const io::RunConfig& config,
                                 const std::vector<Variant>& variants, const Logger& log) {
  const text::Vocabulary vocab = text::Vocabulary::build(corpus.instances, corpus.catalog.entries());
  std::vector<RunRecord> out;
  for (std::uint64_t seed : config.seeds) {
    for (auto& r : run_seed(corpus, vocab, config, seed, variants, log)) out.push_back(std::move(r));
  }
  return out;
}

std::vector<MeanRow> means(const std::vector<RunRecord>& rows) {
  std::vector<MeanRow> out;
  for (const auto& r : rows) {
    auto it = std::find_if(out.begin(), out.end(), [&](const MeanRow& m) { return m.config == r.config && m.k == r.k; });
    if (it == out.end()) {
      out.push_back({.config = r.config, .k = r.k});
      it = out.end() - 1;
    }
    ++it->seeds;
    it->precision += r.metrics.precision;
    it->recall += r.metrics.recall;
    it->f1 += r.metrics.f1;
    it->hits1 += r.hits1;
    it->hits_k += r.hits_k;
    it->train_seconds += r.train_seconds;
  }
  for (auto& m : out) {
    const double n = static_cast<double>(m.seeds);
    m.precision /= n;
    m.recall /= n;
    m.f1 /= n;
    m.hits1 /= n;
    m.hits_k /= n;
    m.train_seconds /= n;
  }
  return out;
}

const MeanRow& find_mean(const std::vector<MeanRow>& rows, const std::string& config, std::size_t k) {
  for (const auto& r : rows) {
    if (r.config == config && r.k == k) return r;
  }
  throw Error("no mean row for " + config + " at k = " + std::to_string(k));
}

std::vector<RunRecord> k_sweep(const io::Corpus& corpus, const io::RunConfig& config, const std::vector<std::size_t>& ks,
                               const Logger& log) {
  std::vector<RunRecord> out;
  for (std::size_t k : ks) {
    io::RunConfig c = config;
    c.model.k = k;
    for (auto& r : run_suite(corpus, c, {Variant::kEmma}, log)) out.push_back(std::move(r));
  }
  return out;
}

std::string trend(const std::vector<MeanRow>& by_k) {
  bool up = false, down = false;
  for (std::size_t i = 1; i < by_k.size(); ++i) {
    if (by_k[i].f1 > by_k[i - 1].f1) up = true;
    if (by_k[i].f1 < by_k[i - 1].f1) down = true;
  }
  if (up && down) return "mixed";
  if (down) return "decreasing";
  if (up) return "increasing";
  return "flat";
}

template <class T>
BenchReport efficiency_bench(rerank::MatchModel<T>& model, const text::Catalog& catalog,
                             const std::vector<text::Instance>& instances, const text::Vocabulary& vocab) {
  const rerank::CrossEncoder<T>* cross = model.reranker();
  if (cross == nullptr) throw ConfigError("the efficiency bench needs a model with a reranker");
  BenchReport r;
  r.n = catalog.size();
  r.m = instances.size();
  r.k = cross->k();
  r.expected = {r.m, r.n, r.m * r.k};
  r.prompt_match_pairs = static_cast<std::uint64_t>(r.m) * r.n;
  model.counter().reset();
  const auto t0 = Clock::now();
  const recall::DescriptionIndex index = model.build_index(catalog, vocab);
  r.index_seconds = since(t0);
  rerank::StageTimes times;
  rerank::predict_batch(model, index, catalog, instances, vocab, true, &times);
  r.recall_seconds = times.recall_seconds;
  r.rerank_seconds = times.rerank_seconds;
  r.measured = {model.counter().instances(), model.counter().descriptions(), model.counter().pairs()};
  if (r.measured != r.expected) {
    std::ostringstream s;
    s << "encoding count mismatch: measured (descriptions " << r.measured.descriptions << ", instances "
      << r.measured.instances << ", pairs " << r.measured.pairs << "), expected (" << r.expected.descriptions << ", "
      << r.expected.instances << ", " << r.expected.pairs << ")";
    throw Error(s.str());
  }
  return r;
}

template BenchReport efficiency_bench(rerank::MatchModel<float>&, const text::Catalog&,
                                      const std::vector<text::Instance>&, const text::Vocabulary&);
template BenchReport efficiency_bench(rerank::MatchModel<double>&, const text::Catalog&,
                                      const std::vector<text::Instance>&, const text::Vocabulary&);

std::vector<ProjectionRow> projection(std::size_t k, const std::vector<std::size_t>& ns) {
  constexpr std::uint64_t kPerRelation = 700;
  std::vector<ProjectionRow> out;
  for (std::size_t n : ns) {
    const std::uint64_t nn = n;
    out.push_back({.n = n,
                   .matching = kPerRelation * nn + nn,
                   .two_stage = kPerRelation * nn + kPerRelation + nn,
                   .pair_only = kPerRelation * nn * nn,
                   .contract = nn + kPerRelation * nn + kPerRelation * nn * k});
  }
  return out;
}

void write_table(std::ostream& out, const std::vector<RunRecord>& rows) {
  out << std::left << std::setw(6) << "seed" << std::setw(12) << "config" << std::right << std::setw(4) << "m"
      << std::setw(4) << "k" << std::setw(9) << "P" << std::setw(9) << "R" << std::setw(9) << "F1" << std::setw(9)
      << "hits@1" << std::setw(9) << "hits@k" << std::setw(8) << "inst" << std::setw(7) << "desc" << std::setw(8)
      << "pairs" << std::setw(10) << "train_s" << '\n';
  out << std::fixed << std::setprecision(4);
  for (const auto& r : rows) {
    out << std::left << std::setw(6) << r.seed << std::setw(12) << r.config << std::right << std::setw(4) << r.m
        << std::setw(4) << r.k << std::setw(9) << r.metrics.precision << std::setw(9) << r.metrics.recall
        << std::setw(9) << r.metrics.f1 << std::setw(9) << r.hits1 << std::setw(9) << r.hits_k << std::setw(8)
        << r.counts.instances << std::setw(7) << r.counts.descriptions << std::setw(8) << r.counts.pairs
        << std::setprecision(1) << std::setw(10) << r.train_seconds << std::setprecision(4) << '\n';
  }
  out.unsetf(std::ios::floatfield);
}

void write_means(std::ostream& out, const std::vector<MeanRow>& rows) {
  out << std::left << std::setw(12) << "config" << std::right << std::setw(4) << "k" << std::setw(7) << "seeds"
      << std::setw(9) << "P" << std::setw(9) << "R" << std::setw(9) << "F1" << std::setw(9) << "hits@1" << std::setw(9)
      << "hits@k" << std::setw(10) << "train_s" << '\n';
  out << std::fixed << std::setprecision(4);
  for (const auto& r : rows) {
    out << std::left << std::setw(12) << r.config << std::right << std::setw(4) << r.k << std::setw(7) << r.seeds
        << std::setw(9) << r.precision << std::setw(9) << r.recall << std::setw(9) << r.f1 << std::setw(9) << r.hits1
        << std::setw(9) << r.hits_k << std::setprecision(1) << std::setw(10) << r.train_seconds
        << std::setprecision(4) << '\n';
  }
  out.unsetf(std::ios::floatfield);
}

void write_tsv(std::ostream& out, const std::vector<RunRecord>& rows) {
  out << "seed\tconfig\tm\tk\tP\tR\tF1\thits1\thits_k\tinstance_encodings\tdescription_encodings\tpair_encodings\t"
         "train_seconds\teval_seconds\n";
  out << std::setprecision(17);
  for (const auto& r : rows) {
    out << r.seed << '\t' << r.config << '\t' << r.m << '\t' << r.k << '\t' << r.metrics.precision << '\t'
        << r.metrics.recall << '\t' << r.metrics.f1 << '\t' << r.hits1 << '\t' << r.hits_k << '\t'
        << r.counts.instances << '\t' << r.counts.descriptions << '\t' << r.counts.pairs << '\t' << r.train_seconds
        << '\t' << r.eval_seconds << '\n';
  }
}

void write_per_relation(std::ostream& out, const MetricsReport& report) {
  out << std::left << std::setw(16) << "relation" << std::right << std::setw(9) << "P" << std::setw(9) << "R"
      << std::setw(9) << "F1" << std::setw(9) << "gold" << std::setw(9) << "pred" << '\n';
  out << std::fixed << std::setprecision(4);
  for (const auto& r : report.per_relation) {
    out << std::left << std::setw(16) << r.relation << std::right << std::setw(9) << r.precision << std::setw(9)
        << r.recall << std::setw(9) << r.f1 << std::setw(9) << r.support << std::setw(9) << r.predicted << '\n';
  }
  out << std::left << std::setw(16) << "macro" << std::right << std::setw(9) << report.precision << std::setw(9)
      << report.recall << std::setw(9) << report.f1 << '\n';
  out.unsetf(std::ios::floatfield);
}

void write_bench(std::ostream& out, const BenchReport& r, const std::vector<ProjectionRow>& proj) {
  out << "site          measured  expected\n";
  out << "description " << std::setw(10) << r.measured.descriptions << std::setw(10) << r.expected.descriptions
      << "   (n)\n";
  out << "instance    " << std::setw(10) << r.measured.instances << std::setw(10) << r.expected.instances
      << "   (m)\n";
  out << "pair        " << std::setw(10) << r.measured.pairs << std::setw(10) << r.expected.pairs << "   (m*k)\n";
  out << "pair-only baseline would encode m*n = " << r.prompt_match_pairs << " pairs\n";
  out << std::fixed << std::setprecision(4) << "seconds: index " << r.index_seconds << ", recall "
      << r.recall_seconds << ", rerank " << r.rerank_seconds << '\n';
  out.unsetf(std::ios::floatfield);
  out << "\nprojection at 700 instances per relation\n";
  out << std::setw(4) << "n" << std::setw(14) << "700n+n" << std::setw(14) << "700n+700+n" << std::setw(14) << "700n^2"
      << std::setw(16) << "n+700n+700nk" << '\n';
  for (const auto& p : proj) {
    out << std::setw(4) << p.n << std::setw(14) << p.matching << std::setw(14) << p.two_stage << std::setw(14)
        << p.pair_only << std::setw(16) << p.contract << '\n';
  }
}

}  // namespace relmatch::experiment
