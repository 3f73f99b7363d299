// Copyright 2026 The relmatch Authors
// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end: data generation, training, indexing, prediction,
// evaluation, the encoding-count bench and the multi-seed suites.

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "relmatch/experiment/experiment.hpp"
#include "relmatch/io/config.hpp"
#include "relmatch/io/corpus.hpp"
#include "relmatch/io/synthetic.hpp"

namespace fs = std::filesystem;
using namespace relmatch;

namespace {

struct Common {
  std::string config_path;
  std::uint64_t seed = 1;
  std::string data_dir;
  std::string instances;
  std::string catalog;
};

void add_common(CLI::App* cmd, Common& c, bool data) {
  cmd->add_option("--config", c.config_path, "run configuration file (defaults to the desk profile)");
  cmd->add_option("--seed", c.seed, "seed for splits, initialization and sampling");
  if (data) {
    cmd->add_option("--data", c.data_dir, "directory holding instances.jsonl and catalog.jsonl");
    cmd->add_option("--instances", c.instances, "instance file (overrides --data)");
    cmd->add_option("--catalog", c.catalog, "catalog file (overrides --data)");
  }
}

io::RunConfig load_run_config(const Common& c) {
  return c.config_path.empty() ? io::desk_profile() : io::load_config(c.config_path);
}

io::Corpus load_data(const Common& c, const io::RunConfig& cfg) {
  std::string inst = c.instances, cat = c.catalog;
  if (!c.data_dir.empty()) {
    if (inst.empty()) inst = (fs::path(c.data_dir) / "instances.jsonl").string();
    if (cat.empty()) cat = (fs::path(c.data_dir) / "catalog.jsonl").string();
  }
  if (inst.empty()) inst = cfg.instances_path;
  if (cat.empty()) cat = cfg.catalog_path;
  if (inst.empty() || cat.empty()) throw ConfigError("no corpus given: use --data, --instances/--catalog or data.* keys");
  io::Corpus corpus = io::load_corpus(inst, cat);
  std::cerr << "corpus: " << io::summarize(corpus) << '\n';
  return corpus;
}

void log_line(const std::string& s) { std::cerr << s << '\n'; }

// Run directory layout.
fs::path config_file(const fs::path& run) { return run / "config.txt"; }
fs::path vocab_file(const fs::path& run) { return run / "vocab.txt"; }
fs::path params_file(const fs::path& run) { return run / "params.ckpt"; }
fs::path split_file(const fs::path& run) { return run / "split.json"; }
fs::path index_file(const fs::path& run) { return run / "index.bin"; }

struct RunDir {
  io::RunConfig config;
  text::Vocabulary vocab;
  ad::ParamStore<double> params;
  experiment::ZeroShotSplit split;
  fs::path corpus_instances, corpus_catalog;
};

RunDir open_run(const fs::path& run) {
  RunDir r;
  r.config = io::load_config(config_file(run));
  r.vocab = text::Vocabulary::load(vocab_file(run));
  r.params = ad::load_checkpoint(params_file(run));
  std::ifstream in(split_file(run));
  if (!in) throw DataError("cannot open " + split_file(run).string());
  const auto j = nlohmann::json::parse(in);
  r.split.seed = j.at("seed").get<std::uint64_t>();
  r.split.m = j.at("m").get<std::size_t>();
  r.split.train = j.at("train").get<std::vector<std::string>>();
  r.split.val = j.at("val").get<std::vector<std::string>>();
  r.split.test = j.at("test").get<std::vector<std::string>>();
  r.corpus_instances = j.at("instances").get<std::string>();
  r.corpus_catalog = j.at("catalog").get<std::string>();
  return r;
}

rerank::ModelConfig model_config(const RunDir& r) {
  rerank::ModelConfig mc = r.config.model;
  mc.encoder.vocab_size = r.vocab.size();
  return mc;
}

/// Calls fn with a model of the configured precision.
template <class Fn>
void with_model(const RunDir& r, Fn&& fn) {
  if (r.config.precision == io::Precision::kF32) {
    rerank::MatchModel<float> model(model_config(r), r.params.cast<float>());
    fn(model);
  } else {
    rerank::MatchModel<double> model(model_config(r), r.params.snapshot());
    fn(model);
  }
}

template <class T>
recall::DescriptionIndex load_or_build_index(rerank::MatchModel<T>& model, const fs::path& run,
                                             const text::Catalog& catalog, const text::Vocabulary& vocab) {
  if (fs::exists(index_file(run))) {
    recall::DescriptionIndex index = recall::DescriptionIndex::load(index_file(run));
    if (index.fingerprint() != model.params().checksum()) {
      throw DataError(index_file(run).string() + " was built from different parameters; rerun build-index");
    }
    return index;
  }
  return model.build_index(catalog, vocab);
}

int cmd_gen(const io::SyntheticCorpusSpec& spec, const std::string& out_dir) {
  const io::SyntheticCorpus syn = io::gen_synthetic(spec);
  fs::create_directories(out_dir);
  io::save_instances(fs::path(out_dir) / "instances.jsonl", syn.corpus.instances);
  io::save_catalog(fs::path(out_dir) / "catalog.jsonl", syn.corpus.catalog);
  std::cout << io::summarize(syn.corpus) << '\n'
            << "nearest-centroid oracle accuracy " << syn.oracle_accuracy << '\n'
            << "nearest-description oracle accuracy " << syn.description_oracle_accuracy << '\n';
  return 0;
}

int cmd_train(const Common& c, const std::string& out, const std::string& variant_name) {
  io::RunConfig cfg = load_run_config(c);
  const io::Corpus corpus = load_data(c, cfg);
  const text::Vocabulary vocab = text::Vocabulary::build(corpus.instances, corpus.catalog.entries());
  std::vector<std::string> relations;
  for (const auto& d : corpus.catalog.entries()) relations.push_back(d.relation);
  const experiment::ZeroShotSplit split = experiment::make_split(relations, cfg.m, c.seed);
  const experiment::SplitData data = experiment::partition(corpus, split);

  if (!variant_name.empty()) {
    switch (experiment::parse_variant(variant_name)) {
      case experiment::Variant::kEmma:
        cfg.model.pooling = tower::DescriptionPooling::kVirtualEntity;
        cfg.train.mode = rerank::TrainMode::kJoint;
        break;
      case experiment::Variant::kOnlyRecall:
        throw ConfigError("onlyRecall is evaluated from an EMMA run with predict/eval --no-rerank");
      case experiment::Variant::kWithoutVirtual:
        cfg.model.pooling = tower::DescriptionPooling::kAnnotatedSpans;
        break;
      case experiment::Variant::kWithoutBoth:
        cfg.model.pooling = tower::DescriptionPooling::kMeanPool;
        cfg.model.reranker = false;
        cfg.train.mode = rerank::TrainMode::kRecallOnly;
        break;
      case experiment::Variant::kSeparate:
        cfg.train.mode = rerank::TrainMode::kSeparate;
        break;
    }
  }
  cfg.seeds = {c.seed};
  rerank::ModelConfig mc = cfg.model;
  mc.encoder.vocab_size = vocab.size();
  rerank::TrainOptions opts = cfg.train;
  opts.seed = c.seed;

  fs::create_directories(out);
  std::ofstream trace(fs::path(out) / "train_log.tsv");
  trace << "phase\tepoch\trecall_loss\trerank_loss\tval_hits1\tval_accuracy\n";
  auto on_epoch = [&](const rerank::EpochLog& e) {
    trace << e.phase << '\t' << e.epoch << '\t' << e.recall_loss << '\t' << e.rerank_loss << '\t' << e.val_hits1
          << '\t' << e.val_accuracy << '\n';
    std::cerr << e.phase << " epoch " << e.epoch << " recall_loss " << e.recall_loss << " rerank_loss "
              << e.rerank_loss << " val_hits1 " << e.val_hits1 << " val_acc " << e.val_accuracy << '\n';
  };
  rerank::TrainData td{&data.train, &data.train_catalog, &data.val, &data.val_catalog, &vocab};
  ad::ParamStore<double> trained;
  if (cfg.precision == io::Precision::kF32) {
    rerank::MatchModel<float> model(mc, c.seed);
    rerank::train(model, td, opts, on_epoch);
    trained = model.params().cast<double>();
  } else {
    rerank::MatchModel<double> model(mc, c.seed);
    rerank::train(model, td, opts, on_epoch);
    trained = model.params().snapshot();
  }
  io::save_config(config_file(out), cfg);
  vocab.save(vocab_file(out));
  ad::save_checkpoint(trained, params_file(out));
  fs::remove(index_file(out));
  nlohmann::json j;
  j["seed"] = split.seed;
  j["m"] = split.m;
  j["train"] = split.train;
  j["val"] = split.val;
  j["test"] = split.test;
  j["instances"] = fs::absolute(c.instances.empty() ? fs::path(c.data_dir) / "instances.jsonl" : fs::path(c.instances)).string();
  j["catalog"] = fs::absolute(c.catalog.empty() ? fs::path(c.data_dir) / "catalog.jsonl" : fs::path(c.catalog)).string();
  std::ofstream(split_file(out)) << j.dump(2) << '\n';
  std::cout << "trained run written to " << out << '\n';
  return 0;
}

text::Catalog index_catalog(const RunDir& r, const std::string& catalog_path) {
  const text::Catalog full = io::load_catalog(catalog_path.empty() ? r.corpus_catalog : fs::path(catalog_path));
  return catalog_path.empty() ? full.subset(r.split.test) : full;
}

int cmd_build_index(const std::string& run, const std::string& catalog_path) {
  const RunDir r = open_run(run);
  const text::Catalog catalog = index_catalog(r, catalog_path);
  with_model(r, [&](auto& model) {
    const recall::DescriptionIndex index = model.build_index(catalog, r.vocab);
    index.save(index_file(run));
    std::cout << "indexed " << index.size() << " relations, " << model.counter().descriptions()
              << " description encodings\n";
  });
  return 0;
}

int cmd_predict(const std::string& run, const std::string& input, const std::string& catalog_path, bool no_rerank) {
  const RunDir r = open_run(run);
  const text::Catalog catalog = index_catalog(r, catalog_path);
  std::vector<text::Instance> instances;
  std::ifstream in(input);
  if (!in) throw DataError("cannot open " + input);
  std::string line;
  for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      instances.push_back(io::instance_from_json(line));
    } catch (const std::exception& e) {
      throw DataError(input + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  with_model(r, [&](auto& model) {
    const recall::DescriptionIndex index = load_or_build_index(model, run, catalog, r.vocab);
    for (const auto& p : rerank::predict_batch(model, index, catalog, instances, r.vocab, !no_rerank)) {
      std::cout << p.relation << '\n';
    }
  });
  return 0;
}

int cmd_eval(const std::string& run, const std::string& tsv, bool no_rerank) {
  const RunDir r = open_run(run);
  const io::Corpus corpus = io::load_corpus(r.corpus_instances, r.corpus_catalog);
  const experiment::SplitData data = experiment::partition(corpus, r.split);
  experiment::RunRecord rec;
  with_model(r, [&](auto& model) {
    model.counter().reset();
    const auto index = model.build_index(data.test_catalog, r.vocab);
    const auto preds = rerank::predict_batch(model, index, data.test_catalog, data.test, r.vocab, !no_rerank);
    std::vector<std::string> golds;
    std::size_t h1 = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
      rec.predictions.push_back(preds[i].relation);
      golds.push_back(data.test[i].relation);
      h1 += preds[i].candidates.front().relation == golds.back();
    }
    rec.metrics = experiment::evaluate(rec.predictions, golds, r.split.test);
    rec.hits1 = static_cast<double>(h1) / static_cast<double>(preds.size());
    rec.counts = {model.counter().instances(), model.counter().descriptions(), model.counter().pairs()};
  });
  rec.seed = r.split.seed;
  rec.config = no_rerank || !r.config.model.reranker ? "recall-only" : "full";
  rec.m = r.split.m;
  rec.k = r.config.model.k;
  experiment::write_per_relation(std::cout, rec.metrics);
  std::cout << '\n';
  experiment::write_table(std::cout, {rec});
  if (!tsv.empty()) {
    std::ofstream out(tsv);
    experiment::write_tsv(out, {rec});
  }
  return 0;
}

int cmd_bench(const std::string& run, std::size_t m_limit) {
  const RunDir r = open_run(run);
  const io::Corpus corpus = io::load_corpus(r.corpus_instances, r.corpus_catalog);
  const experiment::SplitData data = experiment::partition(corpus, r.split);
  std::vector<text::Instance> queries = data.test;
  if (m_limit > 0 && m_limit < queries.size()) queries.resize(m_limit);
  with_model(r, [&](auto& model) {
    const auto report = experiment::efficiency_bench(model, data.test_catalog, queries, r.vocab);
    experiment::write_bench(std::cout, report, experiment::projection(report.k));
  });
  return 0;
}

void emit_rows(const std::vector<experiment::RunRecord>& rows, const std::string& tsv) {
  experiment::write_table(std::cout, rows);
  std::cout << '\n';
  experiment::write_means(std::cout, experiment::means(rows));
  if (!tsv.empty()) {
    std::ofstream out(tsv);
    if (!out) throw DataError("cannot write " + tsv);
    experiment::write_tsv(out, rows);
  }
}

int cmd_suite(const Common& c, const std::vector<std::string>& variant_names, const std::string& tsv) {
  const io::RunConfig cfg = load_run_config(c);
  const io::Corpus corpus = load_data(c, cfg);
  std::vector<experiment::Variant> variants;
  for (const auto& v : variant_names) variants.push_back(experiment::parse_variant(v));
  if (variants.empty()) variants = experiment::all_variants();
  emit_rows(experiment::run_suite(corpus, cfg, variants, log_line), tsv);
  return 0;
}

int cmd_sweep(const Common& c, const std::vector<std::size_t>& ks, const std::string& tsv) {
  const io::RunConfig cfg = load_run_config(c);
  const io::Corpus corpus = load_data(c, cfg);
  const auto rows = experiment::k_sweep(corpus, cfg, ks, log_line);
  emit_rows(rows, tsv);
  std::cout << "\nF1 trend over k: " << experiment::trend(experiment::means(rows)) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"relmatch: two-stage zero-shot relation matching"};
  app.require_subcommand(1);

  Common common;
  io::SyntheticCorpusSpec spec;
  std::string out_dir = "data";
  auto* gen = app.add_subcommand("gen-data", "write a synthetic corpus");
  add_common(gen, common, false);
  gen->add_option("--out", out_dir, "output directory");
  gen->add_option("--relations", spec.relations);
  gen->add_option("--per-relation", spec.per_relation);
  gen->add_option("--vocab", spec.vocab_size, "filler word count");
  gen->add_option("--signature", spec.signature_tokens, "signature words per relation");
  gen->add_option("--noise", spec.noise, "context token replacement rate in [0, 1)");
  gen->add_option("--types", spec.type_count, "entity type pool size");

  std::string run_dir, variant, catalog_path, input, tsv;
  bool no_rerank = false;
  std::size_t m_limit = 0;
  auto* train = app.add_subcommand("train", "train one model on a seeded split");
  add_common(train, common, true);
  train->add_option("--out", run_dir, "run directory")->required();
  train->add_option("--variant", variant, "EMMA, w/o-Virt, w/o-both or separate (overrides the config)");

  auto* index = app.add_subcommand("build-index", "encode and store the description index of a run");
  add_common(index, common, false);
  index->add_option("--run", run_dir, "run directory")->required();
  index->add_option("--catalog", catalog_path, "catalog to index (default: the run's test relations)");

  auto* predict = app.add_subcommand("predict", "print one relation id per input instance");
  add_common(predict, common, false);
  predict->add_option("--run", run_dir, "run directory")->required();
  predict->add_option("--input", input, "instance JSONL file")->required();
  predict->add_option("--catalog", catalog_path, "candidate catalog (default: the run's test relations)");
  predict->add_flag("--no-rerank", no_rerank, "recall top-1 only");

  auto* eval = app.add_subcommand("eval", "metrics on the run's unseen test relations");
  add_common(eval, common, false);
  eval->add_option("--run", run_dir, "run directory")->required();
  eval->add_option("--tsv", tsv, "also write a tab-separated row");
  eval->add_flag("--no-rerank", no_rerank, "recall top-1 only");

  auto* bench = app.add_subcommand("bench", "encoding counts and per-stage time on the test relations");
  add_common(bench, common, false);
  bench->add_option("--run", run_dir, "run directory")->required();
  bench->add_option("--m", m_limit, "query at most this many instances (0 = all)");

  std::vector<std::string> variants;
  auto* suite = app.add_subcommand("suite", "all variants over the configured seeds");
  add_common(suite, common, true);
  suite->add_option("--variants", variants, "subset of EMMA onlyRecall w/o-Virt w/o-both separate");
  suite->add_option("--tsv", tsv, "tab-separated output, one row per seed and variant");

  std::vector<std::size_t> ks{2, 3, 4};
  auto* sweep = app.add_subcommand("sweep-k", "EMMA over the configured seeds for several k");
  add_common(sweep, common, true);
  sweep->add_option("--k", ks, "k values");
  sweep->add_option("--tsv", tsv, "tab-separated output");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*gen) {
      spec.seed = common.seed;
      return cmd_gen(spec, out_dir);
    }
    if (*train) return cmd_train(common, run_dir, variant);
    if (*index) return cmd_build_index(run_dir, catalog_path);
    if (*predict) return cmd_predict(run_dir, input, catalog_path, no_rerank);
    if (*eval) return cmd_eval(run_dir, tsv, no_rerank);
    if (*bench) return cmd_bench(run_dir, m_limit);
    if (*suite) return cmd_suite(common, variants, tsv);
    if (*sweep) return cmd_sweep(common, ks, tsv);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
