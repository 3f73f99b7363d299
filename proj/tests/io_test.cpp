// Copyright 2026 The relmatch Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>

#include "relmatch/error.hpp"
#include "relmatch/io/config.hpp"
#include "relmatch/io/corpus.hpp"
#include "relmatch/io/synthetic.hpp"

namespace relmatch::io {
namespace {

namespace fs = std::filesystem;

class TempDir {
 public:
  TempDir() : path_(fs::temp_directory_path() / ("relmatch_io_" + std::to_string(::getpid()) + "_" + std::to_string(counter_++))) {
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  fs::path file(const std::string& name, const std::string& contents) const {
    std::ofstream(path_ / name) << contents;
    return path_ / name;
  }
  const fs::path& path() const { return path_; }

 private:
  static inline int counter_ = 0;
  fs::path path_;
};

std::string read_all(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const char* kInstances =
    R"({"tokens": ["alice", "founded", "acme"], "h": [0, 0], "t": [2, 2], "relation": "founder"})"
    "\n\n"
    R"({"tokens": ["paris", "is", "in", "france"], "h": [0, 0], "t": [3, 3], "relation": "located_in"})"
    "\n"
    R"({"tokens": ["bob", "started", "globex", "inc"], "h": [0, 0], "t": [2, 3], "relation": "founder"})"
    "\n";
const char* kCatalog =
    R"({"relation": "founder", "description": "person who founded an organization", "head_hypernym": [0, 0], "tail_hypernym": [4, 4]})"
    "\n"
    R"({"relation": "located_in", "description": ["place", "located", "in", "region"]})"
    "\n";

TEST(Corpus, MinimalFixtureLoads) {
  TempDir dir;
  Corpus c = load_corpus(dir.file("i.jsonl", kInstances), dir.file("c.jsonl", kCatalog));
  EXPECT_EQ(c.instances.size(), 3u);
  EXPECT_EQ(c.catalog.size(), 2u);
  EXPECT_EQ(c.instances[2].tail, (text::Span{2, 3}));
  EXPECT_EQ(c.catalog.at("founder").head_hypernym, (text::Span{0, 0}));
  EXPECT_FALSE(c.catalog.at("located_in").head_hypernym.has_value());
  EXPECT_EQ(c.catalog.at("located_in").tokens.size(), 4u);
  const std::string summary = summarize(c);
  EXPECT_NE(summary.find("3 instances"), std::string::npos) << summary;
}

TEST(Corpus, OutOfBoundsSpanNamesItsLine) {
  TempDir dir;
  const std::string bad = std::string(kInstances) +
                          R"({"tokens": ["a", "b"], "h": [0, 0], "t": [1, 5], "relation": "founder"})" + "\n";
  try {
    load_instances(dir.file("i.jsonl", bad));
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("i.jsonl:5:"), std::string::npos) << e.what();
  }
}

TEST(Corpus, MalformedRecordsAreRejected) {
  TempDir dir;
  for (const char* line : {R"({"tokens": ["a"], "h": [0, 0], "relation": "x"})", R"([1, 2, 3])", R"({"tokens": "a b",)",
                           R"({"tokens": ["a", "b"], "h": [0, -1], "t": [1, 1], "relation": "x"})",
                           R"({"tokens": ["a", "b"], "h": [0, 1], "t": [1, 1], "relation": "x"})"}) {
    EXPECT_THROW(load_instances(dir.file("bad.jsonl", std::string(line) + "\n")), DataError) << line;
  }
  EXPECT_THROW(load_catalog(dir.file("c.jsonl", std::string(kCatalog) + kCatalog)), DataError);
  EXPECT_THROW(load_instances(dir.path() / "missing.jsonl"), DataError);
}

TEST(Corpus, UndescribedRelationIsAnError) {
  TempDir dir;
  const std::string one = R"({"relation": "founder", "description": "person who founded"})" "\n";
  try {
    load_corpus(dir.file("i.jsonl", kInstances), dir.file("c.jsonl", one));
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("located_in"), std::string::npos) << e.what();
  }
}

TEST(Corpus, SaveThenLoadIsContentIdentical) {
  TempDir dir;
  Corpus c = load_corpus(dir.file("i.jsonl", kInstances), dir.file("c.jsonl", kCatalog));
  save_instances(dir.path() / "i2.jsonl", c.instances);
  save_catalog(dir.path() / "c2.jsonl", c.catalog);
  Corpus back = load_corpus(dir.path() / "i2.jsonl", dir.path() / "c2.jsonl");
  EXPECT_EQ(back.instances, c.instances);
  EXPECT_EQ(back.catalog.entries(), c.catalog.entries());
  save_instances(dir.path() / "i3.jsonl", back.instances);
  EXPECT_EQ(read_all(dir.path() / "i2.jsonl"), read_all(dir.path() / "i3.jsonl"));
  for (const auto& inst : c.instances) EXPECT_EQ(instance_from_json(instance_to_json(inst)), inst);
}

TEST(Synthetic, NoiselessCorpusIsSeparable) {
  SyntheticCorpusSpec spec;
  spec.noise = 0;
  spec.seed = 3;
  SyntheticCorpus s = gen_synthetic(spec);
  EXPECT_EQ(s.corpus.instances.size(), 1000u);
  EXPECT_EQ(s.corpus.catalog.size(), 20u);
  EXPECT_EQ(s.oracle_accuracy, 1.0);
}

TEST(Synthetic, SameSeedSameCorpus) {
  SyntheticCorpusSpec spec;
  spec.seed = 11;
  SyntheticCorpus a = gen_synthetic(spec);
  SyntheticCorpus b = gen_synthetic(spec);
  EXPECT_EQ(a.corpus.instances, b.corpus.instances);
  EXPECT_EQ(a.corpus.catalog.entries(), b.corpus.catalog.entries());
  spec.seed = 12;
  EXPECT_NE(gen_synthetic(spec).corpus.instances, a.corpus.instances);
}

TEST(Synthetic, DefaultNoiseMeetsOracleFloor) {
  for (std::uint64_t seed : {1u, 2u, 3u, 4u, 5u}) {
    SyntheticCorpusSpec spec;
    spec.seed = seed;
    SyntheticCorpus s = gen_synthetic(spec);
    EXPECT_GE(s.oracle_accuracy, 0.95) << "seed " << seed;
    // Recomputed independently of the generator's own figure.
    EXPECT_EQ(centroid_oracle_accuracy(s.corpus.instances), s.oracle_accuracy);
  }
}

TEST(Synthetic, SignaturesAreDisjointAndInDescriptions) {
  SyntheticCorpusSpec spec;
  spec.seed = 6;
  SyntheticCorpus s = gen_synthetic(spec);
  std::map<std::string, int> owners;
  for (const auto& d : s.corpus.catalog.entries()) {
    std::set<std::string> words(d.tokens.begin(), d.tokens.end());
    for (const auto& w : words) owners[w] += 1;
    ASSERT_TRUE(d.head_hypernym && d.tail_hypernym);
  }
  // Each relation has at least `signature_tokens` words no other description holds.
  for (const auto& d : s.corpus.catalog.entries()) {
    int own = 0;
    for (const auto& w : std::set<std::string>(d.tokens.begin(), d.tokens.end())) own += owners[w] == 1;
    EXPECT_GE(own, static_cast<int>(spec.signature_tokens)) << d.relation;
  }
  for (const auto& inst : s.corpus.instances) EXPECT_NO_THROW(text::validate(inst));
}

TEST(Synthetic, ExhaustedSignatureSpaceIsACollision) {
  SyntheticCorpusSpec spec;
  spec.relations = 2;
  spec.per_relation = 1;
  spec.signature_tokens = 200000;
  try {
    gen_synthetic(spec);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("signature collision"), std::string::npos) << e.what();
  }
}

TEST(Synthetic, SpecValidation) {
  SyntheticCorpusSpec spec;
  spec.noise = 1.0;
  EXPECT_THROW(spec.validate(), ConfigError);
  spec = SyntheticCorpusSpec{};
  spec.relations = 1;
  EXPECT_THROW(spec.validate(), ConfigError);
}

TEST(Config, DeskDefaultsAndPaperProfile) {
  RunConfig desk = parse_config("version = 1\n");
  EXPECT_EQ(desk, desk_profile());
  EXPECT_EQ(desk.train.temperature, 0.02);
  EXPECT_EQ(desk.model.k, 2u);
  EXPECT_EQ(desk.m, 5u);
  RunConfig paper = parse_config("version = 1\nprofile = paper\n");
  EXPECT_EQ(paper, paper_profile());
  EXPECT_EQ(paper.train.batch_size, 64u);
  EXPECT_EQ(paper.train.learning_rate, 2e-5);
  EXPECT_EQ(paper.train.epochs, 5u);
  EXPECT_EQ(paper.train.warmup_steps, 100u);
  EXPECT_EQ(paper.model.encoder.dim, 768u);
}

TEST(Config, OverridesAndRoundTrip) {
  RunConfig c = parse_config(
      "version = 1\n"
      "# comment line\n"
      "rerank.k = 3   # trailing comment\n"
      "train.mode = separate\n"
      "train.learning_rate = 0.00037\n"
      "model.pooling = annotated\n"
      "experiment.seeds = 7, 8,9\n"
      "precision = f64\n"
      "encoder.activation = relu\n"
      "data.instances = /tmp/x.jsonl\n");
  EXPECT_EQ(c.model.k, 3u);
  EXPECT_EQ(c.train.mode, rerank::TrainMode::kSeparate);
  EXPECT_EQ(c.train.learning_rate, 0.00037);
  EXPECT_EQ(c.model.pooling, tower::DescriptionPooling::kAnnotatedSpans);
  EXPECT_EQ(c.seeds, (std::vector<std::uint64_t>{7, 8, 9}));
  EXPECT_EQ(c.precision, Precision::kF64);
  EXPECT_EQ(c.instances_path, "/tmp/x.jsonl");
  EXPECT_EQ(parse_config(format_config(c)), c);
  TempDir dir;
  save_config(dir.path() / "run.cfg", c);
  EXPECT_EQ(load_config(dir.path() / "run.cfg"), c);
}

TEST(Config, ErrorsNameTheLine) {
  auto expect_line = [](const std::string& text, const std::string& where) {
    try {
      parse_config(text, "cfg");
      FAIL() << "expected ConfigError for: " << text;
    } catch (const ConfigError& e) {
      EXPECT_NE(std::string(e.what()).find(where), std::string::npos) << e.what();
    }
  };
  expect_line("version = 1\nrerank.kk = 2\n", "cfg:2");
  expect_line("version = 1\nrerank.k = 2\nrerank.k = 3\n", "cfg:3");
  expect_line("version = 1\n\ntrain.epochs = ten\n", "cfg:3");
  expect_line("rerank.k = 2\n", "cfg:1");
  expect_line("version = 2\n", "cfg:1");
  expect_line("version = 1\nrerank.k = 2\nprofile = paper\n", "cfg:3");
  expect_line("version = 1\nmissing equals\n", "cfg:2");
  EXPECT_THROW(parse_config("version = 1\nrerank.k = 0\n"), ConfigError);
  EXPECT_THROW(parse_config("version = 1\nencoder.heads = 5\n"), ConfigError);
  EXPECT_THROW(parse_config("version = 1\nexperiment.seeds = 1,1\n"), ConfigError);
  EXPECT_THROW(parse_config("version = 1\nlen.instance = 100\n"), ConfigError);
}

}  // namespace
}  // namespace relmatch::io
