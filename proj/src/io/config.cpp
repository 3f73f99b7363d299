// Copyright 2026 The relmatch Authors
// SPDX-License-Identifier: Apache-2.0

#include "relmatch/io/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "relmatch/error.hpp"

namespace relmatch::io {

std::string to_string(Precision p) { return p == Precision::kF32 ? "f32" : "f64"; }

RunConfig desk_profile() {
  RunConfig c;
  auto& e = c.model.encoder;
  e.dim = 64;
  e.layers = 2;
  e.heads = 4;
  e.ff_dim = 256;
  e.max_len = 48;
  e.dropout = 0.1;
  c.model.instance_len = 24;
  c.model.description_len = 16;
  c.model.pair_len = 40;
  c.model.k = 2;
  c.model.rerank_hidden = 64;
  c.train.temperature = 0.02;
  c.train.batch_size = 16;
  c.train.learning_rate = 1e-3;
  c.train.epochs = 10;
  c.train.warmup_steps = 30;
  // Small corpora overfit trainable token tables to the train relations.
  c.train.freeze_token_embeddings = true;
  return c;
}

RunConfig paper_profile() {
  RunConfig c;
  auto& e = c.model.encoder;
  e.dim = 768;
  e.layers = 12;
  e.heads = 12;
  e.ff_dim = 3072;
  e.max_len = 128;
  e.dropout = 0.1;
  c.model.instance_len = 128;
  c.model.description_len = 64;
  c.model.pair_len = 128;
  c.model.k = 2;
  c.model.rerank_hidden = 768;
  c.train.temperature = 0.02;
  c.train.batch_size = 64;
  c.train.learning_rate = 2e-5;
  c.train.epochs = 5;
  c.train.warmup_steps = 100;
  return c;
}

void RunConfig::validate() const {
  rerank::ModelConfig probe = model;
  if (probe.encoder.vocab_size == 0) probe.encoder.vocab_size = 1;  // supplied by the data at run time
  probe.validate();
  if (!(train.temperature > 0)) throw ConfigError("train.temperature must be positive");
  if (train.batch_size < 2) throw ConfigError("train.batch_size must be at least 2");
  if (!(train.learning_rate > 0)) throw ConfigError("train.learning_rate must be positive");
  if (train.epochs == 0) throw ConfigError("train.epochs must be positive");
  if (train.weight_decay < 0) throw ConfigError("train.weight_decay must be non-negative");
  if (train.recall_weight < 0 || train.rerank_weight < 0) throw ConfigError("loss weights must be non-negative");
  if (!(model.encoder.dropout >= 0 && model.encoder.dropout < 1)) throw ConfigError("encoder.dropout must lie in [0, 1)");
  if (m < 1) throw ConfigError("experiment.m must be positive");
  if (seeds.empty()) throw ConfigError("experiment.seeds must list at least one seed");
  if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size()) {
    throw ConfigError("experiment.seeds contains a repeated seed");
  }
}

namespace {

std::string fmt_double(double v) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

double parse_double(const std::string& s) {
  double v = 0;
  auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) throw ConfigError("'" + s + "' is not a number");
  return v;
}

std::uint64_t parse_u64(const std::string& s) {
  std::uint64_t v = 0;
  auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) {
    throw ConfigError("'" + s + "' is not a non-negative integer");
  }
  return v;
}

bool parse_bool(const std::string& s) {
  if (s == "true") return true;
  if (s == "false") return false;
  throw ConfigError("'" + s + "' is not true or false");
}

ad::Activation parse_activation(const std::string& s) {
  if (s == "gelu") return ad::Activation::kGelu;
  if (s == "relu") return ad::Activation::kRelu;
  if (s == "tanh") return ad::Activation::kTanh;
  throw ConfigError("unknown activation '" + s + "'");
}

Precision parse_precision(const std::string& s) {
  if (s == "f32") return Precision::kF32;
  if (s == "f64") return Precision::kF64;
  throw ConfigError("precision must be f32 or f64, got '" + s + "'");
}

std::string fmt_seeds(const std::vector<std::uint64_t>& seeds) {
  std::string out;
  for (auto s : seeds) out += (out.empty() ? "" : ",") + std::to_string(s);
  return out;
}

std::vector<std::uint64_t> parse_seeds(const std::string& s) {
  std::vector<std::uint64_t> out;
  std::istringstream in(s);
  for (std::string item; std::getline(in, item, ',');) {
    const auto b = item.find_first_not_of(' ');
    const auto e = item.find_last_not_of(' ');
    if (b == std::string::npos) throw ConfigError("empty entry in seed list '" + s + "'");
    out.push_back(parse_u64(item.substr(b, e - b + 1)));
  }
  return out;
}

struct Key {
  const char* name;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

#define RELMATCH_SIZE_KEY(NAME, FIELD) \
  Key { NAME, [](const RunConfig& c) { return std::to_string(c.FIELD); }, \
        [](RunConfig& c, const std::string& v) { c.FIELD = static_cast<std::size_t>(parse_u64(v)); } }
#define RELMATCH_DOUBLE_KEY(NAME, FIELD) \
  Key { NAME, [](const RunConfig& c) { return fmt_double(c.FIELD); }, \
        [](RunConfig& c, const std::string& v) { c.FIELD = parse_double(v); } }
#define RELMATCH_BOOL_KEY(NAME, FIELD) \
  Key { NAME, [](const RunConfig& c) { return std::string(c.FIELD ? "true" : "false"); }, \
        [](RunConfig& c, const std::string& v) { c.FIELD = parse_bool(v); } }
#define RELMATCH_STRING_KEY(NAME, FIELD) \
  Key { NAME, [](const RunConfig& c) { return c.FIELD; }, [](RunConfig& c, const std::string& v) { c.FIELD = v; } }

const std::vector<Key>& keys() {
  static const std::vector<Key> table = {
      RELMATCH_SIZE_KEY("encoder.dim", model.encoder.dim),
      RELMATCH_SIZE_KEY("encoder.layers", model.encoder.layers),
      RELMATCH_SIZE_KEY("encoder.heads", model.encoder.heads),
      RELMATCH_SIZE_KEY("encoder.ff_dim", model.encoder.ff_dim),
      RELMATCH_SIZE_KEY("encoder.max_len", model.encoder.max_len),
      RELMATCH_DOUBLE_KEY("encoder.dropout", model.encoder.dropout),
      Key{"encoder.activation", [](const RunConfig& c) { return ad::to_string(c.model.encoder.activation); },
          [](RunConfig& c, const std::string& v) { c.model.encoder.activation = parse_activation(v); }},
      RELMATCH_SIZE_KEY("len.instance", model.instance_len),
      RELMATCH_SIZE_KEY("len.description", model.description_len),
      RELMATCH_SIZE_KEY("len.pair", model.pair_len),
      Key{"model.pooling", [](const RunConfig& c) { return tower::to_string(c.model.pooling); },
          [](RunConfig& c, const std::string& v) { c.model.pooling = tower::parse_pooling(v); }},
      RELMATCH_BOOL_KEY("model.reranker", model.reranker),
      RELMATCH_SIZE_KEY("rerank.k", model.k),
      RELMATCH_SIZE_KEY("rerank.hidden", model.rerank_hidden),
      Key{"train.mode", [](const RunConfig& c) { return rerank::to_string(c.train.mode); },
          [](RunConfig& c, const std::string& v) { c.train.mode = rerank::parse_train_mode(v); }},
      RELMATCH_DOUBLE_KEY("train.temperature", train.temperature),
      RELMATCH_SIZE_KEY("train.batch_size", train.batch_size),
      RELMATCH_DOUBLE_KEY("train.learning_rate", train.learning_rate),
      RELMATCH_SIZE_KEY("train.epochs", train.epochs),
      RELMATCH_SIZE_KEY("train.warmup_steps", train.warmup_steps),
      RELMATCH_DOUBLE_KEY("train.weight_decay", train.weight_decay),
      RELMATCH_DOUBLE_KEY("train.recall_weight", train.recall_weight),
      RELMATCH_DOUBLE_KEY("train.rerank_weight", train.rerank_weight),
      RELMATCH_BOOL_KEY("train.freeze_token_embeddings", train.freeze_token_embeddings),
      RELMATCH_SIZE_KEY("experiment.m", m),
      Key{"experiment.seeds", [](const RunConfig& c) { return fmt_seeds(c.seeds); },
          [](RunConfig& c, const std::string& v) { c.seeds = parse_seeds(v); }},
      Key{"precision", [](const RunConfig& c) { return to_string(c.precision); },
          [](RunConfig& c, const std::string& v) { c.precision = parse_precision(v); }},
      RELMATCH_STRING_KEY("data.instances", instances_path),
      RELMATCH_STRING_KEY("data.catalog", catalog_path),
  };
  return table;
}

#undef RELMATCH_SIZE_KEY
#undef RELMATCH_DOUBLE_KEY
#undef RELMATCH_BOOL_KEY
#undef RELMATCH_STRING_KEY

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

}  // namespace

RunConfig parse_config(const std::string& text, const std::string& source) {
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  auto fail = [&](const std::string& msg) { throw ConfigError(source + ":" + std::to_string(lineno) + ": " + msg); };

  std::vector<std::pair<std::string, std::string>> entries;
  std::vector<std::size_t> lines;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) fail("expected 'key = value'");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty()) fail("missing key");
    entries.emplace_back(std::move(key), std::move(value));
    lines.push_back(lineno);
  }
  lineno = lines.empty() ? 0 : lines.front();
  if (entries.empty() || entries.front().first != "version") fail("the first key must be 'version'");
  try {
    if (parse_u64(entries.front().second) != kConfigVersion) {
      fail("unsupported config version " + entries.front().second);
    }
  } catch (const ConfigError& e) {
    if (std::string(e.what()).starts_with(source)) throw;
    fail(e.what());
  }

  std::size_t next = 1;
  RunConfig c = desk_profile();
  if (entries.size() > 1 && entries[1].first == "profile") {
    lineno = lines[1];
    if (entries[1].second == "desk") {
      c = desk_profile();
    } else if (entries[1].second == "paper") {
      c = paper_profile();
    } else {
      fail("unknown profile '" + entries[1].second + "'");
    }
    next = 2;
  }
  std::set<std::string> seen;
  for (std::size_t i = next; i < entries.size(); ++i) {
    lineno = lines[i];
    const auto& [key, value] = entries[i];
    if (!seen.insert(key).second) fail("key '" + key + "' given twice");
    const Key* k = nullptr;
    for (const Key& cand : keys()) {
      if (key == cand.name) k = &cand;
    }
    if (!k) fail("unknown key '" + key + "'");
    try {
      k->set(c, value);
    } catch (const Error& e) {
      fail(key + ": " + e.what());
    }
  }
  try {
    c.validate();
  } catch (const Error& e) {
    throw ConfigError(source + ": " + e.what());
  }
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), path.string());
}

std::string format_config(const RunConfig& config) {
  std::string out = "version = " + std::to_string(kConfigVersion) + "\n";
  for (const Key& k : keys()) out += std::string(k.name) + " = " + k.get(config) + "\n";
  return out;
}

void save_config(const std::filesystem::path& path, const RunConfig& config) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ConfigError("cannot write config " + path.string());
  out << format_config(config);
  if (!out) throw ConfigError("write failed for config " + path.string());
}

}  // namespace relmatch::io
