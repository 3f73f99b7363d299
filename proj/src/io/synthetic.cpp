// Copyright 2026 The relmatch Authors
// SPDX-License-Identifier: Apache-2.0

#include "relmatch/io/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <unordered_map>

#include "relmatch/error.hpp"

namespace relmatch::io {

namespace {

constexpr std::string_view kConsonants = "bdfgklmnprstvz";
constexpr std::string_view kVowels = "aeiou";
constexpr std::size_t kMaxDraws = 64;
constexpr double kOracleFloor = 0.95;
constexpr double kOracleNoiseCeiling = 0.1;

using text::uniform_below;

class WordMaker {
 public:
  explicit WordMaker(std::mt19937_64& rng) : rng_(rng) {}

  std::string draw(std::size_t syllables) {
    std::string w;
    for (std::size_t s = 0; s < syllables; ++s) {
      w += kConsonants[uniform_below(rng_, kConsonants.size())];
      w += kVowels[uniform_below(rng_, kVowels.size())];
    }
    return w;
  }

  /// A word not yet used; nullopt after kMaxDraws collisions.
  std::optional<std::string> fresh(std::size_t syllables) {
    for (std::size_t i = 0; i < kMaxDraws; ++i) {
      std::string w = draw(syllables);
      if (used_.insert(w).second) return w;
    }
    return std::nullopt;
  }

  std::string fresh_or_throw(std::size_t syllables, const std::string& what) {
    auto w = fresh(syllables);
    if (!w) throw DataError("word space exhausted while drawing " + what);
    return *w;
  }

 private:
  std::mt19937_64& rng_;
  std::set<std::string> used_;
};

using Bag = std::unordered_map<std::string, double>;

Bag bag_of(const std::vector<std::string>& tokens) {
  Bag b;
  for (const auto& t : tokens) b[t] += 1;
  return b;
}

double norm(const Bag& b) {
  double s = 0;
  for (const auto& [t, v] : b) s += v * v;
  return std::sqrt(s);
}

double cosine(const Bag& a, double na, const Bag& b, double nb) {
  if (na == 0 || nb == 0) return 0;
  const Bag& small = a.size() <= b.size() ? a : b;
  const Bag& large = a.size() <= b.size() ? b : a;
  double dot = 0;
  for (const auto& [t, v] : small) {
    if (auto it = large.find(t); it != large.end()) dot += v * it->second;
  }
  return dot / (na * nb);
}

/// Index of the best-scoring bag; ties go to the earliest entry.
std::size_t nearest(const Bag& q, const std::vector<Bag>& bags, const std::vector<double>& norms) {
  const double nq = norm(q);
  std::size_t best = 0;
  double best_s = -2;
  for (std::size_t i = 0; i < bags.size(); ++i) {
    const double s = cosine(q, nq, bags[i], norms[i]);
    if (s > best_s) {
      best_s = s;
      best = i;
    }
  }
  return best;
}

}  // namespace

void SyntheticCorpusSpec::validate() const {
  if (relations < 2) throw ConfigError("synthetic corpus needs at least 2 relations");
  if (per_relation < 1) throw ConfigError("instances per relation must be positive");
  if (vocab_size < 1) throw ConfigError("filler vocabulary must be non-empty");
  if (signature_tokens < 1) throw ConfigError("signature must have at least one token");
  if (type_count < 1) throw ConfigError("type pool must be non-empty");
  if (name_count < 2) throw ConfigError("entity name pool needs at least 2 names");
  if (!(noise >= 0 && noise < 1)) throw ConfigError("noise rate must lie in [0, 1)");
}

SyntheticCorpus gen_synthetic(const SyntheticCorpusSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  WordMaker words(rng);

  std::vector<std::string> fillers, names, types;
  for (std::size_t i = 0; i < spec.vocab_size; ++i) fillers.push_back(words.fresh_or_throw(2, "filler words"));
  for (std::size_t i = 0; i < spec.name_count; ++i) names.push_back(words.fresh_or_throw(2, "entity names"));
  for (std::size_t i = 0; i < spec.type_count; ++i) types.push_back(words.fresh_or_throw(3, "type words"));

  struct Rel {
    std::string id;
    std::vector<std::string> signature;
    std::size_t head_type, tail_type;
  };
  std::vector<Rel> rels(spec.relations);
  std::vector<std::string> noise_pool = fillers;
  const int width = static_cast<int>(std::to_string(spec.relations - 1).size());
  for (std::size_t r = 0; r < spec.relations; ++r) {
    std::string num = std::to_string(r);
    rels[r].id = "R" + std::string(static_cast<std::size_t>(width) - num.size(), '0') + num;
    for (std::size_t j = 0; j < spec.signature_tokens; ++j) {
      auto w = words.fresh(3);
      if (!w) throw DataError("signature collision: no unused word left for relation " + rels[r].id);
      rels[r].signature.push_back(*w);
      noise_pool.push_back(*w);
    }
  }
  // Ordered type pairs are dealt from a shuffled deck of all T^2 pairs, so a
  // pair repeats only once the deck runs out.
  std::vector<std::size_t> deck;
  for (std::size_t r = 0; r < spec.relations; ++r) {
    if (deck.empty()) {
      deck.resize(spec.type_count * spec.type_count);
      std::iota(deck.begin(), deck.end(), std::size_t{0});
      text::shuffle(deck.begin(), deck.end(), rng);
    }
    rels[r].head_type = deck.back() / spec.type_count;
    rels[r].tail_type = deck.back() % spec.type_count;
    deck.pop_back();
  }

  auto filler = [&] { return fillers[uniform_below(rng, fillers.size())]; };

  SyntheticCorpus out;
  std::vector<text::RelationDescription> catalog;
  for (const Rel& rel : rels) {
    // <filler> <head type> <signature and fillers> <tail type> <filler>
    text::RelationDescription d;
    d.relation = rel.id;
    d.tokens.push_back(filler());
    d.head_hypernym = text::Span{d.tokens.size(), d.tokens.size()};
    d.tokens.push_back(types[rel.head_type]);
    std::vector<std::string> middle = rel.signature;
    middle.push_back(filler());
    middle.push_back(filler());
    text::shuffle(middle.begin(), middle.end(), rng);
    d.tokens.insert(d.tokens.end(), middle.begin(), middle.end());
    d.tail_hypernym = text::Span{d.tokens.size(), d.tokens.size()};
    d.tokens.push_back(types[rel.tail_type]);
    d.tokens.push_back(filler());
    catalog.push_back(std::move(d));
  }

  for (const Rel& rel : rels) {
    for (std::size_t n = 0; n < spec.per_relation; ++n) {
      // Context: a nonempty signature subset plus fillers, in random order.
      std::vector<std::string> ctx;
      for (const auto& s : rel.signature) {
        if (uniform_below(rng, 4) != 0) ctx.push_back(s);
      }
      if (ctx.empty()) ctx.push_back(rel.signature[uniform_below(rng, rel.signature.size())]);
      const std::size_t extra = 2 + uniform_below(rng, 4);
      for (std::size_t i = 0; i < extra; ++i) ctx.push_back(filler());
      text::shuffle(ctx.begin(), ctx.end(), rng);
      for (auto& t : ctx) {
        if (spec.noise > 0 && std::uniform_real_distribution<double>(0, 1)(rng) < spec.noise) {
          t = noise_pool[uniform_below(rng, noise_pool.size())];
        }
      }
      std::size_t head_name = uniform_below(rng, names.size());
      std::size_t tail_name = uniform_below(rng, names.size() - 1);
      if (tail_name >= head_name) ++tail_name;
      const std::vector<std::string> head{types[rel.head_type], names[head_name]};
      const std::vector<std::string> tail{types[rel.tail_type], names[tail_name]};

      // Entities at random context cut points; the tail may precede the head.
      std::size_t a = uniform_below(rng, ctx.size() + 1);
      std::size_t b = uniform_below(rng, ctx.size() + 1);
      if (a > b) std::swap(a, b);
      const bool head_first = uniform_below(rng, 4) != 0;
      const auto& first = head_first ? head : tail;
      const auto& second = head_first ? tail : head;
      text::Instance inst;
      inst.relation = rel.id;
      inst.tokens.insert(inst.tokens.end(), ctx.begin(), ctx.begin() + static_cast<std::ptrdiff_t>(a));
      const text::Span s1{inst.tokens.size(), inst.tokens.size() + 1};
      inst.tokens.insert(inst.tokens.end(), first.begin(), first.end());
      inst.tokens.insert(inst.tokens.end(), ctx.begin() + static_cast<std::ptrdiff_t>(a),
                         ctx.begin() + static_cast<std::ptrdiff_t>(b));
      const text::Span s2{inst.tokens.size(), inst.tokens.size() + 1};
      inst.tokens.insert(inst.tokens.end(), second.begin(), second.end());
      inst.tokens.insert(inst.tokens.end(), ctx.begin() + static_cast<std::ptrdiff_t>(b), ctx.end());
      inst.head = head_first ? s1 : s2;
      inst.tail = head_first ? s2 : s1;
      text::validate(inst);
      out.corpus.instances.push_back(std::move(inst));
    }
  }
  out.corpus.catalog = text::Catalog(std::move(catalog));

  out.oracle_accuracy = centroid_oracle_accuracy(out.corpus.instances);
  out.description_oracle_accuracy = description_oracle_accuracy(out.corpus.instances, out.corpus.catalog);
  if (spec.noise <= kOracleNoiseCeiling && out.oracle_accuracy < kOracleFloor) {
    throw DataError("nearest-centroid oracle accuracy " + std::to_string(out.oracle_accuracy) +
                    " is below 0.95 at noise " + std::to_string(spec.noise));
  }
  return out;
}

double centroid_oracle_accuracy(const std::vector<text::Instance>& instances) {
  if (instances.empty()) return 0;
  std::map<std::string, std::size_t> slot;
  for (const auto& inst : instances) slot.emplace(inst.relation, slot.size());
  std::vector<Bag> centroids(slot.size());
  std::vector<std::string> ids(slot.size());
  for (const auto& [rel, i] : slot) ids[i] = rel;
  for (const auto& inst : instances) {
    Bag& c = centroids[slot[inst.relation]];
    for (const auto& t : inst.tokens) c[t] += 1;
  }
  std::vector<double> norms;
  for (const auto& c : centroids) norms.push_back(norm(c));
  std::size_t correct = 0;
  for (const auto& inst : instances) correct += ids[nearest(bag_of(inst.tokens), centroids, norms)] == inst.relation;
  return static_cast<double>(correct) / static_cast<double>(instances.size());
}

double description_oracle_accuracy(const std::vector<text::Instance>& instances, const text::Catalog& catalog) {
  if (instances.empty() || catalog.size() == 0) return 0;
  std::vector<const text::RelationDescription*> sorted;
  for (const auto& d : catalog.entries()) sorted.push_back(&d);
  std::sort(sorted.begin(), sorted.end(), [](auto* a, auto* b) { return a->relation < b->relation; });
  std::vector<Bag> bags;
  std::vector<double> norms;
  for (const auto* d : sorted) {
    bags.push_back(bag_of(d->tokens));
    norms.push_back(norm(bags.back()));
  }
  std::size_t correct = 0;
  for (const auto& inst : instances) {
    correct += sorted[nearest(bag_of(inst.tokens), bags, norms)]->relation == inst.relation;
  }
  return static_cast<double>(correct) / static_cast<double>(instances.size());
}

}  // namespace relmatch::io
