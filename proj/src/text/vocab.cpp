// Copyright 2026 The relmatch Authors
// SPDX-License-Identifier: Apache-2.0

#include "relmatch/text/vocab.hpp"

#include <cctype>
#include <fstream>

#include "relmatch/error.hpp"

namespace relmatch::text {

std::string lowercase(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

Vocabulary::Vocabulary() {
  for (std::string_view t : kReservedTokens) {
    index_.emplace(std::string(t), static_cast<std::int32_t>(tokens_.size()));
    tokens_.emplace_back(t);
  }
}

Vocabulary Vocabulary::build(const std::vector<Instance>& instances, const std::vector<RelationDescription>& catalog) {
  Vocabulary v;
  for (const auto& d : catalog)
    for (const auto& t : d.tokens) v.add(t);
  for (const auto& inst : instances)
    for (const auto& t : inst.tokens) v.add(t);
  return v;
}

std::int32_t Vocabulary::add(std::string_view token) {
  std::string key = lowercase(token);
  if (key.empty()) throw DataError("empty token");
  auto [it, inserted] = index_.try_emplace(key, static_cast<std::int32_t>(tokens_.size()));
  if (inserted) tokens_.push_back(std::move(key));
  return it->second;
}

std::int32_t Vocabulary::id(std::string_view token) const {
  auto it = index_.find(lowercase(token));
  return it == index_.end() ? id_of(Special::kUnk) : it->second;
}

const std::string& Vocabulary::token(std::int32_t id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw DataError("token id " + std::to_string(id) + " out of range");
  }
  return tokens_[static_cast<std::size_t>(id)];
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write vocabulary " + path.string());
  for (const auto& t : tokens_) out << t << '\n';
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open vocabulary " + path.string());
  Vocabulary v;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    if (lineno < static_cast<std::size_t>(kReservedCount)) {
      if (line != kReservedTokens[lineno]) {
        throw DataError(path.string() + ":" + std::to_string(lineno + 1) + ": expected reserved token " +
                        std::string(kReservedTokens[lineno]));
      }
    } else {
      if (line.empty()) throw DataError(path.string() + ":" + std::to_string(lineno + 1) + ": empty token");
      if (v.add(line) != static_cast<std::int32_t>(lineno)) {
        throw DataError(path.string() + ":" + std::to_string(lineno + 1) + ": duplicate token '" + line + "'");
      }
    }
    ++lineno;
  }
  if (lineno < static_cast<std::size_t>(kReservedCount)) throw DataError(path.string() + ": missing reserved tokens");
  return v;
}

}  // namespace relmatch::text
