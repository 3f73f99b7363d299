// Copyright 2026 The relmatch Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "relmatch/text/types.hpp"

namespace relmatch::text {

enum class Special : std::int32_t {
  kPad = 0,
  kCls = 1,
  kSep = 2,
  kUnk = 3,
  kHeadStart = 4,
  kHeadEnd = 5,
  kTailStart = 6,
  kTailEnd = 7,
};

inline constexpr std::int32_t id_of(Special s) { return static_cast<std::int32_t>(s); }
inline constexpr std::int32_t kReservedCount = 8;

inline constexpr std::array<std::string_view, kReservedCount> kReservedTokens = {
    "[PAD]", "[CLS]", "[SEP]", "[UNK]", "[E_h]", "[\\E_h]", "[E_t]", "[\\E_t]"};

/// Word-level vocabulary. Ids 0-7 are the reserved tokens; corpus words are
/// lowercased and appended in first-seen order, catalog before instances.
/// Lookup lowercases too, so a corpus word never aliases a reserved id.
class Vocabulary {
 public:
  Vocabulary();

  static Vocabulary build(const std::vector<Instance>& instances, const std::vector<RelationDescription>& catalog);

  /// One token per line, line number = id. The first eight lines must be the
  /// reserved tokens.
  static Vocabulary load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  std::int32_t add(std::string_view token);
  std::int32_t id(std::string_view token) const;  // [UNK] when absent
  const std::string& token(std::int32_t id) const;
  bool is_reserved(std::int32_t id) const { return id >= 0 && id < kReservedCount; }
  std::size_t size() const { return tokens_.size(); }

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.tokens_ == b.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::int32_t> index_;
};

std::string lowercase(std::string_view s);

}  // namespace relmatch::text
