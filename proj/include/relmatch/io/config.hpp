// Copyright 2026 The relmatch Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "relmatch/rerank/training.hpp"

namespace relmatch::io {

enum class Precision { kF32, kF64 };

std::string to_string(Precision p);

/// Everything a run needs besides the data and the seed. The encoder's
/// vocabulary size is taken from the data at run time and is not stored.
struct RunConfig {
  rerank::ModelConfig model;
  rerank::TrainOptions train;
  std::size_t m = 5;
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  Precision precision = Precision::kF32;
  std::string instances_path;
  std::string catalog_path;

  /// Throws ConfigError on the first invalid field.
  void validate() const;
  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

/// Small from-scratch model sized for one CPU core.
RunConfig desk_profile();
/// Published fine-tuning hyperparameters and bert-base encoder sizes.
RunConfig paper_profile();

inline constexpr int kConfigVersion = 1;

/// Flat `key = value` text, `#` starts a comment. The first key must be
/// `version`; an optional `profile = desk|paper` (default desk) must come
/// next and supplies every key not given. Unknown keys, repeated keys and
/// malformed values are ConfigErrors naming the line.
RunConfig parse_config(const std::string& text, const std::string& source = "<config>");
RunConfig load_config(const std::filesystem::path& path);

/// Every key, in a fixed order; parse_config(format_config(c)) == c.
std::string format_config(const RunConfig& config);
void save_config(const std::filesystem::path& path, const RunConfig& config);

}  // namespace relmatch::io
