// Copyright 2026 The relmatch Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "relmatch/text/batching.hpp"
#include "relmatch/text/types.hpp"

namespace relmatch::io {

struct Corpus {
  std::vector<text::Instance> instances;
  text::Catalog catalog;
};

// Instance file, one JSON object per line:
//   {"tokens": [...], "h": [start, end], "t": [start, end], "relation": "id"}
// Catalog file, one JSON object per line:
//   {"relation": "id", "description": "whitespace separated text",
//    "head_hypernym": [start, end], "tail_hypernym": [start, end]}
// Spans are inclusive token indices; the hypernym spans are optional.
// Blank lines are skipped.

/// Throws DataError naming the file and line of the first bad record, or
/// the first instance whose relation has no description.
Corpus load_corpus(const std::filesystem::path& instances, const std::filesystem::path& catalog);

std::vector<text::Instance> load_instances(const std::filesystem::path& path);
text::Catalog load_catalog(const std::filesystem::path& path);

void save_instances(const std::filesystem::path& path, const std::vector<text::Instance>& instances);
void save_catalog(const std::filesystem::path& path, const text::Catalog& catalog);

std::string instance_to_json(const text::Instance& inst);
text::Instance instance_from_json(const std::string& line);

/// Instance, relation and per-relation count summary.
std::string summarize(const Corpus& corpus);

}  // namespace relmatch::io
