// Copyright 2026 The relmatch Authors
// SPDX-License-Identifier: Apache-2.0

#include "relmatch/io/corpus.hpp"

#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "relmatch/error.hpp"

namespace relmatch::io {

using nlohmann::json;

namespace {

text::Span parse_span(const json& j, const char* field) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number_unsigned() || !j[1].is_number_unsigned()) {
    throw DataError(std::string("field '") + field + "' must be [start, end] with non-negative integers");
  }
  return {j[0].get<std::size_t>(), j[1].get<std::size_t>()};
}

json span_json(const text::Span& s) { return json::array({s.start, s.end}); }

std::vector<std::string> split_ws(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> out;
  for (std::string tok; in >> tok;) out.push_back(tok);
  return out;
}

template <class Fn>
void for_each_record(const std::filesystem::path& path, Fn&& fn) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::string line;
  for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      fn(json::parse(line));
    } catch (const json::exception& e) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    } catch (const Error& e) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

text::Instance parse_instance(const json& j) {
  if (!j.is_object()) throw DataError("record is not an object");
  text::Instance inst;
  inst.tokens = j.at("tokens").get<std::vector<std::string>>();
  inst.head = parse_span(j.at("h"), "h");
  inst.tail = parse_span(j.at("t"), "t");
  inst.relation = j.at("relation").get<std::string>();
  text::validate(inst);
  return inst;
}

void write_lines(const std::filesystem::path& path, const std::vector<std::string>& lines) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  for (const auto& l : lines) out << l << '\n';
  if (!out) throw DataError("write failed for " + path.string());
}

}  // namespace

text::Instance instance_from_json(const std::string& line) { return parse_instance(json::parse(line)); }

std::string instance_to_json(const text::Instance& inst) {
  json j;
  j["tokens"] = inst.tokens;
  j["h"] = span_json(inst.head);
  j["t"] = span_json(inst.tail);
  j["relation"] = inst.relation;
  return j.dump();
}

std::vector<text::Instance> load_instances(const std::filesystem::path& path) {
  std::vector<text::Instance> out;
  for_each_record(path, [&](const json& j) { out.push_back(parse_instance(j)); });
  return out;
}

text::Catalog load_catalog(const std::filesystem::path& path) {
  std::vector<text::RelationDescription> entries;
  std::map<std::string, bool> seen;
  for_each_record(path, [&](const json& j) {
    if (!j.is_object()) throw DataError("record is not an object");
    text::RelationDescription d;
    d.relation = j.at("relation").get<std::string>();
    const json& desc = j.at("description");
    d.tokens = desc.is_string() ? split_ws(desc.get<std::string>()) : desc.get<std::vector<std::string>>();
    if (j.contains("head_hypernym")) d.head_hypernym = parse_span(j["head_hypernym"], "head_hypernym");
    if (j.contains("tail_hypernym")) d.tail_hypernym = parse_span(j["tail_hypernym"], "tail_hypernym");
    text::validate(d);
    if (seen[d.relation]) throw DataError("relation '" + d.relation + "' described twice");
    seen[d.relation] = true;
    entries.push_back(std::move(d));
  });
  return text::Catalog(std::move(entries));
}

Corpus load_corpus(const std::filesystem::path& instances, const std::filesystem::path& catalog) {
  Corpus c{load_instances(instances), load_catalog(catalog)};
  for (std::size_t i = 0; i < c.instances.size(); ++i) {
    if (!c.catalog.contains(c.instances[i].relation)) {
      throw DataError(instances.string() + ": record " + std::to_string(i + 1) + " references relation '" +
                      c.instances[i].relation + "' with no description in " + catalog.string());
    }
  }
  return c;
}

void save_instances(const std::filesystem::path& path, const std::vector<text::Instance>& instances) {
  std::vector<std::string> lines;
  lines.reserve(instances.size());
  for (const auto& inst : instances) lines.push_back(instance_to_json(inst));
  write_lines(path, lines);
}

void save_catalog(const std::filesystem::path& path, const text::Catalog& catalog) {
  std::vector<std::string> lines;
  for (const auto& d : catalog.entries()) {
    json j;
    j["relation"] = d.relation;
    std::string text;
    for (const auto& t : d.tokens) text += (text.empty() ? "" : " ") + t;
    j["description"] = text;
    if (d.head_hypernym) j["head_hypernym"] = span_json(*d.head_hypernym);
    if (d.tail_hypernym) j["tail_hypernym"] = span_json(*d.tail_hypernym);
    lines.push_back(j.dump());
  }
  write_lines(path, lines);
}

std::string summarize(const Corpus& corpus) {
  std::map<std::string, std::size_t> per;
  std::size_t tokens = 0;
  for (const auto& inst : corpus.instances) {
    ++per[inst.relation];
    tokens += inst.tokens.size();
  }
  std::ostringstream out;
  out << corpus.instances.size() << " instances, " << per.size() << " relations with instances, "
      << corpus.catalog.size() << " described";
  if (!corpus.instances.empty()) {
    out << ", mean length " << static_cast<double>(tokens) / static_cast<double>(corpus.instances.size());
    std::size_t lo = SIZE_MAX, hi = 0;
    for (const auto& [rel, n] : per) {
      lo = std::min(lo, n);
      hi = std::max(hi, n);
    }
    out << ", " << lo << "-" << hi << " instances per relation";
  }
  return out.str();
}

}  // namespace relmatch::io
