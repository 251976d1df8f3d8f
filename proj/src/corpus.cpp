// SPDX-License-Identifier: Apache-2.0
#include "cci/corpus.hpp"

#include <array>
#include <cctype>
#include <fstream>
#include <map>
#include <unordered_map>
#include <unordered_set>

namespace cci {

using nlohmann::ordered_json;

std::string to_string(CommentType t) {
  switch (t) {
    case CommentType::Return: return "return";
    case CommentType::Param: return "param";
    case CommentType::Summary: return "summary";
  }
  return "summary";
}

std::string to_string(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Valid: return "valid";
    case Split::Test: return "test";
  }
  return "train";
}

CommentType comment_type_from_string(const std::string& s) {
  if (s == "return") return CommentType::Return;
  if (s == "param") return CommentType::Param;
  if (s == "summary") return CommentType::Summary;
  throw DataError("unknown comment_type: " + s);
}

Split split_from_string(const std::string& s) {
  if (s == "train") return Split::Train;
  if (s == "valid") return Split::Valid;
  if (s == "test") return Split::Test;
  throw DataError("unknown split: " + s);
}

const CciCase* Corpus::find(const std::string& id) const {
  for (const auto& c : cases)
    if (c.id == id) return &c;
  return nullptr;
}

std::string normalize_text(const std::string& raw) {
  std::string out;
  out.reserve(raw.size());
  bool in_space = false;
  for (unsigned char ch : raw) {
    if (std::isspace(ch) != 0) {
      if (!in_space && !out.empty()) out.push_back(' ');
      in_space = true;
      continue;
    }
    in_space = false;
    out.push_back(static_cast<char>(ch));
  }
  while (!out.empty() && out.back() == ' ') out.pop_back();
  return out;
}

namespace {

const std::array<const char*, 10> kKnownFields = {
    "id",       "comment_type", "old_comment", "new_comment", "old_code",
    "new_code", "label",        "split",       "synthetic",   "parent_id"};

bool is_known_field(const std::string& key) {
  for (const char* f : kKnownFields)
    if (key == f) return true;
  return false;
}

std::string require_string(const ordered_json& j, const char* field) {
  auto it = j.find(field);
  if (it == j.end() || !it->is_string())
    throw DataError(std::string("missing or non-string field: ") + field);
  return it->get<std::string>();
}

}  // namespace

CciCase case_from_json(const ordered_json& j) {
  if (!j.is_object()) throw DataError("record is not a JSON object");
  CciCase c;
  c.id = require_string(j, "id");
  if (c.id.empty()) throw DataError("empty id");
  c.comment_type = comment_type_from_string(require_string(j, "comment_type"));
  c.old_comment = require_string(j, "old_comment");
  c.old_code = require_string(j, "old_code");
  c.new_code = require_string(j, "new_code");
  if (c.old_code.empty() || c.new_code.empty())
    throw DataError("old_code/new_code must be nonempty (id " + c.id + ")");
  if (c.old_comment.empty())
    throw DataError("old_comment must be nonempty (id " + c.id + ")");

  if (auto it = j.find("new_comment"); it != j.end() && !it->is_null()) {
    if (!it->is_string()) throw DataError("new_comment must be a string");
    c.new_comment = it->get<std::string>();
  }
  if (auto it = j.find("label"); it != j.end() && !it->is_null()) {
    if (!it->is_number_integer())
      throw DataError("label must be 0 or 1 (id " + c.id + ")");
    const int v = it->get<int>();
    if (v != 0 && v != 1)
      throw DataError("label must be 0 or 1 (id " + c.id + ")");
    c.label = static_cast<Label>(v);
  }
  if (auto it = j.find("split"); it != j.end() && !it->is_null())
    c.split = split_from_string(it->get<std::string>());
  if (auto it = j.find("synthetic"); it != j.end() && !it->is_null()) {
    if (!it->is_boolean()) throw DataError("synthetic must be boolean");
    c.synthetic = it->get<bool>();
  }
  if (auto it = j.find("parent_id"); it != j.end() && !it->is_null())
    c.parent_id = it->get<std::string>();
  if (c.synthetic && !c.parent_id)
    throw DataError("synthetic case without parent_id (id " + c.id + ")");

  for (auto it = j.begin(); it != j.end(); ++it)
    if (!is_known_field(it.key())) c.extra[it.key()] = it.value();
  return c;
}

ordered_json case_to_json(const CciCase& c) {
  ordered_json j;
  j["id"] = c.id;
  j["comment_type"] = to_string(c.comment_type);
  j["old_comment"] = c.old_comment;
  if (c.new_comment) j["new_comment"] = *c.new_comment;
  j["old_code"] = c.old_code;
  j["new_code"] = c.new_code;
  if (c.label) j["label"] = static_cast<int>(*c.label);
  if (c.split) j["split"] = to_string(*c.split);
  j["synthetic"] = c.synthetic;
  if (c.parent_id) j["parent_id"] = *c.parent_id;
  for (auto it = c.extra.begin(); it != c.extra.end(); ++it)
    j[it.key()] = it.value();
  return j;
}

Corpus load_corpus(const std::string& path, bool permissive,
                   std::vector<std::string>* skipped) {
  std::ifstream in(path);
  if (!in.is_open()) throw DataError("cannot open corpus file: " + path);

  Corpus corpus;
  corpus.source_path = path;
  std::unordered_set<std::string> seen_ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      auto j = ordered_json::parse(line);
      CciCase c = case_from_json(j);
      if (!seen_ids.insert(c.id).second)
        throw DataError("duplicate id: " + c.id);
      corpus.cases.push_back(std::move(c));
    } catch (const std::exception& ex) {
      if (!permissive)
        throw DataError(path + ":" + std::to_string(line_no) + ": " +
                        ex.what());
      if (skipped)
        skipped->push_back("line " + std::to_string(line_no) + ": " +
                           ex.what());
    }
  }
  return corpus;
}

void save_corpus(const Corpus& corpus, const std::string& path) {
  std::ofstream out(path);
  if (!out.is_open()) throw DataError("cannot write corpus file: " + path);
  for (const auto& c : corpus.cases) out << case_to_json(c).dump() << '\n';
}

namespace {

std::string dedup_key(const CciCase& c) {
  // Labels are deliberately not part of the key.
  return normalize_text(c.old_code) + '\x1f' + normalize_text(c.new_code) +
         '\x1f' + normalize_text(c.old_comment) + '\x1f' +
         normalize_text(c.new_comment.value_or(""));
}

}  // namespace

std::pair<Corpus, DedupReport> deduplicate(const Corpus& corpus) {
  for (const auto& c : corpus.cases)
    if (!c.new_comment)
      throw DataError("deduplicate requires new_comment on every case (id " +
                      c.id + ")");

  // group id -> member indices, groups in first-seen order
  std::unordered_map<std::string, std::size_t> group_of;
  std::vector<std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < corpus.cases.size(); ++i) {
    const std::string key = dedup_key(corpus.cases[i]);
    auto [it, inserted] = group_of.try_emplace(key, groups.size());
    if (inserted) groups.emplace_back();
    groups[it->second].push_back(i);
  }

  DedupReport report;
  std::vector<bool> keep(corpus.cases.size(), false);
  for (const auto& members : groups) {
    std::size_t retained = members.front();
    if (members.size() > 1) {
      ++report.groups_found;
      for (std::size_t idx : members) {
        if (corpus.cases[idx].is_positive()) {
          retained = idx;
          ++report.retained_by_true_label;
          break;
        }
      }
    }
    keep[retained] = true;
  }

  Corpus out;
  out.source_path = corpus.source_path;
  for (std::size_t i = 0; i < corpus.cases.size(); ++i) {
    if (keep[i])
      out.cases.push_back(corpus.cases[i]);
    else
      report.removed_ids.push_back(corpus.cases[i].id);
  }
  return {std::move(out), std::move(report)};
}

SplitHygieneReport check_split_hygiene(const Corpus& corpus) {
  for (const auto& c : corpus.cases)
    if (!c.split) throw DataError("case without split: " + c.id);

  std::unordered_map<std::string, std::size_t> group_of;
  std::vector<std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < corpus.cases.size(); ++i) {
    const std::string key = dedup_key(corpus.cases[i]);
    auto [it, inserted] = group_of.try_emplace(key, groups.size());
    if (inserted) groups.emplace_back();
    groups[it->second].push_back(i);
  }

  SplitHygieneReport report;
  for (const auto& members : groups) {
    std::map<std::string, bool> splits;
    for (std::size_t idx : members)
      splits[to_string(*corpus.cases[idx].split)] = true;
    if (splits.size() < 2) continue;
    SplitViolation v;
    for (std::size_t idx : members) v.ids.push_back(corpus.cases[idx].id);
    for (const auto& [name, _] : splits) v.splits.push_back(name);
    report.violations.push_back(std::move(v));
  }
  return report;
}

ordered_json DedupReport::to_json() const {
  ordered_json j;
  j["schema_version"] = 1;
  j["groups_found"] = groups_found;
  j["removed_count"] = removed_ids.size();
  j["removed_ids"] = removed_ids;
  j["retained_by_true_label"] = retained_by_true_label;
  j["tie_break"] = "first_occurrence";
  return j;
}

ordered_json SplitHygieneReport::to_json() const {
  ordered_json j;
  j["schema_version"] = 1;
  j["clean"] = clean();
  auto arr = ordered_json::array();
  for (const auto& v : violations) {
    ordered_json item;
    item["ids"] = v.ids;
    item["splits"] = v.splits;
    arr.push_back(item);
  }
  j["violations"] = arr;
  return j;
}

}  // namespace cci
