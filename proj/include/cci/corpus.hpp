// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace cci {

// Data/file-level failures (bad records, broken invariants, unreadable paths).
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

enum class CommentType { Return, Param, Summary };
enum class Label { Consistent = 0, Inconsistent = 1 };
enum class Split { Train, Valid, Test };

std::string to_string(CommentType t);
std::string to_string(Split s);
CommentType comment_type_from_string(const std::string& s);
Split split_from_string(const std::string& s);

// One method/comment change record. old_comment is the comment C attached to
// the old method M; new_code is the modified method M'; label says whether C
// is inconsistent with M'.
struct CciCase {
  std::string id;
  CommentType comment_type = CommentType::Summary;
  std::string old_comment;
  std::optional<std::string> new_comment;
  std::string old_code;
  std::string new_code;
  std::optional<Label> label;
  std::optional<Split> split;
  bool synthetic = false;
  std::optional<std::string> parent_id;
  // Unknown JSON fields, preserved verbatim on round-trip.
  nlohmann::ordered_json extra = nlohmann::ordered_json::object();

  bool is_positive() const { return label && *label == Label::Inconsistent; }
};

struct Corpus {
  std::vector<CciCase> cases;
  std::optional<std::string> source_path;

  std::size_t size() const { return cases.size(); }
  const CciCase* find(const std::string& id) const;
};

struct DedupReport {
  std::size_t groups_found = 0;           // duplicate groups (size >= 2)
  std::vector<std::string> removed_ids;   // input order
  std::size_t retained_by_true_label = 0; // groups decided by an inconsistent label
  nlohmann::ordered_json to_json() const;
};

struct SplitViolation {
  std::vector<std::string> ids;     // all cases sharing the quadruple
  std::vector<std::string> splits;  // distinct splits touched, sorted
};

struct SplitHygieneReport {
  std::vector<SplitViolation> violations;
  bool clean() const { return violations.empty(); }
  nlohmann::ordered_json to_json() const;
};

// Whitespace normalization used for all duplicate comparisons. Tabs, CR, LF
// and any other whitespace become a single space; runs collapse; ends trim.
// Stored field values are never rewritten.
std::string normalize_text(const std::string& raw);

CciCase case_from_json(const nlohmann::ordered_json& j);
nlohmann::ordered_json case_to_json(const CciCase& c);

// JSON Lines, one CciCase per line. Malformed lines abort with the line
// number unless permissive=true (then skipped and returned in *skipped).
Corpus load_corpus(const std::string& path, bool permissive = false,
                   std::vector<std::string>* skipped = nullptr);
void save_corpus(const Corpus& corpus, const std::string& path);

// Groups cases by the normalized (old_code, new_code, old_comment,
// new_comment) quadruple and keeps one case per group: a label=inconsistent
// case if present, otherwise the first occurrence.
std::pair<Corpus, DedupReport> deduplicate(const Corpus& corpus);

// Reports every normalized quadruple that appears in more than one split.
SplitHygieneReport check_split_hygiene(const Corpus& corpus);

}  // namespace cci
