// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "cci/corpus.hpp"
#include "cci/diffscript.hpp"
#include "cci/lexing.hpp"

namespace cci {

enum class FilterRule { TypoFix, CaseChange, StopwordChange, LexicalChange, None };

std::string to_string(FilterRule r);

struct FilterVerdict {
  FilterRule rule = FilterRule::None;
  // (old_word, new_word) pairs that triggered the rule; empty iff rule==None.
  std::vector<std::pair<std::string, std::string>> evidence;
};

struct FilterReport {
  std::size_t typo_fix = 0;
  std::size_t case_change = 0;
  std::size_t stopword_change = 0;
  std::size_t lexical_change = 0;
  std::vector<std::pair<std::string, FilterVerdict>> removed;  // id, verdict
  std::size_t total_removed() const { return removed.size(); }
  nlohmann::ordered_json to_json() const;
};

// Unit-cost insert/delete/substitute edit distance.
std::size_t levenshtein(const std::string& a, const std::string& b);

// Rule-based English lemma: fixed suffix table (s/es/ies/ed/ing with
// undoubling and e-restoration) plus a small irregular-form map.
std::string lemmatize(const std::string& word);

// Lowercased {code tokens} U {identifier subtokens} of the old method.
std::unordered_set<std::string> code_vocabulary(const std::string& old_code);

bool is_typo_fix(const TokenSeq& old_c, const TokenSeq& new_c,
                 const std::unordered_set<std::string>& old_code_vocab);
bool is_case_change(const TokenSeq& old_c, const TokenSeq& new_c,
                    const std::unordered_set<std::string>& old_code_vocab);
bool is_stopword_change(const TokenSeq& old_c, const TokenSeq& new_c);
bool is_lexical_change(const TokenSeq& old_c, const TokenSeq& new_c,
                       const std::unordered_set<std::string>& old_code_vocab);

// Rule order TypoFix -> CaseChange -> StopwordChange -> LexicalChange; the
// first match wins. Only label=inconsistent cases are ever evaluated.
FilterVerdict classify_syntactic_change(const CciCase& c);

std::pair<Corpus, FilterReport> apply_syntactic_filters(const Corpus& corpus);

}  // namespace cci
