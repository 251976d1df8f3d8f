// SPDX-License-Identifier: Apache-2.0
#include "cci/synfilter.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <map>
#include <unordered_map>

namespace cci {

using nlohmann::ordered_json;

std::string to_string(FilterRule r) {
  switch (r) {
    case FilterRule::TypoFix: return "typo_fix";
    case FilterRule::CaseChange: return "case_change";
    case FilterRule::StopwordChange: return "stopword_change";
    case FilterRule::LexicalChange: return "lexical_change";
    case FilterRule::None: return "none";
  }
  return "none";
}

std::size_t levenshtein(const std::string& a, const std::string& b) {
  const std::size_t n = a.size(), m = b.size();
  std::vector<std::size_t> prev(m + 1), cur(m + 1);
  for (std::size_t j = 0; j <= m; ++j) prev[j] = j;
  for (std::size_t i = 1; i <= n; ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= m; ++j) {
      const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[m];
}

namespace {

std::string lower(const std::string& s) {
  std::string out = s;
  for (char& c : out)
    c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

bool is_vowel(const std::string& w, std::size_t i) {
  const char c = w[i];
  if (c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u') return true;
  // y counts as a vowel after a consonant
  return c == 'y' && i > 0 && !is_vowel(w, i - 1);
}

bool has_vowel(const std::string& w) {
  for (std::size_t i = 0; i < w.size(); ++i)
    if (is_vowel(w, i)) return true;
  return false;
}

// Porter's measure: the number of vowel->consonant transitions.
std::size_t measure(const std::string& w) {
  std::size_t m = 0;
  bool prev_vowel = false;
  for (std::size_t i = 0; i < w.size(); ++i) {
    const bool v = is_vowel(w, i);
    if (prev_vowel && !v) ++m;
    prev_vowel = v;
  }
  return m;
}

bool cvc_end(const std::string& w) {
  const std::size_t n = w.size();
  if (n < 3) return false;
  if (is_vowel(w, n - 1) || !is_vowel(w, n - 2) || is_vowel(w, n - 3))
    return false;
  const char last = w[n - 1];
  return last != 'w' && last != 'x' && last != 'y';
}

// Applied after stripping -ed / -ing.
std::string fix_stem(std::string stem) {
  const std::size_t n = stem.size();
  if (n >= 2 && stem[n - 1] == stem[n - 2] && !is_vowel(stem, n - 1) &&
      stem[n - 1] != 'l' && stem[n - 1] != 's' && stem[n - 1] != 'z') {
    stem.pop_back();
    return stem;
  }
  if (measure(stem) == 1 && cvc_end(stem)) stem.push_back('e');
  return stem;
}

const std::unordered_map<std::string, std::string>& irregular_forms() {
  static const std::unordered_map<std::string, std::string> map = {
      {"is", "be"},      {"are", "be"},    {"am", "be"},     {"was", "be"},
      {"were", "be"},    {"been", "be"},   {"being", "be"},  {"has", "have"},
      {"had", "have"},   {"does", "do"},   {"did", "do"},    {"done", "do"},
      {"went", "go"},    {"gone", "go"},   {"goes", "go"},   {"ran", "run"},
      {"got", "get"},    {"gotten", "get"},{"made", "make"}, {"took", "take"},
      {"taken", "take"}, {"gave", "give"}, {"given", "give"},{"found", "find"},
      {"kept", "keep"},  {"left", "leave"},{"built", "build"},{"sent", "send"},
      {"thought", "think"}, {"brought", "bring"}, {"wrote", "write"},
      {"written", "write"}, {"threw", "throw"}, {"thrown", "throw"},
      {"saw", "see"},    {"seen", "see"},  {"came", "come"},
      {"children", "child"}, {"men", "man"}, {"women", "woman"}};
  return map;
}

bool ends_with(const std::string& w, const char* suffix) {
  const std::size_t len = std::char_traits<char>::length(suffix);
  return w.size() >= len && w.compare(w.size() - len, len, suffix) == 0;
}

const std::array<const char*, 7> kStopwords = {"a",  "an", "the", "in",
                                               "on", "at", "by"};

bool is_stopword(const std::string& lowered) {
  for (const char* s : kStopwords)
    if (lowered == s) return true;
  return false;
}

}  // namespace

std::string lemmatize(const std::string& word) {
  std::string w = lower(word);
  if (auto it = irregular_forms().find(w); it != irregular_forms().end())
    return it->second;

  if (ends_with(w, "ies") && w.size() > 4)
    return w.substr(0, w.size() - 3) + "y";
  if (ends_with(w, "sses")) return w.substr(0, w.size() - 2);
  if (ends_with(w, "es") && w.size() > 3) {
    const std::string stem = w.substr(0, w.size() - 2);
    if (ends_with(stem, "s") || ends_with(stem, "x") || ends_with(stem, "z") ||
        ends_with(stem, "ch") || ends_with(stem, "sh") || ends_with(stem, "o"))
      return stem;
  }
  if (ends_with(w, "s") && !ends_with(w, "ss") && !ends_with(w, "us") &&
      !ends_with(w, "is") && w.size() > 2)
    return w.substr(0, w.size() - 1);
  if (ends_with(w, "eed")) return w.substr(0, w.size() - 1);
  if (ends_with(w, "ied") && w.size() > 4)
    return w.substr(0, w.size() - 3) + "y";
  if (ends_with(w, "ed") && w.size() > 3) {
    std::string stem = w.substr(0, w.size() - 2);
    if (has_vowel(stem)) return fix_stem(std::move(stem));
  }
  if (ends_with(w, "ing") && w.size() > 5) {
    std::string stem = w.substr(0, w.size() - 3);
    if (has_vowel(stem)) return fix_stem(std::move(stem));
  }
  return w;
}

std::unordered_set<std::string> code_vocabulary(const std::string& old_code) {
  std::unordered_set<std::string> vocab;
  const TokenSeq code = tokenize_code(old_code);
  for (const std::string& tok : code.tokens) {
    vocab.insert(lower(tok));
    for (const std::string& sub : split_subtokens(tok)) vocab.insert(sub);
  }
  return vocab;
}

namespace {

struct Substitutions {
  std::vector<std::pair<std::string, std::string>> pairs;
  bool all_substitutions = true;  // no unpaired insert/delete in the diff
};

Substitutions substitution_pairs(const TokenSeq& old_c, const TokenSeq& new_c) {
  Substitutions subs;
  for (const auto& [o, nw] : comment_word_diff(old_c, new_c).changed_pairs) {
    if (o && nw)
      subs.pairs.emplace_back(*o, *nw);
    else
      subs.all_substitutions = false;
  }
  return subs;
}

}  // namespace

bool is_typo_fix(const TokenSeq& old_c, const TokenSeq& new_c,
                 const std::unordered_set<std::string>& old_code_vocab) {
  const Substitutions subs = substitution_pairs(old_c, new_c);
  if (!subs.all_substitutions || subs.pairs.size() != 1) return false;
  const auto& [old_word, new_word] = subs.pairs.front();
  const std::size_t dist = levenshtein(old_word, new_word);
  if (dist < 1 || dist > 3) return false;
  const std::string old_lower = lower(old_word);
  const std::string new_lower = lower(new_word);
  if (old_code_vocab.count(old_lower)) return false;
  // Stopword swaps and plain inflection pairs belong to the dedicated rules.
  if (is_stopword(old_lower) && is_stopword(new_lower)) return false;
  const std::string lemma = lemmatize(old_lower);
  if (lemma == lemmatize(new_lower) &&
      (lemma == old_lower || lemma == new_lower))
    return false;
  return true;
}

bool is_case_change(const TokenSeq& old_c, const TokenSeq& new_c,
                    const std::unordered_set<std::string>& old_code_vocab) {
  const Substitutions subs = substitution_pairs(old_c, new_c);
  if (!subs.all_substitutions || subs.pairs.empty()) return false;
  for (const auto& [old_word, new_word] : subs.pairs) {
    if (old_word == new_word) return false;
    if (lower(old_word) != lower(new_word)) return false;
    if (old_code_vocab.count(lower(old_word))) return false;
  }
  return true;
}

bool is_stopword_change(const TokenSeq& old_c, const TokenSeq& new_c) {
  std::map<std::string, long> delta;
  for (const std::string& w : old_c.tokens) ++delta[lower(w)];
  for (const std::string& w : new_c.tokens) --delta[lower(w)];
  bool any = false;
  for (const auto& [word, count] : delta) {
    if (count == 0) continue;
    if (!is_stopword(word)) return false;
    any = true;
  }
  return any;
}

bool is_lexical_change(const TokenSeq& old_c, const TokenSeq& new_c,
                       const std::unordered_set<std::string>& old_code_vocab) {
  const Substitutions subs = substitution_pairs(old_c, new_c);
  if (!subs.all_substitutions || subs.pairs.empty()) return false;
  for (const auto& [old_word, new_word] : subs.pairs) {
    if (lemmatize(old_word) != lemmatize(new_word)) return false;
    if (old_code_vocab.count(lower(old_word))) return false;
  }
  return true;
}

FilterVerdict classify_syntactic_change(const CciCase& c) {
  FilterVerdict verdict;
  if (!c.new_comment) throw DataError("positive case without new_comment: " + c.id);
  const TokenSeq old_c = tokenize_comment(c.old_comment);
  const TokenSeq new_c = tokenize_comment(*c.new_comment);
  const auto vocab = code_vocabulary(c.old_code);

  FilterRule rule = FilterRule::None;
  if (is_typo_fix(old_c, new_c, vocab))
    rule = FilterRule::TypoFix;
  else if (is_case_change(old_c, new_c, vocab))
    rule = FilterRule::CaseChange;
  else if (is_stopword_change(old_c, new_c))
    rule = FilterRule::StopwordChange;
  else if (is_lexical_change(old_c, new_c, vocab))
    rule = FilterRule::LexicalChange;
  if (rule == FilterRule::None) return verdict;

  verdict.rule = rule;
  for (const auto& [o, nw] : comment_word_diff(old_c, new_c).changed_pairs)
    verdict.evidence.emplace_back(o.value_or(""), nw.value_or(""));
  return verdict;
}

std::pair<Corpus, FilterReport> apply_syntactic_filters(const Corpus& corpus) {
  Corpus out;
  out.source_path = corpus.source_path;
  FilterReport report;
  for (const CciCase& c : corpus.cases) {
    if (!c.is_positive()) {
      out.cases.push_back(c);
      continue;
    }
    FilterVerdict verdict = classify_syntactic_change(c);
    if (verdict.rule == FilterRule::None) {
      out.cases.push_back(c);
      continue;
    }
    switch (verdict.rule) {
      case FilterRule::TypoFix: ++report.typo_fix; break;
      case FilterRule::CaseChange: ++report.case_change; break;
      case FilterRule::StopwordChange: ++report.stopword_change; break;
      case FilterRule::LexicalChange: ++report.lexical_change; break;
      case FilterRule::None: break;
    }
    report.removed.emplace_back(c.id, std::move(verdict));
  }
  return {std::move(out), std::move(report)};
}

ordered_json FilterReport::to_json() const {
  ordered_json j;
  j["schema_version"] = 1;
  j["removed_total"] = total_removed();
  j["by_rule"] = {{"typo_fix", typo_fix},
                  {"case_change", case_change},
                  {"stopword_change", stopword_change},
                  {"lexical_change", lexical_change}};
  auto arr = ordered_json::array();
  for (const auto& [id, verdict] : removed) {
    ordered_json item;
    item["id"] = id;
    item["rule"] = to_string(verdict.rule);
    auto ev = ordered_json::array();
    for (const auto& [o, nw] : verdict.evidence)
      ev.push_back({{"old", o}, {"new", nw}});
    item["evidence"] = ev;
    arr.push_back(item);
  }
  j["removed"] = arr;
  return j;
}

}  // namespace cci
