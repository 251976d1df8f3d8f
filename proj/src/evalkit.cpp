// SPDX-License-Identifier: Apache-2.0
#include "cci/evalkit.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

namespace cci {

using nlohmann::ordered_json;

Words metric_tokens(const std::string& text) {
  Words out;
  std::string cur;
  for (unsigned char ch : text) {
    if (std::isalnum(ch)) {
      cur.push_back(static_cast<char>(std::tolower(ch)));
    } else if (!cur.empty()) {
      out.push_back(cur);
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

// ---------------------------------------------------------------- Porter ---

namespace {

bool pt_consonant(const std::string& w, std::size_t i) {
  switch (w[i]) {
    case 'a': case 'e': case 'i': case 'o': case 'u':
      return false;
    case 'y':
      return i == 0 ? true : !pt_consonant(w, i - 1);
    default:
      return true;
  }
}

// number of VC sequences in [C](VC)^m[V]
std::size_t pt_measure(const std::string& w) {
  std::size_t m = 0;
  bool prev_vowel = false;
  for (std::size_t i = 0; i < w.size(); ++i) {
    const bool vowel = !pt_consonant(w, i);
    if (prev_vowel && !vowel) ++m;
    prev_vowel = vowel;
  }
  return m;
}

bool pt_has_vowel(const std::string& w) {
  for (std::size_t i = 0; i < w.size(); ++i)
    if (!pt_consonant(w, i)) return true;
  return false;
}

bool pt_double_consonant(const std::string& w) {
  const std::size_t n = w.size();
  return n >= 2 && w[n - 1] == w[n - 2] && pt_consonant(w, n - 1);
}

// cvc where the final c is not w, x or y
bool pt_cvc(const std::string& w) {
  const std::size_t n = w.size();
  if (n < 3) return false;
  if (!pt_consonant(w, n - 3) || pt_consonant(w, n - 2) ||
      !pt_consonant(w, n - 1))
    return false;
  const char c = w[n - 1];
  return c != 'w' && c != 'x' && c != 'y';
}

bool pt_ends(const std::string& w, const char* s) {
  const std::size_t len = std::char_traits<char>::length(s);
  return w.size() >= len && w.compare(w.size() - len, len, s) == 0;
}

// replace suffix when the measure of the remaining stem satisfies min_m
bool pt_replace(std::string& w, const char* suffix, const char* repl,
                std::size_t min_m) {
  if (!pt_ends(w, suffix)) return false;
  const std::size_t len = std::char_traits<char>::length(suffix);
  const std::string stem = w.substr(0, w.size() - len);
  if (pt_measure(stem) < min_m) return true;  // suffix matched, rule blocked
  w = stem + repl;
  return true;
}

}  // namespace

std::string porter_stem(const std::string& word) {
  std::string w;
  w.reserve(word.size());
  for (unsigned char ch : word)
    w.push_back(static_cast<char>(std::tolower(ch)));
  if (w.size() <= 2) return w;

  // step 1a
  if (pt_ends(w, "sses")) {
    w.resize(w.size() - 2);
  } else if (pt_ends(w, "ies")) {
    w.resize(w.size() - 2);
  } else if (!pt_ends(w, "ss") && pt_ends(w, "s")) {
    w.pop_back();
  }

  // step 1b
  bool cleanup = false;
  if (pt_ends(w, "eed")) {
    if (pt_measure(w.substr(0, w.size() - 3)) > 0) w.pop_back();
  } else if (pt_ends(w, "ed") && pt_has_vowel(w.substr(0, w.size() - 2))) {
    w.resize(w.size() - 2);
    cleanup = true;
  } else if (pt_ends(w, "ing") && pt_has_vowel(w.substr(0, w.size() - 3))) {
    w.resize(w.size() - 3);
    cleanup = true;
  }
  if (cleanup) {
    if (pt_ends(w, "at") || pt_ends(w, "bl") || pt_ends(w, "iz")) {
      w.push_back('e');
    } else if (pt_double_consonant(w) && !pt_ends(w, "l") && !pt_ends(w, "s") &&
               !pt_ends(w, "z")) {
      w.pop_back();
    } else if (pt_measure(w) == 1 && pt_cvc(w)) {
      w.push_back('e');
    }
  }

  // step 1c
  if (pt_ends(w, "y") && pt_has_vowel(w.substr(0, w.size() - 1)))
    w.back() = 'i';

  // step 2
  static const std::pair<const char*, const char*> step2[] = {
      {"ational", "ate"}, {"tional", "tion"}, {"enci", "ence"},
      {"anci", "ance"},   {"izer", "ize"},    {"abli", "able"},
      {"alli", "al"},     {"entli", "ent"},   {"eli", "e"},
      {"ousli", "ous"},   {"ization", "ize"}, {"ation", "ate"},
      {"ator", "ate"},    {"alism", "al"},    {"iveness", "ive"},
      {"fulness", "ful"}, {"ousness", "ous"}, {"aliti", "al"},
      {"iviti", "ive"},   {"biliti", "ble"},  {"logi", "log"}};
  for (const auto& [suf, rep] : step2)
    if (pt_replace(w, suf, rep, 1)) break;

  // step 3
  static const std::pair<const char*, const char*> step3[] = {
      {"icate", "ic"}, {"ative", ""}, {"alize", "al"}, {"iciti", "ic"},
      {"ical", "ic"},  {"ful", ""},   {"ness", ""}};
  for (const auto& [suf, rep] : step3)
    if (pt_replace(w, suf, rep, 1)) break;

  // step 4
  static const char* step4[] = {"al",  "ance", "ence", "er",   "ic",  "able",
                                "ible","ant",  "ement","ment", "ent", "ion",
                                "ou",  "ism",  "ate",  "iti",  "ous", "ive",
                                "ize"};
  for (const char* suf : step4) {
    if (!pt_ends(w, suf)) continue;
    const std::size_t len = std::char_traits<char>::length(suf);
    const std::string stem = w.substr(0, w.size() - len);
    if (pt_measure(stem) > 1) {
      if (std::string(suf) == "ion" && !pt_ends(stem, "s") &&
          !pt_ends(stem, "t"))
        break;
      w = stem;
    }
    break;
  }

  // step 5a
  if (pt_ends(w, "e")) {
    const std::string stem = w.substr(0, w.size() - 1);
    const std::size_t m = pt_measure(stem);
    if (m > 1 || (m == 1 && !pt_cvc(stem))) w.pop_back();
  }
  // step 5b
  if (pt_measure(w) > 1 && pt_double_consonant(w) && pt_ends(w, "l"))
    w.pop_back();

  return w;
}

// --------------------------------------------------------------- n-grams ---

namespace {

using Ngram = std::string;
using NgramCounts = std::map<Ngram, std::size_t>;

Ngram make_ngram(const Words& words, std::size_t start, std::size_t n) {
  Ngram g;
  for (std::size_t k = 0; k < n; ++k) {
    if (k) g.push_back('\x1f');
    g += words[start + k];
  }
  return g;
}

NgramCounts ngram_counts(const Words& words, std::size_t n) {
  NgramCounts counts;
  if (words.size() < n) return counts;
  for (std::size_t i = 0; i + n <= words.size(); ++i)
    ++counts[make_ngram(words, i, n)];
  return counts;
}

std::set<Ngram> ngram_set(const Words& words, std::size_t n) {
  std::set<Ngram> s;
  if (words.size() < n) return s;
  for (std::size_t i = 0; i + n <= words.size(); ++i)
    s.insert(make_ngram(words, i, n));
  return s;
}

std::size_t clipped_matches(const NgramCounts& cand, const NgramCounts& ref) {
  std::size_t total = 0;
  for (const auto& [g, c] : cand) {
    auto it = ref.find(g);
    if (it != ref.end()) total += std::min(c, it->second);
  }
  return total;
}

double brevity_penalty(std::size_t cand_len, std::size_t ref_len) {
  if (cand_len >= ref_len) return 1.0;
  return std::exp(1.0 - static_cast<double>(ref_len) /
                            static_cast<double>(cand_len));
}

// geometric mean of 4 precisions given as (numerator, denominator) pairs,
// zero-match smoothing (+1 to both) for n >= 2
double ngram_geometric_score(
    const std::array<std::pair<double, double>, 4>& fractions) {
  double product = 1.0;
  for (std::size_t n = 0; n < 4; ++n) {
    double num = fractions[n].first;
    double den = fractions[n].second;
    if (n >= 1 && num <= 0.0) {
      num += 1.0;
      den += 1.0;
    }
    if (num <= 0.0 || den <= 0.0) return 0.0;
    product *= num / den;
  }
  return std::pow(product, 0.25);
}

}  // namespace

double bleu4(const Words& candidate, const Words& reference) {
  if (candidate.empty()) return 0.0;
  std::array<std::pair<double, double>, 4> fractions;
  for (std::size_t n = 1; n <= 4; ++n) {
    const NgramCounts cand = ngram_counts(candidate, n);
    const NgramCounts ref = ngram_counts(reference, n);
    const double num = static_cast<double>(clipped_matches(cand, ref));
    const double den =
        candidate.size() >= n ? static_cast<double>(candidate.size() - n + 1)
                              : 0.0;
    fractions[n - 1] = {num, den};
  }
  return brevity_penalty(candidate.size(), reference.size()) *
         ngram_geometric_score(fractions);
}

double gleu(const Words& source, const Words& candidate,
            const Words& reference) {
  if (candidate.empty()) return 0.0;
  std::array<std::pair<double, double>, 4> fractions;
  for (std::size_t n = 1; n <= 4; ++n) {
    const NgramCounts cand = ngram_counts(candidate, n);
    const NgramCounts ref = ngram_counts(reference, n);
    const NgramCounts src = ngram_counts(source, n);
    const std::set<Ngram> ref_set = ngram_set(reference, n);

    const std::size_t matches = clipped_matches(cand, ref);
    std::size_t src_only_penalty = 0;
    for (const auto& [g, c] : cand) {
      if (ref_set.count(g)) continue;
      auto it = src.find(g);
      if (it != src.end()) src_only_penalty += std::min(c, it->second);
    }
    const double num =
        matches > src_only_penalty
            ? static_cast<double>(matches - src_only_penalty)
            : 0.0;
    const double den =
        candidate.size() >= n ? static_cast<double>(candidate.size() - n + 1)
                              : 0.0;
    fractions[n - 1] = {num, den};
  }
  return brevity_penalty(candidate.size(), reference.size()) *
         ngram_geometric_score(fractions);
}

// ---------------------------------------------------------------- METEOR ---

namespace {

// Align unmatched candidate positions to unmatched reference positions where
// key(cand[i]) == key(ref[j]), greedily in order (leftmost to leftmost).
template <typename KeyFn>
void align_stage(const Words& cand, const Words& ref,
                 std::vector<int>& cand_to_ref, std::vector<bool>& ref_used,
                 KeyFn key) {
  std::map<std::string, std::vector<std::size_t>> free_refs;
  for (std::size_t j = 0; j < ref.size(); ++j)
    if (!ref_used[j]) free_refs[key(ref[j])].push_back(j);
  for (auto& [k, v] : free_refs) std::reverse(v.begin(), v.end());

  for (std::size_t i = 0; i < cand.size(); ++i) {
    if (cand_to_ref[i] >= 0) continue;
    auto it = free_refs.find(key(cand[i]));
    if (it == free_refs.end() || it->second.empty()) continue;
    const std::size_t j = it->second.back();
    it->second.pop_back();
    cand_to_ref[i] = static_cast<int>(j);
    ref_used[j] = true;
  }
}

}  // namespace

double meteor(const Words& candidate, const Words& reference) {
  if (candidate.empty() || reference.empty()) return 0.0;

  std::vector<int> cand_to_ref(candidate.size(), -1);
  std::vector<bool> ref_used(reference.size(), false);
  align_stage(candidate, reference, cand_to_ref, ref_used,
              [](const std::string& w) { return w; });
  align_stage(candidate, reference, cand_to_ref, ref_used,
              [](const std::string& w) { return porter_stem(w); });

  std::size_t m = 0;
  for (int j : cand_to_ref)
    if (j >= 0) ++m;
  if (m == 0) return 0.0;

  const double p = static_cast<double>(m) / candidate.size();
  const double r = static_cast<double>(m) / reference.size();
  const double f_mean = 10.0 * p * r / (r + 9.0 * p);

  // chunks: maximal runs of adjacent pairs in both sequences
  std::size_t chunks = 0;
  int prev_i = -10, prev_j = -10;
  for (std::size_t i = 0; i < cand_to_ref.size(); ++i) {
    if (cand_to_ref[i] < 0) continue;
    if (static_cast<int>(i) != prev_i + 1 || cand_to_ref[i] != prev_j + 1)
      ++chunks;
    prev_i = static_cast<int>(i);
    prev_j = cand_to_ref[i];
  }
  const double frag = static_cast<double>(chunks) / static_cast<double>(m);
  const double penalty = 0.5 * frag * frag * frag;
  return f_mean * (1.0 - penalty);
}

// ------------------------------------------------------------------ SARI ---

namespace {

std::set<Ngram> set_minus(const std::set<Ngram>& a, const std::set<Ngram>& b) {
  std::set<Ngram> out;
  for (const auto& g : a)
    if (!b.count(g)) out.insert(g);
  return out;
}

std::set<Ngram> set_and(const std::set<Ngram>& a, const std::set<Ngram>& b) {
  std::set<Ngram> out;
  for (const auto& g : a)
    if (b.count(g)) out.insert(g);
  return out;
}

double op_score(std::size_t correct, std::size_t predicted, std::size_t gold,
                bool f1) {
  if (gold == 0 && predicted == 0) return 1.0;
  if (gold == 0 || predicted == 0) return 0.0;
  const double prec = static_cast<double>(correct) / predicted;
  if (!f1) return prec;
  const double rec = static_cast<double>(correct) / gold;
  if (prec + rec <= 0.0) return 0.0;
  return 2.0 * prec * rec / (prec + rec);
}

}  // namespace

double sari(const Words& source, const Words& candidate,
            const Words& reference) {
  if (reference.empty())
    throw std::invalid_argument("sari: empty reference");

  double total = 0.0;
  for (std::size_t n = 1; n <= 4; ++n) {
    const std::set<Ngram> s = ngram_set(source, n);
    const std::set<Ngram> c = ngram_set(candidate, n);
    const std::set<Ngram> r = ngram_set(reference, n);

    const auto add_gold = set_minus(r, s);
    const auto add_pred = set_minus(c, s);
    const auto add_correct = set_and(add_pred, r);
    const double add =
        op_score(add_correct.size(), add_pred.size(), add_gold.size(), true);

    const auto keep_gold = set_and(s, r);
    const auto keep_pred = set_and(s, c);
    const auto keep_correct = set_and(keep_pred, r);
    const double keep = op_score(keep_correct.size(), keep_pred.size(),
                                 keep_gold.size(), true);

    const auto del_pred = set_minus(s, c);
    const auto del_gold = set_minus(s, r);
    const auto del_correct = set_and(del_pred, del_gold);
    const double del =
        op_score(del_correct.size(), del_pred.size(), del_gold.size(), false);

    total += (add + keep + del) / 3.0;
  }
  return total / 4.0;
}

// -------------------------------------------------------- classification ---

ClassificationMetrics classification_metrics(const std::vector<int>& predicted,
                                             const std::vector<int>& labels) {
  if (predicted.size() != labels.size())
    throw std::invalid_argument("classification_metrics: length mismatch");
  if (predicted.empty())
    throw std::invalid_argument("classification_metrics: empty input");

  ClassificationMetrics out;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const bool pred = predicted[i] != 0;
    const bool gold = labels[i] != 0;
    if (pred && gold) ++out.confusion.tp;
    else if (pred && !gold) ++out.confusion.fp;
    else if (!pred && gold) ++out.confusion.fn;
    else ++out.confusion.tn;
  }
  const auto& cf = out.confusion;
  const double n = static_cast<double>(predicted.size());
  out.accuracy = (cf.tp + cf.tn) / n;
  if (cf.tp + cf.fp == 0) {
    out.precision_zero_division = true;
  } else {
    out.precision = static_cast<double>(cf.tp) / (cf.tp + cf.fp);
  }
  if (cf.tp + cf.fn == 0) {
    out.recall_zero_division = true;
  } else {
    out.recall = static_cast<double>(cf.tp) / (cf.tp + cf.fn);
  }
  if (out.precision + out.recall > 0)
    out.f1 = 2.0 * out.precision * out.recall / (out.precision + out.recall);
  return out;
}

double success_rate(const std::vector<bool>& judgments) {
  if (judgments.empty())
    throw std::invalid_argument("success_rate: empty input");
  std::size_t ok = 0;
  for (bool b : judgments)
    if (b) ++ok;
  return static_cast<double>(ok) / judgments.size();
}

// ---------------------------------------------------------------- report ---

std::string format_score(double zero_to_one_mean) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(2);
  os << zero_to_one_mean * 100.0;
  return os.str();
}

TextMetricsReport score_pairs(const std::vector<ScoredPair>& pairs) {
  TextMetricsReport report;
  if (pairs.empty()) return report;
  double sb = 0, sm = 0, ss = 0, sg = 0;
  for (const ScoredPair& p : pairs) {
    const double b = bleu4(p.candidate, p.reference);
    const double m = meteor(p.candidate, p.reference);
    const double s = sari(p.source, p.candidate, p.reference);
    const double g = gleu(p.source, p.candidate, p.reference);
    sb += b; sm += m; ss += s; sg += g;
    ordered_json row;
    row["case_id"] = p.case_id;
    row["bleu4"] = b;
    row["meteor"] = m;
    row["sari"] = s;
    row["gleu"] = g;
    report.per_case.push_back(std::move(row));
  }
  const double n = static_cast<double>(pairs.size());
  report.bleu4 = sb / n * 100.0;
  report.meteor = sm / n * 100.0;
  report.sari = ss / n * 100.0;
  report.gleu = sg / n * 100.0;
  return report;
}

ordered_json TextMetricsReport::to_json() const {
  ordered_json j;
  j["schema_version"] = 1;
  j["bleu4"] = bleu4;
  j["meteor"] = meteor;
  j["sari"] = sari;
  j["gleu"] = gleu;
  j["per_case"] = per_case;
  return j;
}

std::string TextMetricsReport::to_csv() const {
  std::ostringstream os;
  os << "case_id,bleu4,meteor,sari,gleu\n";
  for (const auto& row : per_case) {
    os << row.at("case_id").get<std::string>() << ','
       << row.at("bleu4").get<double>() << ',' << row.at("meteor").get<double>()
       << ',' << row.at("sari").get<double>() << ','
       << row.at("gleu").get<double>() << '\n';
  }
  return os.str();
}

ordered_json ClassificationMetrics::to_json() const {
  ordered_json j;
  j["schema_version"] = 1;
  j["accuracy"] = accuracy;
  j["precision"] = precision;
  j["recall"] = recall;
  j["f1"] = f1;
  j["confusion"] = {{"tp", confusion.tp},
                    {"fp", confusion.fp},
                    {"fn", confusion.fn},
                    {"tn", confusion.tn}};
  if (precision_zero_division) j["precision_zero_division"] = true;
  if (recall_zero_division) j["recall_zero_division"] = true;
  return j;
}

}  // namespace cci
