// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include <json.hpp>

namespace cci {

using Words = std::vector<std::string>;

// (source, candidate, reference) word triple for one fixed comment.
struct ScoredPair {
  std::string case_id;
  Words source;     // old comment
  Words candidate;  // predicted comment
  Words reference;  // updated comment (ground truth)
};

// Lowercase, split on whitespace and punctuation. Shared tokenization for
// every text metric so scores are comparable across stages.
Words metric_tokens(const std::string& text);

// Porter stemming (1980 algorithm), used by the METEOR stem stage.
std::string porter_stem(const std::string& word);

// Modified n-gram precision (n=1..4, clipped), geometric mean, brevity
// penalty; zero-match smoothing (+1/+1) for n >= 2.
double bleu4(const Words& candidate, const Words& reference);

// Exact-then-stem unigram alignment, F_mean = 10PR/(R+9P), fragmentation
// penalty 0.5*(chunks/m)^3.
double meteor(const Words& candidate, const Words& reference);

// Mean over n=1..4 of (F1_add + F1_keep + P_del)/3 against n-gram sets.
double sari(const Words& source, const Words& candidate, const Words& reference);

// BLEU-style score where n-grams the candidate shares with the source but
// not the reference subtract from the match count (floored at zero).
double gleu(const Words& source, const Words& candidate, const Words& reference);

struct Confusion {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
};

struct ClassificationMetrics {
  double accuracy = 0, precision = 0, recall = 0, f1 = 0;
  Confusion confusion;
  bool precision_zero_division = false;
  bool recall_zero_division = false;
  nlohmann::ordered_json to_json() const;
};

// Positive class = inconsistent (label 1).
ClassificationMetrics classification_metrics(const std::vector<int>& predicted,
                                             const std::vector<int>& labels);

double success_rate(const std::vector<bool>& judgments);

struct TextMetricsReport {
  double bleu4 = 0, meteor = 0, sari = 0, gleu = 0;  // corpus scores, 0..100
  std::vector<nlohmann::ordered_json> per_case;
  nlohmann::ordered_json to_json() const;
  std::string to_csv() const;
};

// Corpus score = mean of per-case scores x 100, rendered with 2 decimals.
TextMetricsReport score_pairs(const std::vector<ScoredPair>& pairs);

std::string format_score(double zero_to_one_mean);

}  // namespace cci
