// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "cci/evalkit.hpp"
#include "metric_oracles.hpp"
#include "cci/rng.hpp"

using namespace cci;
using doctest::Approx;

namespace {

Words words(std::initializer_list<const char*> list) {
  Words w;
  for (const char* s : list) w.push_back(s);
  return w;
}

// brute-force scoring oracles shared with the acceptance suite
inline double oracle_bleu(const Words& c, const Words& r) {
  return cci::oracles::bleu(c, r);
}
inline double oracle_gleu(const Words& s, const Words& c, const Words& r) {
  return cci::oracles::gleu(s, c, r);
}
inline double oracle_sari(const Words& s, const Words& c, const Words& r) {
  return cci::oracles::sari(s, c, r);
}

Words random_words(Rng& rng, std::size_t max_len, std::size_t alphabet,
                   const char* prefix) {
  Words w;
  const std::size_t len = rng.uniform_index(max_len + 1);
  for (std::size_t i = 0; i < len; ++i)
    w.push_back(prefix + std::to_string(rng.uniform_index(alphabet)));
  return w;
}

}  // namespace

TEST_CASE("metric_tokens") {
  CHECK(metric_tokens("Returns the Value.") ==
        words({"returns", "the", "value"}));
  CHECK(metric_tokens("@param x, the X!") == words({"param", "x", "the", "x"}));
  CHECK(metric_tokens("").empty());
}

TEST_CASE("porter stem vectors") {
  const std::pair<const char*, const char*> vectors[] = {
      {"caresses", "caress"},   {"ponies", "poni"},
      {"ties", "ti"},           {"cats", "cat"},
      {"agreed", "agre"},       {"feed", "feed"},
      {"plastered", "plaster"}, {"motoring", "motor"},
      {"sing", "sing"},         {"hopping", "hop"},
      {"falling", "fall"},      {"sized", "size"},
      {"happy", "happi"},       {"relational", "relat"},
      {"conditional", "condit"}, {"effective", "effect"},
      {"goodness", "good"},     {"hopefulness", "hope"},
      {"checks", "check"},      {"check", "check"}};
  for (const auto& [word, stem] : vectors) CHECK(porter_stem(word) == stem);
}

TEST_CASE("bleu4 endpoints") {
  const Words same = words({"returns", "the", "updated", "value"});
  CHECK(bleu4(same, same) == 1.0);
  CHECK(bleu4({}, same) == 0.0);
  CHECK(bleu4(words({"alpha", "beta"}), words({"gamma", "delta"})) == 0.0);
}

TEST_CASE("bleu4 frozen value: short candidate against longer reference") {
  // p1 = p2 = 1, p3/p4 smoothed to 1, BP = exp(1 - 3/2)
  const double got = bleu4(words({"the", "cat"}), words({"the", "cat", "sat"}));
  CHECK(got == Approx(std::exp(-0.5)).epsilon(1e-12));
  CHECK(got == Approx(oracle_bleu(words({"the", "cat"}),
                                  words({"the", "cat", "sat"})))
                   .epsilon(1e-12));
}

TEST_CASE("bleu4 matches the counting oracle on random pairs") {
  Rng rng(42);
  for (int iter = 0; iter < 500; ++iter) {
    const Words cand = random_words(rng, 10, 5, "w");
    const Words ref = random_words(rng, 10, 5, "w");
    CHECK(bleu4(cand, ref) == Approx(oracle_bleu(cand, ref)).epsilon(1e-9));
  }
}

TEST_CASE("meteor endpoints and frozen values") {
  CHECK(meteor(words({"alpha", "beta"}), words({"gamma", "delta"})) == 0.0);
  const Words same = words({"the", "cat", "sat", "on", "mat"});
  // single chunk, penalty 0.5 * (1/5)^3
  CHECK(meteor(same, same) == Approx(1.0 - 0.5 / 125.0).epsilon(1e-12));
  // stem stage: checks ~ check; one chunk of three
  CHECK(meteor(words({"checks", "the", "address"}),
               words({"check", "the", "address"})) ==
        Approx(1.0 - 0.5 / 27.0).epsilon(1e-12));
  // reordered halves: two chunks over five matches
  CHECK(meteor(words({"the", "cat", "sat", "on", "mat"}),
               words({"on", "mat", "the", "cat", "sat"})) ==
        Approx(1.0 - 0.5 * 0.4 * 0.4 * 0.4).epsilon(1e-12));
}

TEST_CASE("meteor weights recall 9:1 in the harmonic mean") {
  // cand [a], ref [a b]: P=1, R=0.5, F=10PR/(R+9P)=10*0.5/9.5; penalty 0.5
  const double got = meteor(words({"a"}), words({"a", "b"}));
  CHECK(got == Approx((10.0 * 0.5 / 9.5) * 0.5).epsilon(1e-12));
}

TEST_CASE("sari fixed points and frozen values") {
  const Words same = words({"keeps", "all", "words", "here"});
  CHECK(sari(same, same, same) == 1.0);
  CHECK(sari(words({"a", "b"}), words({"a", "c"}), words({"a", "c"})) == 1.0);
  // candidate == source != reference: nothing added
  const Words src = words({"a", "b", "c"});
  const Words ref2 = words({"a", "d"});
  const double unchanged = sari(src, src, ref2);
  CHECK(unchanged < 1.0);
  CHECK(unchanged == Approx(oracle_sari(src, src, ref2)).epsilon(1e-12));
  // fully hand-computed asymmetric triple
  CHECK(sari(words({"a", "b", "c"}), words({"a", "b"}), words({"a", "d"})) ==
        Approx(13.0 / 18.0).epsilon(1e-12));
  CHECK_THROWS(sari(src, src, {}));
}

TEST_CASE("sari matches the set-enumeration oracle on random triples") {
  Rng rng(7);
  for (int iter = 0; iter < 500; ++iter) {
    const Words src = random_words(rng, 8, 4, "w");
    const Words cand = random_words(rng, 8, 4, "w");
    Words ref = random_words(rng, 8, 4, "w");
    if (ref.empty()) ref.push_back("w0");
    CHECK(sari(src, cand, ref) ==
          Approx(oracle_sari(src, cand, ref)).epsilon(1e-9));
  }
}

TEST_CASE("gleu endpoints") {
  const Words same = words({"returns", "the", "updated", "value"});
  CHECK(gleu(words({"old", "comment", "text", "here"}), same, same) == 1.0);
  // candidate == source with no reference overlap -> full penalty
  const Words src = words({"alpha", "beta"});
  CHECK(gleu(src, src, words({"gamma", "delta"})) == 0.0);
  CHECK(gleu(src, {}, words({"gamma"})) == 0.0);
}

TEST_CASE("gleu matches the counting oracle on random triples") {
  Rng rng(21);
  for (int iter = 0; iter < 500; ++iter) {
    const Words src = random_words(rng, 8, 4, "w");
    const Words cand = random_words(rng, 8, 4, "w");
    const Words ref = random_words(rng, 8, 4, "w");
    CHECK(gleu(src, cand, ref) ==
          Approx(oracle_gleu(src, cand, ref)).epsilon(1e-9));
  }
}

TEST_CASE("property: bleu4 == gleu when the source is n-gram disjoint") {
  Rng rng(33);
  for (int iter = 0; iter < 300; ++iter) {
    const Words src = random_words(rng, 8, 4, "s");  // disjoint vocabulary
    const Words cand = random_words(rng, 8, 4, "w");
    const Words ref = random_words(rng, 8, 4, "w");
    CHECK(gleu(src, cand, ref) == Approx(bleu4(cand, ref)).epsilon(1e-12));
  }
}

TEST_CASE("metrics stay within [0,1]") {
  Rng rng(55);
  for (int iter = 0; iter < 300; ++iter) {
    const Words src = random_words(rng, 8, 3, "w");
    const Words cand = random_words(rng, 8, 3, "w");
    Words ref = random_words(rng, 8, 3, "w");
    if (ref.empty()) ref.push_back("w0");
    for (double v : {bleu4(cand, ref), meteor(cand, ref),
                     sari(src, cand, ref), gleu(src, cand, ref)}) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
  }
}

TEST_CASE("classification metrics") {
  {
    const auto m = classification_metrics({1, 0, 1, 0}, {1, 0, 1, 0});
    CHECK(m.accuracy == 1.0);
    CHECK(m.precision == 1.0);
    CHECK(m.recall == 1.0);
    CHECK(m.f1 == 1.0);
  }
  {
    // TP=2, FP=1, FN=1, TN=2
    const auto m =
        classification_metrics({1, 1, 1, 0, 0, 0}, {1, 1, 0, 1, 0, 0});
    CHECK(m.precision == Approx(2.0 / 3.0));
    CHECK(m.recall == Approx(2.0 / 3.0));
    CHECK(m.f1 == Approx(2.0 / 3.0));
    CHECK(m.accuracy == Approx(2.0 / 3.0));
    CHECK(m.confusion.tp == 2);
    CHECK(m.confusion.fp == 1);
    CHECK(m.confusion.fn == 1);
    CHECK(m.confusion.tn == 2);
  }
  {
    const auto m = classification_metrics({0, 0}, {1, 0});
    CHECK(m.precision == 0.0);
    CHECK(m.precision_zero_division);
    CHECK(m.recall == 0.0);
  }
  CHECK_THROWS(classification_metrics({1}, {1, 0}));
  CHECK_THROWS(classification_metrics({}, {}));
}

TEST_CASE("always-consistent predictions give recall 0 on a balanced corpus") {
  const auto m = classification_metrics({0, 0, 0, 0}, {1, 1, 0, 0});
  CHECK(m.recall == 0.0);
  CHECK(m.recall_zero_division == false);
}

TEST_CASE("success rate") {
  CHECK(success_rate({true, true, false}) == Approx(2.0 / 3.0));
  CHECK(success_rate({true, true}) == 1.0);
  std::vector<bool> judged(150, false);
  for (int i = 0; i < 98; ++i) judged[i] = true;
  CHECK(success_rate(judged) == Approx(0.6533).epsilon(1e-4));
  CHECK_THROWS(success_rate({}));
}

TEST_CASE("corpus scores are means x100 with 2-decimal rendering") {
  std::vector<ScoredPair> pairs(2);
  pairs[0].case_id = "a";
  pairs[0].source = words({"the", "old", "words", "here"});
  pairs[0].candidate = words({"the", "new", "words", "here"});
  pairs[0].reference = words({"the", "new", "words", "here"});
  pairs[1].case_id = "b";
  pairs[1].source = words({"unrelated", "source", "words", "here"});
  pairs[1].candidate = words({"alpha", "beta", "gamma", "delta"});
  pairs[1].reference = words({"other", "words", "entirely", "now"});
  const TextMetricsReport report = score_pairs(pairs);
  CHECK(report.bleu4 == Approx((1.0 + 0.0) / 2 * 100));
  CHECK(report.per_case.size() == 2);
  CHECK(format_score(report.bleu4 / 100.0) == "50.00");
  CHECK(format_score(1.0) == "100.00");
  const std::string csv = report.to_csv();
  CHECK(csv.find("case_id,bleu4,meteor,sari,gleu") == 0);
  CHECK(csv.find("\na,") != std::string::npos);
}

TEST_CASE("permuting the pair list permutes per-case scores identically") {
  Rng rng(3);
  std::vector<ScoredPair> pairs(3);
  for (int i = 0; i < 3; ++i) {
    pairs[i].case_id = std::to_string(i);
    pairs[i].source = words({"s0", "s1", "s2"});
    pairs[i].candidate = random_words(rng, 6, 3, "w");
    pairs[i].reference = words({"w0", "w1"});
  }
  const auto report = score_pairs(pairs);
  std::swap(pairs[0], pairs[2]);
  const auto swapped = score_pairs(pairs);
  CHECK(report.bleu4 == Approx(swapped.bleu4));
  CHECK(report.per_case[0].at("gleu") == swapped.per_case[2].at("gleu"));
}
