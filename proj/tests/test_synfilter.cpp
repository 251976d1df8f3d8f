// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "cci/synfilter.hpp"

using namespace cci;

namespace {

// dynamic-programming oracle, written independently of the implementation
std::size_t lev_oracle(const std::string& a, const std::string& b) {
  std::vector<std::vector<std::size_t>> d(a.size() + 1,
                                          std::vector<std::size_t>(b.size() + 1));
  for (std::size_t i = 0; i <= a.size(); ++i) d[i][0] = i;
  for (std::size_t j = 0; j <= b.size(); ++j) d[0][j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i)
    for (std::size_t j = 1; j <= b.size(); ++j)
      d[i][j] = std::min({d[i - 1][j] + 1, d[i][j - 1] + 1,
                          d[i - 1][j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
  return d[a.size()][b.size()];
}

CciCase positive_case(const std::string& id, const std::string& old_comment,
                      const std::string& new_comment,
                      const std::string& old_code,
                      const std::string& new_code) {
  CciCase c;
  c.id = id;
  c.comment_type = CommentType::Summary;
  c.old_comment = old_comment;
  c.new_comment = new_comment;
  c.old_code = old_code;
  c.new_code = new_code;
  c.label = Label::Inconsistent;
  return c;
}

const char* kNeutralOldCode = "public int compute(int value) { return value; }";
const char* kNeutralNewCode =
    "public int compute(int value) { return value + 1; }";

}  // namespace

TEST_CASE("levenshtein basics and oracle agreement") {
  CHECK(levenshtein("interpretting", "interpreting") == 1);
  CHECK(levenshtein("same", "same") == 0);
  CHECK(levenshtein("", "abc") == 3);
  const std::vector<std::string> words = {"",        "a",      "ab",
                                          "abc",     "kitten", "sitting",
                                          "flaw",    "lawn",   "check",
                                          "checks",  "the",    "a"};
  for (const auto& x : words)
    for (const auto& y : words) CHECK(levenshtein(x, y) == lev_oracle(x, y));
}

TEST_CASE("lemmatize suffix rules") {
  CHECK(lemmatize("checks") == "check");
  CHECK(lemmatize("running") == "run");
  CHECK(lemmatize("check") == "check");
  CHECK(lemmatize("copies") == "copy");
  CHECK(lemmatize("boxes") == "box");
  CHECK(lemmatize("matches") == "match");
  CHECK(lemmatize("classes") == "class");
  CHECK(lemmatize("tried") == "try");
  CHECK(lemmatize("agreed") == "agree");
  CHECK(lemmatize("stopped") == "stop");
  CHECK(lemmatize("making") == "make");
  CHECK(lemmatize("interpreting") == "interpret");
  CHECK(lemmatize("interpretting") == "interpret");
  CHECK(lemmatize("was") == "be");
  CHECK(lemmatize("string") == "string");  // no vowel-free stems
  CHECK(lemmatize("Checks") == "check");   // case-insensitive input
}

TEST_CASE("lemmatize is a fixed point on its own output") {
  for (const char* w : {"checks", "running", "copies", "boxes", "tried",
                        "provides", "returns", "added"}) {
    const std::string lemma = lemmatize(w);
    CHECK(lemmatize(lemma) == lemma);
  }
}

TEST_CASE("code_vocabulary holds tokens and subtokens, lowercased") {
  const auto vocab =
      code_vocabulary("DBObject findMetaAnnotations(int maxPostBound)");
  CHECK(vocab.count("dbobject"));
  CHECK(vocab.count("findmetaannotations"));
  CHECK(vocab.count("find"));
  CHECK(vocab.count("meta"));
  CHECK(vocab.count("annotations"));
  CHECK(vocab.count("max"));
  CHECK(vocab.count("post"));
  CHECK(vocab.count("bound"));
}

TEST_CASE("typo rule") {
  const auto vocab = code_vocabulary(kNeutralOldCode);
  const TokenSeq old_c = tokenize_comment(
      "Returns the result of interpretting the object as an instance");
  const TokenSeq new_c = tokenize_comment(
      "Returns the result of interpreting the object as an instance");
  CHECK(is_typo_fix(old_c, new_c, vocab));

  // two words changed
  CHECK_FALSE(is_typo_fix(tokenize_comment("one tyops here and alos there"),
                          tokenize_comment("one typos here and also there"),
                          vocab));
  // old word present in the code vocabulary
  const auto vocab_with_word = code_vocabulary("int interpretting = 0;");
  CHECK_FALSE(is_typo_fix(old_c, new_c, vocab_with_word));
  // distance too large
  CHECK_FALSE(is_typo_fix(tokenize_comment("uses DBObject for storage"),
                          tokenize_comment("uses Document for storage"),
                          vocab));
}

TEST_CASE("typo rule leaves stopword swaps and inflections to their rules") {
  const auto vocab = code_vocabulary(kNeutralOldCode);
  CHECK_FALSE(is_typo_fix(tokenize_comment("Provides a string"),
                          tokenize_comment("Provides the string"), vocab));
  CHECK_FALSE(is_typo_fix(tokenize_comment("Check if allowed"),
                          tokenize_comment("Checks if allowed"), vocab));
  // a real misspelling shares the lemma with its fix but neither word IS the
  // lemma, so the typo rule still owns it
  CHECK(is_typo_fix(tokenize_comment("result of interpretting the object"),
                    tokenize_comment("result of interpreting the object"),
                    vocab));
}

TEST_CASE("case rule") {
  // none of the changed words may appear in this code
  const auto vocab = code_vocabulary("public int compute(int row) { return row; }");
  CHECK(is_case_change(tokenize_comment("Returns The Value"),
                       tokenize_comment("returns the value"), vocab));
  CHECK_FALSE(is_case_change(tokenize_comment("uses DBObject"),
                             tokenize_comment("uses Document"), vocab));
  // casing change of a word that is a code token
  const auto vocab_value = code_vocabulary("int Value = 0;");
  CHECK_FALSE(is_case_change(tokenize_comment("Returns The Value"),
                             tokenize_comment("Returns The value"),
                             vocab_value));
  // identical comments never fire
  CHECK_FALSE(is_case_change(tokenize_comment("Returns the value"),
                             tokenize_comment("Returns the value"), vocab));
}

TEST_CASE("stopword rule") {
  CHECK(is_stopword_change(
      tokenize_comment("Provides a string representation of the property"),
      tokenize_comment("Provides the string representation of the property")));
  CHECK(is_stopword_change(tokenize_comment("runs on the machine"),
                           tokenize_comment("runs the machine")));
  CHECK_FALSE(is_stopword_change(tokenize_comment("runs the machine"),
                                 tokenize_comment("runs the cat machine")));
  CHECK_FALSE(is_stopword_change(tokenize_comment("same words"),
                                 tokenize_comment("same words")));
}

TEST_CASE("lexical rule") {
  const auto vocab = code_vocabulary(kNeutralOldCode);
  CHECK(is_lexical_change(
      tokenize_comment("Check if specified address is allowed"),
      tokenize_comment("Checks if specified address is allowed"), vocab));
  CHECK_FALSE(is_lexical_change(tokenize_comment("returns the list"),
                                tokenize_comment("returns the collection"),
                                vocab));
  CHECK_FALSE(is_lexical_change(tokenize_comment("Checks it"),
                                tokenize_comment("Checks it"), vocab));
  const auto vocab_check = code_vocabulary("boolean check(Address a) {}");
  CHECK_FALSE(is_lexical_change(tokenize_comment("Check the address"),
                                tokenize_comment("Checks the address"),
                                vocab_check));
}

TEST_CASE("filter pipeline removes one case per published example shape") {
  Corpus corpus;
  corpus.cases.push_back(positive_case(
      "typo",
      "Returns the result of interpretting the object as an instance of Dial Region.",
      "Returns the result of interpreting the object as an instance of Dial Region.",
      "public DialRegion asDialRegion(Object value) { return convert(value); }",
      "public DialRegion asDialRegion(Object value) { return convertChecked(value); }"));
  corpus.cases.push_back(positive_case(
      "stopword",
      "Provides a string representation of the property.",
      "Provides the string representation of the property.",
      "public String describe(Property property) { return property.render(); }",
      "public String describe(Property property) { return property.renderNow(); }"));
  corpus.cases.push_back(positive_case(
      "lexical",
      "Check if specified address is allowed by current IPAccess rules.",
      "Checks if specified address is allowed by current IPAccess rules.",
      "public boolean allowed(Address addr) { return rules.match(addr); }",
      "public boolean allowed(Address addr) { return rules.matchAll(addr); }"));
  corpus.cases.push_back(positive_case(
      "case", "returns the raw value.", "Returns The Raw Value.",
      "public Object fetch() { return data; }",
      "public Object fetch() { return data.clone(); }"));

  auto [filtered, report] = apply_syntactic_filters(corpus);
  CHECK(filtered.size() == 0);
  CHECK(report.typo_fix == 1);
  CHECK(report.stopword_change == 1);
  CHECK(report.lexical_change == 1);
  CHECK(report.case_change == 1);
  REQUIRE(report.removed.size() == 4);
  for (const auto& [id, verdict] : report.removed) {
    if (id == "typo") CHECK(verdict.rule == FilterRule::TypoFix);
    if (id == "stopword") CHECK(verdict.rule == FilterRule::StopwordChange);
    if (id == "lexical") CHECK(verdict.rule == FilterRule::LexicalChange);
    if (id == "case") CHECK(verdict.rule == FilterRule::CaseChange);
  }
}

TEST_CASE("a real inconsistency is retained") {
  Corpus corpus;
  corpus.cases.push_back(positive_case(
      "real",
      "Converts the given DBObject into a bean using the given type information.",
      "Converts the given Document into a bean using the given type information.",
      "public Object read(TypeInformation type, DBObject source) { return convert(type, source); }",
      "public Object read(TypeInformation type, Document source) { return convert(type, source); }"));
  auto [filtered, report] = apply_syntactic_filters(corpus);
  CHECK(filtered.size() == 1);
  CHECK(report.total_removed() == 0);
}

TEST_CASE("negatives pass through untouched and filters are idempotent") {
  Corpus corpus;
  CciCase neg = positive_case("neg", "Provides a string.", "Provides the string.",
                              kNeutralOldCode, kNeutralNewCode);
  neg.label = Label::Consistent;
  corpus.cases.push_back(neg);
  CciCase unlabeled = positive_case("none", "Provides a string.",
                                    "Provides the string.", kNeutralOldCode,
                                    kNeutralNewCode);
  unlabeled.label.reset();
  corpus.cases.push_back(unlabeled);
  corpus.cases.push_back(positive_case("drop", "Provides a string.",
                                       "Provides the string.",
                                       kNeutralOldCode, kNeutralNewCode));
  corpus.cases.push_back(positive_case(
      "keep", "Returns widget count.", "Returns the number of gadgets.",
      kNeutralOldCode, kNeutralNewCode));

  auto [filtered, report] = apply_syntactic_filters(corpus);
  CHECK(filtered.size() == 3);
  CHECK(report.total_removed() == 1);
  std::size_t negatives = 0;
  for (const auto& c : filtered.cases)
    if (c.label && *c.label == Label::Consistent) ++negatives;
  CHECK(negatives == 1);

  auto [again, report2] = apply_syntactic_filters(filtered);
  CHECK(again.size() == filtered.size());
  CHECK(report2.total_removed() == 0);
}

TEST_CASE("rules never fire on identical comments") {
  const auto vocab = code_vocabulary(kNeutralOldCode);
  const TokenSeq same = tokenize_comment("Returns the configured value");
  CHECK_FALSE(is_typo_fix(same, same, vocab));
  CHECK_FALSE(is_case_change(same, same, vocab));
  CHECK_FALSE(is_stopword_change(same, same));
  CHECK_FALSE(is_lexical_change(same, same, vocab));
}
