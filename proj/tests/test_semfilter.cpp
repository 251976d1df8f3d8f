// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "cci/semfilter.hpp"

using namespace cci;

namespace {

CciCase make_case(const std::string& id, std::optional<Label> label,
                  const std::string& marker = "") {
  CciCase c;
  c.id = id;
  c.comment_type = CommentType::Summary;
  c.old_comment = "Returns the cached value. " + marker;
  c.new_comment = "Returns the recomputed value.";
  c.old_code = "int get() { return cache; }";
  c.new_code = "int get() { return recompute(); }";
  c.label = label;
  return c;
}

ShotSet make_shots() {
  ShotSet shots;
  shots[0].example = make_case("shot-consistent", Label::Consistent);
  shots[0].inconsistent = false;
  shots[1].example = make_case("shot-return", Label::Inconsistent);
  shots[1].inconsistent = true;
  shots[1].kind = InconsistencyKind::ReturnType;
  shots[2].example = make_case("shot-signature", Label::Inconsistent);
  shots[2].inconsistent = true;
  shots[2].kind = InconsistencyKind::MethodSignature;
  shots[3].example = make_case("shot-logic", Label::Inconsistent);
  shots[3].inconsistent = true;
  shots[3].kind = InconsistencyKind::ApplicationLogic;
  return shots;
}

std::array<LlmEndpoint, 3> make_voters() {
  std::array<LlmEndpoint, 3> voters;
  for (int i = 0; i < 3; ++i) {
    voters[i].name = "voter" + std::to_string(i + 1);
    voters[i].base_url = "stub:";
    voters[i].model_id = "m" + std::to_string(i + 1);
    voters[i].backoff_base_s = 0.0;
  }
  return voters;
}

}  // namespace

TEST_CASE("prompt contains the four shots, the target, and the instruction") {
  const ShotSet shots = make_shots();
  const CciCase target = make_case("t", Label::Inconsistent, "target-marker");
  const auto messages = build_vote_prompt(target, shots);
  REQUIRE(messages.size() == 2);
  CHECK(messages[0].role == Role::System);
  const std::string& user = messages[1].content;
  CHECK(user.find("Example 1") != std::string::npos);
  CHECK(user.find("Example 4") != std::string::npos);
  CHECK(user.find("return_type") != std::string::npos);
  CHECK(user.find("method_signature") != std::string::npos);
  CHECK(user.find("application_logic") != std::string::npos);
  CHECK(user.find("target-marker") != std::string::npos);
  // four shot verdict lines: one CONSISTENT + three INCONSISTENT answers
  std::size_t answers = 0, pos = 0;
  while ((pos = user.find("Answer: ", pos)) != std::string::npos) {
    ++answers;
    pos += 8;
  }
  CHECK(answers == 4);
  const std::string instruction =
      "Answer with exactly one word, INCONSISTENT or CONSISTENT.";
  CHECK(user.rfind(instruction) == user.size() - instruction.size());
}

TEST_CASE("shot validation") {
  ShotSet shots = make_shots();
  shots[2].kind = InconsistencyKind::ReturnType;  // duplicate kind
  CHECK_THROWS_AS(validate_shots(shots), DataError);
  CHECK_THROWS_AS(build_vote_prompt(make_case("t", Label::Inconsistent), shots),
                  DataError);
}

TEST_CASE("shots load from JSON and enforce the kind coverage") {
  const char* path = "semfilter_shots_test.json";
  {
    std::ofstream out(path);
    out << R"([
      {"case": {"id":"s1","comment_type":"summary","old_comment":"a","old_code":"x","new_code":"y"}, "verdict": "consistent"},
      {"case": {"id":"s2","comment_type":"return","old_comment":"a","old_code":"x","new_code":"y"}, "verdict": "inconsistent", "kind": "return_type"},
      {"case": {"id":"s3","comment_type":"param","old_comment":"a","old_code":"x","new_code":"y"}, "verdict": "inconsistent", "kind": "method_signature"},
      {"case": {"id":"s4","comment_type":"summary","old_comment":"a","old_code":"x","new_code":"y"}, "verdict": "inconsistent", "kind": "application_logic"}
    ])";
  }
  const ShotSet shots = load_shots(path);
  CHECK(shots[0].example.id == "s1");
  CHECK_FALSE(shots[0].inconsistent);
  CHECK(shots[3].kind == InconsistencyKind::ApplicationLogic);
  std::remove(path);
}

TEST_CASE("parse_verdict") {
  CHECK(parse_verdict("INCONSISTENT — the return type changed") ==
        Verdict::Inconsistent);
  CHECK(parse_verdict("consistent.") == Verdict::Consistent);
  CHECK(parse_verdict("maybe") == Verdict::Unparseable);
  CHECK(parse_verdict("The comment is CONSISTENT with the code") ==
        Verdict::Consistent);
  CHECK(parse_verdict("inconsistent") == Verdict::Inconsistent);
  CHECK(parse_verdict("") == Verdict::Unparseable);
  // first whole-word occurrence wins
  CHECK(parse_verdict("CONSISTENT, not INCONSISTENT") == Verdict::Consistent);
}

TEST_CASE("majority vote truth table") {
  using V = Verdict;
  auto vote = [](V a, V b, V c) { return majority_vote({a, b, c}); };
  CHECK(vote(V::Inconsistent, V::Inconsistent, V::Consistent) ==
        std::pair{true, false});
  CHECK(vote(V::Inconsistent, V::Inconsistent, V::Inconsistent) ==
        std::pair{true, true});
  CHECK(vote(V::Inconsistent, V::Consistent, V::Consistent) ==
        std::pair{false, false});
  CHECK(vote(V::Consistent, V::Consistent, V::Consistent) ==
        std::pair{false, false});
  // unparseable counts against keeping
  CHECK(vote(V::Inconsistent, V::Unparseable, V::Inconsistent) ==
        std::pair{true, false});
  CHECK(vote(V::Inconsistent, V::Unparseable, V::Unparseable) ==
        std::pair{false, false});
}

TEST_CASE("decision depends only on the verdict multiset") {
  using V = Verdict;
  const V all[] = {V::Inconsistent, V::Consistent, V::Unparseable};
  for (V a : all)
    for (V b : all)
      for (V c : all) {
        const auto base = majority_vote({a, b, c});
        CHECK(majority_vote({a, c, b}) == base);
        CHECK(majority_vote({b, a, c}) == base);
        CHECK(majority_vote({b, c, a}) == base);
        CHECK(majority_vote({c, a, b}) == base);
        CHECK(majority_vote({c, b, a}) == base);
      }
}

TEST_CASE("prompt builds for very long methods") {
  CciCase huge = make_case("huge", Label::Inconsistent);
  for (int i = 0; i < 10000; ++i)
    huge.new_code += " token" + std::to_string(i);
  const auto messages = build_vote_prompt(huge, make_shots());
  CHECK(messages[1].content.size() > 90000);  // prompt size is unbounded
}

TEST_CASE("semantic filter keeps majority positives and all negatives") {
  Corpus corpus;
  corpus.cases.push_back(make_case("kept", Label::Inconsistent, "alpha"));
  corpus.cases.push_back(make_case("dropped", Label::Inconsistent, "beta"));
  corpus.cases.push_back(make_case("negative", Label::Consistent));

  Gateway gateway;
  const auto voters = make_voters();
  // voters 1 and 2 say INCONSISTENT only for the alpha-marked case;
  // voter 3 always says CONSISTENT
  auto judge = [](const ChatRequest& req) {
    return req.messages.back().content.find("alpha") != std::string::npos
               ? std::string("INCONSISTENT")
               : std::string("CONSISTENT");
  };
  gateway.register_backend("voter1", std::make_shared<StubBackend>(judge));
  gateway.register_backend("voter2", std::make_shared<StubBackend>(judge));
  gateway.register_backend("voter3",
                           std::make_shared<StubBackend>("CONSISTENT"));

  auto [filtered, records] =
      semantic_filter(corpus, gateway, voters, make_shots());
  REQUIRE(records.size() == 2);  // negatives are never queried
  REQUIRE(filtered.size() == 2);
  CHECK(filtered.cases[0].id == "kept");
  CHECK(filtered.cases[1].id == "negative");
  for (const VoteRecord& r : records) {
    if (r.case_id == "kept") {
      CHECK(r.keep);
      CHECK_FALSE(r.unanimous);
    } else {
      CHECK_FALSE(r.keep);
    }
  }
}

TEST_CASE("gateway errors become unparseable verdicts") {
  Corpus corpus;
  corpus.cases.push_back(make_case("p", Label::Inconsistent));
  Gateway gateway;
  auto voters = make_voters();
  for (auto& v : voters) v.max_retries = 0;
  auto failing = std::make_shared<StubBackend>("INCONSISTENT");
  failing->fail_first(1000);
  gateway.register_backend("voter1", failing);
  gateway.register_backend("voter2",
                           std::make_shared<StubBackend>("INCONSISTENT"));
  gateway.register_backend("voter3",
                           std::make_shared<StubBackend>("INCONSISTENT"));
  auto [filtered, records] =
      semantic_filter(corpus, gateway, voters, make_shots());
  REQUIRE(records.size() == 1);
  CHECK(records[0].verdicts[0].verdict == Verdict::Unparseable);
  CHECK(records[0].keep);  // two parseable inconsistent votes remain
}

TEST_CASE("empty corpus filters to empty") {
  Gateway gateway;
  auto [filtered, records] =
      semantic_filter(Corpus{}, gateway, make_voters(), make_shots());
  CHECK(filtered.size() == 0);
  CHECK(records.empty());
}

TEST_CASE("vote records round-trip through JSON Lines") {
  VoteRecord r;
  r.case_id = "c1";
  r.verdicts = {{"voter1", Verdict::Inconsistent},
                {"voter2", Verdict::Unparseable},
                {"voter3", Verdict::Consistent}};
  r.keep = false;
  r.unanimous = false;
  const char* path = "semfilter_votes_test.jsonl";
  save_vote_records({r}, path);
  const auto loaded = load_vote_records(path);
  REQUIRE(loaded.size() == 1);
  CHECK(loaded[0].case_id == "c1");
  CHECK(loaded[0].verdicts[1].verdict == Verdict::Unparseable);
  CHECK_FALSE(loaded[0].keep);
  std::remove(path);
}

TEST_CASE("select_validated_candidates samples unanimous test positives") {
  Corpus corpus;
  std::vector<VoteRecord> records;
  for (int i = 0; i < 8; ++i) {
    CciCase c = make_case("case" + std::to_string(i), Label::Inconsistent);
    c.split = i < 6 ? Split::Test : Split::Train;
    corpus.cases.push_back(c);
    VoteRecord r;
    r.case_id = c.id;
    r.keep = true;
    r.unanimous = i % 2 == 0;  // case0/2/4 unanimous in the test split
    records.push_back(r);
  }

  const Corpus picked =
      select_validated_candidates(records, corpus, 2, 99);
  CHECK(picked.size() == 2);
  const Corpus picked_again =
      select_validated_candidates(records, corpus, 2, 99);
  REQUIRE(picked_again.size() == 2);
  CHECK(picked.cases[0].id == picked_again.cases[0].id);
  CHECK(picked.cases[1].id == picked_again.cases[1].id);
  for (const auto& c : picked.cases) {
    CHECK(c.split == Split::Test);
    const int idx = c.id.back() - '0';
    CHECK(idx % 2 == 0);
  }

  std::string warning;
  const Corpus all =
      select_validated_candidates(records, corpus, 300, 1, &warning);
  CHECK(all.size() == 3);  // only 3 unanimous test positives exist
  CHECK_FALSE(warning.empty());

  const Corpus none = select_validated_candidates({}, corpus, 3, 1, &warning);
  CHECK(none.size() == 0);
}
