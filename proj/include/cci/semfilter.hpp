// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cci/corpus.hpp"
#include "cci/llm_gateway.hpp"

namespace cci {

enum class InconsistencyKind { ReturnType, MethodSignature, ApplicationLogic };

std::string to_string(InconsistencyKind k);

// One in-context example for the voter prompt. A valid shot set has exactly
// four entries: one consistent case plus one inconsistent case per kind.
struct ShotExample {
  CciCase example;
  bool inconsistent = false;
  std::optional<InconsistencyKind> kind;
};

using ShotSet = std::array<ShotExample, 4>;

ShotSet load_shots(const std::string& path);
void validate_shots(const ShotSet& shots);

enum class Verdict { Inconsistent, Consistent, Unparseable };

std::string to_string(Verdict v);

struct VoterVerdict {
  std::string voter_name;
  Verdict verdict = Verdict::Unparseable;
};

struct VoteRecord {
  std::string case_id;
  std::vector<VoterVerdict> verdicts;
  bool keep = false;       // >= 2 parseable inconsistent verdicts
  bool unanimous = false;  // all 3 inconsistent
  nlohmann::ordered_json to_json() const;
};

VoteRecord vote_record_from_json(const nlohmann::ordered_json& j);
std::vector<VoteRecord> load_vote_records(const std::string& path);
void save_vote_records(const std::vector<VoteRecord>& records,
                       const std::string& path);

// Same four shots for every query; the message ends with the one-word answer
// instruction (INCONSISTENT / CONSISTENT).
std::vector<ChatMessage> build_vote_prompt(const CciCase& c,
                                           const ShotSet& shots);

// First whole-word INCONSISTENT/CONSISTENT occurrence wins, case-insensitive;
// anything else is Unparseable.
Verdict parse_verdict(const std::string& completion);

// keep iff >= 2 of exactly 3 verdicts are Inconsistent; unanimous iff 3.
std::pair<bool, bool> majority_vote(const std::array<Verdict, 3>& verdicts);

struct SemanticFilterOptions {
  int max_tokens = 16;  // one-word reply protocol
  int max_in_flight = 4;
};

// Queries the three voters on every positive case; keeps positives with a
// majority inconsistent verdict, passes negatives through untouched.
std::pair<Corpus, std::vector<VoteRecord>> semantic_filter(
    const Corpus& corpus, Gateway& gateway,
    const std::array<LlmEndpoint, 3>& voters, const ShotSet& shots,
    const SemanticFilterOptions& opts = {});

// Up to n unanimous test-split positives, seeded uniform sampling, emitted
// for external manual verification.
Corpus select_validated_candidates(const std::vector<VoteRecord>& records,
                                   const Corpus& corpus, std::size_t n,
                                   std::uint64_t seed,
                                   std::string* warning = nullptr);

}  // namespace cci
