// SPDX-License-Identifier: Apache-2.0
#include "cci/semfilter.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "cci/rng.hpp"

namespace cci {

using nlohmann::ordered_json;

std::string to_string(InconsistencyKind k) {
  switch (k) {
    case InconsistencyKind::ReturnType: return "return_type";
    case InconsistencyKind::MethodSignature: return "method_signature";
    case InconsistencyKind::ApplicationLogic: return "application_logic";
  }
  return "application_logic";
}

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::Inconsistent: return "inconsistent";
    case Verdict::Consistent: return "consistent";
    case Verdict::Unparseable: return "unparseable";
  }
  return "unparseable";
}

namespace {

InconsistencyKind kind_from_string(const std::string& s) {
  if (s == "return_type") return InconsistencyKind::ReturnType;
  if (s == "method_signature") return InconsistencyKind::MethodSignature;
  if (s == "application_logic") return InconsistencyKind::ApplicationLogic;
  throw DataError("unknown inconsistency kind: " + s);
}

Verdict verdict_from_string(const std::string& s) {
  if (s == "inconsistent") return Verdict::Inconsistent;
  if (s == "consistent") return Verdict::Consistent;
  return Verdict::Unparseable;
}

}  // namespace

ShotSet load_shots(const std::string& path) {
  std::ifstream in(path);
  if (!in.is_open()) throw DataError("cannot open shots file: " + path);
  ordered_json j;
  try {
    in >> j;
  } catch (const std::exception& ex) {
    throw DataError("malformed shots file " + path + ": " + ex.what());
  }
  if (!j.is_array() || j.size() != 4)
    throw DataError("shots file must contain exactly 4 examples");

  ShotSet shots;
  for (std::size_t i = 0; i < 4; ++i) {
    const auto& entry = j[i];
    ShotExample shot;
    shot.example = case_from_json(entry.at("case"));
    const std::string verdict = entry.at("verdict").get<std::string>();
    if (verdict == "inconsistent") {
      shot.inconsistent = true;
      shot.kind = kind_from_string(entry.at("kind").get<std::string>());
    } else if (verdict != "consistent") {
      throw DataError("shot verdict must be consistent or inconsistent");
    }
    shots[i] = std::move(shot);
  }
  validate_shots(shots);
  return shots;
}

void validate_shots(const ShotSet& shots) {
  std::size_t consistent = 0;
  std::unordered_set<std::string> kinds;
  for (const ShotExample& s : shots) {
    if (!s.inconsistent) {
      ++consistent;
      continue;
    }
    if (!s.kind) throw DataError("inconsistent shot without a kind");
    kinds.insert(to_string(*s.kind));
  }
  if (consistent != 1 || kinds.size() != 3)
    throw DataError(
        "shot set must hold one consistent example and one inconsistent "
        "example per kind (return_type, method_signature, application_logic)");
}

namespace {

void append_case_block(std::ostringstream& os, const CciCase& c) {
  os << "Comment:\n" << c.old_comment << "\n";
  os << "Old code:\n" << c.old_code << "\n";
  os << "New code:\n" << c.new_code << "\n";
}

}  // namespace

std::vector<ChatMessage> build_vote_prompt(const CciCase& c,
                                           const ShotSet& shots) {
  if (c.old_comment.empty() || c.old_code.empty() || c.new_code.empty())
    throw DataError("vote prompt needs old_comment, old_code and new_code (id " +
                    c.id + ")");
  validate_shots(shots);

  // Deterministic shot order: consistent first, then the three kinds.
  std::vector<const ShotExample*> ordered;
  for (const ShotExample& s : shots)
    if (!s.inconsistent) ordered.push_back(&s);
  for (InconsistencyKind k :
       {InconsistencyKind::ReturnType, InconsistencyKind::MethodSignature,
        InconsistencyKind::ApplicationLogic})
    for (const ShotExample& s : shots)
      if (s.inconsistent && *s.kind == k) ordered.push_back(&s);

  std::vector<ChatMessage> messages;
  messages.push_back(
      {Role::System,
       "You judge code-comment inconsistency in Java methods. Given a method "
       "comment, the old version of the method, and the new version of the "
       "method, decide whether the comment is inconsistent with the new "
       "code. Reply with exactly one word: INCONSISTENT or CONSISTENT."});

  std::ostringstream os;
  os << "Here are four worked examples.\n\n";
  for (std::size_t i = 0; i < ordered.size(); ++i) {
    const ShotExample& s = *ordered[i];
    os << "Example " << (i + 1);
    if (s.inconsistent) os << " (" << to_string(*s.kind) << " inconsistency)";
    os << ":\n";
    append_case_block(os, s.example);
    os << "Answer: " << (s.inconsistent ? "INCONSISTENT" : "CONSISTENT")
       << "\n\n";
  }
  os << "Now judge the following case.\n";
  append_case_block(os, c);
  os << "Answer with exactly one word, INCONSISTENT or CONSISTENT.";
  messages.push_back({Role::User, os.str()});
  return messages;
}

Verdict parse_verdict(const std::string& completion) {
  std::string word;
  auto check = [&word]() -> std::optional<Verdict> {
    if (word == "inconsistent") return Verdict::Inconsistent;
    if (word == "consistent") return Verdict::Consistent;
    return std::nullopt;
  };
  for (unsigned char ch : completion) {
    if (std::isalpha(ch)) {
      word.push_back(static_cast<char>(std::tolower(ch)));
      continue;
    }
    if (auto v = check()) return *v;
    word.clear();
  }
  if (auto v = check()) return *v;
  return Verdict::Unparseable;
}

std::pair<bool, bool> majority_vote(const std::array<Verdict, 3>& verdicts) {
  std::size_t inconsistent = 0;
  for (Verdict v : verdicts)
    if (v == Verdict::Inconsistent) ++inconsistent;
  return {inconsistent >= 2, inconsistent == 3};
}

std::pair<Corpus, std::vector<VoteRecord>> semantic_filter(
    const Corpus& corpus, Gateway& gateway,
    const std::array<LlmEndpoint, 3>& voters, const ShotSet& shots,
    const SemanticFilterOptions& opts) {
  validate_shots(shots);

  std::vector<std::size_t> positive_indices;
  std::vector<ChatRequest> requests;
  for (std::size_t i = 0; i < corpus.cases.size(); ++i) {
    if (!corpus.cases[i].is_positive()) continue;
    positive_indices.push_back(i);
    ChatRequest req;
    req.messages = build_vote_prompt(corpus.cases[i], shots);
    req.temperature = 0.0;
    req.max_tokens = opts.max_tokens;
    requests.push_back(std::move(req));
  }

  // one batch per voter; gateway errors surface as Unparseable verdicts
  std::array<std::vector<ChatResult>, 3> replies;
  for (std::size_t v = 0; v < voters.size(); ++v)
    replies[v] =
        gateway.chat_complete_batch(voters[v], requests, opts.max_in_flight);

  std::vector<VoteRecord> records;
  std::unordered_set<std::size_t> kept_positions;
  for (std::size_t k = 0; k < positive_indices.size(); ++k) {
    VoteRecord record;
    record.case_id = corpus.cases[positive_indices[k]].id;
    std::array<Verdict, 3> verdicts{};
    for (std::size_t v = 0; v < voters.size(); ++v) {
      verdicts[v] = replies[v][k].ok ? parse_verdict(replies[v][k].text)
                                     : Verdict::Unparseable;
      record.verdicts.push_back({voters[v].name, verdicts[v]});
    }
    std::tie(record.keep, record.unanimous) = majority_vote(verdicts);
    if (record.keep) kept_positions.insert(positive_indices[k]);
    records.push_back(std::move(record));
  }

  Corpus out;
  out.source_path = corpus.source_path;
  for (std::size_t i = 0; i < corpus.cases.size(); ++i) {
    if (corpus.cases[i].is_positive() && !kept_positions.count(i)) continue;
    out.cases.push_back(corpus.cases[i]);
  }
  return {std::move(out), std::move(records)};
}

Corpus select_validated_candidates(const std::vector<VoteRecord>& records,
                                   const Corpus& corpus, std::size_t n,
                                   std::uint64_t seed, std::string* warning) {
  std::unordered_map<std::string, const VoteRecord*> by_id;
  for (const VoteRecord& r : records) by_id[r.case_id] = &r;

  std::vector<std::size_t> eligible;
  for (std::size_t i = 0; i < corpus.cases.size(); ++i) {
    const CciCase& c = corpus.cases[i];
    if (!c.is_positive() || !c.split || *c.split != Split::Test) continue;
    auto it = by_id.find(c.id);
    if (it != by_id.end() && it->second->unanimous) eligible.push_back(i);
  }

  if (eligible.size() < n) {
    if (warning)
      *warning = "requested " + std::to_string(n) + " candidates but only " +
                 std::to_string(eligible.size()) + " unanimous cases exist";
    n = eligible.size();
  }

  Rng rng(seed);
  rng.shuffle(eligible);
  eligible.resize(n);
  std::sort(eligible.begin(), eligible.end());

  Corpus out;
  for (std::size_t i : eligible) out.cases.push_back(corpus.cases[i]);
  return out;
}

ordered_json VoteRecord::to_json() const {
  ordered_json j;
  j["case_id"] = case_id;
  auto arr = ordered_json::array();
  for (const VoterVerdict& v : verdicts)
    arr.push_back({{"voter", v.voter_name}, {"verdict", to_string(v.verdict)}});
  j["verdicts"] = arr;
  j["decision"] = keep ? "keep" : "discard";
  j["unanimous"] = unanimous;
  return j;
}

VoteRecord vote_record_from_json(const ordered_json& j) {
  VoteRecord r;
  r.case_id = j.at("case_id").get<std::string>();
  for (const auto& v : j.at("verdicts"))
    r.verdicts.push_back({v.at("voter").get<std::string>(),
                          verdict_from_string(v.at("verdict").get<std::string>())});
  r.keep = j.at("decision").get<std::string>() == "keep";
  r.unanimous = j.at("unanimous").get<bool>();
  return r;
}

std::vector<VoteRecord> load_vote_records(const std::string& path) {
  std::ifstream in(path);
  if (!in.is_open()) throw DataError("cannot open vote records: " + path);
  std::vector<VoteRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      out.push_back(vote_record_from_json(ordered_json::parse(line)));
    } catch (const std::exception& ex) {
      throw DataError(path + ":" + std::to_string(line_no) + ": " + ex.what());
    }
  }
  return out;
}

void save_vote_records(const std::vector<VoteRecord>& records,
                       const std::string& path) {
  std::ofstream out(path);
  if (!out.is_open()) throw DataError("cannot write vote records: " + path);
  for (const VoteRecord& r : records) out << r.to_json().dump() << '\n';
}

}  // namespace cci
