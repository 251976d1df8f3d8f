// SPDX-License-Identifier: Apache-2.0
#include "cci/enhance.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "cci/rng.hpp"

namespace cci {

using nlohmann::ordered_json;

void EnhanceConfig::validate() const {
  if (sampling_rate <= 0.0 || sampling_rate > 1.0)
    throw DataError("sampling_rate must lie in (0, 1]");
  if (generations_per_parent == 0)
    throw DataError("generations_per_parent must be positive");
}

std::vector<CciCase> sample_errors(const std::vector<std::string>& misclassified,
                                   const Corpus& corpus, double rate,
                                   std::uint64_t seed) {
  if (rate <= 0.0 || rate > 1.0) throw DataError("rate must lie in (0, 1]");

  std::vector<std::size_t> eligible;
  for (const std::string& id : misclassified) {
    for (std::size_t i = 0; i < corpus.cases.size(); ++i) {
      if (corpus.cases[i].id != id) continue;
      if (!corpus.cases[i].synthetic) eligible.push_back(i);
      break;
    }
  }
  if (eligible.empty()) return {};

  const std::size_t want = static_cast<std::size_t>(
      std::ceil(rate * static_cast<double>(eligible.size())));
  Rng rng(seed);
  rng.shuffle(eligible);
  eligible.resize(std::min(want, eligible.size()));
  std::sort(eligible.begin(), eligible.end());

  std::vector<CciCase> out;
  out.reserve(eligible.size());
  for (std::size_t i : eligible) out.push_back(corpus.cases[i]);
  return out;
}

std::vector<ChatMessage> build_synthesis_prompt(const CciCase& parent,
                                                std::size_t generations) {
  if (!parent.label)
    throw DataError("synthesis prompt needs a labeled case: " + parent.id);
  if (parent.synthetic)
    throw DataError("synthesis prompt rejects synthetic parents: " + parent.id);

  std::vector<ChatMessage> messages;
  messages.push_back(
      {Role::System,
       "You generate training data for a Java code-comment inconsistency "
       "detector. Produce new method/comment change cases that keep the same "
       "relationship between the comment and the code as the given case, "
       "while changing identifiers, phrasing and code structure. Reply with "
       "a strict JSON array only, no prose."});
  std::ostringstream os;
  const bool inconsistent = parent.is_positive();
  os << "Reference case (the old comment is "
     << (inconsistent ? "INCONSISTENT" : "CONSISTENT")
     << " with the new code):\n";
  os << "old_comment:\n" << parent.old_comment << "\n";
  os << "old_code:\n" << parent.old_code << "\n";
  os << "new_code:\n" << parent.new_code << "\n";
  if (parent.new_comment) os << "new_comment:\n" << *parent.new_comment << "\n";
  os << "\nGenerate " << generations
     << " new cases with the same label. Each case must differ from the "
        "reference in identifiers, wording and structure, but the old "
        "comment must relate to the new code in the same way. Output a JSON "
        "array of " << generations
     << " objects with exactly these string fields: old_comment, "
        "new_comment, old_code, new_code, label.";
  messages.push_back({Role::User, os.str()});
  return messages;
}

namespace {

// Strict JSON array expected; tolerate fences/prose around it.
ordered_json extract_json_array(const std::string& text) {
  const std::size_t open = text.find('[');
  const std::size_t close = text.rfind(']');
  if (open == std::string::npos || close == std::string::npos || close < open)
    throw DataError("no JSON array in teacher reply");
  return ordered_json::parse(text.substr(open, close - open + 1));
}

std::string nonempty_string(const ordered_json& obj, const char* field) {
  auto it = obj.find(field);
  if (it == obj.end() || !it->is_string())
    throw DataError(std::string("missing field ") + field);
  std::string v = it->get<std::string>();
  if (v.empty()) throw DataError(std::string("empty field ") + field);
  return v;
}

}  // namespace

SynthesisOutcome synthesize_cases(Gateway& gateway, const LlmEndpoint& teacher,
                                  const std::vector<CciCase>& sampled,
                                  const EnhanceConfig& config) {
  SynthesisOutcome outcome;
  if (sampled.empty()) return outcome;

  std::vector<ChatRequest> requests;
  requests.reserve(sampled.size());
  for (const CciCase& parent : sampled) {
    ChatRequest req;
    req.messages = build_synthesis_prompt(parent, config.generations_per_parent);
    req.temperature = 0.0;
    req.max_tokens = config.teacher_max_tokens;
    requests.push_back(std::move(req));
  }
  const auto replies =
      gateway.chat_complete_batch(teacher, requests, config.max_in_flight);

  for (std::size_t i = 0; i < sampled.size(); ++i) {
    const CciCase& parent = sampled[i];
    if (!replies[i].ok) {
      outcome.parse_failures.push_back(parent.id + ": " + replies[i].error);
      continue;
    }
    ordered_json arr;
    try {
      arr = extract_json_array(replies[i].text);
      if (!arr.is_array()) throw DataError("teacher reply is not an array");
    } catch (const std::exception& ex) {
      outcome.parse_failures.push_back(parent.id + ": " + ex.what());
      continue;
    }
    std::size_t emitted = 0;
    for (const auto& obj : arr) {
      try {
        CciCase synth;
        synth.old_comment = nonempty_string(obj, "old_comment");
        synth.new_comment = nonempty_string(obj, "new_comment");
        synth.old_code = nonempty_string(obj, "old_code");
        synth.new_code = nonempty_string(obj, "new_code");
        synth.comment_type = parent.comment_type;
        synth.label = parent.label;  // teacher-asserted labels are ignored
        synth.split = parent.split;
        synth.synthetic = true;
        synth.parent_id = parent.id;
        synth.id = parent.id + "-syn" + std::to_string(emitted);
        outcome.cases.push_back(std::move(synth));
        ++emitted;
      } catch (const std::exception& ex) {
        outcome.parse_failures.push_back(parent.id + ": dropped generation: " +
                                         ex.what());
      }
    }
  }
  return outcome;
}

EnhanceResult iterative_enhance(const DetectorConfig& detector_config,
                                const Corpus& d0, Gateway& gateway,
                                const LlmEndpoint& teacher,
                                const EnhanceConfig& config) {
  config.validate();

  EnhanceResult result;
  const DetectorModel model0 = init_detector(detector_config, d0);
  result.dataset = d0;
  result.final_model = model0;
  if (config.max_iterations == 0) return result;

  double prev_f1 = 0.0;
  for (std::size_t iteration = 0;; ++iteration) {
    // Always retrain from the iteration-0 initialization.
    DetectorModel model = model0;
    train(model, result.dataset);
    const DetectorEval eval = evaluate(model, d0);

    IterationStats stats;
    stats.iteration = iteration;
    stats.dataset_size = result.dataset.size();
    stats.d0_f1 = eval.f1;
    stats.misclassified = eval.misclassified_ids.size();

    const bool converged =
        iteration >= 1 && (eval.f1 - prev_f1) < config.convergence_delta;
    if (iteration >= config.max_iterations || converged) {
      result.history.push_back(std::move(stats));
      result.final_model = std::move(model);
      return result;
    }
    prev_f1 = eval.f1;

    std::vector<CciCase> sampled =
        sample_errors(eval.misclassified_ids, result.dataset,
                      config.sampling_rate, config.seed + iteration);
    stats.sampled = sampled.size();
    for (const CciCase& c : sampled) stats.sampled_ids.push_back(c.id);

    SynthesisOutcome synth =
        synthesize_cases(gateway, teacher, sampled, config);
    stats.synthesized = synth.cases.size();
    result.history.push_back(std::move(stats));
    result.final_model = std::move(model);

    for (CciCase& c : synth.cases) {
      // keep ids unique across iterations
      c.id += "-i" + std::to_string(iteration);
      result.dataset.cases.push_back(std::move(c));
    }
  }
}

ordered_json EnhanceResult::history_json() const {
  auto arr = ordered_json::array();
  for (const IterationStats& s : history) {
    ordered_json row;
    row["iteration"] = s.iteration;
    row["dataset_size"] = s.dataset_size;
    row["d0_f1"] = s.d0_f1;
    row["misclassified"] = s.misclassified;
    row["sampled"] = s.sampled;
    row["synthesized"] = s.synthesized;
    row["sampled_ids"] = s.sampled_ids;
    arr.push_back(std::move(row));
  }
  ordered_json j;
  j["schema_version"] = 1;
  j["iterations"] = arr;
  return j;
}

}  // namespace cci
