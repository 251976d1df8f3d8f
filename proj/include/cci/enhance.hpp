// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "cci/corpus.hpp"
#include "cci/detector.hpp"
#include "cci/llm_gateway.hpp"

namespace cci {

struct EnhanceConfig {
  std::size_t max_iterations = 10;
  double sampling_rate = 0.1;
  double convergence_delta = 1e-3;  // on the D0 F1 improvement
  std::uint64_t seed = 42;
  std::size_t generations_per_parent = 2;  // K
  int teacher_max_tokens = 1024;
  int max_in_flight = 4;

  void validate() const;
};

// Seeded uniform sample of ceil(rate * |eligible|) cases; only non-synthetic
// ids that resolve in the corpus are eligible.
std::vector<CciCase> sample_errors(const std::vector<std::string>& misclassified,
                                   const Corpus& corpus, double rate,
                                   std::uint64_t seed);

// Asks the teacher for K structurally varied cases that keep the parent's
// label; demands a strict JSON array reply.
std::vector<ChatMessage> build_synthesis_prompt(const CciCase& parent,
                                                std::size_t generations);

struct SynthesisOutcome {
  std::vector<CciCase> cases;
  std::vector<std::string> parse_failures;  // one entry per unusable reply
};

// Parses and validates teacher replies; labels are inherited from the parent
// regardless of what the teacher asserts.
SynthesisOutcome synthesize_cases(Gateway& gateway, const LlmEndpoint& teacher,
                                  const std::vector<CciCase>& sampled,
                                  const EnhanceConfig& config);

struct IterationStats {
  std::size_t iteration = 0;
  std::size_t dataset_size = 0;
  double d0_f1 = 0.0;
  std::size_t misclassified = 0;
  std::size_t sampled = 0;
  std::size_t synthesized = 0;
  std::vector<std::string> sampled_ids;
};

struct EnhanceResult {
  Corpus dataset;  // D^i at the stop point
  std::vector<IterationStats> history;
  DetectorModel final_model;
  nlohmann::ordered_json history_json() const;
};

// Iterative enhancement: retrain from the iteration-0 initialization on D^i,
// evaluate on D^0, stop on the iteration cap or convergence, synthesize new
// cases from sampled errors and merge.
EnhanceResult iterative_enhance(const DetectorConfig& detector_config,
                                const Corpus& d0, Gateway& gateway,
                                const LlmEndpoint& teacher,
                                const EnhanceConfig& config);

}  // namespace cci
