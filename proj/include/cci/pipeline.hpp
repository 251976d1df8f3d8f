// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cci/corpus.hpp"
#include "cci/detector.hpp"
#include "cci/enhance.hpp"
#include "cci/fixer.hpp"
#include "cci/llm_gateway.hpp"

namespace cci {

inline constexpr const char* kToolVersion = "0.1.0";

// Single key/value config file with [section] headers; # starts a comment.
// CLI flags override file values.
struct PipelineConfig {
  std::vector<LlmEndpoint> voters;
  LlmEndpoint teacher;
  LlmEndpoint fixer;
  DetectorConfig detector;
  EnhanceConfig enhance;
  KtoParams kto;
  LoraPreset lora;
  std::uint64_t seed = 42;
  std::string shots_path;
  std::string transcript_path;
  std::string config_hash;  // hash of the loaded file, empty when defaulted
};

PipelineConfig load_pipeline_config(const std::string& path);
PipelineConfig default_pipeline_config();

std::string content_hash_hex(const std::string& content);

// Machine-readable run manifest next to a stage's primary output.
void write_manifest(const std::string& path, const std::string& command,
                    const std::vector<std::string>& inputs,
                    const std::vector<std::string>& outputs,
                    const std::string& config_hash, std::uint64_t seed);

// ------------------------------------------------------------------ solve ---

using DetectFn = std::function<Prediction(const CciCase&)>;

struct SolveOptions {
  bool monolithic = false;  // send every case to the fixer (baseline shape)
  int fix_max_tokens = 256;
};

struct SolveCaseResult {
  std::string case_id;
  double probability = 0.0;
  bool inconsistent = false;
  std::optional<FixResult> fix;
  double seconds = 0.0;
  nlohmann::ordered_json to_json() const;
};

struct SolveReport {
  std::size_t n = 0;
  std::size_t flagged = 0;
  std::size_t fixer_calls = 0;
  std::size_t fixer_errors = 0;
  double warmup_s = 0.0;      // first case, timed separately
  double mean_case_s = 0.0;   // mean over the remaining cases
  double total_s = 0.0;
  bool monolithic = false;
  nlohmann::ordered_json to_json() const;
};

// Detection over every case; only flagged cases reach the fixer backend
// (all cases in monolithic mode). Per-case wall time runs from detection
// start to the verdict or to fix completion.
std::pair<std::vector<SolveCaseResult>, SolveReport> solve(
    const Corpus& corpus, const DetectFn& detect, Gateway& gateway,
    const LlmEndpoint& fixer_backend, const SolveOptions& opts = {});

DetectFn detector_fn(std::shared_ptr<const DetectorModel> model);

}  // namespace cci
