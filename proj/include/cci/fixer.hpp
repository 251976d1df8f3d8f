// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "cci/corpus.hpp"
#include "cci/llm_gateway.hpp"
#include "cci/matrix.hpp"

namespace cci {

struct FixResult {
  std::string case_id;
  std::string predicted_comment;
  std::string backend;
  double latency_s = 0.0;
  std::string error;  // set when the backend failed; predicted empty then
  bool ok() const { return error.empty(); }
  nlohmann::ordered_json to_json() const;
};

std::vector<ChatMessage> build_fix_prompt(const CciCase& c);

// Runs the prompt against the backend and reduces the completion to a single
// trimmed comment block (markdown fences and trailing prose stripped).
FixResult fix_comment(Gateway& gateway, const LlmEndpoint& backend,
                      const CciCase& c, int max_tokens = 256);

std::string extract_comment_block(const std::string& completion);

// ------------------------------------------------------------------- LoRA ---

// h = W0 x + B A x, computed as the sum of the two paths.
Vec lora_forward(const Matrix& w0, const Matrix& a, const Matrix& b,
                 const Vec& x);

// W' = W0 + B A
Matrix lora_merge(const Matrix& w0, const Matrix& a, const Matrix& b);

// trainable parameters of the low-rank pair: r * (d + k)
std::size_t lora_param_count(std::size_t d, std::size_t k, std::size_t r);

// -------------------------------------------------------------------- KTO ---

struct KtoParams {
  double beta = 0.1;
  double lambda_d = 1.0;
  double lambda_u = 1.0;
  void validate() const;
};

struct KtoSample {
  double reward = 0.0;  // r_theta(x, y)
  bool desirable = true;
};

// r = log pi_theta(y|x) - log pi_ref(y|x)
double kto_reward(double policy_logp, double ref_logp);

// floored mean log-ratio over a reference batch; KL estimates stay >= 0
double kto_baseline(const std::vector<double>& policy_logps,
                    const std::vector<double>& ref_logps);

// v = lambda_D * sigmoid(beta (r - z0)) for desirable samples,
//     lambda_U * sigmoid(beta (z0 - r)) otherwise
double kto_value(double reward, double z0, bool desirable,
                 const KtoParams& params);

// mean over samples of (lambda_y - v)
double kto_loss(const std::vector<KtoSample>& samples, double z0,
                const KtoParams& params);

// analytic d(loss)/d(reward) per sample
std::vector<double> kto_loss_grad_reward(const std::vector<KtoSample>& samples,
                                         double z0, const KtoParams& params);

// Configuration preset mirroring the published fine-tuning/alignment setup;
// shipped as data so the numeric operations can be exercised against it.
struct LoraPreset {
  std::size_t epochs_finetune = 10;
  std::size_t epochs_alignment = 5;
  std::size_t batch_finetune = 16;
  std::size_t batch_alignment = 32;
  double learning_rate = 1e-5;
  std::size_t max_len = 2048;
  std::size_t lora_rank = 8;
  double lora_alpha = 32;
  double lora_dropout = 0.05;
  nlohmann::ordered_json to_json() const;
};

}  // namespace cci
