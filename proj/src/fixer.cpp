// SPDX-License-Identifier: Apache-2.0
#include "cci/fixer.hpp"

#include <cmath>
#include <sstream>

#include "cci/diffscript.hpp"

namespace cci {

using nlohmann::ordered_json;

std::vector<ChatMessage> build_fix_prompt(const CciCase& c) {
  if (c.old_comment.empty() || c.old_code.empty() || c.new_code.empty())
    throw DataError("fix prompt needs old_comment, old_code and new_code (id " +
                    c.id + ")");

  const TokenSeq rendered = render_edit_script(
      build_edit_script(tokenize_code(c.old_code), tokenize_code(c.new_code)));

  std::vector<ChatMessage> messages;
  messages.push_back(
      {Role::System,
       "You update Java method comments that no longer match the code. Given "
       "the outdated comment, the token-level code change, and the new method "
       "body, rewrite the comment so it describes the new code accurately. "
       "Output only the corrected comment text, nothing else."});
  std::ostringstream os;
  os << "Outdated comment:\n" << c.old_comment << "\n\n";
  os << "Code change (edit script):\n" << join_tokens(rendered) << "\n\n";
  os << "New method:\n" << c.new_code << "\n\n";
  os << "Corrected comment:";
  messages.push_back({Role::User, os.str()});
  return messages;
}

std::string extract_comment_block(const std::string& completion) {
  std::string text = completion;

  // strip markdown fences, keep the fenced body
  const std::size_t fence = text.find("```");
  if (fence != std::string::npos) {
    std::size_t body = text.find('\n', fence);
    if (body != std::string::npos) {
      const std::size_t close = text.find("```", body);
      text = close == std::string::npos ? text.substr(body + 1)
                                        : text.substr(body + 1, close - body - 1);
    }
  }

  // reduce to the first block: stop at the first blank line
  std::istringstream lines(text);
  std::string line, block;
  bool seen_content = false;
  while (std::getline(lines, line)) {
    std::string trimmed = line;
    while (!trimmed.empty() && (trimmed.back() == '\r' || trimmed.back() == ' '))
      trimmed.pop_back();
    std::size_t b = trimmed.find_first_not_of(" \t");
    if (b == std::string::npos) {
      if (seen_content) break;
      continue;
    }
    if (seen_content) block += '\n';
    block += trimmed;
    seen_content = true;
  }

  // trim outer whitespace
  const std::size_t b = block.find_first_not_of(" \t\n");
  if (b == std::string::npos) return "";
  const std::size_t e = block.find_last_not_of(" \t\n");
  return block.substr(b, e - b + 1);
}

FixResult fix_comment(Gateway& gateway, const LlmEndpoint& backend,
                      const CciCase& c, int max_tokens) {
  FixResult out;
  out.case_id = c.id;
  out.backend = backend.name.empty() ? backend.base_url : backend.name;

  const auto messages = build_fix_prompt(c);
  const ChatResult r = gateway.chat_complete(backend, messages, 0.0, max_tokens);
  out.latency_s = r.latency_s;
  if (!r.ok) {
    out.error = r.error;
    return out;
  }
  out.predicted_comment = extract_comment_block(r.text);
  if (out.predicted_comment.empty()) out.error = "empty completion";
  return out;
}

ordered_json FixResult::to_json() const {
  ordered_json j;
  j["case_id"] = case_id;
  if (ok())
    j["predicted_comment"] = predicted_comment;
  else
    j["error"] = error;
  j["backend"] = backend;
  j["latency_s"] = latency_s;
  return j;
}

// ------------------------------------------------------------------- LoRA ---

Vec lora_forward(const Matrix& w0, const Matrix& a, const Matrix& b,
                 const Vec& x) {
  const std::size_t d = w0.rows, k = w0.cols, r = a.rows;
  require_shape(a.cols == k && b.rows == d && b.cols == r && x.size() == k,
                "lora_forward");
  if (r > std::min(d, k))
    throw std::invalid_argument("lora rank exceeds min(d, k)");
  Vec h = matvec(w0, x);
  const Vec ax = matvec(a, x);
  axpy(h, 1.0, matvec(b, ax));
  return h;
}

Matrix lora_merge(const Matrix& w0, const Matrix& a, const Matrix& b) {
  require_shape(a.cols == w0.cols && b.rows == w0.rows && b.cols == a.rows,
                "lora_merge");
  Matrix merged = matmul(b, a);
  for (std::size_t i = 0; i < merged.data.size(); ++i)
    merged.data[i] += w0.data[i];
  return merged;
}

std::size_t lora_param_count(std::size_t d, std::size_t k, std::size_t r) {
  return r * (d + k);
}

// -------------------------------------------------------------------- KTO ---

void KtoParams::validate() const {
  if (beta <= 0) throw std::invalid_argument("kto beta must be > 0");
  if (lambda_d <= 0 || lambda_u <= 0)
    throw std::invalid_argument("kto lambdas must be > 0");
}

double kto_reward(double policy_logp, double ref_logp) {
  if (!std::isfinite(policy_logp) || !std::isfinite(ref_logp))
    throw std::invalid_argument("kto_reward: non-finite log-probability");
  return policy_logp - ref_logp;
}

double kto_baseline(const std::vector<double>& policy_logps,
                    const std::vector<double>& ref_logps) {
  if (policy_logps.empty() || policy_logps.size() != ref_logps.size())
    throw std::invalid_argument("kto_baseline: empty or mismatched batches");
  double mean = 0.0;
  for (std::size_t i = 0; i < policy_logps.size(); ++i)
    mean += kto_reward(policy_logps[i], ref_logps[i]);
  mean /= static_cast<double>(policy_logps.size());
  return std::max(0.0, mean);
}

double kto_value(double reward, double z0, bool desirable,
                 const KtoParams& params) {
  params.validate();
  if (desirable) return params.lambda_d * sigmoid(params.beta * (reward - z0));
  return params.lambda_u * sigmoid(params.beta * (z0 - reward));
}

double kto_loss(const std::vector<KtoSample>& samples, double z0,
                const KtoParams& params) {
  if (samples.empty()) throw std::invalid_argument("kto_loss: empty batch");
  double total = 0.0;
  for (const KtoSample& s : samples) {
    const double lambda_y = s.desirable ? params.lambda_d : params.lambda_u;
    total += lambda_y - kto_value(s.reward, z0, s.desirable, params);
  }
  return total / static_cast<double>(samples.size());
}

std::vector<double> kto_loss_grad_reward(const std::vector<KtoSample>& samples,
                                         double z0, const KtoParams& params) {
  if (samples.empty()) throw std::invalid_argument("kto_loss: empty batch");
  params.validate();
  const double inv_n = 1.0 / static_cast<double>(samples.size());
  std::vector<double> grads;
  grads.reserve(samples.size());
  for (const KtoSample& s : samples) {
    const double lambda_y = s.desirable ? params.lambda_d : params.lambda_u;
    const double arg = s.desirable ? params.beta * (s.reward - z0)
                                   : params.beta * (z0 - s.reward);
    const double sig = sigmoid(arg);
    const double dv_dr =
        (s.desirable ? 1.0 : -1.0) * lambda_y * params.beta * sig * (1.0 - sig);
    grads.push_back(-dv_dr * inv_n);
  }
  return grads;
}

ordered_json LoraPreset::to_json() const {
  ordered_json j;
  j["finetune"] = {{"epochs", epochs_finetune},
                   {"batch_size", batch_finetune},
                   {"learning_rate", learning_rate},
                   {"max_len", max_len},
                   {"lora_rank", lora_rank},
                   {"lora_alpha", lora_alpha},
                   {"lora_dropout", lora_dropout}};
  j["alignment"] = {{"epochs", epochs_alignment},
                    {"batch_size", batch_alignment},
                    {"learning_rate", learning_rate},
                    {"max_len", max_len},
                    {"lora_rank", lora_rank},
                    {"lora_alpha", lora_alpha},
                    {"lora_dropout", lora_dropout}};
  return j;
}

}  // namespace cci
