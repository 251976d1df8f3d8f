// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <atomic>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace cci {

enum class Role { System, User, Assistant };

std::string to_string(Role r);

struct ChatMessage {
  Role role = Role::User;
  std::string content;
};

// One chat-completion endpoint. base_url schemes:
//   http:// https://       remote chat-completion API
//   stub:text=...          fixed-text local stub (offline runs)
//   replay:file=PATH       file-backed replay of recorded transcripts
struct LlmEndpoint {
  std::string name;
  std::string base_url;
  std::string model_id;
  std::string api_key_env;
  double timeout_s = 30.0;
  int max_retries = 3;
  double backoff_base_s = 1.0;  // exponential, factor 2
};

struct ChatRequest {
  std::vector<ChatMessage> messages;
  double temperature = 0.0;
  int max_tokens = 256;
};

struct ChatResult {
  bool ok = false;
  std::string text;
  std::string error;
  double latency_s = 0.0;
  int attempts = 0;
};

nlohmann::ordered_json request_to_json(const std::string& model_id,
                                       const ChatRequest& req);
// Stable content key used by the replay store (model + messages + sampling).
std::string request_key(const std::string& model_id, const ChatRequest& req);

// Raw single-attempt outcome from a backend.
struct BackendResult {
  bool ok = false;
  std::string text;
  std::string error;
  int http_status = 0;
  bool retryable = false;
};

class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  virtual BackendResult complete(const LlmEndpoint& endpoint,
                                 const ChatRequest& req) = 0;
};

// Programmable in-process backend for tests and offline runs.
class StubBackend : public ChatBackend {
 public:
  using Handler = std::function<std::string(const ChatRequest&)>;

  explicit StubBackend(std::string fixed_text);
  explicit StubBackend(Handler handler);

  void set_latency_ms(int ms) { latency_ms_ = ms; }
  void fail_first(int n) { fail_remaining_ = n; }
  int calls() const { return calls_.load(); }

  BackendResult complete(const LlmEndpoint& endpoint,
                         const ChatRequest& req) override;

 private:
  Handler handler_;
  int latency_ms_ = 0;
  std::atomic<int> fail_remaining_{0};
  std::atomic<int> calls_{0};
};

// Replays recorded completions keyed by request content; in record mode it
// wraps an inner backend and appends every new completion to the store.
class ReplayBackend : public ChatBackend {
 public:
  explicit ReplayBackend(std::string store_path,
                         std::shared_ptr<ChatBackend> inner = nullptr);

  BackendResult complete(const LlmEndpoint& endpoint,
                         const ChatRequest& req) override;

 private:
  std::string store_path_;
  std::shared_ptr<ChatBackend> inner_;
  std::mutex mu_;
  std::map<std::string, std::string> store_;
};

struct GatewayOptions {
  std::string transcript_path;  // JSON Lines, one line per attempt
  bool sleep_on_retry = true;   // tests disable to avoid real backoff waits
};

// Uniform client over chat-completion backends: deterministic settings,
// bounded retries with exponential backoff, order-stable bounded-concurrency
// batches, transcript logging.
class Gateway {
 public:
  explicit Gateway(GatewayOptions opts = {});

  // Overrides URL-scheme resolution for the named endpoint.
  void register_backend(const std::string& endpoint_name,
                        std::shared_ptr<ChatBackend> backend);

  ChatResult chat_complete(const LlmEndpoint& endpoint,
                           const std::vector<ChatMessage>& messages,
                           double temperature = 0.0, int max_tokens = 256);
  ChatResult chat_complete(const LlmEndpoint& endpoint, const ChatRequest& req);

  // Results aligned to request order; at most max_in_flight pending at once.
  // Per-request failures are carried in the result slots.
  std::vector<ChatResult> chat_complete_batch(
      const LlmEndpoint& endpoint, const std::vector<ChatRequest>& requests,
      int max_in_flight = 4);

 private:
  std::shared_ptr<ChatBackend> resolve(const LlmEndpoint& endpoint);
  void log_attempt(const LlmEndpoint& endpoint, const ChatRequest& req,
                   int attempt, const BackendResult& result, double latency_s);

  GatewayOptions opts_;
  std::mutex mu_;
  std::map<std::string, std::shared_ptr<ChatBackend>> registered_;
  std::map<std::string, std::shared_ptr<ChatBackend>> cache_;
};

// Parses stub:/replay: URLs; throws DataError on unknown scheme.
std::shared_ptr<ChatBackend> make_backend_from_url(const std::string& base_url);

}  // namespace cci
