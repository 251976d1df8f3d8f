// SPDX-License-Identifier: Apache-2.0
#include "cci/llm_gateway.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <thread>

#include <httplib.h>

#include "cci/corpus.hpp"

namespace cci {

using nlohmann::ordered_json;

std::string to_string(Role r) {
  switch (r) {
    case Role::System: return "system";
    case Role::User: return "user";
    case Role::Assistant: return "assistant";
  }
  return "user";
}

ordered_json request_to_json(const std::string& model_id,
                             const ChatRequest& req) {
  ordered_json j;
  j["model"] = model_id;
  auto msgs = ordered_json::array();
  for (const ChatMessage& m : req.messages)
    msgs.push_back({{"role", to_string(m.role)}, {"content", m.content}});
  j["messages"] = msgs;
  j["temperature"] = req.temperature;
  j["max_tokens"] = req.max_tokens;
  return j;
}

namespace {

std::string fnv1a_hex(const std::string& data) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(h));
  return buf;
}

double now_s() {
  return std::chrono::duration<double>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

std::string iso_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

}  // namespace

std::string request_key(const std::string& model_id, const ChatRequest& req) {
  return fnv1a_hex(request_to_json(model_id, req).dump());
}

// ------------------------------------------------------------------ HTTP ---

namespace {

class HttpBackend : public ChatBackend {
 public:
  BackendResult complete(const LlmEndpoint& endpoint,
                         const ChatRequest& req) override {
    BackendResult out;
    std::string root = endpoint.base_url;
    std::string prefix;
    const std::size_t scheme = root.find("://");
    if (scheme != std::string::npos) {
      const std::size_t slash = root.find('/', scheme + 3);
      if (slash != std::string::npos) {
        prefix = root.substr(slash);
        root = root.substr(0, slash);
      }
    }
    while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();

    httplib::Client client(root);
    client.set_connection_timeout(std::chrono::duration<double>(endpoint.timeout_s));
    client.set_read_timeout(std::chrono::duration<double>(endpoint.timeout_s));

    httplib::Headers headers;
    if (!endpoint.api_key_env.empty()) {
      if (const char* key = std::getenv(endpoint.api_key_env.c_str()))
        headers.emplace("Authorization", std::string("Bearer ") + key);
    }

    const std::string body = request_to_json(endpoint.model_id, req).dump();
    auto res = client.Post(prefix + "/chat/completions", headers, body,
                           "application/json");
    if (!res) {
      out.error = "network error: " + httplib::to_string(res.error());
      out.retryable = true;
      return out;
    }
    out.http_status = res->status;
    if (res->status < 200 || res->status >= 300) {
      out.error = "http status " + std::to_string(res->status);
      out.retryable = res->status == 429 || res->status >= 500;
      return out;
    }
    try {
      const auto j = nlohmann::json::parse(res->body);
      out.text = j.at("choices").at(0).at("message").at("content")
                     .get<std::string>();
    } catch (const std::exception& ex) {
      out.error = std::string("malformed completion response: ") + ex.what();
      return out;
    }
    if (out.text.empty()) {
      out.error = "empty completion";
      return out;
    }
    out.ok = true;
    return out;
  }
};

}  // namespace

// ------------------------------------------------------------------ stub ---

StubBackend::StubBackend(std::string fixed_text)
    : handler_([text = std::move(fixed_text)](const ChatRequest&) {
        return text;
      }) {}

StubBackend::StubBackend(Handler handler) : handler_(std::move(handler)) {}

BackendResult StubBackend::complete(const LlmEndpoint&,
                                    const ChatRequest& req) {
  calls_.fetch_add(1);
  if (latency_ms_ > 0)
    std::this_thread::sleep_for(std::chrono::milliseconds(latency_ms_));
  BackendResult out;
  int remaining = fail_remaining_.load();
  while (remaining > 0) {
    if (fail_remaining_.compare_exchange_weak(remaining, remaining - 1)) {
      out.error = "injected failure";
      out.retryable = true;
      return out;
    }
  }
  out.text = handler_(req);
  if (out.text.empty()) {
    out.error = "empty completion";
    return out;
  }
  out.ok = true;
  return out;
}

// ---------------------------------------------------------------- replay ---

ReplayBackend::ReplayBackend(std::string store_path,
                             std::shared_ptr<ChatBackend> inner)
    : store_path_(std::move(store_path)), inner_(std::move(inner)) {
  std::ifstream in(store_path_);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.contains("key") || !j.contains("response"))
      continue;
    store_[j.at("key").get<std::string>()] =
        j.at("response").get<std::string>();
  }
}

BackendResult ReplayBackend::complete(const LlmEndpoint& endpoint,
                                      const ChatRequest& req) {
  const std::string key = request_key(endpoint.model_id, req);
  {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = store_.find(key);
    if (it != store_.end()) {
      BackendResult out;
      out.ok = true;
      out.text = it->second;
      return out;
    }
  }
  if (!inner_) {
    BackendResult out;
    out.error = "replay store has no response for request key " + key;
    return out;
  }
  BackendResult fresh = inner_->complete(endpoint, req);
  if (fresh.ok) {
    std::lock_guard<std::mutex> lock(mu_);
    if (!store_.count(key)) {
      store_[key] = fresh.text;
      std::ofstream out(store_path_, std::ios::app);
      ordered_json j;
      j["key"] = key;
      j["model"] = endpoint.model_id;
      j["response"] = fresh.text;
      out << j.dump() << '\n';
    }
  }
  return fresh;
}

// --------------------------------------------------------------- gateway ---

namespace {

std::map<std::string, std::string> parse_url_params(const std::string& spec) {
  std::map<std::string, std::string> params;
  std::size_t pos = 0;
  while (pos < spec.size()) {
    std::size_t amp = spec.find('&', pos);
    if (amp == std::string::npos) amp = spec.size();
    const std::string kv = spec.substr(pos, amp - pos);
    const std::size_t eq = kv.find('=');
    if (eq != std::string::npos)
      params[kv.substr(0, eq)] = kv.substr(eq + 1);
    pos = amp + 1;
  }
  return params;
}

}  // namespace

std::shared_ptr<ChatBackend> make_backend_from_url(const std::string& base_url) {
  if (base_url.rfind("http://", 0) == 0 || base_url.rfind("https://", 0) == 0)
    return std::make_shared<HttpBackend>();
  if (base_url.rfind("stub:", 0) == 0) {
    auto params = parse_url_params(base_url.substr(5));
    auto stub = std::make_shared<StubBackend>(
        params.count("text") ? params["text"] : std::string("OK"));
    if (params.count("latency_ms"))
      stub->set_latency_ms(std::stoi(params["latency_ms"]));
    if (params.count("fail_first"))
      stub->fail_first(std::stoi(params["fail_first"]));
    return stub;
  }
  if (base_url.rfind("replay:", 0) == 0) {
    auto params = parse_url_params(base_url.substr(7));
    if (!params.count("file"))
      throw DataError("replay URL needs file=PATH: " + base_url);
    return std::make_shared<ReplayBackend>(params["file"]);
  }
  throw DataError("unsupported endpoint URL: " + base_url);
}

Gateway::Gateway(GatewayOptions opts) : opts_(std::move(opts)) {}

void Gateway::register_backend(const std::string& endpoint_name,
                               std::shared_ptr<ChatBackend> backend) {
  std::lock_guard<std::mutex> lock(mu_);
  registered_[endpoint_name] = std::move(backend);
}

std::shared_ptr<ChatBackend> Gateway::resolve(const LlmEndpoint& endpoint) {
  std::lock_guard<std::mutex> lock(mu_);
  if (auto it = registered_.find(endpoint.name); it != registered_.end())
    return it->second;
  if (auto it = cache_.find(endpoint.base_url); it != cache_.end())
    return it->second;
  auto backend = make_backend_from_url(endpoint.base_url);
  cache_[endpoint.base_url] = backend;
  return backend;
}

void Gateway::log_attempt(const LlmEndpoint& endpoint, const ChatRequest& req,
                          int attempt, const BackendResult& result,
                          double latency_s) {
  if (opts_.transcript_path.empty()) return;
  ordered_json j;
  j["ts"] = iso_timestamp();
  j["endpoint"] = endpoint.name;
  j["model"] = endpoint.model_id;
  j["attempt"] = attempt;
  j["ok"] = result.ok;
  if (result.http_status) j["status"] = result.http_status;
  if (!result.ok) j["error"] = result.error;
  j["latency_s"] = latency_s;
  j["request"] = request_to_json(endpoint.model_id, req);
  if (result.ok) j["response"] = result.text;
  std::lock_guard<std::mutex> lock(mu_);
  std::ofstream out(opts_.transcript_path, std::ios::app);
  out << j.dump() << '\n';
}

ChatResult Gateway::chat_complete(const LlmEndpoint& endpoint,
                                  const std::vector<ChatMessage>& messages,
                                  double temperature, int max_tokens) {
  ChatRequest req;
  req.messages = messages;
  req.temperature = temperature;
  req.max_tokens = max_tokens;
  return chat_complete(endpoint, req);
}

ChatResult Gateway::chat_complete(const LlmEndpoint& endpoint,
                                  const ChatRequest& req) {
  auto backend = resolve(endpoint);
  ChatResult result;
  const double start = now_s();
  const int max_attempts = 1 + std::max(0, endpoint.max_retries);
  for (int attempt = 1; attempt <= max_attempts; ++attempt) {
    const double t0 = now_s();
    BackendResult r = backend->complete(endpoint, req);
    log_attempt(endpoint, req, attempt, r, now_s() - t0);
    result.attempts = attempt;
    if (r.ok) {
      result.ok = true;
      result.text = r.text;
      break;
    }
    result.error = r.error;
    if (!r.retryable || attempt == max_attempts) break;
    if (opts_.sleep_on_retry && endpoint.backoff_base_s > 0) {
      const double delay =
          endpoint.backoff_base_s * std::pow(2.0, attempt - 1);
      std::this_thread::sleep_for(std::chrono::duration<double>(delay));
    }
  }
  result.latency_s = now_s() - start;
  return result;
}

std::vector<ChatResult> Gateway::chat_complete_batch(
    const LlmEndpoint& endpoint, const std::vector<ChatRequest>& requests,
    int max_in_flight) {
  if (max_in_flight < 1)
    throw std::invalid_argument("max_in_flight must be >= 1");
  std::vector<ChatResult> results(requests.size());
  if (requests.empty()) return results;

  std::atomic<std::size_t> next{0};
  const std::size_t workers =
      std::min<std::size_t>(max_in_flight, requests.size());
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      while (true) {
        const std::size_t i = next.fetch_add(1);
        if (i >= requests.size()) return;
        results[i] = chat_complete(endpoint, requests[i]);
      }
    });
  }
  for (auto& t : pool) t.join();
  return results;
}

}  // namespace cci
