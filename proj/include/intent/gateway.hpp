// SPDX-License-Identifier: Apache-2.0
#pragma once

// OpenAI-compatible chat-completions client with retries, exponential
// backoff with jitter, and a cap on simultaneous in-flight requests.

#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <semaphore>
#include <string>
#include <vector>

#include <json.hpp>

#include "intent/rng.hpp"

namespace intent {

struct ChatMessage {
  std::string role;  // system | user | assistant
  std::string content;

  bool operator==(const ChatMessage&) const = default;
};

struct ChatRequest {
  std::string model;
  std::vector<ChatMessage> messages;
  double temperature = 0.0;
  std::size_t max_tokens = 512;

  void validate() const;
};

// Body with fixed field order: model, messages, temperature, max_tokens.
// Integral temperatures serialize without a fraction ("temperature":0).
std::string serialize_request(const ChatRequest& request);
ChatRequest parse_request(std::string_view body);

// FNV-1a 64 of the concatenated message contents, as 16 hex digits.
std::string request_fingerprint(const std::vector<ChatMessage>& messages);

struct GatewayConfig {
  std::string endpoint;     // e.g. http://127.0.0.1:8080/v1
  std::string api_key_env;  // name of the env var holding the key; may be empty
  std::string model;
  double temperature = 0.0;
  std::size_t max_tokens = 512;
  double timeout_s = 60.0;
  std::size_t max_retries = 3;
  double backoff_base_s = 0.5;
  double backoff_max_s = 30.0;
  std::size_t max_in_flight = 4;

  void validate() const;
};

void from_json(const nlohmann::json& j, GatewayConfig& c);
void to_json(nlohmann::json& j, const GatewayConfig& c);

struct ChatResult {
  std::string content;
  std::size_t attempts = 0;
  std::vector<double> backoff_delays_s;  // one per retry, non-decreasing
};

class ChatClient {
 public:
  using Sleeper = std::function<void(double seconds)>;

  explicit ChatClient(GatewayConfig config, Sleeper sleeper = {});

  const GatewayConfig& config() const { return config_; }

  // Request with this client's model, temperature and max_tokens.
  ChatRequest make_request(std::vector<ChatMessage> messages) const;

  // Throws TransportError once retries are exhausted, or immediately for
  // non-retryable HTTP statuses; ProtocolError for unusable bodies.
  ChatResult complete_detailed(const ChatRequest& request);
  std::string complete(const ChatRequest& request) { return complete_detailed(request).content; }

  // Runs requests on min(max_in_flight, n) workers; results keep input order.
  std::vector<std::string> complete_all(const std::vector<ChatRequest>& requests);

 private:
  double next_delay(std::size_t retry, double previous);

  GatewayConfig config_;
  Sleeper sleeper_;
  std::unique_ptr<std::counting_semaphore<1024>> gate_;
  std::mutex jitter_mutex_;
  Rng jitter_rng_;
};

}  // namespace intent
