// SPDX-License-Identifier: Apache-2.0
#include "intent/gateway.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <thread>

#include <httplib.h>

#include "intent/errors.hpp"

namespace intent {

void ChatRequest::validate() const {
  if (temperature < 0) throw std::invalid_argument("temperature must be >= 0");
  const bool has_user = std::any_of(messages.begin(), messages.end(),
                                    [](const ChatMessage& m) { return m.role == "user"; });
  if (!has_user) throw std::invalid_argument("chat request needs a user message");
  for (const auto& m : messages)
    if (m.role != "system" && m.role != "user" && m.role != "assistant")
      throw std::invalid_argument("unknown chat role '" + m.role + "'");
}

std::string serialize_request(const ChatRequest& r) {
  std::string out = "{\"model\":" + nlohmann::json(r.model).dump() + ",\"messages\":[";
  for (std::size_t i = 0; i < r.messages.size(); ++i) {
    if (i) out += ',';
    out += "{\"role\":" + nlohmann::json(r.messages[i].role).dump() +
           ",\"content\":" + nlohmann::json(r.messages[i].content).dump() + "}";
  }
  out += "],\"temperature\":";
  if (std::floor(r.temperature) == r.temperature && std::abs(r.temperature) < 1e15)
    out += std::to_string(static_cast<long long>(r.temperature));
  else
    out += nlohmann::json(r.temperature).dump();
  out += ",\"max_tokens\":" + std::to_string(r.max_tokens) + "}";
  return out;
}

ChatRequest parse_request(std::string_view body) {
  const auto j = nlohmann::json::parse(body);
  ChatRequest r;
  r.model = j.value("model", "");
  for (const auto& m : j.at("messages"))
    r.messages.push_back({m.at("role").get<std::string>(), m.at("content").get<std::string>()});
  r.temperature = j.value("temperature", 0.0);
  r.max_tokens = j.value("max_tokens", std::size_t{0});
  return r;
}

std::string request_fingerprint(const std::vector<ChatMessage>& messages) {
  std::string joined;
  for (const auto& m : messages) joined += m.content;
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(joined)));
  return buf;
}

void GatewayConfig::validate() const {
  if (endpoint.empty()) throw ConfigError("gateway endpoint is empty");
  if (max_in_flight < 1) throw ConfigError("max_in_flight must be >= 1");
  if (max_in_flight > 1024) throw ConfigError("max_in_flight must be <= 1024");
  if (temperature < 0) throw ConfigError("temperature must be >= 0");
  if (timeout_s <= 0) throw ConfigError("timeout must be > 0");
}

void from_json(const nlohmann::json& j, GatewayConfig& c) {
  const GatewayConfig d;
  c.endpoint = j.value("endpoint", d.endpoint);
  c.api_key_env = j.value("api_key_env", d.api_key_env);
  c.model = j.value("model", d.model);
  c.temperature = j.value("temperature", d.temperature);
  c.max_tokens = j.value("max_tokens", d.max_tokens);
  c.timeout_s = j.value("timeout_s", d.timeout_s);
  c.max_retries = j.value("max_retries", d.max_retries);
  c.backoff_base_s = j.value("backoff_base_s", d.backoff_base_s);
  c.backoff_max_s = j.value("backoff_max_s", d.backoff_max_s);
  c.max_in_flight = j.value("max_in_flight", d.max_in_flight);
}

void to_json(nlohmann::json& j, const GatewayConfig& c) {
  j = nlohmann::json{{"endpoint", c.endpoint},         {"api_key_env", c.api_key_env},
                     {"model", c.model},               {"temperature", c.temperature},
                     {"max_tokens", c.max_tokens},     {"timeout_s", c.timeout_s},
                     {"max_retries", c.max_retries},   {"backoff_base_s", c.backoff_base_s},
                     {"backoff_max_s", c.backoff_max_s}, {"max_in_flight", c.max_in_flight}};
}

namespace {

struct Endpoint {
  std::string origin;  // scheme://host[:port]
  std::string path;    // base path + /chat/completions
};

Endpoint split_endpoint(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ConfigError("endpoint must include a scheme: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  Endpoint e;
  e.origin = url.substr(0, path_start);
  std::string base = path_start == std::string::npos ? "" : url.substr(path_start);
  while (!base.empty() && base.back() == '/') base.pop_back();
  e.path = base + "/chat/completions";
  return e;
}

bool retryable_status(int status) { return status == 429 || status >= 500; }

std::string extract_content(const std::string& body) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(body);
  } catch (const std::exception&) {
    throw ProtocolError("response is not JSON: " + body.substr(0, 200));
  }
  if (!j.contains("choices") || !j["choices"].is_array() || j["choices"].empty())
    throw ProtocolError("response has no choices: " + body.substr(0, 200));
  const auto& choice = j["choices"][0];
  if (!choice.contains("message") || !choice["message"].contains("content") ||
      !choice["message"]["content"].is_string())
    throw ProtocolError("response choice has no message content");
  return choice["message"]["content"].get<std::string>();
}

struct GateGuard {
  std::counting_semaphore<1024>& gate;
  explicit GateGuard(std::counting_semaphore<1024>& g) : gate(g) { gate.acquire(); }
  ~GateGuard() { gate.release(); }
};

}  // namespace

ChatClient::ChatClient(GatewayConfig config, Sleeper sleeper)
    : config_(std::move(config)),
      sleeper_(std::move(sleeper)),
      jitter_rng_(fnv1a64(config_.endpoint)) {
  config_.validate();
  gate_ = std::make_unique<std::counting_semaphore<1024>>(
      static_cast<std::ptrdiff_t>(config_.max_in_flight));
  if (!sleeper_)
    sleeper_ = [](double s) { std::this_thread::sleep_for(std::chrono::duration<double>(s)); };
}

ChatRequest ChatClient::make_request(std::vector<ChatMessage> messages) const {
  return {config_.model, std::move(messages), config_.temperature, config_.max_tokens};
}

double ChatClient::next_delay(std::size_t retry, double previous) {
  double jitter;
  {
    std::lock_guard lock(jitter_mutex_);
    jitter = uniform01(jitter_rng_) * config_.backoff_base_s;
  }
  const double exp = config_.backoff_base_s * std::pow(2.0, static_cast<double>(retry));
  return std::max(previous, std::min(config_.backoff_max_s, exp + jitter));
}

ChatResult ChatClient::complete_detailed(const ChatRequest& request) {
  request.validate();
  const Endpoint ep = split_endpoint(config_.endpoint);
  const std::string body = serialize_request(request);
  httplib::Headers headers;
  if (!config_.api_key_env.empty()) {
    if (const char* key = std::getenv(config_.api_key_env.c_str()); key && *key)
      headers.emplace("Authorization", std::string("Bearer ") + key);
  }

  ChatResult result;
  std::string last_error;
  double delay = 0.0;
  for (std::size_t attempt = 0; attempt <= config_.max_retries; ++attempt) {
    if (attempt > 0) {
      delay = next_delay(attempt - 1, delay);
      result.backoff_delays_s.push_back(delay);
      sleeper_(delay);
    }
    ++result.attempts;
    httplib::Result res{nullptr, httplib::Error::Unknown};
    {
      GateGuard guard(*gate_);
      httplib::Client cli(ep.origin);
      const auto secs = static_cast<time_t>(config_.timeout_s);
      const auto usecs = static_cast<time_t>((config_.timeout_s - static_cast<double>(secs)) * 1e6);
      cli.set_connection_timeout(secs, usecs);
      cli.set_read_timeout(secs, usecs);
      cli.set_write_timeout(secs, usecs);
      res = cli.Post(ep.path, headers, body, "application/json");
    }
    if (!res) {
      last_error = "request to " + config_.endpoint + " failed: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status == 200) {
      result.content = extract_content(res->body);
      return result;
    }
    last_error = "HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 200);
    if (!retryable_status(res->status)) throw TransportError(last_error);
  }
  throw TransportError("retries exhausted after " + std::to_string(result.attempts) +
                       " attempts; last error: " + last_error);
}

std::vector<std::string> ChatClient::complete_all(const std::vector<ChatRequest>& requests) {
  std::vector<std::string> out(requests.size());
  const std::size_t workers = std::min(config_.max_in_flight, requests.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i; (i = next.fetch_add(1)) < requests.size();) {
          try {
            out[i] = complete(requests[i]);
          } catch (...) {
            std::lock_guard lock(failure_mutex);
            if (!failure) failure = std::current_exception();
            next = requests.size();
          }
        }
      });
    }
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

}  // namespace intent
