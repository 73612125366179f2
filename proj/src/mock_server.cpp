// SPDX-License-Identifier: Apache-2.0
#include "intent/mock_server.hpp"

#include <chrono>
#include <fstream>

#include <httplib.h>
#include <json.hpp>

#include "intent/corpus_io.hpp"
#include "intent/errors.hpp"
#include "intent/gateway.hpp"

namespace intent {

std::vector<FixtureEntry> parse_fixture(std::string_view jsonl) {
  std::vector<FixtureEntry> out;
  std::size_t pos = 0, line_no = 0;
  while (pos < jsonl.size()) {
    const std::size_t end = std::min(jsonl.find('\n', pos), jsonl.size());
    const std::string_view line = jsonl.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      FixtureEntry e;
      if (j.contains("match") && !j["match"].is_null()) e.match = j["match"].get<std::string>();
      e.reply = j.value("reply", "");
      e.status = j.value("status", 200);
      out.push_back(std::move(e));
    } catch (const std::exception& ex) {
      throw ConfigError("fixture line " + std::to_string(line_no) + ": " + ex.what());
    }
  }
  return out;
}

std::vector<FixtureEntry> load_fixture(const std::filesystem::path& path) {
  return parse_fixture(read_file(path));
}

MockServer::MockServer(std::vector<FixtureEntry> fixture) : MockServer(std::move(fixture), Options{}) {}

MockServer::MockServer(std::vector<FixtureEntry> fixture, Options options)
    : options_(std::move(options)) {
  for (auto& e : fixture) {
    if (e.match)
      matched_.push_back(std::move(e));
    else
      sequence_.push_back(std::move(e));
  }
}

MockServer::~MockServer() { stop(); }

void MockServer::handle(const std::string& body, int& status, std::string& response) {
  std::string fingerprint;
  try {
    fingerprint = request_fingerprint(parse_request(body).messages);
  } catch (const std::exception& e) {
    status = 400;
    response = nlohmann::json{{"error", {{"message", std::string("bad request: ") + e.what()}}}}.dump();
    return;
  }

  std::lock_guard lock(mutex_);
  std::optional<FixtureEntry> chosen;
  for (const auto& e : matched_)
    if (*e.match == fingerprint) {
      chosen = e;
      break;
    }
  if (!chosen && !sequence_.empty()) {
    chosen = std::move(sequence_.front());
    sequence_.pop_front();
  }

  TranscriptEntry entry;
  entry.seq = transcript_.size();
  entry.fingerprint = fingerprint;
  entry.body = body;
  if (!chosen) {
    status = 404;
    response = nlohmann::json{{"error",
                               {{"message", "no fixture entry for fingerprint " + fingerprint +
                                                " and the reply sequence is exhausted"}}}}
                   .dump();
  } else if (chosen->status != 200) {
    status = chosen->status;
    response = nlohmann::json{{"error", {{"message", chosen->reply}}}}.dump();
    entry.reply = chosen->reply;
  } else {
    status = 200;
    nlohmann::ordered_json j;
    j["id"] = "mock-" + std::to_string(entry.seq);
    j["object"] = "chat.completion";
    j["choices"] = nlohmann::ordered_json::array(
        {{{"index", 0},
          {"message", {{"role", "assistant"}, {"content", chosen->reply}}},
          {"finish_reason", "stop"}}});
    response = j.dump();
    entry.reply = chosen->reply;
  }
  entry.status = status;
  if (options_.transcript_path) {
    nlohmann::ordered_json line{{"seq", entry.seq},       {"fingerprint", entry.fingerprint},
                                {"status", entry.status}, {"body", entry.body},
                                {"reply", entry.reply}};
    std::ofstream out(*options_.transcript_path, std::ios::app);
    out << line.dump() << '\n';
  }
  transcript_.push_back(std::move(entry));
}

int MockServer::start(int port) {
  server_ = std::make_unique<httplib::Server>();
  server_->new_task_queue = [] { return new httplib::ThreadPool(16); };
  server_->Post(R"(.*/chat/completions)", [this](const httplib::Request& req, httplib::Response& res) {
    const std::size_t now = ++in_flight_;
    std::size_t seen = max_concurrency_.load();
    while (now > seen && !max_concurrency_.compare_exchange_weak(seen, now)) {
    }
    if (options_.response_delay_ms > 0)
      std::this_thread::sleep_for(std::chrono::milliseconds(options_.response_delay_ms));
    int status = 200;
    std::string body;
    handle(req.body, status, body);
    res.status = status;
    res.set_content(body, "application/json");
    --in_flight_;
  });
  if (port == 0)
    port_ = server_->bind_to_any_port("127.0.0.1");
  else
    port_ = server_->bind_to_port("127.0.0.1", port) ? port : -1;
  if (port_ <= 0) throw TransportError("mock server could not bind a port");
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
  return port_;
}

void MockServer::stop() {
  if (server_) server_->stop();
  if (thread_.joinable()) thread_.join();
}

std::string MockServer::endpoint() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1"; }

std::vector<TranscriptEntry> MockServer::transcript() const {
  std::lock_guard lock(mutex_);
  return transcript_;
}

std::size_t MockServer::remaining_sequence() const {
  std::lock_guard lock(mutex_);
  return sequence_.size();
}

std::unique_ptr<MockServer> run_mock(const std::filesystem::path& fixture_path, int port,
                                     MockServer::Options options) {
  auto server = std::make_unique<MockServer>(load_fixture(fixture_path), std::move(options));
  server->start(port);
  return server;
}

}  // namespace intent
