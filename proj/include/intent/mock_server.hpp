// SPDX-License-Identifier: Apache-2.0
#pragma once

// Scripted chat-completions server for offline runs. Replies are chosen by
// request fingerprint when a fixture entry matches it (entries are reusable),
// otherwise from the unmatched entries in FIFO order (each used once).

#include <atomic>
#include <deque>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace httplib {
class Server;
}

namespace intent {

struct FixtureEntry {
  std::optional<std::string> match;  // request fingerprint, or FIFO when empty
  std::string reply;
  int status = 200;
};

// JSONL: {"match": "<fingerprint>"|null, "reply": str, "status": int}
std::vector<FixtureEntry> parse_fixture(std::string_view jsonl);
std::vector<FixtureEntry> load_fixture(const std::filesystem::path& path);

struct TranscriptEntry {
  std::size_t seq = 0;
  std::string fingerprint;
  std::string body;  // request body exactly as received
  int status = 0;
  std::string reply;
};

class MockServer {
 public:
  struct Options {
    int response_delay_ms = 0;
    std::optional<std::filesystem::path> transcript_path;  // JSONL, appended per request
  };

  explicit MockServer(std::vector<FixtureEntry> fixture);
  MockServer(std::vector<FixtureEntry> fixture, Options options);
  ~MockServer();
  MockServer(const MockServer&) = delete;
  MockServer& operator=(const MockServer&) = delete;

  // Binds 127.0.0.1 (port 0 picks a free port) and serves on a background
  // thread. Returns the bound port.
  int start(int port = 0);
  void stop();

  int port() const { return port_; }
  std::string endpoint() const;  // http://127.0.0.1:<port>/v1

  std::vector<TranscriptEntry> transcript() const;
  std::size_t max_concurrency() const { return max_concurrency_.load(); }
  std::size_t remaining_sequence() const;

 private:
  void handle(const std::string& body, int& status, std::string& response);

  std::vector<FixtureEntry> matched_;
  std::deque<FixtureEntry> sequence_;
  Options options_;
  mutable std::mutex mutex_;
  std::vector<TranscriptEntry> transcript_;
  std::atomic<std::size_t> in_flight_{0};
  std::atomic<std::size_t> max_concurrency_{0};
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  int port_ = 0;
};

// Loads a fixture file and starts a server for it.
std::unique_ptr<MockServer> run_mock(const std::filesystem::path& fixture_path, int port = 0,
                                     MockServer::Options options = {});

}  // namespace intent
