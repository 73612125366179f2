// SPDX-License-Identifier: Apache-2.0
// intentctl: runs the intent pipeline stages from a JSON run config.
//
// Exit codes: 0 ok, 2 config, 3 missing prerequisite, 4 transport/protocol,
// 5 metric/parse/training failure, 1 anything else.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <csignal>
#include <filesystem>
#include <iostream>
#include <memory>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "intent/corpus_io.hpp"
#include "intent/errors.hpp"
#include "intent/mock_server.hpp"
#include "intent/pipeline.hpp"

namespace fs = std::filesystem;
using namespace intent;

namespace {

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string endpoint_override;
  std::string mock;
  std::string output_dir;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config, "Run config (JSON)")->required();
  cmd->add_option("--seed", f.seed, "Override the run seed");
  cmd->add_option("--endpoint-override", f.endpoint_override,
                  "Send every gateway request to this chat-completions base URL");
  cmd->add_option("--mock", f.mock, "Serve this fixture on a local mock server for the run");
  cmd->add_option("--output-dir", f.output_dir, "Override the output directory");
}

RunConfig load(const CommonFlags& f) {
  RunConfig c = load_run_config(f.config);
  if (f.seed) c.seed = *f.seed;
  if (!f.output_dir.empty()) c.output_dir = fs::absolute(f.output_dir);
  if (!f.endpoint_override.empty() && !f.mock.empty())
    throw ConfigError("--endpoint-override and --mock are mutually exclusive");
  if (!f.endpoint_override.empty()) {
    // An explicit endpoint wins over a mock fixture named in the config.
    c.mock_fixture.reset();
    override_endpoints(c, f.endpoint_override);
  }
  if (!f.mock.empty()) c.mock_fixture = fs::absolute(f.mock);
  return c;
}

// Boots the mock when one is requested and points the gateways at it.
std::unique_ptr<MockServer> maybe_mock(RunConfig& c, bool wanted) {
  if (!wanted || !c.mock_fixture) return nullptr;
  fs::create_directories(c.run_dir());
  MockServer::Options opts;
  opts.transcript_path = c.run_dir() / "mock_transcript.jsonl";
  fs::remove(*opts.transcript_path);
  auto server = run_mock(*c.mock_fixture, 0, opts);
  override_endpoints(c, server->endpoint());
  std::cerr << "mock: serving " << c.mock_fixture->string() << " at " << server->endpoint() << '\n';
  return server;
}

void run_stages(RunConfig c, const std::vector<Stage>& stages, bool mock_requested) {
  bool network = false;
  for (Stage s : stages)
    network |= s == Stage::generate || s == Stage::judge ||
               (s == Stage::classify_eval && c.classify_baseline);
  auto server = maybe_mock(c, mock_requested && network);
  for (Stage s : stages) {
    const auto t0 = std::chrono::steady_clock::now();
    run_stage(c, s);
    const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - t0;
    std::cerr << stage_name(s) << ": done in " << dt.count() << " s\n";
  }
}

int e2e(const CommonFlags& f, bool update_golden) {
  RunConfig c = load(f);
  if (!c.mock_fixture) throw ConfigError("e2e needs a mock fixture (--mock or mock_fixture)");
  if (!c.golden_report) throw ConfigError("e2e needs golden_report in the config");
  const auto t0 = std::chrono::steady_clock::now();
  fs::remove_all(c.run_dir());
  run_stages(c, {kAllStages.begin(), kAllStages.end()}, true);
  const std::string got = read_file(c.run_dir() / artifact::kReport);
  const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - t0;
  if (update_golden) {
    write_file_atomic(*c.golden_report, got);
    std::cout << "e2e: golden report updated at " << c.golden_report->string() << '\n';
    return 0;
  }
  const std::string want = read_file(*c.golden_report);
  if (got != want) {
    std::istringstream a(got), b(want);
    std::string la, lb;
    std::size_t line = 0;
    while (true) {
      const bool ha = static_cast<bool>(std::getline(a, la));
      const bool hb = static_cast<bool>(std::getline(b, lb));
      ++line;
      if (!ha && !hb) break;
      if (la != lb || ha != hb) {
        std::cerr << "line " << line << "\n  got:  " << (ha ? la : "<eof>") << "\n  want: "
                  << (hb ? lb : "<eof>") << '\n';
        break;
      }
    }
    throw MetricError("e2e: report differs from golden " + c.golden_report->string());
  }
  std::cout << "e2e: report matches golden (" << dt.count() << " s)\n";
  return 0;
}

int serve_mock(const std::string& fixture, int port, int delay_ms, const std::string& transcript) {
  MockServer::Options opts;
  opts.response_delay_ms = delay_ms;
  if (!transcript.empty()) opts.transcript_path = transcript;
  auto server = run_mock(fixture, port, opts);
  std::cout << server->endpoint() << std::endl;
  static std::atomic<bool> stop{false};
  std::signal(SIGINT, [](int) { stop = true; });
  std::signal(SIGTERM, [](int) { stop = true; });
  while (!stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
  server->stop();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Browsing-history intent prediction pipeline"};
  app.require_subcommand(1);

  CommonFlags flags;
  std::vector<std::pair<CLI::App*, Stage>> stage_cmds;
  for (Stage s : kAllStages) {
    auto* cmd = app.add_subcommand(std::string(stage_name(s)), "Run the " + std::string(stage_name(s)) + " stage");
    add_common(cmd, flags);
    stage_cmds.emplace_back(cmd, s);
  }

  std::vector<std::string> stage_names;
  auto* run = app.add_subcommand("run", "Run the listed stages in pipeline order");
  add_common(run, flags);
  run->add_option("--stage", stage_names, "Stage name; repeat or comma-separate")
      ->delimiter(',')
      ->required();

  bool update_golden = false;
  auto* e2e_cmd = app.add_subcommand("e2e", "Run every stage against the mock and compare with the golden report");
  add_common(e2e_cmd, flags);
  e2e_cmd->add_flag("--update-golden", update_golden, "Overwrite the golden report instead of comparing");

  std::string fixture, transcript;
  int port = 8080, delay_ms = 0;
  auto* mock = app.add_subcommand("mock", "Serve a fixture file as a chat-completions endpoint");
  mock->add_option("--fixture", fixture, "Fixture JSONL")->required()->check(CLI::ExistingFile);
  mock->add_option("--port", port, "Port (0 picks a free one)");
  mock->add_option("--delay-ms", delay_ms, "Delay before every response");
  mock->add_option("--transcript", transcript, "Append served requests to this JSONL file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // Usage errors share the config-error exit code; --help exits 0.
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    for (const auto& [cmd, stage] : stage_cmds)
      if (cmd->parsed()) {
        run_stages(load(flags), {stage}, true);
        return 0;
      }
    if (run->parsed()) {
      std::vector<Stage> stages;
      for (const auto& name : stage_names) {
        const auto s = parse_stage(name);
        if (!s) throw ConfigError("unknown stage '" + name + "'");
        stages.push_back(*s);
      }
      std::sort(stages.begin(), stages.end());
      stages.erase(std::unique(stages.begin(), stages.end()), stages.end());
      run_stages(load(flags), stages, true);
      return 0;
    }
    if (e2e_cmd->parsed()) return e2e(flags, update_golden);
    if (mock->parsed()) return serve_mock(fixture, port, delay_ms, transcript);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const PrerequisiteError& e) {
    std::cerr << "missing prerequisite: " << e.what() << '\n';
    return 3;
  } catch (const TransportError& e) {
    std::cerr << "transport error: " << e.what() << '\n';
    return 4;
  } catch (const ProtocolError& e) {
    std::cerr << "protocol error: " << e.what() << '\n';
    return 4;
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return 5;
  } catch (const MetricError& e) {
    std::cerr << "metric error: " << e.what() << '\n';
    return 5;
  } catch (const TrainingDiverged& e) {
    std::cerr << "training diverged: " << e.what() << '\n';
    return 5;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid input: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
