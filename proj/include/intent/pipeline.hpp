// SPDX-License-Identifier: Apache-2.0
#pragma once

// Run configuration and the six pipeline stages. Every artifact lands under
// <output_dir>/<run_id>/ and is written atomically.

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "intent/gateway.hpp"
#include "intent/model.hpp"
#include "intent/prompts.hpp"
#include "intent/synth.hpp"
#include "intent/train.hpp"

namespace intent {

enum class Stage { synth, train, classify_eval, generate, judge, report };

inline constexpr std::array<Stage, 6> kAllStages = {Stage::synth,    Stage::train,
                                                    Stage::classify_eval, Stage::generate,
                                                    Stage::judge,    Stage::report};

std::string_view stage_name(Stage s);  // "classify-eval", ...
std::optional<Stage> parse_stage(std::string_view name);

// Optional informational probe: trains both variants on plant_position_probe.
struct ProbeSettings {
  std::size_t n_sessions = 600;
  std::size_t epochs = 10;
};

struct RunConfig {
  std::filesystem::path base_dir;  // relative paths resolve against this
  std::string run_id = "run";
  std::filesystem::path output_dir = "runs";
  std::uint64_t seed = 0;

  // Existing corpus to use instead of generating one.
  std::optional<std::filesystem::path> corpus_path;
  GenSpec synth;
  std::size_t min_pages = 5;
  SplitRatios split;
  std::size_t vocab_min_freq = 1;

  ModelConfig model;
  TrainOptions train;
  std::optional<GridSpec> grid;
  std::optional<ProbeSettings> probe;

  std::optional<GatewayConfig> classify_baseline;
  ClassLexicon lexicon = ClassLexicon::defaults();

  std::optional<GatewayConfig> generator;
  std::optional<GatewayConfig> judge;
  std::vector<GenVariant> variants = {kAllVariants.begin(), kAllVariants.end()};
  std::size_t m = 5;
  Split eval_split = Split::test;
  std::size_t max_users = 0;  // 0: every user of the evaluation split

  std::optional<std::filesystem::path> human_labels;
  std::optional<std::filesystem::path> golden_report;
  std::optional<std::filesystem::path> mock_fixture;

  std::filesystem::path run_dir() const { return output_dir / run_id; }
  std::filesystem::path resolve(const std::filesystem::path& p) const;

  // Stream seeds, all derived from `seed`.
  std::uint64_t synth_seed() const;
  std::uint64_t split_seed() const;
  std::uint64_t model_seed() const;
  std::uint64_t train_seed() const;
  std::uint64_t shuffle_seed(std::string_view user_id) const;
};

// Parses and validates; throws ConfigError naming the offending field.
RunConfig parse_run_config(const nlohmann::json& j, const std::filesystem::path& base_dir);
RunConfig load_run_config(const std::filesystem::path& path);

// Points every configured gateway at `endpoint`.
void override_endpoints(RunConfig& config, const std::string& endpoint);

// Artifact file names inside run_dir().
namespace artifact {
inline constexpr std::string_view kCorpus = "corpus.jsonl";
inline constexpr std::string_view kVocab = "vocab.txt";
inline constexpr std::string_view kCheckpoint = "model.ckpt";
inline constexpr std::string_view kHistory = "train_history.json";
inline constexpr std::string_view kProbe = "probe_comparison.json";
inline constexpr std::string_view kPredictions = "predictions.jsonl";
inline constexpr std::string_view kBaselinePredictions = "baseline_predictions.jsonl";
inline constexpr std::string_view kClassifyReport = "classify_report.json";
inline constexpr std::string_view kClassifyReportMd = "classify_report.md";
inline constexpr std::string_view kCandidates = "candidates.jsonl";
inline constexpr std::string_view kJudgments = "judgments.jsonl";
inline constexpr std::string_view kReport = "report.json";
inline constexpr std::string_view kReportMd = "report.md";
}  // namespace artifact

void run_synth(const RunConfig& config);
void run_train(const RunConfig& config);
void run_classify_eval(const RunConfig& config);
void run_generate(const RunConfig& config);
void run_judge(const RunConfig& config);
void run_report(const RunConfig& config);

void run_stage(const RunConfig& config, Stage stage);

// The report body as written to report.json.
nlohmann::ordered_json build_report(const RunConfig& config);

// Pretty JSON with a trailing newline; the byte form of every JSON artifact.
std::string dump_artifact(const nlohmann::ordered_json& j);

}  // namespace intent
