// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "intent/session.hpp"

namespace intent {

// Per-class precision/recall plus gold-support-weighted averages. Predictions
// may be unmatched (no class); those count against their gold class's recall
// and toward no class's predicted total.
struct ClassReport {
  std::array<std::array<std::size_t, kNumClasses>, kNumClasses> confusion{};  // [gold][pred]
  std::array<std::size_t, kNumClasses> unmatched{};                           // by gold
  std::array<std::size_t, kNumClasses> support{};                             // gold counts
  std::array<std::size_t, kNumClasses> predicted{};
  std::array<double, kNumClasses> precision{};
  std::array<double, kNumClasses> recall{};
  std::array<double, kNumClasses> f1{};
  double weighted_precision = 0;
  double weighted_recall = 0;
  double weighted_f1 = 0;
  double accuracy = 0;
  std::size_t total = 0;
};

ClassReport eval_report(std::span<const std::optional<IntentClass>> preds,
                        std::span<const IntentClass> golds);

nlohmann::ordered_json to_json(const ClassReport& r);

// Markdown table with rows Metric × Model and columns All, INS, AVL, PRI, WTY, RET.
std::string markdown_table(const std::vector<std::pair<std::string, ClassReport>>& models);

struct JudgmentRecord {
  std::string user_id;
  std::size_t rank = 1;  // 1-based candidate rank
  bool verdict = false;

  bool operator==(const JudgmentRecord&) const = default;
};

struct SimilarAt {
  std::size_t hits = 0;
  std::size_t users = 0;
  double value() const { return users ? static_cast<double>(hits) / static_cast<double>(users) : 0.0; }
};

// Fraction of users with a similar candidate at rank <= m. The user universe
// is given explicitly so users without any candidates count as misses.
SimilarAt similar_at_m(std::span<const JudgmentRecord> records,
                       std::span<const std::string> users, std::size_t m);

// Same, with the universe taken from the records themselves.
SimilarAt similar_at_m(std::span<const JudgmentRecord> records, std::size_t m);

// Judge-vs-human agreement with human labels as ground truth.
struct AgreementStats {
  double cohen_kappa = 0;
  double precision = 0;  // P(human=1 | judge=1)
  double recall = 0;     // P(judge=1 | human=1)
  bool precision_defined = true;
  bool recall_defined = true;
  double observed = 0;  // p_o
  double chance = 0;    // p_e
  std::size_t n_pairs = 0;
  std::size_t both_yes = 0, judge_only = 0, human_only = 0, both_no = 0;
};

AgreementStats agreement_stats(std::span<const bool> judge, std::span<const bool> human);

nlohmann::ordered_json to_json(const AgreementStats& s);

}  // namespace intent
