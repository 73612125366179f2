// SPDX-License-Identifier: Apache-2.0
#include "intent/metrics.hpp"

#include <cstdio>
#include <set>
#include <unordered_map>

#include "intent/errors.hpp"

namespace intent {

ClassReport eval_report(std::span<const std::optional<IntentClass>> preds,
                        std::span<const IntentClass> golds) {
  if (preds.size() != golds.size())
    throw MetricError("prediction/gold length mismatch: " + std::to_string(preds.size()) +
                      " vs " + std::to_string(golds.size()));
  if (golds.empty()) throw MetricError("no examples to evaluate");
  ClassReport r;
  r.total = golds.size();
  std::size_t correct = 0;
  for (std::size_t i = 0; i < golds.size(); ++i) {
    const std::size_t g = index_of(golds[i]);
    ++r.support[g];
    if (!preds[i]) {
      ++r.unmatched[g];
      continue;
    }
    const std::size_t p = index_of(*preds[i]);
    ++r.confusion[g][p];
    ++r.predicted[p];
    if (p == g) ++correct;
  }
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    const double tp = static_cast<double>(r.confusion[c][c]);
    r.precision[c] = r.predicted[c] ? tp / static_cast<double>(r.predicted[c]) : 0.0;
    r.recall[c] = r.support[c] ? tp / static_cast<double>(r.support[c]) : 0.0;
    const double s = r.precision[c] + r.recall[c];
    r.f1[c] = s > 0 ? 2.0 * r.precision[c] * r.recall[c] / s : 0.0;
    const double w = static_cast<double>(r.support[c]) / static_cast<double>(r.total);
    r.weighted_precision += w * r.precision[c];
    r.weighted_recall += w * r.recall[c];
    r.weighted_f1 += w * r.f1[c];
  }
  r.accuracy = static_cast<double>(correct) / static_cast<double>(r.total);
  return r;
}

nlohmann::ordered_json to_json(const ClassReport& r) {
  nlohmann::ordered_json per_class = nlohmann::ordered_json::object();
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    per_class[std::string(class_code(class_at(c)))] = {
        {"precision", r.precision[c]}, {"recall", r.recall[c]}, {"f1", r.f1[c]},
        {"support", r.support[c]},     {"predicted", r.predicted[c]},
        {"unmatched", r.unmatched[c]}};
  }
  nlohmann::ordered_json confusion = nlohmann::ordered_json::array();
  for (std::size_t g = 0; g < kNumClasses; ++g) {
    nlohmann::ordered_json row = nlohmann::ordered_json::array();
    for (std::size_t p = 0; p < kNumClasses; ++p) row.push_back(r.confusion[g][p]);
    row.push_back(r.unmatched[g]);
    confusion.push_back(std::move(row));
  }
  return {{"total", r.total},
          {"accuracy", r.accuracy},
          {"weighted_precision", r.weighted_precision},
          {"weighted_recall", r.weighted_recall},
          {"weighted_f1", r.weighted_f1},
          {"per_class", std::move(per_class)},
          {"confusion_columns", {"INS", "AVL", "PRI", "WTY", "RET", "unmatched"}},
          {"confusion", std::move(confusion)}};
}

namespace {
std::string fmt4(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", x);
  return buf;
}
}  // namespace

std::string markdown_table(const std::vector<std::pair<std::string, ClassReport>>& models) {
  // Unmatched counts outputs that mapped to no class.
  std::string out = "| Metric | Model | All | INS | AVL | PRI | WTY | RET | Unmatched |\n";
  out += "|---|---|---|---|---|---|---|---|---|\n";
  for (const char* metric : {"Precision", "Recall"}) {
    const bool prec = metric[0] == 'P';
    for (const auto& [name, r] : models) {
      out += "| " + std::string(metric) + " | " + name + " | ";
      out += fmt4(prec ? r.weighted_precision : r.weighted_recall);
      for (std::size_t c = 0; c < kNumClasses; ++c)
        out += " | " + fmt4(prec ? r.precision[c] : r.recall[c]);
      std::size_t unmatched = 0;
      for (auto u : r.unmatched) unmatched += u;
      out += " | " + std::to_string(unmatched) + " |\n";
    }
  }
  return out;
}

SimilarAt similar_at_m(std::span<const JudgmentRecord> records,
                       std::span<const std::string> users, std::size_t m) {
  if (m < 1) throw MetricError("m must be >= 1");
  if (users.empty()) throw MetricError("Similar@m over an empty user set");
  std::set<std::string> hit;
  for (const auto& r : records)
    if (r.verdict && r.rank >= 1 && r.rank <= m) hit.insert(r.user_id);
  SimilarAt out;
  std::set<std::string> seen;
  for (const auto& u : users) {
    if (!seen.insert(u).second) continue;
    ++out.users;
    if (hit.contains(u)) ++out.hits;
  }
  return out;
}

SimilarAt similar_at_m(std::span<const JudgmentRecord> records, std::size_t m) {
  std::vector<std::string> users;
  std::set<std::string> seen;
  for (const auto& r : records)
    if (seen.insert(r.user_id).second) users.push_back(r.user_id);
  return similar_at_m(records, users, m);
}

AgreementStats agreement_stats(std::span<const bool> judge, std::span<const bool> human) {
  if (judge.size() != human.size())
    throw MetricError("judge/human label length mismatch");
  if (judge.empty()) throw MetricError("no labeled pairs");
  AgreementStats s;
  s.n_pairs = judge.size();
  for (std::size_t i = 0; i < judge.size(); ++i) {
    if (judge[i] && human[i]) ++s.both_yes;
    else if (judge[i]) ++s.judge_only;
    else if (human[i]) ++s.human_only;
    else ++s.both_no;
  }
  const double n = static_cast<double>(s.n_pairs);
  s.observed = static_cast<double>(s.both_yes + s.both_no) / n;
  const double judge_yes = static_cast<double>(s.both_yes + s.judge_only) / n;
  const double human_yes = static_cast<double>(s.both_yes + s.human_only) / n;
  s.chance = judge_yes * human_yes + (1.0 - judge_yes) * (1.0 - human_yes);
  if (s.chance >= 1.0) throw MetricError("Cohen's kappa undefined: chance agreement is 1");
  s.cohen_kappa = (s.observed - s.chance) / (1.0 - s.chance);

  const std::size_t judged_yes = s.both_yes + s.judge_only;
  const std::size_t human_pos = s.both_yes + s.human_only;
  s.precision_defined = judged_yes > 0;
  s.precision = judged_yes ? static_cast<double>(s.both_yes) / static_cast<double>(judged_yes) : 0.0;
  s.recall_defined = human_pos > 0;
  s.recall = human_pos ? static_cast<double>(s.both_yes) / static_cast<double>(human_pos) : 0.0;
  return s;
}

nlohmann::ordered_json to_json(const AgreementStats& s) {
  return {{"n_pairs", s.n_pairs},
          {"cohen_kappa", s.cohen_kappa},
          {"precision", s.precision},
          {"precision_defined", s.precision_defined},
          {"recall", s.recall},
          {"recall_defined", s.recall_defined},
          {"observed_agreement", s.observed},
          {"chance_agreement", s.chance},
          {"contingency", {{"both_yes", s.both_yes},
                           {"judge_only", s.judge_only},
                           {"human_only", s.human_only},
                           {"both_no", s.both_no}}}};
}

}  // namespace intent
