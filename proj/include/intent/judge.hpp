// SPDX-License-Identifier: Apache-2.0
#pragma once

// Binary LLM judge: is the candidate intent the same request as the true
// intent? Directional; the true intent always goes first.

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "intent/gateway.hpp"

namespace intent {

struct JudgeDemo {
  std::string true_intent;
  std::string candidate;
  bool similar;
};

struct JudgeTemplate {
  std::string version;
  std::string system;
  std::vector<JudgeDemo> demos;
  std::string reask;
};

// The built-in template. Its demonstrations include a pair that differs only
// in the item, judged not similar.
const JudgeTemplate& judge_template_v1();

std::string render_judge_pair(std::string_view true_intent, std::string_view candidate);

// System instruction, demonstrations as user/assistant turns, then the pair.
std::vector<ChatMessage> build_judge_messages(std::string_view true_intent,
                                              std::string_view candidate,
                                              const JudgeTemplate& tpl = judge_template_v1());

// "Yes..." -> true, "No..." -> false (case-insensitive, leading space ignored).
std::optional<bool> parse_verdict(std::string_view reply);

struct JudgeOutcome {
  bool verdict = false;
  std::size_t asks = 0;
  bool unparseable = false;  // both asks failed to parse; verdict forced to 0
};

// Asks once, re-asks once on an unparseable reply, then gives up with 0.
JudgeOutcome judge_pair(ChatClient& client, std::string_view true_intent, std::string_view candidate,
                        const JudgeTemplate& tpl = judge_template_v1());

struct JudgePair {
  std::string true_intent;
  std::string candidate;
};

// Judges pairs on min(max_in_flight, n) workers; outcomes keep input order.
std::vector<JudgeOutcome> judge_all(ChatClient& client, const std::vector<JudgePair>& pairs,
                                    const JudgeTemplate& tpl = judge_template_v1());

}  // namespace intent
