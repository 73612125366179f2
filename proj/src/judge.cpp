// SPDX-License-Identifier: Apache-2.0
#include "intent/judge.hpp"

#include <atomic>
#include <cctype>
#include <exception>
#include <iostream>
#include <mutex>
#include <stdexcept>
#include <thread>

#include "intent/text.hpp"

namespace intent {

const JudgeTemplate& judge_template_v1() {
  static const JudgeTemplate tpl{
      "judge-v1",
      "You compare two customer intents from a retail live chat. Intent A is what the customer "
      "actually asked. Intent B is a predicted question. Answer Yes if B asks for the same thing "
      "as A, otherwise answer No. A different item (for example another product name) or a "
      "materially different request (for example an installation manual instead of an "
      "installation service) is not the same thing. Reply with Yes or No only.",
      {
          {"Is the cordless drill in stock at the store near me?",
           "Do you have the cordless drill available for pickup today?", true},
          {"I want to return the patio set I bought last week.",
           "How can I send back the patio set and get my money back?", true},
          {"Can someone install the ceiling fan I bought?",
           "Can someone install the dishwasher I bought?", false},
          {"Where can I find the installation manual for my water heater?",
           "Do you offer installation service for my water heater?", false},
      },
      "Please answer with Yes or No only.",
  };
  return tpl;
}

std::string render_judge_pair(std::string_view true_intent, std::string_view candidate) {
  return "Intent A: " + std::string(true_intent) + "\nIntent B: " + std::string(candidate) +
         "\nSame intent?";
}

std::vector<ChatMessage> build_judge_messages(std::string_view true_intent,
                                              std::string_view candidate,
                                              const JudgeTemplate& tpl) {
  if (true_intent.empty() || candidate.empty())
    throw std::invalid_argument("judge inputs must be non-empty");
  std::vector<ChatMessage> msgs;
  msgs.push_back({"system", tpl.system});
  for (const auto& demo : tpl.demos) {
    msgs.push_back({"user", render_judge_pair(demo.true_intent, demo.candidate)});
    msgs.push_back({"assistant", demo.similar ? "Yes" : "No"});
  }
  msgs.push_back({"user", render_judge_pair(true_intent, candidate)});
  return msgs;
}

std::optional<bool> parse_verdict(std::string_view reply) {
  const std::string t = text::trim(reply);
  // The word must end there, so "Not sure" and "Nothing" stay unparseable.
  auto leads_with = [&](std::string_view word) {
    return text::starts_with_icase(t, word) &&
           (t.size() == word.size() || !std::isalpha(static_cast<unsigned char>(t[word.size()])));
  };
  if (leads_with("yes")) return true;
  if (leads_with("no")) return false;
  return std::nullopt;
}

JudgeOutcome judge_pair(ChatClient& client, std::string_view true_intent, std::string_view candidate,
                        const JudgeTemplate& tpl) {
  auto messages = build_judge_messages(true_intent, candidate, tpl);
  JudgeOutcome out;
  std::string reply = client.complete(client.make_request(messages));
  out.asks = 1;
  if (auto v = parse_verdict(reply)) {
    out.verdict = *v;
    return out;
  }
  messages.push_back({"assistant", reply});
  messages.push_back({"user", tpl.reask});
  reply = client.complete(client.make_request(std::move(messages)));
  out.asks = 2;
  if (auto v = parse_verdict(reply)) {
    out.verdict = *v;
    return out;
  }
  out.unparseable = true;
  std::cerr << "warning: judge reply not parseable after re-ask, scoring 0: " << reply << '\n';
  return out;
}

std::vector<JudgeOutcome> judge_all(ChatClient& client, const std::vector<JudgePair>& pairs,
                                    const JudgeTemplate& tpl) {
  std::vector<JudgeOutcome> out(pairs.size());
  const std::size_t workers = std::min(client.config().max_in_flight, pairs.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (std::size_t i; (i = next.fetch_add(1)) < pairs.size();) {
          try {
            out[i] = judge_pair(client, pairs[i].true_intent, pairs[i].candidate, tpl);
          } catch (...) {
            std::lock_guard lock(failure_mutex);
            if (!failure) failure = std::current_exception();
            next = pairs.size();
          }
        }
      });
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

}  // namespace intent
