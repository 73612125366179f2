// SPDX-License-Identifier: Apache-2.0
#include "intent/prompts.hpp"

#include <regex>
#include <stdexcept>

#include "intent/errors.hpp"
#include "intent/rng.hpp"
#include "intent/text.hpp"

namespace intent {

std::string build_classification_prompt(const Session& session) {
  std::string out(kClassificationInstruction);
  out += '\n';
  out += flatten_session(session);
  return out;
}

ClassLexicon ClassLexicon::defaults() {
  ClassLexicon lex;
  lex.keywords = {{
      {"install", "installation"},
      {"availability", "available", "in stock", "stock"},
      {"price match", "price", "pricing"},
      {"warranty", "repair"},
      {"return", "refund"},
  }};
  return lex;
}

void from_json(const nlohmann::json& j, ClassLexicon& lex) {
  lex = ClassLexicon::defaults();
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    const std::string code(class_code(class_at(c)));
    if (j.contains(code)) lex.keywords[c] = j[code].get<std::vector<std::string>>();
  }
}

void to_json(nlohmann::json& j, const ClassLexicon& lex) {
  j = nlohmann::json::object();
  for (std::size_t c = 0; c < kNumClasses; ++c)
    j[std::string(class_code(class_at(c)))] = lex.keywords[c];
}

std::optional<IntentClass> match_text_to_class(std::string_view raw, const ClassLexicon& lexicon) {
  const std::string lowered = text::to_lower(raw);
  std::size_t best = 0;
  std::optional<IntentClass> winner;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    std::size_t score = 0;
    for (const auto& kw : lexicon.keywords[c]) {
      const std::string k = text::to_lower(kw);
      if (k.empty() || lowered.find(k) == std::string::npos) continue;
      score += text::count_words(k) > 1 ? 2 : 1;
    }
    if (score > best) {
      best = score;
      winner = class_at(c);
    }
  }
  return winner;
}

namespace {
constexpr std::array<std::string_view, 4> kVariantNames = {"use_predicted", "use_ground_truth",
                                                           "use_all", "use_none"};
}

std::string_view variant_name(GenVariant v) { return kVariantNames[static_cast<std::size_t>(v)]; }

std::optional<GenVariant> parse_variant(std::string_view name) {
  for (std::size_t i = 0; i < kVariantNames.size(); ++i)
    if (kVariantNames[i] == name) return static_cast<GenVariant>(i);
  return std::nullopt;
}

void GenRequest::validate() const {
  const bool needs_class =
      variant == GenVariant::UsePredicted || variant == GenVariant::UseGroundTruth;
  if (needs_class != conditioning_class.has_value())
    throw std::invalid_argument(std::string(variant_name(variant)) +
                                (needs_class ? " requires" : " forbids") + " a conditioning class");
  if (m < 1) throw std::invalid_argument("M must be >= 1");
}

std::array<std::string_view, kNumClasses> shuffled_class_names(std::uint64_t seed) {
  std::array<std::string_view, kNumClasses> names;
  for (std::size_t c = 0; c < kNumClasses; ++c) names[c] = class_display_name(class_at(c));
  Rng rng(seed);
  fisher_yates(std::span<std::string_view>(names), rng);
  return names;
}

std::string build_generation_prompt(const GenRequest& req) {
  req.validate();
  std::string topics;
  if (req.variant != GenVariant::UseNone) {
    std::string joined;
    for (auto name : shuffled_class_names(req.shuffle_seed)) {
      if (!joined.empty()) joined += ", ";
      joined += name;
    }
    topics = "Possible topics are " + joined;
    if (req.conditioning_class)
      topics += ", but " + std::string(class_display_name(*req.conditioning_class)) +
                " is the most likely";
    topics += ". ";
  }
  return "A customer browsed the following pages---" + flatten_session(req.session) +
         "---and reached out a chat agent for assistance. " + topics +
         "Pretend to be this customer, and enumerate " + std::to_string(req.m) +
         " questions (1., 2., ...) to ask the chat agent. Don't say anything else.";
}

std::vector<std::string> parse_candidates(std::string_view raw, std::size_t m) {
  static const std::regex line_re(R"(^\s*\d+\.\s*(.+)$)");
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos <= raw.size() && out.size() < m) {
    const std::size_t end = std::min(raw.find('\n', pos), raw.size());
    std::string line(raw.substr(pos, end - pos));
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::smatch match;
    if (std::regex_match(line, match, line_re)) {
      auto candidate = text::trim(match[1].str());
      if (!candidate.empty()) out.push_back(std::move(candidate));
    }
    if (end == raw.size()) break;
    pos = end + 1;
  }
  if (out.empty()) throw ParseError("no enumerated candidates in model output: " + std::string(raw));
  return out;
}

}  // namespace intent
