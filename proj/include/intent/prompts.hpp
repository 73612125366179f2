// SPDX-License-Identifier: Apache-2.0
#pragma once

// Prompt construction for the text-to-text classification baseline and for
// class-conditioned intent generation, plus parsing of their outputs.

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "intent/session.hpp"

namespace intent {

inline constexpr std::string_view kClassificationInstruction =
    "Predict the customer's intent behind reaching out to a live chat agent, after viewing a "
    "sequence of the following pages:";

// Instruction, newline, flattened session.
std::string build_classification_prompt(const Session& session);

// Keyword lexicon for mapping free-text model output onto a class.
struct ClassLexicon {
  std::array<std::vector<std::string>, kNumClasses> keywords;

  static ClassLexicon defaults();
};

void from_json(const nlohmann::json& j, ClassLexicon& lex);
void to_json(nlohmann::json& j, const ClassLexicon& lex);

// Each lexicon entry present in the lowercased text scores 2 when it is a
// multi-word phrase and 1 otherwise. Highest total wins, ties go to the
// canonical class order, and a zero score is unmatched.
std::optional<IntentClass> match_text_to_class(std::string_view text,
                                               const ClassLexicon& lexicon = ClassLexicon::defaults());

enum class GenVariant { UsePredicted, UseGroundTruth, UseAll, UseNone };

inline constexpr std::array<GenVariant, 4> kAllVariants = {
    GenVariant::UsePredicted, GenVariant::UseGroundTruth, GenVariant::UseAll, GenVariant::UseNone};

std::string_view variant_name(GenVariant v);  // "use_predicted", ...
std::optional<GenVariant> parse_variant(std::string_view name);

struct GenRequest {
  Session session;  // already truncated
  GenVariant variant = GenVariant::UsePredicted;
  std::optional<IntentClass> conditioning_class;
  std::size_t m = 5;
  std::uint64_t shuffle_seed = 0;

  void validate() const;
};

// Display names of all five classes in a seeded Fisher-Yates order.
std::array<std::string_view, kNumClasses> shuffled_class_names(std::uint64_t seed);

std::string build_generation_prompt(const GenRequest& request);

// Captures `N. text` lines in order, trimmed, at most m of them. Throws
// ParseError when no line matches.
std::vector<std::string> parse_candidates(std::string_view text, std::size_t m);

}  // namespace intent
