// SPDX-License-Identifier: Apache-2.0
#pragma once

// Browsing-history domain types: pages as ordered attribute lists, sessions
// as chronological page sequences, and the five coarse intent classes.

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace intent {

inline constexpr std::string_view kPageTypeKey = "page type";

struct Attribute {
  std::string key;
  std::string value;

  bool operator==(const Attribute&) const = default;
};

// One browsed page. The attribute list is ordered and always starts with
// `page type`, which appears exactly once.
class Page {
 public:
  explicit Page(std::vector<Attribute> attrs);

  const std::vector<Attribute>& attrs() const { return attrs_; }
  const std::string& type() const { return attrs_.front().value; }

  bool operator==(const Page&) const = default;

 private:
  std::vector<Attribute> attrs_;
};

struct Session {
  std::string user_id;
  std::vector<Page> pages;  // oldest first

  bool operator==(const Session&) const = default;
};

enum class IntentClass : std::uint8_t { INS = 0, AVL, PRI, WTY, RET };

inline constexpr std::size_t kNumClasses = 5;
inline constexpr std::array<IntentClass, kNumClasses> kAllClasses = {
    IntentClass::INS, IntentClass::AVL, IntentClass::PRI, IntentClass::WTY,
    IntentClass::RET};

inline constexpr std::size_t index_of(IntentClass c) {
  return static_cast<std::size_t>(c);
}
inline constexpr IntentClass class_at(std::size_t i) {
  return static_cast<IntentClass>(i);
}

std::string_view class_code(IntentClass c);          // "INS"
std::string_view class_display_name(IntentClass c);  // "Installation"
std::optional<IntentClass> parse_class_code(std::string_view code);

enum class Split : std::uint8_t { train, val, test };

std::string_view split_name(Split s);
std::optional<Split> parse_split(std::string_view name);

struct LabeledSession {
  Session session;
  std::string intent;  // concatenated user utterances
  IntentClass label = IntentClass::INS;
  std::optional<Split> split;

  bool operator==(const LabeledSession&) const = default;
};

struct Corpus {
  std::vector<LabeledSession> items;

  std::vector<const LabeledSession*> subset(Split s) const;
  bool operator==(const Corpus&) const = default;
};

// Keeps the items whose sessions have at least `min_pages` pages, in order.
Corpus filter_min_pages(const Corpus& corpus, std::size_t min_pages = 5);

struct SplitRatios {
  double train = 0.8;
  double val = 0.1;
  double test = 0.1;
};

// Assigns split tags: a seeded shuffle of item indices is cut into
// floor(N*train) train, floor(N*val) val, and the remainder test. Item order
// is preserved; only the tags change.
Corpus split_corpus(const Corpus& corpus, const SplitRatios& ratios,
                    std::uint64_t seed);

struct TruncationLimits {
  std::size_t max_pages = 50;
  std::size_t max_attr_tokens = 32;
  std::size_t token_budget = 1024;
};

// Length of the structured token stream: [CLS] plus every key and value word.
std::size_t structured_length(const Session& session);
std::size_t page_token_count(const Page& page);

// Keeps the most recent pages that fit the limits. The result is always a
// suffix of the input page list (after per-field word capping).
Session truncate_session(const Session& session, const TruncationLimits& limits);

// `<page> k1: v1 ; k2: v2 ...` per page, pages joined by single spaces.
std::string flatten_session(const Session& session);

// Collapses embedded " ; " separators in an attribute value into a space.
std::string sanitize_value(std::string_view value);

}  // namespace intent
