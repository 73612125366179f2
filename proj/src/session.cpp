// SPDX-License-Identifier: Apache-2.0
#include "intent/session.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "intent/rng.hpp"
#include "intent/text.hpp"

namespace intent {

Page::Page(std::vector<Attribute> attrs) : attrs_(std::move(attrs)) {
  if (attrs_.empty()) throw std::invalid_argument("page has no attributes");
  if (attrs_.front().key != kPageTypeKey)
    throw std::invalid_argument("first page attribute must be 'page type', got '" +
                                attrs_.front().key + "'");
  for (std::size_t i = 0; i < attrs_.size(); ++i) {
    if (attrs_[i].key.empty()) throw std::invalid_argument("empty attribute key");
    if (i > 0 && attrs_[i].key == kPageTypeKey)
      throw std::invalid_argument("duplicate 'page type' attribute");
  }
}

namespace {

constexpr std::array<std::string_view, kNumClasses> kCodes = {"INS", "AVL", "PRI",
                                                              "WTY", "RET"};
constexpr std::array<std::string_view, kNumClasses> kDisplayNames = {
    "Installation", "Item availability", "Price match", "Repair/Warranty",
    "Return/Refund"};
constexpr std::array<std::string_view, 3> kSplitNames = {"train", "val", "test"};

}  // namespace

std::string_view class_code(IntentClass c) { return kCodes[index_of(c)]; }

std::string_view class_display_name(IntentClass c) {
  return kDisplayNames[index_of(c)];
}

std::optional<IntentClass> parse_class_code(std::string_view code) {
  for (std::size_t i = 0; i < kNumClasses; ++i)
    if (kCodes[i] == code) return class_at(i);
  return std::nullopt;
}

std::string_view split_name(Split s) {
  return kSplitNames[static_cast<std::size_t>(s)];
}

std::optional<Split> parse_split(std::string_view name) {
  for (std::size_t i = 0; i < kSplitNames.size(); ++i)
    if (kSplitNames[i] == name) return static_cast<Split>(i);
  return std::nullopt;
}

std::vector<const LabeledSession*> Corpus::subset(Split s) const {
  std::vector<const LabeledSession*> out;
  for (const auto& item : items)
    if (item.split == s) out.push_back(&item);
  return out;
}

Corpus filter_min_pages(const Corpus& corpus, std::size_t min_pages) {
  if (min_pages < 1) throw std::invalid_argument("min_pages must be >= 1");
  Corpus out;
  std::copy_if(corpus.items.begin(), corpus.items.end(), std::back_inserter(out.items),
               [&](const LabeledSession& s) { return s.session.pages.size() >= min_pages; });
  return out;
}

Corpus split_corpus(const Corpus& corpus, const SplitRatios& ratios, std::uint64_t seed) {
  if (ratios.train <= 0 || ratios.val <= 0 || ratios.test <= 0)
    throw std::invalid_argument("split ratios must be positive");
  if (std::abs(ratios.train + ratios.val + ratios.test - 1.0) > 1e-9)
    throw std::invalid_argument("split ratios must sum to 1");
  const std::size_t n = corpus.items.size();
  if (n < 3) throw std::invalid_argument("corpus needs at least 3 items to split");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  fisher_yates(std::span<std::size_t>(order), rng);

  const auto n_train = static_cast<std::size_t>(std::floor(n * ratios.train));
  const auto n_val = static_cast<std::size_t>(std::floor(n * ratios.val));

  Corpus out = corpus;
  for (std::size_t r = 0; r < n; ++r) {
    const Split s = r < n_train ? Split::train
                    : r < n_train + n_val ? Split::val
                                          : Split::test;
    out.items[order[r]].split = s;
  }
  return out;
}

std::size_t page_token_count(const Page& page) {
  std::size_t n = 0;
  for (const auto& a : page.attrs()) n += text::count_words(a.key) + text::count_words(a.value);
  return n;
}

std::size_t structured_length(const Session& session) {
  std::size_t n = 1;
  for (const auto& p : session.pages) n += page_token_count(p);
  return n;
}

Session truncate_session(const Session& session, const TruncationLimits& limits) {
  if (limits.max_pages < 1) throw std::invalid_argument("max_pages must be >= 1");
  const std::size_t total = session.pages.size();
  const std::size_t keep = std::min(total, limits.max_pages);

  Session out;
  out.user_id = session.user_id;
  out.pages.reserve(keep);
  for (std::size_t i = total - keep; i < total; ++i) {
    std::vector<Attribute> attrs;
    attrs.reserve(session.pages[i].attrs().size());
    for (const auto& a : session.pages[i].attrs())
      // The structural `page type` key is never capped.
      attrs.push_back({a.key == kPageTypeKey ? a.key : text::first_words(a.key, limits.max_attr_tokens),
                       text::first_words(a.value, limits.max_attr_tokens)});
    out.pages.emplace_back(std::move(attrs));
  }

  // Drop oldest pages until the structured stream fits.
  std::size_t length = structured_length(out);
  std::size_t drop = 0;
  while (length > limits.token_budget && drop < out.pages.size()) {
    length -= page_token_count(out.pages[drop]);
    ++drop;
  }
  if (drop == out.pages.size() && !out.pages.empty())
    throw std::invalid_argument("most recent page alone exceeds the token budget");
  out.pages.erase(out.pages.begin(), out.pages.begin() + static_cast<std::ptrdiff_t>(drop));
  return out;
}

std::string sanitize_value(std::string_view value) {
  std::string out(value);
  for (std::size_t pos; (pos = out.find(" ; ")) != std::string::npos;) out.replace(pos, 3, " ");
  return out;
}

std::string flatten_session(const Session& session) {
  std::string out;
  for (const auto& page : session.pages) {
    if (!out.empty()) out += ' ';
    out += "<page> ";
    bool first = true;
    for (const auto& a : page.attrs()) {
      if (!first) out += " ; ";
      first = false;
      out += a.key;
      out += ": ";
      out += sanitize_value(a.value);
    }
  }
  return out;
}

}  // namespace intent
