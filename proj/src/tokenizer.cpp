// SPDX-License-Identifier: Apache-2.0
#include "intent/tokenizer.hpp"

#include <algorithm>
#include <map>
#include <stdexcept>

#include "intent/corpus_io.hpp"
#include "intent/errors.hpp"
#include "intent/text.hpp"

namespace intent {

namespace {
constexpr std::array<std::string_view, kNumReserved> kReserved = {"[PAD]", "[CLS]", "[UNK]",
                                                                  "<page>"};
}

Vocab::Vocab() : Vocab(std::vector<std::string>(kReserved.begin(), kReserved.end())) {}

Vocab::Vocab(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
  if (tokens_.size() < kNumReserved) throw ConfigError("vocab is missing reserved tokens");
  for (std::size_t i = 0; i < kNumReserved; ++i)
    if (tokens_[i] != kReserved[i])
      throw ConfigError("vocab id " + std::to_string(i) + " must be " + std::string(kReserved[i]));
  index_.reserve(tokens_.size());
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (!index_.emplace(tokens_[i], static_cast<TokenId>(i)).second)
      throw ConfigError("duplicate vocab token '" + tokens_[i] + "'");
  }
}

TokenId Vocab::id(std::string_view token) const {
  const auto it = index_.find(std::string(token));
  return it == index_.end() ? kUnkId : it->second;
}

bool Vocab::contains(std::string_view token) const {
  return index_.contains(std::string(token));
}

std::string Vocab::to_text() const {
  std::string out;
  for (const auto& t : tokens_) {
    out += t;
    out += '\n';
  }
  return out;
}

Vocab Vocab::from_text(std::string_view text) {
  std::vector<std::string> tokens;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const std::size_t end = std::min(text.find('\n', pos), text.size());
    tokens.emplace_back(text.substr(pos, end - pos));
    pos = end + 1;
  }
  return Vocab(std::move(tokens));
}

void Vocab::save(const std::filesystem::path& path) const { write_file_atomic(path, to_text()); }

Vocab Vocab::load(const std::filesystem::path& path) { return from_text(read_file(path)); }

std::vector<std::string> vocab_tokens(const Page& page) {
  std::vector<std::string> out;
  bool first = true;
  for (const auto& a : page.attrs()) {
    if (!first) out.emplace_back(";");
    first = false;
    const auto key_words = text::split_ws(a.key);
    for (auto w : key_words) out.push_back(text::to_lower(w));
    if (!key_words.empty()) out.push_back(text::to_lower(key_words.back()) + ":");
    for (auto w : text::split_ws(a.value)) out.push_back(text::to_lower(w));
  }
  return out;
}

Vocab build_vocab(const Corpus& corpus, std::size_t min_freq) {
  if (corpus.items.empty()) throw std::invalid_argument("cannot build a vocab from an empty corpus");
  const bool any_train = std::any_of(corpus.items.begin(), corpus.items.end(),
                                     [](const auto& it) { return it.split == Split::train; });
  std::map<std::string, std::size_t> freq;
  for (const auto& item : corpus.items) {
    if (any_train && item.split != Split::train) continue;
    for (const auto& page : item.session.pages)
      for (auto& t : vocab_tokens(page)) ++freq[std::move(t)];
  }
  std::vector<std::pair<std::string, std::size_t>> kept;
  for (auto& [tok, n] : freq) {
    if (n < min_freq) continue;
    if (std::find(kReserved.begin(), kReserved.end(), tok) != kReserved.end()) continue;
    kept.emplace_back(tok, n);
  }
  std::stable_sort(kept.begin(), kept.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> tokens(kReserved.begin(), kReserved.end());
  for (auto& [tok, n] : kept) tokens.push_back(std::move(tok));
  return Vocab(std::move(tokens));
}

EncodedInput encode_structured(const Session& session, const Vocab& vocab,
                               const EncodeLimits& limits) {
  if (session.pages.size() > limits.max_pages)
    throw std::invalid_argument("session has " + std::to_string(session.pages.size()) +
                                " pages, limit is " + std::to_string(limits.max_pages));
  const std::size_t length = structured_length(session);
  if (length > limits.max_tokens)
    throw std::invalid_argument("encoded length " + std::to_string(length) + " exceeds " +
                                std::to_string(limits.max_tokens) + " tokens");
  EncodedInput out;
  out.token_ids.reserve(length);
  out.token_positions.reserve(length);
  out.token_types.reserve(length);
  out.page_positions.reserve(length);
  auto push = [&](TokenId id, std::int32_t type, std::int32_t page) {
    out.token_positions.push_back(static_cast<std::int32_t>(out.token_ids.size()));
    out.token_ids.push_back(id);
    out.token_types.push_back(type);
    out.page_positions.push_back(page);
  };
  push(kClsId, kTypeCls, 0);
  for (std::size_t j = 0; j < session.pages.size(); ++j) {
    const auto page = static_cast<std::int32_t>(j);
    for (const auto& a : session.pages[j].attrs()) {
      for (auto w : text::split_ws(a.key)) push(vocab.id(text::to_lower(w)), kTypeKey, page);
      for (auto w : text::split_ws(a.value)) push(vocab.id(text::to_lower(w)), kTypeValue, page);
    }
  }
  return out;
}

std::vector<TokenId> encode_flat(std::string_view flat, const Vocab& vocab, std::size_t max_len) {
  const auto words = text::split_ws(flat);
  const std::size_t start = words.size() > max_len ? words.size() - max_len : 0;
  std::vector<TokenId> out;
  out.reserve(words.size() - start);
  for (std::size_t i = start; i < words.size(); ++i) {
    const std::string w = text::to_lower(words[i]);
    out.push_back(w == "<page>" ? kPageId : vocab.id(w));
  }
  return out;
}

}  // namespace intent
