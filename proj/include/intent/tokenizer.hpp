// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "intent/session.hpp"

namespace intent {

using TokenId = std::int32_t;

inline constexpr TokenId kPadId = 0;
inline constexpr TokenId kClsId = 1;
inline constexpr TokenId kUnkId = 2;
inline constexpr TokenId kPageId = 3;
inline constexpr std::size_t kNumReserved = 4;

enum TokenType : std::int32_t { kTypeCls = 0, kTypeKey = 1, kTypeValue = 2 };

// Word vocabulary with dense ids; ids 0..3 are [PAD], [CLS], [UNK], <page>.
class Vocab {
 public:
  Vocab();
  explicit Vocab(std::vector<std::string> tokens);  // tokens[id]; validates reserved ids

  TokenId id(std::string_view token) const;  // kUnkId when absent
  bool contains(std::string_view token) const;
  const std::string& token(TokenId id) const { return tokens_.at(static_cast<std::size_t>(id)); }
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  // One token per line, line number = id.
  std::string to_text() const;
  static Vocab from_text(std::string_view text);
  void save(const std::filesystem::path& path) const;
  static Vocab load(const std::filesystem::path& path);

  bool operator==(const Vocab& other) const { return tokens_ == other.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
};

// Tokens counted for one attribute: lowercase key words, the flat-text form
// of the key's last word (with its trailing ':'), lowercase value words, and
// one ';' per separator between attributes.
std::vector<std::string> vocab_tokens(const Page& page);

// Counts vocab_tokens over the training split (or every item when nothing is
// tagged train) and keeps tokens with frequency >= min_freq, ordered by
// frequency descending then lexicographically.
Vocab build_vocab(const Corpus& corpus, std::size_t min_freq = 1);

struct EncodedInput {
  std::vector<TokenId> token_ids;
  std::vector<std::int32_t> token_positions;
  std::vector<std::int32_t> token_types;
  std::vector<std::int32_t> page_positions;

  std::size_t size() const { return token_ids.size(); }
  bool operator==(const EncodedInput&) const = default;
};

struct EncodeLimits {
  std::size_t max_tokens = 1024;  // p
  std::size_t max_pages = 50;     // n
};

// [CLS] then, per page j, key words (type 1) and value words (type 2) with
// page position j. No <page> marker in this stream.
EncodedInput encode_structured(const Session& session, const Vocab& vocab,
                               const EncodeLimits& limits);

// Lowercase whitespace tokens of flattened text, keeping the last max_len.
std::vector<TokenId> encode_flat(std::string_view text, const Vocab& vocab, std::size_t max_len);

}  // namespace intent
