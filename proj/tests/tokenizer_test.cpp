// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <algorithm>

#include "intent/errors.hpp"
#include "intent/tokenizer.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace intent;
using intent::testing::random_corpus;
using intent::testing::random_session;

namespace {

Corpus one_page_corpus(std::vector<Attribute> attrs) {
  Corpus c;
  Session s;
  s.pages.emplace_back(std::move(attrs));
  c.items.push_back({s, "x", IntentClass::INS, {}});
  return c;
}

}  // namespace

TEST(Vocab, ReservedIdsAndLookup) {
  const Vocab v;
  ASSERT_EQ(v.size(), 4u);
  EXPECT_EQ(v.token(kPadId), "[PAD]");
  EXPECT_EQ(v.token(kClsId), "[CLS]");
  EXPECT_EQ(v.token(kUnkId), "[UNK]");
  EXPECT_EQ(v.token(kPageId), "<page>");
  EXPECT_EQ(v.id("nothing"), kUnkId);
  EXPECT_THROW(Vocab(std::vector<std::string>{"[CLS]", "[PAD]", "[UNK]", "<page>"}), ConfigError);
  EXPECT_THROW(Vocab(std::vector<std::string>{"[PAD]", "[CLS]", "[UNK]", "<page>", "a", "a"}), ConfigError);
}

TEST(Vocab, TextRoundTrip) {
  Rng rng(1);
  const auto v = build_vocab(random_corpus(rng, 20, 1, 5));
  EXPECT_EQ(Vocab::from_text(v.to_text()), v);
  const auto dir = intent::testing::scratch_dir("vocab");
  v.save(dir / "vocab.txt");
  EXPECT_EQ(Vocab::load(dir / "vocab.txt"), v);
}

TEST(BuildVocab, OnePageExample) {
  const auto v = build_vocab(one_page_corpus({{"page type", "product"}}));
  for (const char* t : {"page", "type:", "product", "[PAD]", "[CLS]", "[UNK]", "<page>"})
    EXPECT_TRUE(v.contains(t)) << t;
}

TEST(BuildVocab, MatchesFrequencyOracle) {
  Rng rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    const auto c = random_corpus(rng, 1 + uniform_index(rng, 15), 1, 6);
    const std::size_t min_freq = 1 + uniform_index(rng, 3);
    const auto freq = oracle::vocab_frequencies(c);
    std::vector<std::pair<std::string, std::size_t>> expect;
    for (const auto& [t, n] : freq)
      if (n >= min_freq) expect.emplace_back(t, n);
    std::sort(expect.begin(), expect.end(), [](const auto& a, const auto& b) {
      return a.second != b.second ? a.second > b.second : a.first < b.first;
    });
    const auto v = build_vocab(c, min_freq);
    ASSERT_EQ(v.size(), expect.size() + kNumReserved);
    for (std::size_t i = 0; i < expect.size(); ++i) ASSERT_EQ(v.token(static_cast<TokenId>(i + 4)), expect[i].first);
    ASSERT_EQ(build_vocab(c, min_freq), v);
  }
}

TEST(BuildVocab, UsesOnlyTrainSplitWhenTagged) {
  Corpus c = one_page_corpus({{"page type", "alpha"}});
  c.items[0].split = Split::train;
  auto other = one_page_corpus({{"page type", "beta"}});
  other.items[0].split = Split::test;
  c.items.push_back(other.items[0]);
  const auto v = build_vocab(c);
  EXPECT_TRUE(v.contains("alpha"));
  EXPECT_FALSE(v.contains("beta"));
}

TEST(EncodeStructured, LayoutExamples) {
  const auto c = one_page_corpus({{"page type", "search"}, {"search query", "drill"}});
  const auto v = build_vocab(c);
  const auto e = encode_structured(c.items[0].session, v, {});
  EXPECT_EQ(e.token_types, (std::vector<std::int32_t>{0, 1, 1, 2, 1, 1, 2}));
  EXPECT_EQ(e.page_positions, std::vector<std::int32_t>(7, 0));
  EXPECT_EQ(e.token_ids[0], kClsId);
  EXPECT_EQ(e.token_ids[3], v.id("search"));
  EXPECT_EQ(e.token_ids[6], v.id("drill"));

  Session two;
  two.pages.emplace_back(std::vector<Attribute>{{"page type", "home"}});
  two.pages.emplace_back(std::vector<Attribute>{{"page type", "Zebra"}});
  const auto e2 = encode_structured(two, v, {});
  EXPECT_EQ(e2.page_positions, (std::vector<std::int32_t>{0, 0, 0, 0, 1, 1, 1}));
  EXPECT_EQ(e2.token_ids.back(), kUnkId);
}

TEST(EncodeStructured, RejectsOverLimit) {
  Rng rng(3);
  const auto s = random_session(rng, 10, 10);
  EXPECT_THROW(encode_structured(s, Vocab{}, {1024, 5}), std::invalid_argument);
  EXPECT_THROW(encode_structured(s, Vocab{}, {3, 50}), std::invalid_argument);
}

TEST(EncodeStructured, InvariantsAndTokenCountOracle) {
  Rng rng(4);
  const auto vocab = build_vocab(random_corpus(rng, 30, 1, 8));
  for (int trial = 0; trial < 500; ++trial) {
    const auto s = truncate_session(random_session(rng, 1, 60), {50, 32, 1024});
    const auto e = encode_structured(s, vocab, {});
    ASSERT_EQ(e.size(), oracle::count_structured_tokens(s));
    ASSERT_EQ(e.token_positions.size(), e.size());
    ASSERT_EQ(e.token_types.size(), e.size());
    ASSERT_EQ(e.page_positions.size(), e.size());
    for (std::size_t i = 0; i < e.size(); ++i) {
      ASSERT_EQ(e.token_positions[i], static_cast<std::int32_t>(i));
      ASSERT_EQ(e.token_types[i] == kTypeCls, i == 0);
      if (i > 0) ASSERT_GE(e.page_positions[i], e.page_positions[i - 1]);
      ASSERT_LT(e.page_positions[i], 50);
      ASSERT_GE(e.token_ids[i], 0);
      ASSERT_LT(static_cast<std::size_t>(e.token_ids[i]), vocab.size());
      ASSERT_NE(e.token_ids[i], kPageId);
    }
    ASSERT_EQ(e.page_positions.back(), static_cast<std::int32_t>(s.pages.size() - 1));
  }
}

TEST(EncodeFlat, Examples) {
  const auto v = build_vocab(one_page_corpus({{"page type", "home"}}));
  EXPECT_EQ(encode_flat("<page> page type: home", v, 1024),
            (std::vector<TokenId>{kPageId, v.id("page"), v.id("type:"), v.id("home")}));
  EXPECT_EQ(encode_flat("Mystery", v, 10), (std::vector<TokenId>{kUnkId}));
  std::string text;
  for (int i = 0; i < 2000; ++i) text += (i % 2 ? "home " : "page ");
  const auto ids = encode_flat(text, v, 1024);
  ASSERT_EQ(ids.size(), 1024u);
  EXPECT_EQ(ids.back(), v.id("home"));
  EXPECT_EQ(ids.front(), v.id("page"));
}

TEST(EncodeFlat, FlattenedTextHasNoUnknownsUnderItsOwnVocab) {
  Rng rng(5);
  auto c = random_corpus(rng, 20, 1, 5);
  for (auto& it : c.items) it.split.reset();
  const auto v = build_vocab(c);
  for (const auto& it : c.items)
    for (TokenId id : encode_flat(flatten_session(it.session), v, 4096)) ASSERT_NE(id, kUnkId);
}
