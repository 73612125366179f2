// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <algorithm>
#include <fstream>
#include <set>

#include "intent/corpus_io.hpp"
#include "intent/errors.hpp"
#include "intent/session.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace intent;
using intent::testing::random_corpus;
using intent::testing::random_session;

namespace {

Session pages_session(std::size_t n) {
  Session s;
  s.user_id = "u";
  for (std::size_t i = 0; i < n; ++i)
    s.pages.emplace_back(std::vector<Attribute>{{"page type", "p" + std::to_string(i + 1)}});
  return s;
}

Corpus corpus_of_sizes(std::initializer_list<std::size_t> sizes) {
  Corpus c;
  for (auto n : sizes) c.items.push_back({pages_session(n), "intent", IntentClass::INS, {}});
  return c;
}

std::vector<std::size_t> page_counts(const Corpus& c) {
  std::vector<std::size_t> out;
  for (const auto& it : c.items) out.push_back(it.session.pages.size());
  return out;
}

}  // namespace

TEST(Page, ValidatesAttributes) {
  using Attrs = std::vector<Attribute>;
  EXPECT_THROW(Page(Attrs{}), std::invalid_argument);
  EXPECT_THROW(Page(Attrs{{"name", "x"}}), std::invalid_argument);
  EXPECT_THROW(Page(Attrs{{"page type", "a"}, {"page type", "b"}}), std::invalid_argument);
  EXPECT_THROW(Page(Attrs{{"page type", "a"}, {"", "b"}}), std::invalid_argument);
  const Page p(Attrs{{"page type", "product"}, {"product name", "Drill"}});
  EXPECT_EQ(p.type(), "product");
}

TEST(IntentClassNames, CanonicalOrder) {
  const std::vector<std::string_view> names = {"Installation", "Item availability", "Price match",
                                               "Repair/Warranty", "Return/Refund"};
  for (std::size_t i = 0; i < kNumClasses; ++i) {
    EXPECT_EQ(class_display_name(kAllClasses[i]), names[i]);
    EXPECT_EQ(parse_class_code(class_code(kAllClasses[i])), kAllClasses[i]);
  }
  EXPECT_FALSE(parse_class_code("FOO"));
}

TEST(FilterMinPages, Examples) {
  EXPECT_EQ(page_counts(filter_min_pages(corpus_of_sizes({3, 5, 8}), 5)),
            (std::vector<std::size_t>{5, 8}));
  EXPECT_EQ(page_counts(filter_min_pages(corpus_of_sizes({5}), 5)), (std::vector<std::size_t>{5}));
  EXPECT_THROW(filter_min_pages(corpus_of_sizes({5}), 0), std::invalid_argument);
}

TEST(FilterMinPages, MatchesBruteForceCount) {
  Rng rng(1);
  for (int trial = 0; trial < 500; ++trial) {
    const auto c = random_corpus(rng, 1 + uniform_index(rng, 30), 1, 9);
    const std::size_t min = 1 + uniform_index(rng, 8);
    std::size_t expected = 0;
    for (const auto& it : c.items) expected += it.session.pages.size() >= min;
    const auto f = filter_min_pages(c, min);
    ASSERT_EQ(f.items.size(), expected);
    for (const auto& it : f.items) ASSERT_GE(it.session.pages.size(), min);
    // order preserved: filtered items form a subsequence of the input
    std::size_t j = 0;
    for (const auto& it : c.items)
      if (j < f.items.size() && it == f.items[j]) ++j;
    ASSERT_EQ(j, f.items.size());
  }
  Corpus big;
  Rng rng2(2);
  for (int i = 0; i < 1000; ++i)
    big.items.push_back({random_session(rng2, 1, 12), "x", IntentClass::AVL, {}});
  std::size_t expected = 0;
  for (const auto& it : big.items) expected += it.session.pages.size() >= 5;
  EXPECT_EQ(filter_min_pages(big).items.size(), expected);
}

TEST(SplitCorpus, SizesAndRemainder) {
  auto sizes = [](const Corpus& c) {
    return std::vector<std::size_t>{c.subset(Split::train).size(), c.subset(Split::val).size(),
                                    c.subset(Split::test).size()};
  };
  Corpus c100, c101;
  for (int i = 0; i < 100; ++i) c100.items.push_back({pages_session(5), "x", IntentClass::INS, {}});
  c101 = c100;
  c101.items.push_back(c100.items[0]);
  EXPECT_EQ(sizes(split_corpus(c100, {}, 3)), (std::vector<std::size_t>{80, 10, 10}));
  EXPECT_EQ(sizes(split_corpus(c101, {}, 3)), (std::vector<std::size_t>{80, 10, 11}));
  EXPECT_THROW(split_corpus(corpus_of_sizes({5, 5}), {}, 1), std::invalid_argument);
  EXPECT_THROW(split_corpus(c100, {0.5, 0.5, 0.0}, 1), std::invalid_argument);
  EXPECT_THROW(split_corpus(c100, {0.5, 0.3, 0.3}, 1), std::invalid_argument);
}

TEST(SplitCorpus, PartitionFloorRuleAndDeterminism) {
  Rng rng(3);
  for (int trial = 0; trial < 500; ++trial) {
    const auto c = random_corpus(rng, 3 + uniform_index(rng, 60), 1, 3);
    const double tr = 0.5 + 0.4 * uniform01(rng);
    const double va = (1 - tr) * (0.1 + 0.8 * uniform01(rng));
    const SplitRatios r{tr, va, 1 - tr - va};
    const std::uint64_t seed = rng();
    const auto s = split_corpus(c, r, seed);
    const std::size_t n = c.items.size();
    ASSERT_EQ(s.items.size(), n);
    std::size_t counts[3] = {0, 0, 0};
    for (std::size_t i = 0; i < n; ++i) {
      ASSERT_TRUE(s.items[i].split.has_value());
      ++counts[static_cast<int>(*s.items[i].split)];
      auto stripped = s.items[i];
      stripped.split = c.items[i].split;
      ASSERT_EQ(stripped, c.items[i]);
    }
    const auto ntr = static_cast<std::size_t>(std::floor(static_cast<double>(n) * tr));
    const auto nva = static_cast<std::size_t>(std::floor(static_cast<double>(n) * va));
    ASSERT_EQ(counts[0], ntr);
    ASSERT_EQ(counts[1], nva);
    ASSERT_EQ(counts[2], n - ntr - nva);
    ASSERT_EQ(split_corpus(c, r, seed), s);
  }
}

TEST(TruncateSession, Examples) {
  const auto s50 = pages_session(50);
  EXPECT_EQ(truncate_session(s50, {50, 32, 100000}), s50);
  const auto s70 = pages_session(70);
  const auto t = truncate_session(s70, {50, 32, 100000});
  ASSERT_EQ(t.pages.size(), 50u);
  EXPECT_EQ(t.pages.front().type(), "p21");
  EXPECT_EQ(t.pages.back().type(), "p70");
}

TEST(TruncateSession, CapsFieldsAndRejectsOversizedLastPage) {
  Session s;
  s.pages.emplace_back(std::vector<Attribute>{{"page type", "a b c d e"}, {"k1 k2 k3", "v"}});
  const auto t = truncate_session(s, {50, 2, 100});
  EXPECT_EQ(t.pages[0].attrs()[0].value, "a b");
  EXPECT_EQ(t.pages[0].attrs()[1].key, "k1 k2");
  EXPECT_THROW(truncate_session(s, {50, 32, 5}), std::invalid_argument);
}

TEST(TruncateSession, SuffixPropertyMatchesOracle) {
  Rng rng(4);
  for (int trial = 0; trial < 600; ++trial) {
    const auto s = random_session(rng, 1, 40, 8);
    const TruncationLimits lim{1 + uniform_index(rng, 45), 1 + uniform_index(rng, 6),
                               10 + uniform_index(rng, 300)};
    const std::size_t expect = oracle::largest_fitting_suffix(s, lim.max_pages, lim.max_attr_tokens,
                                                              lim.token_budget);
    if (expect == 0) {
      EXPECT_THROW(truncate_session(s, lim), std::invalid_argument);
      continue;
    }
    const auto t = truncate_session(s, lim);
    ASSERT_EQ(t.pages.size(), expect);
    ASSERT_LE(oracle::count_structured_tokens(t), lim.token_budget);
    ASSERT_EQ(structured_length(t), oracle::count_structured_tokens(t));
    // suffix: page types line up with the tail of the input
    const std::size_t off = s.pages.size() - t.pages.size();
    for (std::size_t i = 0; i < t.pages.size(); ++i)
      ASSERT_EQ(t.pages[i].attrs().size(), s.pages[off + i].attrs().size());
    ASSERT_EQ(t.user_id, s.user_id);
  }
}

TEST(FlattenSession, Examples) {
  Session one;
  one.pages.emplace_back(std::vector<Attribute>{{"page type", "product"}, {"product name", "Cordless Drill"}});
  EXPECT_EQ(flatten_session(one), "<page> page type: product ; product name: Cordless Drill");
  Session two;
  two.pages.emplace_back(std::vector<Attribute>{{"page type", "home"}});
  two.pages.emplace_back(std::vector<Attribute>{{"page type", "search"}, {"search query", "drill bits"}});
  EXPECT_EQ(flatten_session(two), "<page> page type: home <page> page type: search ; search query: drill bits");
  Session empty_value;
  empty_value.pages.emplace_back(std::vector<Attribute>{{"page type", "x"}, {"note", ""}, {"k", "v"}});
  EXPECT_EQ(flatten_session(empty_value), "<page> page type: x ; note:  ; k: v");
}

TEST(FlattenSession, SanitizesSeparatorsAndCountsPages) {
  EXPECT_EQ(sanitize_value("a ; b ; ; c"), "a b c");
  Rng rng(5);
  for (int trial = 0; trial < 500; ++trial) {
    const auto s = random_session(rng, 1, 12);
    const auto flat = flatten_session(s);
    std::size_t count = 0;
    for (auto pos = flat.find("<page>"); pos != std::string::npos; pos = flat.find("<page>", pos + 1)) ++count;
    ASSERT_EQ(count, s.pages.size());
    std::size_t seps = 0, attrs = 0;
    for (auto pos = flat.find(" ; "); pos != std::string::npos; pos = flat.find(" ; ", pos + 1)) ++seps;
    for (const auto& p : s.pages) attrs += p.attrs().size() - 1;
    ASSERT_EQ(seps, attrs);
  }
}

TEST(CorpusIo, RoundTripAndValidation) {
  Rng rng(6);
  for (int trial = 0; trial < 500; ++trial) {
    const auto c = random_corpus(rng, 1 + uniform_index(rng, 4), 1, 4);
    ASSERT_EQ(corpus_from_jsonl(corpus_to_jsonl(c)), c);
  }
  const auto big = random_corpus(rng, 1000, 1, 6);
  const auto dir = intent::testing::scratch_dir("corpus_io");
  save_corpus(big, dir / "c.jsonl");
  EXPECT_EQ(load_corpus(dir / "c.jsonl"), big);
  EXPECT_FALSE(std::filesystem::exists(dir / "c.jsonl.tmp"));

  const std::string good =
      R"({"user_id":"u1","pages":[{"attrs":[["page type","home"]]}],"intent":"hi","class":"INS","split":null})";
  const std::string bad_class =
      R"({"user_id":"u2","pages":[{"attrs":[["page type","home"]]}],"intent":"hi","class":"FOO","split":null})";
  try {
    corpus_from_jsonl(good + "\n" + bad_class + "\n", "x.jsonl");
    FAIL() << "expected a load error";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("x.jsonl:2"), std::string::npos) << e.what();
  }
  EXPECT_THROW(corpus_from_jsonl("{not json\n"), ConfigError);
  EXPECT_THROW(load_corpus(dir / "missing.jsonl"), PrerequisiteError);
}

TEST(CorpusIo, FieldOrderIsFixed) {
  Corpus c;
  c.items.push_back({pages_session(1), "hi", IntentClass::RET, Split::val});
  EXPECT_EQ(corpus_to_jsonl(c),
            R"({"user_id":"u","pages":[{"attrs":[["page type","p1"]]}],"intent":"hi","class":"RET","split":"val"})"
            "\n");
}
