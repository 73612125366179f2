// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "intent/errors.hpp"
#include "intent/synth.hpp"
#include "intent/train.hpp"

using namespace intent;

namespace {

struct Data {
  Corpus corpus;
  Vocab vocab;
  ModelConfig config;
  std::vector<LabeledInput> train, val;
};

Data small_data(Precision precision = Precision::f64) {
  GenSpec g;
  g.n_sessions = 240;
  g.page_count_mean = 10;
  g.page_count_sd = 4;
  g.page_count_cap = 30;
  g.seed = 5;
  Data d;
  d.corpus = split_corpus(filter_min_pages(generate_corpus(g)), {}, 6);
  d.vocab = build_vocab(d.corpus);
  d.config.vocab_size = d.vocab.size();
  d.config.d_model = 16;
  d.config.layers = 1;
  d.config.heads = 2;
  d.config.window = 16;
  d.config.max_tokens = 256;
  d.config.max_pages = 30;
  d.config.dropout = 0.1;
  d.config.attention_impl = AttentionImpl::banded;
  d.config.precision = precision;
  d.config.seed = 8;
  d.train = prepare_examples(d.corpus, Split::train, d.vocab, d.config);
  d.val = prepare_examples(d.corpus, Split::val, d.vocab, d.config);
  return d;
}

}  // namespace

TEST(ArgmaxClass, ExamplesAndTies) {
  const std::array<double, 5> a = {.1, .6, .1, .1, .1};
  EXPECT_EQ(argmax_class(a), IntentClass::AVL);
  const std::array<double, 5> tie = {.1, .35, .1, .35, .1};
  EXPECT_EQ(argmax_class(tie), IntentClass::AVL);
  const std::array<double, 5> flat = {.2, .2, .2, .2, .2};
  EXPECT_EQ(argmax_class(flat), IntentClass::INS);
}

TEST(AdamStep, SingleStepMatchesHandComputation) {
  ModelConfig c;
  c.vocab_size = 8;
  c.d_model = 4;
  c.heads = 2;
  c.layers = 1;
  c.max_tokens = 8;
  c.max_pages = 2;
  c.window = 2;
  auto p = init_params<double>(c);
  const auto before = p.values;
  std::vector<double> g(p.values.size(), 0.0);
  g[0] = 0.5;
  g[1] = -2.0;
  AdamState<double> st;
  TrainOptions o;
  o.lr = 0.01;
  o.grad_clip = 0;
  adam_step(p, std::span<const double>(g), st, o);
  // first step: mhat = g, vhat = g², update = lr·g/(|g|+eps)
  EXPECT_NEAR(p.values[0], before[0] - 0.01 * 0.5 / (0.5 + 1e-8), 1e-15);
  EXPECT_NEAR(p.values[1], before[1] + 0.01 * 2.0 / (2.0 + 1e-8), 1e-15);
  EXPECT_EQ(p.values[2], before[2]);

  // clipping rescales the whole gradient to the threshold norm
  auto q = init_params<double>(c);
  AdamState<double> st2;
  o.grad_clip = 1.0;
  adam_step(q, std::span<const double>(g), st2, o);
  EXPECT_NEAR(st2.m[1], 0.1 * -2.0 / std::sqrt(4.25), 1e-15);
}

TEST(Train, ZeroLearningRateLeavesParametersUnchanged) {
  auto d = small_data();
  TrainOptions o;
  o.lr = 0;
  o.epochs = 1;
  const auto init = init_params<double>(d.config);
  const auto r = train(init, d.train, d.val, o);
  EXPECT_EQ(r.params.values, init.values);
}

TEST(Train, DeterministicHistoryAtF64) {
  auto d = small_data();
  TrainOptions o;
  o.lr = 3e-3;
  o.epochs = 3;
  o.patience = 0;
  o.seed = 11;
  const auto a = train(init_params<double>(d.config), d.train, d.val, o);
  const auto b = train(init_params<double>(d.config), d.train, d.val, o);
  EXPECT_EQ(a.history, b.history);
  EXPECT_EQ(a.params.values, b.params.values);
  ASSERT_EQ(a.history.size(), 3u);
  EXPECT_LT(a.history.back().train_loss, a.history.front().train_loss);
}

TEST(Train, ReturnsBestValidationCheckpoint) {
  auto d = small_data(Precision::f32);
  TrainOptions o;
  o.lr = 3e-3;
  o.epochs = 4;
  o.patience = 0;
  const auto r = train(init_params<float>(d.config), d.train, d.val, o);
  ASSERT_GE(r.best_epoch, 1u);
  double best = -1;
  for (const auto& e : r.history) best = std::max(best, e.val_weighted_f1);
  EXPECT_EQ(r.history[r.best_epoch - 1].val_weighted_f1, best);
  EXPECT_DOUBLE_EQ(evaluate(r.params, d.val).weighted_f1, best);
}

TEST(Train, EarlyStopsOnPatienceAndTarget) {
  auto d = small_data(Precision::f32);
  TrainOptions o;
  o.lr = 0;
  o.epochs = 10;
  o.patience = 2;
  const auto r = train(init_params<float>(d.config), d.train, d.val, o);
  EXPECT_EQ(r.history.size(), 3u);
  o.patience = 0;
  o.target = 0.0;
  EXPECT_EQ(train(init_params<float>(d.config), d.train, d.val, o).history.size(), 1u);
}

TEST(Train, NonFiniteLossAborts) {
  auto d = small_data(Precision::f32);
  auto p = init_params<float>(d.config);
  for (auto& v : p.tensor(p.layout.head_b)) v = std::numeric_limits<float>::quiet_NaN();
  TrainOptions o;
  o.epochs = 1;
  EXPECT_THROW(train(p, d.train, d.val, o), TrainingDiverged);
}

TEST(Train, RejectsMissingSplits) {
  auto d = small_data(Precision::f32);
  EXPECT_THROW(train(init_params<float>(d.config), {}, d.val, {}), PrerequisiteError);
  EXPECT_THROW(train(init_params<float>(d.config), d.train, {}, {}), PrerequisiteError);
}

TEST(Predict, ProbabilitiesSumToOne) {
  auto d = small_data(Precision::f32);
  const auto p = init_params<float>(d.config);
  for (const auto& it : d.corpus.items) {
    const auto pr = predict(p, it.session, d.vocab);
    double sum = 0;
    for (double v : pr.probs) sum += v;
    ASSERT_NEAR(sum, 1.0, 1e-6);
    ASSERT_EQ(pr.label, argmax_class(pr.probs));
  }
}

TEST(GridSearch, SingleCellAndDominatedCell) {
  auto d = small_data(Precision::f32);
  TrainOptions o;
  o.epochs = 3;
  o.patience = 0;
  GridSpec one;
  one.lr = {3e-3};
  one.layers = {1};
  one.d_model = {16};
  one.window = {16};
  one.dropout = {0.0};
  const auto r1 = grid_search<float>(d.config, o, one, d.train, d.val);
  ASSERT_EQ(r1.table.size(), 1u);
  EXPECT_EQ(r1.best, 0u);
  EXPECT_EQ(r1.best_options.lr, 3e-3);

  GridSpec two = one;
  two.lr = {0.0, 1e-2};
  const auto r2 = grid_search<float>(d.config, o, two, d.train, d.val);
  ASSERT_EQ(r2.table.size(), 2u);
  EXPECT_EQ(r2.table[r2.best].lr, 1e-2);
  EXPECT_EQ(r2.best_options.lr, 1e-2);
}

TEST(GridSearch, SelectionIsTableArgmax) {
  auto d = small_data(Precision::f32);
  TrainOptions o;
  o.epochs = 2;
  o.patience = 0;
  GridSpec g;
  g.lr = {1e-3, 5e-3};
  g.layers = {1};
  g.d_model = {8, 16};
  g.window = {16};
  g.dropout = {0.0};
  const auto r = grid_search<float>(d.config, o, g, d.train, d.val);
  ASSERT_EQ(r.table.size(), 4u);
  std::size_t arg = 0;
  for (std::size_t i = 1; i < r.table.size(); ++i)
    if (r.table[i].val_weighted_f1 > r.table[arg].val_weighted_f1) arg = i;
  EXPECT_EQ(r.best, arg);
  EXPECT_EQ(r.best_config.d_model, r.table[arg].d_model);
  GridSpec empty = g;
  empty.lr.clear();
  EXPECT_THROW(grid_search<float>(d.config, o, empty, d.train, d.val), ConfigError);
}

TEST(TrainOptionsJson, RoundTrip) {
  TrainOptions o;
  o.lr = 0.02;
  o.batch_size = 4;
  o.seed = 99;
  nlohmann::json j = o;
  const auto back = j.get<TrainOptions>();
  EXPECT_EQ(back.lr, o.lr);
  EXPECT_EQ(back.batch_size, o.batch_size);
  EXPECT_EQ(back.seed, o.seed);
  EXPECT_THROW((nlohmann::json{{"batch_size", 0}}.get<TrainOptions>()), ConfigError);
}
