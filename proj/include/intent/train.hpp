// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <optional>
#include <vector>

#include <json.hpp>

#include "intent/metrics.hpp"
#include "intent/model.hpp"

namespace intent {

struct EpochRecord;

struct TrainOptions {
  double lr = 1e-3;
  std::size_t batch_size = 16;
  std::size_t epochs = 20;
  std::size_t patience = 3;  // epochs without val weighted-F1 gain; 0 disables
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double grad_clip = 1.0;  // global L2 norm; 0 disables
  std::uint64_t seed = 0;
  // Stop as soon as val weighted precision and weighted recall both reach
  // this value. The default never triggers.
  double target = 1.01;
  std::function<void(const EpochRecord&)> on_epoch;
};

void to_json(nlohmann::json& j, const TrainOptions& o);
void from_json(const nlohmann::json& j, TrainOptions& o);

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0;
  double val_weighted_precision = 0;
  double val_weighted_recall = 0;
  double val_weighted_f1 = 0;
  double val_accuracy = 0;

  bool operator==(const EpochRecord&) const = default;
};

nlohmann::ordered_json to_json(const std::vector<EpochRecord>& history);

template <typename T>
struct TrainResult {
  ModelParams<T> params;  // best-validation checkpoint
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
};

// Truncation matching the model's limits: n pages, 32 attribute tokens, p tokens.
TruncationLimits truncation_for(const ModelConfig& config);

// Truncates and encodes the sessions of one split.
std::vector<LabeledInput> prepare_examples(const Corpus& corpus, std::optional<Split> split,
                                           const Vocab& vocab, const ModelConfig& config);

template <typename T>
struct AdamState {
  std::vector<T> m, v;
  std::size_t step = 0;
};

template <typename T>
void adam_step(ModelParams<T>& params, std::span<const T> grads, AdamState<T>& state,
               const TrainOptions& opts);

template <typename T>
TrainResult<T> train(ModelParams<T> params, const std::vector<LabeledInput>& train_set,
                     const std::vector<LabeledInput>& val_set, const TrainOptions& opts);

struct Prediction {
  IntentClass label = IntentClass::INS;
  std::array<double, kNumClasses> probs{};
};

// Highest probability; exact ties go to the lowest class index.
IntentClass argmax_class(std::span<const double> probs);

template <typename T>
Prediction predict(const ModelParams<T>& params, const Session& session, const Vocab& vocab);

template <typename T>
Prediction predict_encoded(const ModelParams<T>& params, const EncodedInput& input);

template <typename T>
ClassReport evaluate(const ModelParams<T>& params, const std::vector<LabeledInput>& examples);

struct GridSpec {
  std::vector<double> lr = {1e-4, 3e-4, 1e-3};
  std::vector<std::size_t> layers = {2};
  std::vector<std::size_t> d_model = {64};
  std::vector<std::size_t> window = {64};
  std::vector<double> dropout = {0.1};
};

void from_json(const nlohmann::json& j, GridSpec& g);
void to_json(nlohmann::json& j, const GridSpec& g);

struct GridRow {
  double lr = 0;
  std::size_t layers = 0, d_model = 0, window = 0;
  double dropout = 0;
  std::size_t best_epoch = 0;
  double val_weighted_precision = 0, val_weighted_recall = 0, val_weighted_f1 = 0;
};

struct GridResult {
  std::vector<GridRow> table;
  std::size_t best = 0;  // first row with maximal val weighted F1
  ModelConfig best_config;
  TrainOptions best_options;
};

nlohmann::ordered_json to_json(const GridResult& g);

template <typename T>
GridResult grid_search(const ModelConfig& base, const TrainOptions& base_opts, const GridSpec& grid,
                       const std::vector<LabeledInput>& train_set,
                       const std::vector<LabeledInput>& val_set);

}  // namespace intent
