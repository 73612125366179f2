// SPDX-License-Identifier: Apache-2.0
#include "intent/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "intent/errors.hpp"

namespace intent {

void to_json(nlohmann::json& j, const TrainOptions& o) {
  j = nlohmann::json{{"lr", o.lr},
                     {"batch_size", o.batch_size},
                     {"epochs", o.epochs},
                     {"patience", o.patience},
                     {"beta1", o.beta1},
                     {"beta2", o.beta2},
                     {"adam_eps", o.adam_eps},
                     {"grad_clip", o.grad_clip},
                     {"seed", o.seed},
                     {"target", o.target}};
}

void from_json(const nlohmann::json& j, TrainOptions& o) {
  const TrainOptions d;
  o.lr = j.value("lr", d.lr);
  o.batch_size = j.value("batch_size", d.batch_size);
  o.epochs = j.value("epochs", d.epochs);
  o.patience = j.value("patience", d.patience);
  o.beta1 = j.value("beta1", d.beta1);
  o.beta2 = j.value("beta2", d.beta2);
  o.adam_eps = j.value("adam_eps", d.adam_eps);
  o.grad_clip = j.value("grad_clip", d.grad_clip);
  o.seed = j.value("seed", d.seed);
  o.target = j.value("target", d.target);
  if (o.batch_size == 0) throw ConfigError("batch_size must be > 0");
  if (o.lr < 0) throw ConfigError("lr must be >= 0");
}

nlohmann::ordered_json to_json(const std::vector<EpochRecord>& history) {
  nlohmann::ordered_json out = nlohmann::ordered_json::array();
  for (const auto& e : history)
    out.push_back({{"epoch", e.epoch},
                   {"train_loss", e.train_loss},
                   {"val_weighted_precision", e.val_weighted_precision},
                   {"val_weighted_recall", e.val_weighted_recall},
                   {"val_weighted_f1", e.val_weighted_f1},
                   {"val_accuracy", e.val_accuracy}});
  return out;
}

TruncationLimits truncation_for(const ModelConfig& config) {
  return {config.max_pages, 32, config.max_tokens};
}

std::vector<LabeledInput> prepare_examples(const Corpus& corpus, std::optional<Split> split,
                                           const Vocab& vocab, const ModelConfig& config) {
  const auto limits = truncation_for(config);
  std::vector<const LabeledSession*> items;
  for (const auto& it : corpus.items)
    if (!split || it.split == split) items.push_back(&it);
  std::vector<LabeledInput> out(items.size());
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(items.size());
#pragma omp parallel for schedule(dynamic, 16)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto& it = *items[static_cast<std::size_t>(i)];
    out[static_cast<std::size_t>(i)] = {
        encode_structured(truncate_session(it.session, limits), vocab, config.encode_limits()),
        it.label};
  }
  return out;
}

template <typename T>
void adam_step(ModelParams<T>& params, std::span<const T> grads, AdamState<T>& state,
               const TrainOptions& opts) {
  const std::size_t n = params.values.size();
  if (state.m.size() != n) {
    state.m.assign(n, T(0));
    state.v.assign(n, T(0));
  }
  ++state.step;
  T scale = T(1);
  if (opts.grad_clip > 0) {
    double sq = 0;
    for (T g : grads) sq += static_cast<double>(g) * static_cast<double>(g);
    const double norm = std::sqrt(sq);
    if (norm > opts.grad_clip) scale = static_cast<T>(opts.grad_clip / norm);
  }
  const T b1 = static_cast<T>(opts.beta1), b2 = static_cast<T>(opts.beta2);
  const T c1 = static_cast<T>(1.0 - std::pow(opts.beta1, static_cast<double>(state.step)));
  const T c2 = static_cast<T>(1.0 - std::pow(opts.beta2, static_cast<double>(state.step)));
  const T lr = static_cast<T>(opts.lr), eps = static_cast<T>(opts.adam_eps);
  for (std::size_t i = 0; i < n; ++i) {
    const T g = grads[i] * scale;
    state.m[i] = b1 * state.m[i] + (T(1) - b1) * g;
    state.v[i] = b2 * state.v[i] + (T(1) - b2) * g * g;
    const T mhat = state.m[i] / c1;
    const T vhat = state.v[i] / c2;
    params.values[i] -= lr * mhat / (std::sqrt(vhat) + eps);
  }
}

IntentClass argmax_class(std::span<const double> probs) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < probs.size(); ++k)
    if (probs[k] > probs[best]) best = k;
  return class_at(best);
}

template <typename T>
Prediction predict_encoded(const ModelParams<T>& params, const EncodedInput& input) {
  const auto trace = forward(params, input);
  const auto p = softmax(trace.logits);
  Prediction out;
  for (std::size_t k = 0; k < kNumClasses; ++k) out.probs[k] = static_cast<double>(p[k]);
  out.label = argmax_class(out.probs);
  return out;
}

template <typename T>
Prediction predict(const ModelParams<T>& params, const Session& session, const Vocab& vocab) {
  const auto truncated = truncate_session(session, truncation_for(params.config));
  return predict_encoded(params, encode_structured(truncated, vocab, params.config.encode_limits()));
}

template <typename T>
ClassReport evaluate(const ModelParams<T>& params, const std::vector<LabeledInput>& examples) {
  std::vector<std::optional<IntentClass>> preds(examples.size());
  std::vector<IntentClass> golds(examples.size());
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(examples.size());
#pragma omp parallel for schedule(dynamic, 4)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    preds[k] = predict_encoded(params, examples[k].input).label;
    golds[k] = examples[k].label;
  }
  return eval_report(preds, golds);
}

template <typename T>
TrainResult<T> train(ModelParams<T> params, const std::vector<LabeledInput>& train_set,
                     const std::vector<LabeledInput>& val_set, const TrainOptions& opts) {
  if (train_set.empty()) throw PrerequisiteError("training split is empty");
  if (val_set.empty()) throw PrerequisiteError("validation split is empty");
  if (opts.batch_size == 0) throw ConfigError("batch_size must be > 0");

  TrainResult<T> result{params, {}, 0};
  AdamState<T> adam;
  double best_f1 = -1.0;
  std::size_t since_best = 0;
  const bool use_dropout = params.config.dropout > 0.0;

  std::vector<std::size_t> order(train_set.size());
  for (std::size_t epoch = 1; epoch <= opts.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle_rng(mix_seed(opts.seed ^ 0x5EED5EEDULL, epoch));
    fisher_yates(std::span<std::size_t>(order), shuffle_rng);

    double loss_sum = 0.0;
    std::size_t batches = 0;
    std::vector<const LabeledInput*> batch;
    for (std::size_t start = 0; start < order.size(); start += opts.batch_size) {
      batch.clear();
      for (std::size_t i = start; i < std::min(order.size(), start + opts.batch_size); ++i)
        batch.push_back(&train_set[order[i]]);
      std::optional<std::uint64_t> dropout_seed;
      if (use_dropout) dropout_seed = mix_seed(opts.seed, (epoch << 32) + batches);
      const auto lg = loss_and_grad(params, std::span<const LabeledInput* const>(batch), dropout_seed);
      if (!std::isfinite(static_cast<double>(lg.loss)))
        throw TrainingDiverged("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                               std::to_string(batches) + " (lr=" + std::to_string(opts.lr) + ")");
      adam_step(params, std::span<const T>(lg.grads), adam, opts);
      loss_sum += static_cast<double>(lg.loss);
      ++batches;
    }

    const ClassReport val = evaluate(params, val_set);
    EpochRecord rec{epoch, loss_sum / static_cast<double>(batches), val.weighted_precision,
                    val.weighted_recall, val.weighted_f1, val.accuracy};
    result.history.push_back(rec);
    if (opts.on_epoch) opts.on_epoch(rec);

    if (val.weighted_f1 > best_f1) {
      best_f1 = val.weighted_f1;
      result.params = params;
      result.best_epoch = epoch;
      since_best = 0;
    } else {
      ++since_best;
    }
    if (std::min(val.weighted_precision, val.weighted_recall) >= opts.target) break;
    if (opts.patience > 0 && since_best >= opts.patience) break;
  }
  return result;
}

void from_json(const nlohmann::json& j, GridSpec& g) {
  const GridSpec d;
  g.lr = j.value("lr", d.lr);
  g.layers = j.value("layers", d.layers);
  g.d_model = j.value("d_model", d.d_model);
  g.window = j.value("window", d.window);
  g.dropout = j.value("dropout", d.dropout);
}

void to_json(nlohmann::json& j, const GridSpec& g) {
  j = nlohmann::json{{"lr", g.lr},
                     {"layers", g.layers},
                     {"d_model", g.d_model},
                     {"window", g.window},
                     {"dropout", g.dropout}};
}

nlohmann::ordered_json to_json(const GridResult& g) {
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (const auto& r : g.table)
    rows.push_back({{"lr", r.lr},
                    {"layers", r.layers},
                    {"d_model", r.d_model},
                    {"window", r.window},
                    {"dropout", r.dropout},
                    {"best_epoch", r.best_epoch},
                    {"val_weighted_precision", r.val_weighted_precision},
                    {"val_weighted_recall", r.val_weighted_recall},
                    {"val_weighted_f1", r.val_weighted_f1}});
  return {{"best", g.best}, {"table", std::move(rows)}};
}

template <typename T>
GridResult grid_search(const ModelConfig& base, const TrainOptions& base_opts, const GridSpec& grid,
                       const std::vector<LabeledInput>& train_set,
                       const std::vector<LabeledInput>& val_set) {
  if (grid.lr.empty() || grid.layers.empty() || grid.d_model.empty() || grid.window.empty() ||
      grid.dropout.empty())
    throw ConfigError("every grid axis needs at least one value");
  GridResult out;
  double best_f1 = -1.0;
  for (double lr : grid.lr)
    for (std::size_t layers : grid.layers)
      for (std::size_t d : grid.d_model)
        for (std::size_t w : grid.window)
          for (double dropout : grid.dropout) {
            ModelConfig cfg = base;
            cfg.layers = layers;
            cfg.d_model = d;
            cfg.window = w;
            cfg.dropout = dropout;
            TrainOptions opts = base_opts;
            opts.lr = lr;
            const auto res = train(init_params<T>(cfg), train_set, val_set, opts);
            const EpochRecord& best = res.history[res.best_epoch - 1];
            out.table.push_back({lr, layers, d, w, dropout, res.best_epoch,
                                 best.val_weighted_precision, best.val_weighted_recall,
                                 best.val_weighted_f1});
            if (best.val_weighted_f1 > best_f1) {
              best_f1 = best.val_weighted_f1;
              out.best = out.table.size() - 1;
              out.best_config = cfg;
              out.best_options = opts;
            }
          }
  return out;
}

#define INTENT_INSTANTIATE(T)                                                                  \
  template void adam_step<T>(ModelParams<T>&, std::span<const T>, AdamState<T>&,              \
                             const TrainOptions&);                                            \
  template TrainResult<T> train<T>(ModelParams<T>, const std::vector<LabeledInput>&,          \
                                   const std::vector<LabeledInput>&, const TrainOptions&);    \
  template Prediction predict<T>(const ModelParams<T>&, const Session&, const Vocab&);        \
  template Prediction predict_encoded<T>(const ModelParams<T>&, const EncodedInput&);         \
  template ClassReport evaluate<T>(const ModelParams<T>&, const std::vector<LabeledInput>&);  \
  template GridResult grid_search<T>(const ModelConfig&, const TrainOptions&, const GridSpec&, \
                                     const std::vector<LabeledInput>&,                        \
                                     const std::vector<LabeledInput>&);

INTENT_INSTANTIATE(float)
INTENT_INSTANTIATE(double)
#undef INTENT_INSTANTIATE

}  // namespace intent
