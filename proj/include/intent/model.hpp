// SPDX-License-Identifier: Apache-2.0
#pragma once

// Longformer+ classifier: four summed embeddings (token, token position,
// token type, page position), pre-LayerNorm transformer blocks with full or
// sliding-window-plus-global-[CLS] attention, and a linear head on h_[CLS].
// The Longformer variant drops the token-type and page-position terms.

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "intent/attention.hpp"
#include "intent/rng.hpp"
#include "intent/session.hpp"
#include "intent/tokenizer.hpp"

namespace intent {

enum class Variant { LongformerPlus, Longformer };
enum class AttentionImpl { masked, banded };
enum class Precision { f32, f64 };

struct ModelConfig {
  std::size_t vocab_size = 0;  // V_w
  std::size_t d_model = 64;
  std::size_t max_tokens = 1024;  // p
  std::size_t max_pages = 50;     // n
  std::size_t layers = 2;
  std::size_t heads = 4;
  std::size_t window = 64;
  std::size_t ffn_mult = 4;
  double dropout = 0.1;
  Variant variant = Variant::LongformerPlus;
  AttentionMode attention_mode = AttentionMode::sliding_global;
  AttentionImpl attention_impl = AttentionImpl::masked;
  Precision precision = Precision::f32;
  std::uint64_t seed = 0;
  // The last block only needs the [CLS] row after its key/value projections.
  bool cls_only_last_layer = true;

  void validate() const;
  std::size_t head_dim() const { return d_model / heads; }
  std::size_t ffn_dim() const { return d_model * ffn_mult; }
  EncodeLimits encode_limits() const { return {max_tokens, max_pages}; }

  bool operator==(const ModelConfig&) const = default;
};

void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);

struct TensorSpec {
  std::string name;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t offset = 0;
  std::size_t size() const { return rows * cols; }
};

struct LayerTensors {
  std::size_t ln1_g, ln1_b, wq, bq, wk, bk, wv, bv, wo, bo;
  std::size_t ln2_g, ln2_b, w1, b1, w2, b2;
};

// Flat parameter layout; every tensor is a [rows × cols] slice of one buffer.
struct ParamLayout {
  std::vector<TensorSpec> tensors;
  std::size_t tok_emb = 0, pos_emb = 0, type_emb = 0, page_emb = 0;
  std::vector<LayerTensors> blocks;
  std::size_t lnf_g = 0, lnf_b = 0, head_w = 0, head_b = 0;
  std::size_t total = 0;

  static ParamLayout build(const ModelConfig& config);
};

template <typename T>
struct ModelParams {
  ModelConfig config;
  ParamLayout layout;
  std::vector<T> values;

  std::span<T> tensor(std::size_t id) {
    const auto& t = layout.tensors[id];
    return {values.data() + t.offset, t.size()};
  }
  std::span<const T> tensor(std::size_t id) const {
    const auto& t = layout.tensors[id];
    return {values.data() + t.offset, t.size()};
  }
  // Zero-filled buffer with this layout, for gradients and optimizer moments.
  std::vector<T> zeros_like() const { return std::vector<T>(layout.total, T(0)); }
};

// Xavier-uniform matrices, zero biases, LayerNorm gain 1 and bias 0. Each
// tensor draws from its own stream of `config.seed`, so both variants share
// identical weights for a given seed.
template <typename T>
ModelParams<T> init_params(const ModelConfig& config);

template <typename T>
struct LayerTrace {
  std::size_t rows_out = 0;  // R: query rows kept by this block
  std::vector<T> x_in;       // L × d
  std::vector<T> ln1, ln1_xhat, ln1_rstd;
  std::vector<T> q, k, v, ctx;
  AttentionCache<T> attn;
  std::vector<T> attn_mask;  // dropout multipliers, empty when inactive
  std::vector<T> x_mid;      // R × d
  std::vector<T> ln2, ln2_xhat, ln2_rstd;
  std::vector<T> ffn_pre, ffn_act;
  std::vector<T> ffn_mask;
};

template <typename T>
struct ForwardTrace {
  std::size_t length = 0;
  std::vector<T> embed_mask;
  std::vector<LayerTrace<T>> layers;
  std::vector<T> x_final;  // R_last × d
  std::vector<T> lnf_xhat;
  T lnf_rstd = 0;
  std::vector<T> h_cls;  // d
  std::array<T, kNumClasses> logits{};
};

struct ForwardOptions {
  // Training mode: dropout masks drawn from this stream. Null means eval.
  Rng* dropout_rng = nullptr;
};

template <typename T>
ForwardTrace<T> forward(const ModelParams<T>& params, const EncodedInput& input,
                        const ForwardOptions& options = {});

// Accumulates d(loss)/d(params) into `grads` given d(loss)/d(logits).
template <typename T>
void backward(const ModelParams<T>& params, const EncodedInput& input,
              const ForwardTrace<T>& trace, std::span<const T> d_logits, std::span<T> grads);

template <typename T>
std::array<T, kNumClasses> softmax(const std::array<T, kNumClasses>& logits);

struct LabeledInput {
  EncodedInput input;
  IntentClass label = IntentClass::INS;
};

template <typename T>
struct LossAndGrad {
  T loss = 0;
  std::vector<T> grads;
};

// Mean cross-entropy over the batch and its exact gradient. Examples run in
// parallel into private buffers that are summed in batch order. With a
// dropout seed, example b uses the stream mix_seed(seed, b).
template <typename T>
LossAndGrad<T> loss_and_grad(const ModelParams<T>& params,
                             std::span<const LabeledInput* const> batch,
                             std::optional<std::uint64_t> dropout_seed = std::nullopt);

template <typename T>
LossAndGrad<T> loss_and_grad(const ModelParams<T>& params, std::span<const LabeledInput> batch,
                             std::optional<std::uint64_t> dropout_seed = std::nullopt);

}  // namespace intent
