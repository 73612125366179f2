// SPDX-License-Identifier: Apache-2.0
#include "intent/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "intent/errors.hpp"
#include "intent/kernels.hpp"

namespace intent {

namespace {

constexpr double kLayerNormEps = 1e-5;

const char* variant_name(Variant v) {
  return v == Variant::LongformerPlus ? "longformer_plus" : "longformer";
}

template <typename E>
E parse_enum(const nlohmann::json& j, std::initializer_list<std::pair<const char*, E>> names) {
  const auto s = j.get<std::string>();
  for (const auto& [name, value] : names)
    if (s == name) return value;
  throw ConfigError("unknown enum value '" + s + "'");
}

}  // namespace

void ModelConfig::validate() const {
  if (vocab_size < kNumReserved) throw ConfigError("vocab_size must cover reserved tokens");
  if (d_model == 0 || heads == 0 || d_model % heads != 0)
    throw ConfigError("d_model must be divisible by heads");
  if (window % 2 != 0) throw ConfigError("attention window must be even");
  if (layers == 0) throw ConfigError("need at least one layer");
  if (max_tokens == 0 || max_pages == 0) throw ConfigError("max_tokens and max_pages must be > 0");
  if (ffn_mult == 0) throw ConfigError("ffn_mult must be > 0");
  if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("dropout must be in [0, 1)");
}

void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = nlohmann::json{
      {"vocab_size", c.vocab_size},
      {"d_model", c.d_model},
      {"max_tokens", c.max_tokens},
      {"max_pages", c.max_pages},
      {"layers", c.layers},
      {"heads", c.heads},
      {"window", c.window},
      {"ffn_mult", c.ffn_mult},
      {"dropout", c.dropout},
      {"variant", variant_name(c.variant)},
      {"attention_mode", c.attention_mode == AttentionMode::full ? "full" : "sliding_global"},
      {"attention_impl", c.attention_impl == AttentionImpl::masked ? "masked" : "banded"},
      {"precision", c.precision == Precision::f32 ? "f32" : "f64"},
      {"seed", c.seed},
      {"cls_only_last_layer", c.cls_only_last_layer},
  };
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
  ModelConfig d;
  c.vocab_size = j.value("vocab_size", d.vocab_size);
  c.d_model = j.value("d_model", d.d_model);
  c.max_tokens = j.value("max_tokens", d.max_tokens);
  c.max_pages = j.value("max_pages", d.max_pages);
  c.layers = j.value("layers", d.layers);
  c.heads = j.value("heads", d.heads);
  c.window = j.value("window", d.window);
  c.ffn_mult = j.value("ffn_mult", d.ffn_mult);
  c.dropout = j.value("dropout", d.dropout);
  c.seed = j.value("seed", d.seed);
  c.cls_only_last_layer = j.value("cls_only_last_layer", d.cls_only_last_layer);
  c.variant = j.contains("variant")
                  ? parse_enum<Variant>(j["variant"], {{"longformer_plus", Variant::LongformerPlus},
                                                       {"longformer", Variant::Longformer}})
                  : d.variant;
  c.attention_mode =
      j.contains("attention_mode")
          ? parse_enum<AttentionMode>(j["attention_mode"],
                                      {{"full", AttentionMode::full},
                                       {"sliding_global", AttentionMode::sliding_global}})
          : d.attention_mode;
  c.attention_impl = j.contains("attention_impl")
                         ? parse_enum<AttentionImpl>(j["attention_impl"],
                                                     {{"masked", AttentionImpl::masked},
                                                      {"banded", AttentionImpl::banded}})
                         : d.attention_impl;
  c.precision = j.contains("precision")
                    ? parse_enum<Precision>(j["precision"],
                                            {{"f32", Precision::f32}, {"f64", Precision::f64}})
                    : d.precision;
}

ParamLayout ParamLayout::build(const ModelConfig& c) {
  c.validate();
  ParamLayout layout;
  auto add = [&](std::string name, std::size_t rows, std::size_t cols) {
    layout.tensors.push_back({std::move(name), rows, cols, layout.total});
    layout.total += rows * cols;
    return layout.tensors.size() - 1;
  };
  const std::size_t d = c.d_model, f = c.ffn_dim();
  layout.tok_emb = add("tok_emb", c.vocab_size, d);
  layout.pos_emb = add("pos_emb", c.max_tokens, d);
  layout.type_emb = add("type_emb", 3, d);
  layout.page_emb = add("page_emb", c.max_pages, d);
  for (std::size_t l = 0; l < c.layers; ++l) {
    const std::string p = "block" + std::to_string(l) + ".";
    LayerTensors t{};
    t.ln1_g = add(p + "ln1.gain", 1, d);
    t.ln1_b = add(p + "ln1.bias", 1, d);
    t.wq = add(p + "attn.wq", d, d);
    t.bq = add(p + "attn.bq", 1, d);
    t.wk = add(p + "attn.wk", d, d);
    t.bk = add(p + "attn.bk", 1, d);
    t.wv = add(p + "attn.wv", d, d);
    t.bv = add(p + "attn.bv", 1, d);
    t.wo = add(p + "attn.wo", d, d);
    t.bo = add(p + "attn.bo", 1, d);
    t.ln2_g = add(p + "ln2.gain", 1, d);
    t.ln2_b = add(p + "ln2.bias", 1, d);
    t.w1 = add(p + "ffn.w1", d, f);
    t.b1 = add(p + "ffn.b1", 1, f);
    t.w2 = add(p + "ffn.w2", f, d);
    t.b2 = add(p + "ffn.b2", 1, d);
    layout.blocks.push_back(t);
  }
  layout.lnf_g = add("final_ln.gain", 1, d);
  layout.lnf_b = add("final_ln.bias", 1, d);
  layout.head_w = add("head.w", d, kNumClasses);
  layout.head_b = add("head.b", 1, kNumClasses);
  return layout;
}

template <typename T>
ModelParams<T> init_params(const ModelConfig& config) {
  ModelParams<T> params{config, ParamLayout::build(config), {}};
  params.values.assign(params.layout.total, T(0));
  for (std::size_t id = 0; id < params.layout.tensors.size(); ++id) {
    const auto& spec = params.layout.tensors[id];
    auto out = params.tensor(id);
    const bool is_gain = spec.name.ends_with(".gain");
    if (is_gain) {
      std::fill(out.begin(), out.end(), T(1));
    } else if (spec.rows > 1) {
      Rng rng(mix_seed(config.seed, id));
      const double limit = std::sqrt(6.0 / static_cast<double>(spec.rows + spec.cols));
      for (auto& w : out) w = static_cast<T>((2.0 * uniform01(rng) - 1.0) * limit);
    }
  }
  return params;
}

namespace {

template <typename T>
void add_bias(std::span<T> y, std::span<const T> b, std::size_t rows) {
  const std::size_t n = b.size();
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < n; ++j) y[i * n + j] += b[j];
}

template <typename T>
void bias_grad(std::span<const T> dy, std::span<T> db, std::size_t rows) {
  const std::size_t n = db.size();
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < n; ++j) db[j] += dy[i * n + j];
}

template <typename T>
void layernorm_forward(std::span<const T> x, std::span<const T> gain, std::span<const T> bias,
                       std::size_t rows, std::vector<T>& y, std::vector<T>& xhat,
                       std::vector<T>& rstd) {
  const std::size_t d = gain.size();
  y.resize(rows * d);
  xhat.resize(rows * d);
  rstd.resize(rows);
  for (std::size_t i = 0; i < rows; ++i) {
    const T* xi = x.data() + i * d;
    T mean = 0;
    for (std::size_t c = 0; c < d; ++c) mean += xi[c];
    mean /= static_cast<T>(d);
    T var = 0;
    for (std::size_t c = 0; c < d; ++c) var += (xi[c] - mean) * (xi[c] - mean);
    var /= static_cast<T>(d);
    const T r = T(1) / std::sqrt(var + static_cast<T>(kLayerNormEps));
    rstd[i] = r;
    for (std::size_t c = 0; c < d; ++c) {
      const T h = (xi[c] - mean) * r;
      xhat[i * d + c] = h;
      y[i * d + c] = h * gain[c] + bias[c];
    }
  }
}

// dx += LayerNorm backward; dgain/dbias accumulate.
template <typename T>
void layernorm_backward(std::span<const T> dy, std::span<const T> xhat, std::span<const T> rstd,
                        std::span<const T> gain, std::size_t rows, std::span<T> dx,
                        std::span<T> dgain, std::span<T> dbias) {
  const std::size_t d = gain.size();
  std::vector<T> dxhat(d);
  for (std::size_t i = 0; i < rows; ++i) {
    const T* dyi = dy.data() + i * d;
    const T* hi = xhat.data() + i * d;
    T mean_dxhat = 0, mean_dxhat_h = 0;
    for (std::size_t c = 0; c < d; ++c) {
      dgain[c] += dyi[c] * hi[c];
      dbias[c] += dyi[c];
      dxhat[c] = dyi[c] * gain[c];
      mean_dxhat += dxhat[c];
      mean_dxhat_h += dxhat[c] * hi[c];
    }
    mean_dxhat /= static_cast<T>(d);
    mean_dxhat_h /= static_cast<T>(d);
    for (std::size_t c = 0; c < d; ++c)
      dx[i * d + c] += rstd[i] * (dxhat[c] - mean_dxhat - hi[c] * mean_dxhat_h);
  }
}

template <typename T>
T gelu(T x) {
  return T(0.5) * x * (T(1) + std::erf(x / std::sqrt(T(2))));
}

template <typename T>
T gelu_grad(T x) {
  const T cdf = T(0.5) * (T(1) + std::erf(x / std::sqrt(T(2))));
  const T pdf = std::exp(T(-0.5) * x * x) / std::sqrt(T(2) * T(M_PI));
  return cdf + x * pdf;
}

template <typename T>
std::vector<T> dropout_mask(std::size_t n, double p, Rng* rng) {
  if (rng == nullptr || p <= 0.0) return {};
  std::vector<T> mask(n);
  const T keep = static_cast<T>(1.0 / (1.0 - p));
  for (auto& m : mask) m = uniform01(*rng) < p ? T(0) : keep;
  return mask;
}

template <typename T>
void apply_mask(std::span<T> x, const std::vector<T>& mask) {
  if (mask.empty()) return;
  for (std::size_t i = 0; i < x.size(); ++i) x[i] *= mask[i];
}

void check_input(const ModelConfig& c, const EncodedInput& in) {
  const std::size_t L = in.size();
  if (L == 0) throw std::invalid_argument("empty input");
  if (L > c.max_tokens) throw std::invalid_argument("input longer than max_tokens");
  if (in.token_positions.size() != L || in.token_types.size() != L || in.page_positions.size() != L)
    throw std::invalid_argument("input streams differ in length");
  for (std::size_t i = 0; i < L; ++i) {
    if (in.token_ids[i] < 0 || static_cast<std::size_t>(in.token_ids[i]) >= c.vocab_size)
      throw std::invalid_argument("token id out of range at " + std::to_string(i));
    if (in.token_positions[i] < 0 || static_cast<std::size_t>(in.token_positions[i]) >= c.max_tokens)
      throw std::invalid_argument("token position out of range at " + std::to_string(i));
    if (in.token_types[i] < 0 || in.token_types[i] > 2)
      throw std::invalid_argument("token type out of range at " + std::to_string(i));
    if (in.page_positions[i] < 0 || static_cast<std::size_t>(in.page_positions[i]) >= c.max_pages)
      throw std::invalid_argument("page position out of range at " + std::to_string(i));
  }
}

template <typename T>
std::span<const T> cspan(const std::vector<T>& v) {
  return {v.data(), v.size()};
}

}  // namespace

template <typename T>
ForwardTrace<T> forward(const ModelParams<T>& params, const EncodedInput& input,
                        const ForwardOptions& options) {
  const ModelConfig& c = params.config;
  const ParamLayout& lay = params.layout;
  check_input(c, input);
  const std::size_t L = input.size(), d = c.d_model, f = c.ffn_dim();
  const bool training = options.dropout_rng != nullptr && c.dropout > 0.0;
  Rng* rng = training ? options.dropout_rng : nullptr;

  ForwardTrace<T> tr;
  tr.length = L;

  std::vector<T> x(L * d);
  {
    const auto A = params.tensor(lay.tok_emb);
    const auto B = params.tensor(lay.pos_emb);
    const auto Ct = params.tensor(lay.type_emb);
    const auto D = params.tensor(lay.page_emb);
    const bool plus = c.variant == Variant::LongformerPlus;
    for (std::size_t i = 0; i < L; ++i) {
      const T* a = A.data() + static_cast<std::size_t>(input.token_ids[i]) * d;
      const T* b = B.data() + static_cast<std::size_t>(input.token_positions[i]) * d;
      const T* ct = Ct.data() + static_cast<std::size_t>(input.token_types[i]) * d;
      const T* dd = D.data() + static_cast<std::size_t>(input.page_positions[i]) * d;
      T* xi = x.data() + i * d;
      for (std::size_t k = 0; k < d; ++k) {
        T e = a[k] + b[k];
        if (plus) {
          e += ct[k];
          e += dd[k];
        }
        xi[k] = e;
      }
    }
    tr.embed_mask = dropout_mask<T>(L * d, c.dropout, rng);
    apply_mask(std::span<T>(x), tr.embed_mask);
  }

  std::size_t rows = L;
  tr.layers.resize(c.layers);
  for (std::size_t l = 0; l < c.layers; ++l) {
    const LayerTensors& t = lay.blocks[l];
    LayerTrace<T>& lt = tr.layers[l];
    const std::size_t R = (c.cls_only_last_layer && l + 1 == c.layers) ? 1 : rows;
    lt.rows_out = R;
    lt.x_in = x;

    layernorm_forward<T>(cspan(x), params.tensor(t.ln1_g), params.tensor(t.ln1_b), rows, lt.ln1,
                         lt.ln1_xhat, lt.ln1_rstd);
    lt.q.resize(R * d);
    lt.k.resize(rows * d);
    lt.v.resize(rows * d);
    kernels::matmul<T>(cspan(lt.ln1), params.tensor(t.wq), lt.q, R, d, d);
    add_bias<T>(lt.q, params.tensor(t.bq), R);
    kernels::matmul<T>(cspan(lt.ln1), params.tensor(t.wk), lt.k, rows, d, d);
    add_bias<T>(lt.k, params.tensor(t.bk), rows);
    kernels::matmul<T>(cspan(lt.ln1), params.tensor(t.wv), lt.v, rows, d, d);
    add_bias<T>(lt.v, params.tensor(t.bv), rows);

    const AttentionShape shape{R, rows, d, c.heads, c.attention_mode, c.window};
    lt.ctx.resize(R * d);
    if (c.attention_impl == AttentionImpl::masked)
      masked_attention_forward<T>(cspan(lt.q), cspan(lt.k), cspan(lt.v), shape, lt.ctx, lt.attn);
    else
      banded_attention_forward<T>(cspan(lt.q), cspan(lt.k), cspan(lt.v), shape, lt.ctx, lt.attn);

    std::vector<T> a(R * d);
    kernels::matmul<T>(cspan(lt.ctx), params.tensor(t.wo), a, R, d, d);
    add_bias<T>(a, params.tensor(t.bo), R);
    lt.attn_mask = dropout_mask<T>(R * d, c.dropout, rng);
    apply_mask(std::span<T>(a), lt.attn_mask);
    lt.x_mid.resize(R * d);
    for (std::size_t i = 0; i < R * d; ++i) lt.x_mid[i] = x[i] + a[i];

    layernorm_forward<T>(cspan(lt.x_mid), params.tensor(t.ln2_g), params.tensor(t.ln2_b), R,
                         lt.ln2, lt.ln2_xhat, lt.ln2_rstd);
    lt.ffn_pre.resize(R * f);
    kernels::matmul<T>(cspan(lt.ln2), params.tensor(t.w1), lt.ffn_pre, R, d, f);
    add_bias<T>(lt.ffn_pre, params.tensor(t.b1), R);
    lt.ffn_act.resize(R * f);
    for (std::size_t i = 0; i < R * f; ++i) lt.ffn_act[i] = gelu(lt.ffn_pre[i]);
    std::vector<T> g(R * d);
    kernels::matmul<T>(cspan(lt.ffn_act), params.tensor(t.w2), g, R, f, d);
    add_bias<T>(g, params.tensor(t.b2), R);
    lt.ffn_mask = dropout_mask<T>(R * d, c.dropout, rng);
    apply_mask(std::span<T>(g), lt.ffn_mask);

    x.resize(R * d);
    for (std::size_t i = 0; i < R * d; ++i) x[i] = lt.x_mid[i] + g[i];
    rows = R;
  }

  tr.x_final = x;
  std::vector<T> hf, rstd;
  layernorm_forward<T>(std::span<const T>(x.data(), d), params.tensor(lay.lnf_g),
                       params.tensor(lay.lnf_b), 1, hf, tr.lnf_xhat, rstd);
  tr.lnf_rstd = rstd[0];
  tr.h_cls = hf;

  const auto W = params.tensor(lay.head_w);
  const auto bh = params.tensor(lay.head_b);
  for (std::size_t k = 0; k < kNumClasses; ++k) {
    T acc = 0;
    for (std::size_t i = 0; i < d; ++i) acc += hf[i] * W[i * kNumClasses + k];
    tr.logits[k] = acc + bh[k];
  }
  return tr;
}

template <typename T>
void backward(const ModelParams<T>& params, const EncodedInput& input,
              const ForwardTrace<T>& tr, std::span<const T> d_logits, std::span<T> grads) {
  const ModelConfig& c = params.config;
  const ParamLayout& lay = params.layout;
  const std::size_t d = c.d_model, f = c.ffn_dim(), L = tr.length;
  auto G = [&](std::size_t id) {
    const auto& t = lay.tensors[id];
    return std::span<T>(grads.data() + t.offset, t.size());
  };

  // Head and final LayerNorm on the [CLS] row.
  std::vector<T> dh(d, T(0));
  {
    const auto W = params.tensor(lay.head_w);
    auto dW = G(lay.head_w);
    auto db = G(lay.head_b);
    for (std::size_t k = 0; k < kNumClasses; ++k) db[k] += d_logits[k];
    for (std::size_t i = 0; i < d; ++i) {
      T acc = 0;
      for (std::size_t k = 0; k < kNumClasses; ++k) {
        dW[i * kNumClasses + k] += tr.h_cls[i] * d_logits[k];
        acc += W[i * kNumClasses + k] * d_logits[k];
      }
      dh[i] = acc;
    }
  }
  std::size_t rows = tr.layers.back().rows_out;
  std::vector<T> dx(rows * d, T(0));
  {
    const T rstd = tr.lnf_rstd;
    layernorm_backward<T>(cspan(dh), cspan(tr.lnf_xhat), std::span<const T>(&rstd, 1),
                          params.tensor(lay.lnf_g), 1, std::span<T>(dx.data(), d),
                          G(lay.lnf_g), G(lay.lnf_b));
  }

  for (std::size_t l = c.layers; l-- > 0;) {
    const LayerTensors& t = lay.blocks[l];
    const LayerTrace<T>& lt = tr.layers[l];
    const std::size_t R = lt.rows_out;
    const std::size_t Lin = lt.x_in.size() / d;

    // FFN branch: x_out = x_mid + drop(gelu(ln2 W1 + b1) W2 + b2)
    std::vector<T> dg = dx;
    apply_mask(std::span<T>(dg), lt.ffn_mask);
    kernels::matmul_tn<T>(cspan(lt.ffn_act), cspan(dg), G(t.w2), R, f, d);
    bias_grad<T>(cspan(dg), G(t.b2), R);
    std::vector<T> du(R * f);
    kernels::matmul_nt<T>(cspan(dg), params.tensor(t.w2), du, R, d, f);
    for (std::size_t i = 0; i < R * f; ++i) du[i] *= gelu_grad(lt.ffn_pre[i]);
    kernels::matmul_tn<T>(cspan(lt.ln2), cspan(du), G(t.w1), R, d, f);
    bias_grad<T>(cspan(du), G(t.b1), R);
    std::vector<T> dln2(R * d);
    kernels::matmul_nt<T>(cspan(du), params.tensor(t.w1), dln2, R, f, d);
    std::vector<T> dmid = dx;
    layernorm_backward<T>(cspan(dln2), cspan(lt.ln2_xhat), cspan(lt.ln2_rstd),
                          params.tensor(t.ln2_g), R, dmid, G(t.ln2_g), G(t.ln2_b));

    // Attention branch: x_mid = x_in[:R] + drop(ctx Wo + bo)
    std::vector<T> dxin(Lin * d, T(0));
    std::copy(dmid.begin(), dmid.end(), dxin.begin());
    std::vector<T> da = dmid;
    apply_mask(std::span<T>(da), lt.attn_mask);
    kernels::matmul_tn<T>(cspan(lt.ctx), cspan(da), G(t.wo), R, d, d);
    bias_grad<T>(cspan(da), G(t.bo), R);
    std::vector<T> dctx(R * d);
    kernels::matmul_nt<T>(cspan(da), params.tensor(t.wo), dctx, R, d, d);

    std::vector<T> dq(R * d, T(0)), dk(Lin * d, T(0)), dv(Lin * d, T(0));
    const AttentionShape shape{R, Lin, d, c.heads, c.attention_mode, c.window};
    if (c.attention_impl == AttentionImpl::masked)
      masked_attention_backward<T>(cspan(lt.q), cspan(lt.k), cspan(lt.v), shape, lt.attn,
                                   cspan(dctx), dq, dk, dv);
    else
      banded_attention_backward<T>(cspan(lt.q), cspan(lt.k), cspan(lt.v), shape, lt.attn,
                                   cspan(dctx), dq, dk, dv);

    kernels::matmul_tn<T>(cspan(lt.ln1), cspan(dq), G(t.wq), R, d, d);
    bias_grad<T>(cspan(dq), G(t.bq), R);
    kernels::matmul_tn<T>(cspan(lt.ln1), cspan(dk), G(t.wk), Lin, d, d);
    bias_grad<T>(cspan(dk), G(t.bk), Lin);
    kernels::matmul_tn<T>(cspan(lt.ln1), cspan(dv), G(t.wv), Lin, d, d);
    bias_grad<T>(cspan(dv), G(t.bv), Lin);

    std::vector<T> dln1(Lin * d, T(0));
    kernels::matmul_nt<T>(cspan(dq), params.tensor(t.wq), dln1, R, d, d, true);
    kernels::matmul_nt<T>(cspan(dk), params.tensor(t.wk), dln1, Lin, d, d, true);
    kernels::matmul_nt<T>(cspan(dv), params.tensor(t.wv), dln1, Lin, d, d, true);
    layernorm_backward<T>(cspan(dln1), cspan(lt.ln1_xhat), cspan(lt.ln1_rstd),
                          params.tensor(t.ln1_g), Lin, dxin, G(t.ln1_g), G(t.ln1_b));
    dx = std::move(dxin);
    rows = Lin;
  }

  apply_mask(std::span<T>(dx), tr.embed_mask);
  auto dA = G(lay.tok_emb);
  auto dB = G(lay.pos_emb);
  auto dC = G(lay.type_emb);
  auto dD = G(lay.page_emb);
  const bool plus = c.variant == Variant::LongformerPlus;
  for (std::size_t i = 0; i < L; ++i) {
    const T* g = dx.data() + i * d;
    T* a = dA.data() + static_cast<std::size_t>(input.token_ids[i]) * d;
    T* b = dB.data() + static_cast<std::size_t>(input.token_positions[i]) * d;
    for (std::size_t k = 0; k < d; ++k) {
      a[k] += g[k];
      b[k] += g[k];
    }
    if (plus) {
      T* ct = dC.data() + static_cast<std::size_t>(input.token_types[i]) * d;
      T* dd = dD.data() + static_cast<std::size_t>(input.page_positions[i]) * d;
      for (std::size_t k = 0; k < d; ++k) {
        ct[k] += g[k];
        dd[k] += g[k];
      }
    }
  }
}

template <typename T>
std::array<T, kNumClasses> softmax(const std::array<T, kNumClasses>& logits) {
  const T m = *std::max_element(logits.begin(), logits.end());
  std::array<T, kNumClasses> p{};
  T total = 0;
  for (std::size_t k = 0; k < kNumClasses; ++k) {
    p[k] = std::exp(logits[k] - m);
    total += p[k];
  }
  for (auto& x : p) x /= total;
  return p;
}

template <typename T>
LossAndGrad<T> loss_and_grad(const ModelParams<T>& params,
                             std::span<const LabeledInput* const> batch,
                             std::optional<std::uint64_t> dropout_seed) {
  if (batch.empty()) throw std::invalid_argument("empty batch");
  const std::size_t n = batch.size();
  const T inv_n = T(1) / static_cast<T>(n);
  std::vector<std::vector<T>> per_example(n);
  std::vector<T> losses(n);

  const std::ptrdiff_t count = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t bi = 0; bi < count; ++bi) {
    const auto b = static_cast<std::size_t>(bi);
    std::optional<Rng> rng;
    if (dropout_seed) rng.emplace(mix_seed(*dropout_seed, b));
    ForwardOptions opts;
    opts.dropout_rng = rng ? &*rng : nullptr;
    const auto trace = forward(params, batch[b]->input, opts);
    const auto probs = softmax(trace.logits);
    const std::size_t y = index_of(batch[b]->label);
    // log-softmax directly for accuracy when p_y underflows
    const T m = *std::max_element(trace.logits.begin(), trace.logits.end());
    T lse = 0;
    for (auto z : trace.logits) lse += std::exp(z - m);
    losses[b] = -(trace.logits[y] - m - std::log(lse));
    std::array<T, kNumClasses> dlogits{};
    for (std::size_t k = 0; k < kNumClasses; ++k)
      dlogits[k] = (probs[k] - (k == y ? T(1) : T(0))) * inv_n;
    per_example[b].assign(params.layout.total, T(0));
    backward(params, batch[b]->input, trace, std::span<const T>(dlogits), std::span<T>(per_example[b]));
  }

  LossAndGrad<T> out;
  out.grads.assign(params.layout.total, T(0));
  for (std::size_t b = 0; b < n; ++b) {
    out.loss += losses[b];
    const auto& g = per_example[b];
    for (std::size_t i = 0; i < g.size(); ++i) out.grads[i] += g[i];
  }
  out.loss *= inv_n;
  return out;
}

template <typename T>
LossAndGrad<T> loss_and_grad(const ModelParams<T>& params, std::span<const LabeledInput> batch,
                             std::optional<std::uint64_t> dropout_seed) {
  std::vector<const LabeledInput*> ptrs;
  ptrs.reserve(batch.size());
  for (const auto& b : batch) ptrs.push_back(&b);
  return loss_and_grad(params, std::span<const LabeledInput* const>(ptrs), dropout_seed);
}

#define INTENT_INSTANTIATE(T)                                                                    \
  template ModelParams<T> init_params<T>(const ModelConfig&);                                   \
  template ForwardTrace<T> forward<T>(const ModelParams<T>&, const EncodedInput&,               \
                                      const ForwardOptions&);                                   \
  template void backward<T>(const ModelParams<T>&, const EncodedInput&, const ForwardTrace<T>&, \
                            std::span<const T>, std::span<T>);                                  \
  template std::array<T, kNumClasses> softmax<T>(const std::array<T, kNumClasses>&);            \
  template LossAndGrad<T> loss_and_grad<T>(const ModelParams<T>&,                               \
                                           std::span<const LabeledInput* const>,                \
                                           std::optional<std::uint64_t>);                       \
  template LossAndGrad<T> loss_and_grad<T>(const ModelParams<T>&, std::span<const LabeledInput>, \
                                           std::optional<std::uint64_t>);

INTENT_INSTANTIATE(float)
INTENT_INSTANTIATE(double)
#undef INTENT_INSTANTIATE

}  // namespace intent
