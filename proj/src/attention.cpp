// SPDX-License-Identifier: Apache-2.0
#include "intent/attention.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace intent {

bool attends(std::size_t i, std::size_t j, AttentionMode mode, std::size_t window) {
  if (mode == AttentionMode::full || i == 0 || j == 0) return true;
  const std::size_t dist = i > j ? i - j : j - i;
  return dist <= window / 2;
}

std::vector<std::uint32_t> allowed_keys(std::size_t i, std::size_t length, AttentionMode mode,
                                        std::size_t window) {
  std::vector<std::uint32_t> out;
  if (mode == AttentionMode::full || i == 0) {
    out.resize(length);
    for (std::size_t j = 0; j < length; ++j) out[j] = static_cast<std::uint32_t>(j);
    return out;
  }
  const std::size_t half = window / 2;
  const std::size_t lo = std::max<std::size_t>(1, i > half ? i - half : 0);
  const std::size_t hi = std::min(length - 1, i + half);
  out.push_back(0);
  for (std::size_t j = lo; j <= hi; ++j) out.push_back(static_cast<std::uint32_t>(j));
  return out;
}

namespace {

void check_shape(const AttentionShape& s) {
  if (s.heads == 0 || s.d_model % s.heads != 0)
    throw std::invalid_argument("d_model must be divisible by heads");
  if (s.q_rows > s.length) throw std::invalid_argument("more query rows than keys");
}

template <typename T>
T dot(const T* a, const T* b, std::size_t n) {
  T acc = 0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

}  // namespace

template <typename T>
void masked_attention_forward(std::span<const T> q, std::span<const T> k, std::span<const T> v,
                              const AttentionShape& s, std::span<T> context,
                              AttentionCache<T>& cache) {
  check_shape(s);
  const std::size_t R = s.q_rows, L = s.length, d = s.d_model, dh = d / s.heads;
  const T scale = T(1) / std::sqrt(static_cast<T>(dh));
  cache.probs.assign(s.heads * R * L, T(0));
  cache.cols.clear();
  cache.row_begin.clear();
  const std::ptrdiff_t work = static_cast<std::ptrdiff_t>(s.heads * R);
#pragma omp parallel for schedule(static) if (R * L * d > (1 << 15))
  for (std::ptrdiff_t hr = 0; hr < work; ++hr) {
    const std::size_t h = static_cast<std::size_t>(hr) / R;
    const std::size_t i = static_cast<std::size_t>(hr) % R;
    T* p = cache.probs.data() + (h * R + i) * L;
    const T* qi = q.data() + i * d + h * dh;
    T row_max = -std::numeric_limits<T>::infinity();
    for (std::size_t j = 0; j < L; ++j) {
      p[j] = attends(i, j, s.mode, s.window) ? scale * dot(qi, k.data() + j * d + h * dh, dh)
                                              : -std::numeric_limits<T>::infinity();
      row_max = std::max(row_max, p[j]);
    }
    T total = 0;
    for (std::size_t j = 0; j < L; ++j) {
      p[j] = std::exp(p[j] - row_max);
      total += p[j];
    }
    T* ci = context.data() + i * d + h * dh;
    std::fill(ci, ci + dh, T(0));
    for (std::size_t j = 0; j < L; ++j) {
      p[j] /= total;
      const T* vj = v.data() + j * d + h * dh;
      for (std::size_t c = 0; c < dh; ++c) ci[c] += p[j] * vj[c];
    }
  }
}

template <typename T>
void masked_attention_backward(std::span<const T> q, std::span<const T> k, std::span<const T> v,
                               const AttentionShape& s, const AttentionCache<T>& cache,
                               std::span<const T> d_context, std::span<T> dq, std::span<T> dk,
                               std::span<T> dv) {
  const std::size_t R = s.q_rows, L = s.length, d = s.d_model, dh = d / s.heads;
  const T scale = T(1) / std::sqrt(static_cast<T>(dh));
  const std::ptrdiff_t heads = static_cast<std::ptrdiff_t>(s.heads);
  // Heads own disjoint column blocks, so dk/dv accumulation does not race.
#pragma omp parallel for schedule(static) if (R * L * d > (1 << 15))
  for (std::ptrdiff_t hh = 0; hh < heads; ++hh) {
    const std::size_t h = static_cast<std::size_t>(hh);
    std::vector<T> dp(L);
    for (std::size_t i = 0; i < R; ++i) {
      const T* p = cache.probs.data() + (h * R + i) * L;
      const T* dci = d_context.data() + i * d + h * dh;
      const T* qi = q.data() + i * d + h * dh;
      T weighted = 0;
      for (std::size_t j = 0; j < L; ++j) {
        dp[j] = p[j] == T(0) ? T(0) : dot(dci, v.data() + j * d + h * dh, dh);
        weighted += p[j] * dp[j];
      }
      T* dqi = dq.data() + i * d + h * dh;
      for (std::size_t j = 0; j < L; ++j) {
        if (p[j] == T(0)) continue;
        T* dvj = dv.data() + j * d + h * dh;
        for (std::size_t c = 0; c < dh; ++c) dvj[c] += p[j] * dci[c];
        const T ds = scale * p[j] * (dp[j] - weighted);
        const T* kj = k.data() + j * d + h * dh;
        T* dkj = dk.data() + j * d + h * dh;
        for (std::size_t c = 0; c < dh; ++c) {
          dqi[c] += ds * kj[c];
          dkj[c] += ds * qi[c];
        }
      }
    }
  }
}

template <typename T>
void banded_attention_forward(std::span<const T> q, std::span<const T> k, std::span<const T> v,
                              const AttentionShape& s, std::span<T> context,
                              AttentionCache<T>& cache) {
  check_shape(s);
  const std::size_t R = s.q_rows, L = s.length, d = s.d_model, dh = d / s.heads;
  const T scale = T(1) / std::sqrt(static_cast<T>(dh));
  cache.cols.clear();
  cache.row_begin.assign(1, 0);
  for (std::size_t i = 0; i < R; ++i) {
    const auto keys = allowed_keys(i, L, s.mode, s.window);
    cache.cols.insert(cache.cols.end(), keys.begin(), keys.end());
    cache.row_begin.push_back(cache.cols.size());
  }
  const std::size_t nnz = cache.cols.size();
  cache.probs.assign(s.heads * nnz, T(0));
  const std::ptrdiff_t work = static_cast<std::ptrdiff_t>(s.heads * R);
#pragma omp parallel for schedule(static) if (nnz * d > (1 << 15))
  for (std::ptrdiff_t hr = 0; hr < work; ++hr) {
    const std::size_t h = static_cast<std::size_t>(hr) / R;
    const std::size_t i = static_cast<std::size_t>(hr) % R;
    const std::size_t b = cache.row_begin[i], e = cache.row_begin[i + 1];
    T* p = cache.probs.data() + h * nnz;
    const T* qi = q.data() + i * d + h * dh;
    T row_max = -std::numeric_limits<T>::infinity();
    for (std::size_t t = b; t < e; ++t) {
      p[t] = scale * dot(qi, k.data() + cache.cols[t] * d + h * dh, dh);
      row_max = std::max(row_max, p[t]);
    }
    T total = 0;
    for (std::size_t t = b; t < e; ++t) {
      p[t] = std::exp(p[t] - row_max);
      total += p[t];
    }
    T* ci = context.data() + i * d + h * dh;
    std::fill(ci, ci + dh, T(0));
    for (std::size_t t = b; t < e; ++t) {
      p[t] /= total;
      const T* vj = v.data() + cache.cols[t] * d + h * dh;
      for (std::size_t c = 0; c < dh; ++c) ci[c] += p[t] * vj[c];
    }
  }
}

template <typename T>
void banded_attention_backward(std::span<const T> q, std::span<const T> k, std::span<const T> v,
                               const AttentionShape& s, const AttentionCache<T>& cache,
                               std::span<const T> d_context, std::span<T> dq, std::span<T> dk,
                               std::span<T> dv) {
  const std::size_t R = s.q_rows, d = s.d_model, dh = d / s.heads;
  const T scale = T(1) / std::sqrt(static_cast<T>(dh));
  const std::size_t nnz = cache.cols.size();
  const std::ptrdiff_t heads = static_cast<std::ptrdiff_t>(s.heads);
#pragma omp parallel for schedule(static) if (nnz * d > (1 << 15))
  for (std::ptrdiff_t hh = 0; hh < heads; ++hh) {
    const std::size_t h = static_cast<std::size_t>(hh);
    const T* p = cache.probs.data() + h * nnz;
    std::vector<T> dp;
    for (std::size_t i = 0; i < R; ++i) {
      const std::size_t b = cache.row_begin[i], e = cache.row_begin[i + 1];
      const T* dci = d_context.data() + i * d + h * dh;
      const T* qi = q.data() + i * d + h * dh;
      dp.resize(e - b);
      T weighted = 0;
      for (std::size_t t = b; t < e; ++t) {
        dp[t - b] = dot(dci, v.data() + cache.cols[t] * d + h * dh, dh);
        weighted += p[t] * dp[t - b];
      }
      T* dqi = dq.data() + i * d + h * dh;
      for (std::size_t t = b; t < e; ++t) {
        const std::size_t j = cache.cols[t];
        T* dvj = dv.data() + j * d + h * dh;
        for (std::size_t c = 0; c < dh; ++c) dvj[c] += p[t] * dci[c];
        const T ds = scale * p[t] * (dp[t - b] - weighted);
        const T* kj = k.data() + j * d + h * dh;
        T* dkj = dk.data() + j * d + h * dh;
        for (std::size_t c = 0; c < dh; ++c) {
          dqi[c] += ds * kj[c];
          dkj[c] += ds * qi[c];
        }
      }
    }
  }
}

#define INTENT_INSTANTIATE(T)                                                                   \
  template void masked_attention_forward<T>(std::span<const T>, std::span<const T>,            \
                                            std::span<const T>, const AttentionShape&,         \
                                            std::span<T>, AttentionCache<T>&);                 \
  template void masked_attention_backward<T>(                                                  \
      std::span<const T>, std::span<const T>, std::span<const T>, const AttentionShape&,       \
      const AttentionCache<T>&, std::span<const T>, std::span<T>, std::span<T>, std::span<T>); \
  template void banded_attention_forward<T>(std::span<const T>, std::span<const T>,            \
                                            std::span<const T>, const AttentionShape&,         \
                                            std::span<T>, AttentionCache<T>&);                 \
  template void banded_attention_backward<T>(                                                  \
      std::span<const T>, std::span<const T>, std::span<const T>, const AttentionShape&,       \
      const AttentionCache<T>&, std::span<const T>, std::span<T>, std::span<T>, std::span<T>);

INTENT_INSTANTIATE(float)
INTENT_INSTANTIATE(double)
#undef INTENT_INSTANTIATE

}  // namespace intent
