// SPDX-License-Identifier: Apache-2.0
#pragma once

// Multi-head scaled dot-product attention over row-major [rows × d] buffers,
// heads laid out as contiguous column blocks of width d / heads.
//
// Queries are the first `q_rows` positions of the sequence (q_rows <= L);
// keys and values cover all L positions.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace intent {

enum class AttentionMode { full, sliding_global };

struct AttentionShape {
  std::size_t q_rows;  // R
  std::size_t length;  // L
  std::size_t d_model;
  std::size_t heads;
  AttentionMode mode = AttentionMode::full;
  std::size_t window = 0;  // w, even; sliding radius is w / 2
};

// Whether query i may attend to key j. Under sliding_global, i attends j iff
// |i - j| <= w/2, or either position is the global [CLS] at index 0.
bool attends(std::size_t i, std::size_t j, AttentionMode mode, std::size_t window);

// Sorted key indices visible to query i in a length-L sequence.
std::vector<std::uint32_t> allowed_keys(std::size_t i, std::size_t length, AttentionMode mode,
                                        std::size_t window);

// Softmax weights kept for the backward pass.
template <typename T>
struct AttentionCache {
  // masked: heads × R × L dense, zeros at masked positions.
  // banded: heads × nnz, row i's keys are cols[row_begin[i] .. row_begin[i+1]).
  std::vector<T> probs;
  std::vector<std::uint32_t> cols;
  std::vector<std::size_t> row_begin;
};

// Reference path: computes every score, masks with -inf, softmaxes the row.
template <typename T>
void masked_attention_forward(std::span<const T> q, std::span<const T> k, std::span<const T> v,
                              const AttentionShape& shape, std::span<T> context,
                              AttentionCache<T>& cache);
template <typename T>
void masked_attention_backward(std::span<const T> q, std::span<const T> k, std::span<const T> v,
                               const AttentionShape& shape, const AttentionCache<T>& cache,
                               std::span<const T> d_context, std::span<T> dq, std::span<T> dk,
                               std::span<T> dv);

// Performance path: touches only the visible keys of each row.
template <typename T>
void banded_attention_forward(std::span<const T> q, std::span<const T> k, std::span<const T> v,
                              const AttentionShape& shape, std::span<T> context,
                              AttentionCache<T>& cache);
template <typename T>
void banded_attention_backward(std::span<const T> q, std::span<const T> k, std::span<const T> v,
                               const AttentionShape& shape, const AttentionCache<T>& cache,
                               std::span<const T> d_context, std::span<T> dq, std::span<T> dk,
                               std::span<T> dv);

}  // namespace intent
