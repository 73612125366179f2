// SPDX-License-Identifier: Apache-2.0
#pragma once

// Dense row-major kernels. The parallel versions split output rows across
// OpenMP threads and keep each element's summation order identical to the
// serial reference, so both produce bit-identical results.

#include <cstddef>
#include <span>

namespace intent::kernels {

// c[m×n] (+)= a[m×k] · b[k×n]
template <typename T>
void matmul(std::span<const T> a, std::span<const T> b, std::span<T> c, std::size_t m,
            std::size_t k, std::size_t n, bool accumulate = false);

// c[k×n] += a[m×k]ᵀ · b[m×n]   (weight gradients)
template <typename T>
void matmul_tn(std::span<const T> a, std::span<const T> b, std::span<T> c, std::size_t m,
               std::size_t k, std::size_t n);

// c[m×k] (+)= a[m×n] · b[k×n]ᵀ   (input gradients)
template <typename T>
void matmul_nt(std::span<const T> a, std::span<const T> b, std::span<T> c, std::size_t m,
               std::size_t n, std::size_t k, bool accumulate = false);

namespace serial {

template <typename T>
void matmul(std::span<const T> a, std::span<const T> b, std::span<T> c, std::size_t m,
            std::size_t k, std::size_t n, bool accumulate = false);
template <typename T>
void matmul_tn(std::span<const T> a, std::span<const T> b, std::span<T> c, std::size_t m,
               std::size_t k, std::size_t n);
template <typename T>
void matmul_nt(std::span<const T> a, std::span<const T> b, std::span<T> c, std::size_t m,
               std::size_t n, std::size_t k, bool accumulate = false);

}  // namespace serial

// Work below this many multiply-adds stays on the calling thread.
inline constexpr std::size_t kParallelThreshold = 1 << 15;

}  // namespace intent::kernels
