// SPDX-License-Identifier: Apache-2.0
#include "intent/kernels.hpp"

#include <cassert>

namespace intent::kernels {

template <typename T>
void matmul(std::span<const T> a, std::span<const T> b, std::span<T> c, std::size_t m,
            std::size_t k, std::size_t n, bool accumulate) {
  assert(a.size() >= m * k && b.size() >= k * n && c.size() >= m * n);
  const T* A = a.data();
  const T* B = b.data();
  T* C = c.data();
  const std::ptrdiff_t rows = static_cast<std::ptrdiff_t>(m);
#pragma omp parallel for schedule(static) if (m * k * n > kParallelThreshold)
  for (std::ptrdiff_t i = 0; i < rows; ++i) {
    T* ci = C + i * n;
    if (!accumulate)
      for (std::size_t j = 0; j < n; ++j) ci[j] = T(0);
    const T* ai = A + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const T av = ai[p];
      const T* bp = B + p * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
  }
}

template <typename T>
void matmul_tn(std::span<const T> a, std::span<const T> b, std::span<T> c, std::size_t m,
               std::size_t k, std::size_t n) {
  assert(a.size() >= m * k && b.size() >= m * n && c.size() >= k * n);
  const T* A = a.data();
  const T* B = b.data();
  T* C = c.data();
  const std::ptrdiff_t rows = static_cast<std::ptrdiff_t>(k);
#pragma omp parallel for schedule(static) if (m * k * n > kParallelThreshold)
  for (std::ptrdiff_t r = 0; r < rows; ++r) {
    T* cr = C + r * n;
    for (std::size_t i = 0; i < m; ++i) {
      const T av = A[i * k + r];
      if (av == T(0)) continue;
      const T* bi = B + i * n;
      for (std::size_t j = 0; j < n; ++j) cr[j] += av * bi[j];
    }
  }
}

template <typename T>
void matmul_nt(std::span<const T> a, std::span<const T> b, std::span<T> c, std::size_t m,
               std::size_t n, std::size_t k, bool accumulate) {
  assert(a.size() >= m * n && b.size() >= k * n && c.size() >= m * k);
  const T* A = a.data();
  const T* B = b.data();
  T* C = c.data();
  const std::ptrdiff_t rows = static_cast<std::ptrdiff_t>(m);
#pragma omp parallel for schedule(static) if (m * k * n > kParallelThreshold)
  for (std::ptrdiff_t i = 0; i < rows; ++i) {
    const T* ai = A + i * n;
    T* ci = C + i * k;
    for (std::size_t r = 0; r < k; ++r) {
      const T* br = B + r * n;
      T acc = accumulate ? ci[r] : T(0);
      for (std::size_t j = 0; j < n; ++j) acc += ai[j] * br[j];
      ci[r] = acc;
    }
  }
}

namespace serial {

template <typename T>
void matmul(std::span<const T> a, std::span<const T> b, std::span<T> c, std::size_t m,
            std::size_t k, std::size_t n, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      T acc = accumulate ? c[i * n + j] : T(0);
      for (std::size_t p = 0; p < k; ++p) acc += a[i * k + p] * b[p * n + j];
      c[i * n + j] = acc;
    }
}

template <typename T>
void matmul_tn(std::span<const T> a, std::span<const T> b, std::span<T> c, std::size_t m,
               std::size_t k, std::size_t n) {
  for (std::size_t r = 0; r < k; ++r)
    for (std::size_t j = 0; j < n; ++j) {
      T acc = c[r * n + j];
      for (std::size_t i = 0; i < m; ++i) {
        if (a[i * k + r] == T(0)) continue;
        acc += a[i * k + r] * b[i * n + j];
      }
      c[r * n + j] = acc;
    }
}

template <typename T>
void matmul_nt(std::span<const T> a, std::span<const T> b, std::span<T> c, std::size_t m,
               std::size_t n, std::size_t k, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t r = 0; r < k; ++r) {
      T acc = accumulate ? c[i * k + r] : T(0);
      for (std::size_t j = 0; j < n; ++j) acc += a[i * n + j] * b[r * n + j];
      c[i * k + r] = acc;
    }
}

}  // namespace serial

#define INTENT_INSTANTIATE(T)                                                                \
  template void matmul<T>(std::span<const T>, std::span<const T>, std::span<T>, std::size_t, \
                          std::size_t, std::size_t, bool);                                   \
  template void matmul_tn<T>(std::span<const T>, std::span<const T>, std::span<T>,          \
                             std::size_t, std::size_t, std::size_t);                         \
  template void matmul_nt<T>(std::span<const T>, std::span<const T>, std::span<T>,          \
                             std::size_t, std::size_t, std::size_t, bool);                   \
  template void serial::matmul<T>(std::span<const T>, std::span<const T>, std::span<T>,     \
                                  std::size_t, std::size_t, std::size_t, bool);              \
  template void serial::matmul_tn<T>(std::span<const T>, std::span<const T>, std::span<T>,  \
                                     std::size_t, std::size_t, std::size_t);                 \
  template void serial::matmul_nt<T>(std::span<const T>, std::span<const T>, std::span<T>,  \
                                     std::size_t, std::size_t, std::size_t, bool);

INTENT_INSTANTIATE(float)
INTENT_INSTANTIATE(double)
#undef INTENT_INSTANTIATE

}  // namespace intent::kernels
