#include "vega/kernels.hpp"

#include <algorithm>
#include <atomic>
#include <cstdint>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace vega::kernels {

namespace {

std::atomic<std::size_t> g_threshold{1u << 16};

using Index = std::int64_t;  // OpenMP loop variables must be signed

template <typename T>
inline void clear_rows(std::size_t rows, std::size_t cols, T* c, bool accumulate) {
  if (!accumulate) std::fill(c, c + rows * cols, T(0));
}

template <typename T>
inline void nn_row(std::size_t i, std::size_t N, std::size_t K, const T* a, const T* b, T* c) {
  T* crow = c + i * N;
  const T* arow = a + i * K;
  for (std::size_t p = 0; p < K; ++p) {
    const T av = arow[p];
    const T* brow = b + p * N;
    for (std::size_t j = 0; j < N; ++j) crow[j] += av * brow[j];
  }
}

template <typename T>
inline void nt_row(std::size_t i, std::size_t N, std::size_t K, const T* a, const T* b, T* c) {
  const T* arow = a + i * K;
  for (std::size_t j = 0; j < N; ++j) {
    const T* brow = b + j * K;
    T acc = 0;
    for (std::size_t p = 0; p < K; ++p) acc += arow[p] * brow[p];
    c[i * N + j] += acc;
  }
}

// Row i of C = sum_p A[p][i] * B[p][:]
template <typename T>
inline void tn_row(std::size_t i, std::size_t M, std::size_t N, std::size_t K, const T* a,
                   const T* b, T* c) {
  T* crow = c + i * N;
  for (std::size_t p = 0; p < K; ++p) {
    const T av = a[p * M + i];
    const T* brow = b + p * N;
    for (std::size_t j = 0; j < N; ++j) crow[j] += av * brow[j];
  }
}

}  // namespace

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

std::size_t parallel_threshold() { return g_threshold.load(); }
void set_parallel_threshold(std::size_t flops) { g_threshold.store(flops); }

template <typename T>
void gemm_nn_serial(std::size_t M, std::size_t N, std::size_t K, const T* a, const T* b, T* c,
                    bool accumulate) {
  clear_rows(M, N, c, accumulate);
  for (std::size_t i = 0; i < M; ++i) nn_row(i, N, K, a, b, c);
}

template <typename T>
void gemm_nn_parallel(std::size_t M, std::size_t N, std::size_t K, const T* a, const T* b, T* c,
                      bool accumulate) {
  clear_rows(M, N, c, accumulate);
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < static_cast<Index>(M); ++i) nn_row(static_cast<std::size_t>(i), N, K, a, b, c);
}

template <typename T>
void gemm_nt_serial(std::size_t M, std::size_t N, std::size_t K, const T* a, const T* b, T* c,
                    bool accumulate) {
  clear_rows(M, N, c, accumulate);
  for (std::size_t i = 0; i < M; ++i) nt_row(i, N, K, a, b, c);
}

template <typename T>
void gemm_nt_parallel(std::size_t M, std::size_t N, std::size_t K, const T* a, const T* b, T* c,
                      bool accumulate) {
  clear_rows(M, N, c, accumulate);
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < static_cast<Index>(M); ++i) nt_row(static_cast<std::size_t>(i), N, K, a, b, c);
}

template <typename T>
void gemm_tn_serial(std::size_t M, std::size_t N, std::size_t K, const T* a, const T* b, T* c,
                    bool accumulate) {
  clear_rows(M, N, c, accumulate);
  for (std::size_t i = 0; i < M; ++i) tn_row(i, M, N, K, a, b, c);
}

template <typename T>
void gemm_tn_parallel(std::size_t M, std::size_t N, std::size_t K, const T* a, const T* b, T* c,
                      bool accumulate) {
  clear_rows(M, N, c, accumulate);
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < static_cast<Index>(M); ++i) {
    tn_row(static_cast<std::size_t>(i), M, N, K, a, b, c);
  }
}

template <typename T>
void gemm_nn(std::size_t M, std::size_t N, std::size_t K, const T* a, const T* b, T* c,
             bool accumulate) {
  if (M > 1 && M * N * K >= parallel_threshold()) {
    gemm_nn_parallel(M, N, K, a, b, c, accumulate);
  } else {
    gemm_nn_serial(M, N, K, a, b, c, accumulate);
  }
}

template <typename T>
void gemm_nt(std::size_t M, std::size_t N, std::size_t K, const T* a, const T* b, T* c,
             bool accumulate) {
  if (M > 1 && M * N * K >= parallel_threshold()) {
    gemm_nt_parallel(M, N, K, a, b, c, accumulate);
  } else {
    gemm_nt_serial(M, N, K, a, b, c, accumulate);
  }
}

template <typename T>
void gemm_tn(std::size_t M, std::size_t N, std::size_t K, const T* a, const T* b, T* c,
             bool accumulate) {
  if (M > 1 && M * N * K >= parallel_threshold()) {
    gemm_tn_parallel(M, N, K, a, b, c, accumulate);
  } else {
    gemm_tn_serial(M, N, K, a, b, c, accumulate);
  }
}

template <typename T>
void axpy_serial(std::size_t n, T alpha, const T* x, T* y) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

template <typename T>
void axpy_parallel(std::size_t n, T alpha, const T* x, T* y) {
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < static_cast<Index>(n); ++i) y[i] += alpha * x[i];
}

template <typename T>
void axpy(std::size_t n, T alpha, const T* x, T* y) {
  if (n >= parallel_threshold()) {
    axpy_parallel(n, alpha, x, y);
  } else {
    axpy_serial(n, alpha, x, y);
  }
}

#define VEGA_INSTANTIATE_KERNELS(T)                                                          \
  template void gemm_nn_serial<T>(std::size_t, std::size_t, std::size_t, const T*, const T*, \
                                  T*, bool);                                                 \
  template void gemm_nn_parallel<T>(std::size_t, std::size_t, std::size_t, const T*,        \
                                    const T*, T*, bool);                                     \
  template void gemm_nt_serial<T>(std::size_t, std::size_t, std::size_t, const T*, const T*, \
                                  T*, bool);                                                 \
  template void gemm_nt_parallel<T>(std::size_t, std::size_t, std::size_t, const T*,        \
                                    const T*, T*, bool);                                     \
  template void gemm_tn_serial<T>(std::size_t, std::size_t, std::size_t, const T*, const T*, \
                                  T*, bool);                                                 \
  template void gemm_tn_parallel<T>(std::size_t, std::size_t, std::size_t, const T*,        \
                                    const T*, T*, bool);                                     \
  template void gemm_nn<T>(std::size_t, std::size_t, std::size_t, const T*, const T*, T*,    \
                           bool);                                                            \
  template void gemm_nt<T>(std::size_t, std::size_t, std::size_t, const T*, const T*, T*,    \
                           bool);                                                            \
  template void gemm_tn<T>(std::size_t, std::size_t, std::size_t, const T*, const T*, T*,    \
                           bool);                                                            \
  template void axpy_serial<T>(std::size_t, T, const T*, T*);                                \
  template void axpy_parallel<T>(std::size_t, T, const T*, T*);                              \
  template void axpy<T>(std::size_t, T, const T*, T*);

VEGA_INSTANTIATE_KERNELS(float)
VEGA_INSTANTIATE_KERNELS(double)

#undef VEGA_INSTANTIATE_KERNELS

}  // namespace vega::kernels
