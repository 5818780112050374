#pragma once

#include <cstddef>

// Dense compute kernels used by the autodiff ops.
//
// Each kernel has a serial reference and an OpenMP variant. The parallel
// variants split work over output rows only, and each output element is
// accumulated in the same order as the serial loop, so both produce
// bit-identical results for any thread count.

namespace vega::kernels {

// C[M x N] (+)= A[M x K] * B[K x N]
template <typename T>
void gemm_nn_serial(std::size_t M, std::size_t N, std::size_t K, const T* a, const T* b, T* c,
                    bool accumulate);
template <typename T>
void gemm_nn_parallel(std::size_t M, std::size_t N, std::size_t K, const T* a, const T* b, T* c,
                      bool accumulate);

// C[M x N] (+)= A[M x K] * B[N x K]^T
template <typename T>
void gemm_nt_serial(std::size_t M, std::size_t N, std::size_t K, const T* a, const T* b, T* c,
                    bool accumulate);
template <typename T>
void gemm_nt_parallel(std::size_t M, std::size_t N, std::size_t K, const T* a, const T* b, T* c,
                      bool accumulate);

// C[M x N] (+)= A[K x M]^T * B[K x N]
template <typename T>
void gemm_tn_serial(std::size_t M, std::size_t N, std::size_t K, const T* a, const T* b, T* c,
                    bool accumulate);
template <typename T>
void gemm_tn_parallel(std::size_t M, std::size_t N, std::size_t K, const T* a, const T* b, T* c,
                      bool accumulate);

// Dispatchers: pick the parallel path once the product is large enough to
// amortize thread start-up.
template <typename T>
void gemm_nn(std::size_t M, std::size_t N, std::size_t K, const T* a, const T* b, T* c,
             bool accumulate);
template <typename T>
void gemm_nt(std::size_t M, std::size_t N, std::size_t K, const T* a, const T* b, T* c,
             bool accumulate);
template <typename T>
void gemm_tn(std::size_t M, std::size_t N, std::size_t K, const T* a, const T* b, T* c,
             bool accumulate);

// y[i] += x[i] for n elements.
template <typename T>
void axpy_serial(std::size_t n, T alpha, const T* x, T* y);
template <typename T>
void axpy_parallel(std::size_t n, T alpha, const T* x, T* y);
template <typename T>
void axpy(std::size_t n, T alpha, const T* x, T* y);

/// Number of threads the parallel kernels will use (1 without OpenMP).
int max_threads();
/// Work threshold (multiply-adds) above which dispatchers go parallel.
std::size_t parallel_threshold();
void set_parallel_threshold(std::size_t flops);

}  // namespace vega::kernels
