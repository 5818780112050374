#include <array>
#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "vega/kernels.hpp"

using namespace vega::kernels;

namespace {

template <typename T>
std::vector<T> random_vec(std::size_t n, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> u(-1, 1);
  std::vector<T> v(n);
  for (auto& x : v) x = static_cast<T>(u(rng));
  return v;
}

// Plain triple loop with A and B read through index functions.
template <typename T, typename FA, typename FB>
std::vector<double> naive(std::size_t M, std::size_t N, std::size_t K, FA a, FB b) {
  std::vector<double> c(M * N, 0.0);
  for (std::size_t i = 0; i < M; ++i)
    for (std::size_t j = 0; j < N; ++j)
      for (std::size_t k = 0; k < K; ++k) c[i * N + j] += static_cast<double>(a(i, k)) * b(k, j);
  return c;
}

}  // namespace

TEST_CASE_TEMPLATE("gemm variants agree with a naive product and with each other", T, float, double) {
  const double tol = sizeof(T) == 4 ? 1e-4 : 1e-12;
  using Dims = std::array<std::size_t, 3>;
  for (const Dims& d : std::vector<Dims>{{1, 1, 1}, {3, 5, 7}, {64, 33, 17}, {129, 70, 90}}) {
    const auto [M, N, K] = d;
    auto a = random_vec<T>(M * K, 1), at = random_vec<T>(K * M, 2);
    auto b = random_vec<T>(K * N, 3), bt = random_vec<T>(N * K, 4);
    auto init = random_vec<T>(M * N, 5);

    auto nn = naive<T>(M, N, K, [&](auto i, auto k) { return a[i * K + k]; }, [&](auto k, auto j) { return b[k * N + j]; });
    auto nt = naive<T>(M, N, K, [&](auto i, auto k) { return a[i * K + k]; }, [&](auto k, auto j) { return bt[j * K + k]; });
    auto tn = naive<T>(M, N, K, [&](auto i, auto k) { return at[k * M + i]; }, [&](auto k, auto j) { return b[k * N + j]; });

    auto check = [&](auto serial, auto parallel, const std::vector<T>& lhs, const std::vector<T>& rhs,
                     const std::vector<double>& expect) {
      for (bool acc : {false, true}) {
        std::vector<T> cs = init, cp = init;
        serial(M, N, K, lhs.data(), rhs.data(), cs.data(), acc);
        parallel(M, N, K, lhs.data(), rhs.data(), cp.data(), acc);
        CHECK(cs == cp);
        for (std::size_t i = 0; i < cs.size(); ++i) {
          const double want = expect[i] + (acc ? static_cast<double>(init[i]) : 0.0);
          CHECK(std::abs(cs[i] - want) <= tol * (1 + std::abs(want)));
        }
      }
    };
    check(gemm_nn_serial<T>, gemm_nn_parallel<T>, a, b, nn);
    check(gemm_nt_serial<T>, gemm_nt_parallel<T>, a, bt, nt);
    check(gemm_tn_serial<T>, gemm_tn_parallel<T>, at, b, tn);
    check(gemm_nn<T>, gemm_nn_serial<T>, a, b, nn);
  }
}

TEST_CASE("dispatcher is bit-identical across thresholds") {
  const std::size_t M = 40, N = 50, K = 60;
  auto a = random_vec<float>(M * K, 7), b = random_vec<float>(K * N, 8);
  const auto saved = parallel_threshold();
  std::vector<float> low(M * N), high(M * N);
  set_parallel_threshold(0);
  gemm_nn<float>(M, N, K, a.data(), b.data(), low.data(), false);
  set_parallel_threshold(static_cast<std::size_t>(-1));
  gemm_nn<float>(M, N, K, a.data(), b.data(), high.data(), false);
  set_parallel_threshold(saved);
  CHECK(low == high);
}

TEST_CASE("axpy") {
  auto x = random_vec<double>(10001, 1), y = random_vec<double>(10001, 2);
  auto ys = y, yp = y;
  axpy_serial(x.size(), 0.5, x.data(), ys.data());
  axpy_parallel(x.size(), 0.5, x.data(), yp.data());
  CHECK(ys == yp);
  for (std::size_t i = 0; i < y.size(); ++i) CHECK(ys[i] == y[i] + 0.5 * x[i]);
  CHECK(max_threads() >= 1);
}
