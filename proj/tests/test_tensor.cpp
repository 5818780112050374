#include <cmath>
#include <numeric>

#include "doctest.h"
#include "vega/gradcheck.hpp"
#include "vega/ops.hpp"

using namespace vega;
using T2 = Tensor<double>;

namespace {

T2 mat(Shape s, std::vector<double> v) { return T2(std::move(s), std::move(v)); }

}  // namespace

TEST_CASE("tensor construction checks sizes") {
  CHECK_THROWS_AS(T2({2, 2}, {1, 2, 3}), DimensionError);
  auto z = T2::zeros({2, 3});
  CHECK(z.numel() == 6);
  CHECK(T2::scalar(4.0).item() == 4.0);
  CHECK_THROWS(z.item());
  auto c = z.clone();
  c.values()[0] = 1.0;
  CHECK(z.at(0) == 0.0);
}

TEST_CASE("matmul") {
  Tape<double> tape(false);
  auto x = mat({2, 2}, {1, 2, 3, 4});
  auto eye = mat({2, 2}, {1, 0, 0, 1});
  auto r = matmul(tape, eye, x);
  CHECK(std::vector<double>(r.values().begin(), r.values().end()) == std::vector<double>{1, 2, 3, 4});
  auto y = matmul(tape, x, mat({2, 1}, {1, 1}));
  CHECK(y.shape() == Shape{2, 1});
  CHECK(y.at(0) == 3.0);
  CHECK(y.at(1) == 7.0);
  CHECK_THROWS_AS(matmul(tape, x, mat({3, 1}, {1, 1, 1})), DimensionError);
}

TEST_CASE("matmul gradient of sum(A B) matches finite differences") {
  Rng rng(5);
  std::uniform_real_distribution<double> u(-1, 1);
  std::vector<double> av(12), bv(20);
  for (auto& v : av) v = u(rng);
  for (auto& v : bv) v = u(rng);
  GradcheckOptions o;
  o.tolerance = 1e-4;
  auto r = check_gradients(
      "matmul", [](Tape<double>& t, const std::vector<T2>& x) { return sum(t, matmul(t, x[0], x[1])); },
      {mat({3, 4}, av), mat({4, 5}, bv)}, o);
  CHECK(r.passed);
  CHECK(r.checked == 32);
}

TEST_CASE("softmax") {
  Tape<double> tape(false);
  auto s = softmax(tape, mat({1, 3}, {0, 0, 0}), 1);
  for (double v : s.values()) CHECK(v == doctest::Approx(1.0 / 3.0));
  auto t = softmax(tape, mat({1, 2}, {1, 0}), 1);
  CHECK(t.at(0) == doctest::Approx(0.7311).epsilon(1e-4));
  CHECK(t.at(1) == doctest::Approx(0.2689).epsilon(1e-4));

  Rng rng(1);
  std::uniform_real_distribution<double> u(-30, 30);
  std::vector<double> v(4 * 7);
  for (auto& x : v) x = u(rng);
  auto x = mat({4, 7}, v);
  auto shifted = x.clone();
  for (auto& e : shifted.values()) e += 123.25;
  auto a = softmax(tape, x, 1), b = softmax(tape, shifted, 1);
  for (std::size_t r = 0; r < 4; ++r) {
    double total = 0;
    for (std::size_t c = 0; c < 7; ++c) {
      total += a.at(r, c);
      CHECK(a.at(r, c) >= 0.0);
      CHECK(a.at(r, c) == doctest::Approx(b.at(r, c)).epsilon(1e-9));
    }
    CHECK(std::abs(total - 1.0) < 1e-6);
  }
  // Large inputs stay finite thanks to the max shift.
  auto big = softmax(tape, mat({1, 2}, {1000, 999}), 1);
  CHECK(std::isfinite(big.at(0)));
  CHECK_THROWS_AS(softmax(tape, x, 2), ArgumentError);
}

TEST_CASE("kl_div") {
  Tape<double> tape(false);
  auto p = mat({2}, {1, 0}), q = mat({2}, {0.5, 0.5});
  CHECK(kl_div(tape, p, q).item() == doctest::Approx(std::log(2.0)).epsilon(1e-4));
  CHECK(kl_div(tape, q, q).item() == doctest::Approx(0.0));
  CHECK_THROWS_AS(kl_div(tape, p, mat({3}, {0.2, 0.3, 0.5})), DimensionError);

  // Gibbs inequality over random simplex pairs.
  Rng rng(3);
  std::uniform_real_distribution<double> u(-4, 4);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> a(5), b(5);
    for (auto& x : a) x = u(rng);
    for (auto& x : b) x = u(rng);
    auto pa = softmax(tape, mat({1, 5}, a), 1), pb = softmax(tape, mat({1, 5}, b), 1);
    auto k = kl_div(tape, pa, pb);
    CHECK(k.shape() == Shape{1});
    CHECK(k.at(0) >= -1e-7);
  }
}

TEST_CASE("cosine similarity") {
  Tape<double> tape;
  auto v = mat({3}, {0.3, -2, 5});
  CHECK(cosine_sim(tape, v, v).item() == doctest::Approx(1.0));
  CHECK(cosine_sim(tape, mat({2}, {1, 0}), mat({2}, {0, 1})).item() == doctest::Approx(0.0));
  CHECK(cosine_sim(tape, mat({2}, {1, 2}), mat({2}, {2, 1})).item() == doctest::Approx(0.8).epsilon(1e-5));
  CHECK(tape.warnings().empty());
  auto zero = cosine_sim(tape, mat({2}, {0, 0}), mat({2}, {1, 1}));
  CHECK(zero.item() == 0.0);
  CHECK(tape.warnings().size() == 1);
  CHECK_THROWS_AS(cosine_sim(tape, mat({2}, {1, 0}), mat({3}, {1, 0, 0})), DimensionError);

  auto m = cosine_sim_matrix(tape, mat({2, 2}, {1, 2, 0, 1}), mat({3, 2}, {2, 1, 1, 0, 0, 3}));
  CHECK(m.shape() == Shape{2, 3});
  CHECK(m.at(0, 0) == doctest::Approx(0.8));
  CHECK(m.at(1, 1) == doctest::Approx(0.0));
  CHECK(m.at(1, 2) == doctest::Approx(1.0));
}

TEST_CASE("elementwise suite") {
  Tape<double> tape(false);
  CHECK(sigmoid(tape, T2::scalar(0.0)).item() == 0.5);
  CHECK(silu(tape, T2::scalar(0.0)).item() == 0.0);
  CHECK(silu(tape, T2::scalar(2.0)).item() == doctest::Approx(2.0 / (1.0 + std::exp(-2.0))));
  CHECK(log(tape, T2::scalar(std::exp(1.5))).item() == doctest::Approx(1.5));
  CHECK(neg(tape, T2::scalar(2.0)).item() == -2.0);
  CHECK(scale(tape, mat({2}, {1, 2}), 3.0).at(1) == 6.0);
  CHECK(mean(tape, mat({4}, {1, 2, 3, 6})).item() == 3.0);

  auto a = mat({2, 3}, {1, 2, 3, 4, 5, 6});
  auto row = add(tape, a, mat({3}, {10, 20, 30}));
  CHECK(row.at(1, 2) == 36.0);
  auto prod = mul(tape, a, T2::scalar(2.0));
  CHECK(prod.at(1, 0) == 8.0);
  CHECK_THROWS_AS(add(tape, a, mat({2}, {1, 2})), DimensionError);

  auto cat0 = concat(tape, {a, mat({1, 3}, {7, 8, 9})}, 0);
  CHECK(cat0.shape() == Shape{3, 3});
  CHECK(cat0.at(2, 1) == 8.0);
  auto cat1 = concat(tape, {a, mat({2, 1}, {7, 8})}, 1);
  CHECK(cat1.shape() == Shape{2, 4});
  CHECK(cat1.at(1, 3) == 8.0);
  CHECK_THROWS_AS(concat(tape, {a, a}, 2), ArgumentError);

  auto table = mat({3, 2}, {0, 1, 10, 11, 20, 21});
  auto rows = embedding_lookup(tape, table, {2, 0, 2});
  CHECK(rows.shape() == Shape{3, 2});
  CHECK(rows.at(0, 1) == 21.0);
  CHECK(rows.at(1, 0) == 0.0);
  CHECK_THROWS_AS(embedding_lookup(tape, table, {3}), ArgumentError);

  auto ln = layer_norm(tape, a, 1);
  for (std::size_t r = 0; r < 2; ++r) {
    double m = 0, v = 0;
    for (std::size_t c = 0; c < 3; ++c) m += ln.at(r, c) / 3;
    for (std::size_t c = 0; c < 3; ++c) v += (ln.at(r, c) - m) * (ln.at(r, c) - m) / 3;
    CHECK(m == doctest::Approx(0.0));
    CHECK(v == doctest::Approx(1.0).epsilon(1e-4));
  }
  CHECK_THROWS_AS(layer_norm(tape, a, 2), ArgumentError);
}

TEST_CASE("dropout") {
  Tape<double> tape(false);
  Rng rng(11);
  auto x = T2::full({50, 40}, 2.0);
  auto same = dropout(tape, x, 0.0, rng, true);
  CHECK(std::equal(same.values().begin(), same.values().end(), x.values().begin()));
  auto eval = dropout(tape, x, 0.5, rng, false);
  CHECK(std::equal(eval.values().begin(), eval.values().end(), x.values().begin()));
  auto d = dropout(tape, x, 0.25, rng, true);
  std::size_t zeros = 0;
  for (double v : d.values()) {
    if (v == 0.0) ++zeros;
    else CHECK(v == doctest::Approx(2.0 / 0.75));
  }
  // 2000 draws at p = 0.25: mean 500, sd ~19.4.
  CHECK(zeros > 500 - 80);
  CHECK(zeros < 500 + 80);
  CHECK_THROWS_AS(dropout(tape, x, 1.0, rng, true), ArgumentError);
  CHECK_THROWS_AS(dropout(tape, x, -0.1, rng, true), ArgumentError);
}

TEST_CASE("backward basics") {
  SUBCASE("sum gives ones") {
    Tape<double> tape;
    auto w = T2({2, 3}, {1, 2, 3, 4, 5, 6}, true);
    tape.backward(sum(tape, w));
    for (double g : w.grad()) CHECK(g == 1.0);
  }
  SUBCASE("squared norm gives 2W") {
    Tape<double> tape;
    auto w = T2({3}, {0.5, -1, 2}, true);
    tape.backward(sum(tape, mul(tape, w, w)));
    for (std::size_t i = 0; i < 3; ++i) CHECK(w.grad()[i] == 2 * w.at(i));
  }
  SUBCASE("contract errors") {
    Tape<double> tape;
    auto w = T2({2}, {1, 2}, true);
    auto y = scale(tape, w, 2.0);
    CHECK_THROWS_AS(tape.backward(y), ContractError);
    auto s = sum(tape, y);
    tape.backward(s);
    CHECK_THROWS_AS(tape.backward(s), ContractError);
    tape.reset();
    CHECK(tape.size() == 0);
  }
  SUBCASE("detach blocks the gradient") {
    Tape<double> tape;
    auto w = T2({2}, {1, 2}, true);
    auto v = T2({2}, {3, 4}, true);
    tape.backward(sum(tape, mul(tape, detach(w), v)));
    CHECK(!w.has_grad());
    CHECK(v.grad()[0] == 1.0);
  }
  SUBCASE("non-recording tape keeps no history") {
    Tape<double> tape(false);
    auto w = T2({2}, {1, 2}, true);
    sum(tape, mul(tape, w, w));
    CHECK(tape.size() == 0);
  }
}

TEST_CASE("identical tapes give bit-identical gradients") {
  auto run = [] {
    Tape<double> tape;
    Rng rng(9);
    auto w = T2({4, 6}, std::vector<double>(24, 0.0), true);
    std::uniform_real_distribution<double> u(-1, 1);
    for (auto& v : w.values()) v = u(rng);
    auto h = dropout(tape, silu(tape, w), 0.3, rng, true);
    tape.backward(mean(tape, softmax(tape, h, 1)));
    return std::vector<double>(w.grad().begin(), w.grad().end());
  };
  CHECK(run() == run());
}

TEST_CASE("every op passes finite differences on five seeds") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    for (const auto& r : op_gradchecks(seed)) {
      INFO(r.name << " " << r.worst);
      CHECK(r.passed);
    }
  }
}

TEST_CASE("single precision matches double") {
  Tape<float> tf(false);
  Tape<double> td(false);
  std::vector<double> v{0.1, -0.7, 2.5, 1.25, -3, 0.5};
  auto xf = tensor_cast<float>(mat({2, 3}, v));
  auto rf = softmax(tf, layer_norm(tf, xf, 1), 1);
  auto rd = softmax(td, layer_norm(td, mat({2, 3}, v), 1), 1);
  for (std::size_t i = 0; i < 6; ++i) CHECK(rf.at(i) == doctest::Approx(rd.at(i)).epsilon(1e-5));
}
