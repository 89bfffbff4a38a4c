// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <numeric>

#include "doctest.h"
#include "ioglm/kernels.hpp"
#include "ioglm/random.hpp"

using namespace ioglm;

TEST_CASE("matvec examples") {
  Matrix<float> eye(3, 3);
  for (std::size_t i = 0; i < 3; ++i) eye(i, i) = 1.0f;
  CHECK(matvec(eye, Vector<float>{1, 2, 3}) == Vector<float>{1, 2, 3});

  Matrix<float> zero(2, 3);
  CHECK(matvec(zero, Vector<float>{4, -5, 6}) == Vector<float>{0, 0});

  Matrix<float> m(2, 2);
  m(0, 0) = 1; m(0, 1) = 2; m(1, 0) = 3; m(1, 1) = 4;
  CHECK(matvec(m, Vector<float>{1, 1}) == Vector<float>{3, 7});
}

TEST_CASE("matvec shape mismatch names both shapes") {
  Matrix<float> m(2, 3);
  try {
    matvec(m, Vector<float>(4));
    FAIL("expected an exception");
  } catch (const std::invalid_argument &e) {
    const std::string msg = e.what();
    CHECK(msg.find("2x3") != std::string::npos);
    CHECK(msg.find('4') != std::string::npos);
  }
}

TEST_CASE("matvec matches a naive double loop and distributes over addition") {
  Rng rng(11);
  Matrix<float> m(64, 64);
  Vector<float> a(64), b(64), sum(64);
  for (auto &x : m.span()) x = static_cast<float>(rng.uniform(-1, 1));
  for (std::size_t i = 0; i < 64; ++i) {
    a[i] = static_cast<float>(rng.uniform(-1, 1));
    b[i] = static_cast<float>(rng.uniform(-1, 1));
    sum[i] = a[i] + b[i];
  }
  const auto ma = matvec(m, a), mb = matvec(m, b), ms = matvec(m, sum);
  for (std::size_t r = 0; r < 64; ++r) {
    double ref = 0;
    for (std::size_t c = 0; c < 64; ++c) ref += double(m(r, c)) * a[c];
    CHECK(ma[r] == doctest::Approx(ref).epsilon(1e-5));
    CHECK(std::abs(ms[r] - (ma[r] + mb[r])) < 1e-5);
  }
}

TEST_CASE("transposed and outer products") {
  Matrix<double> m(2, 3);
  double k = 1;
  for (auto &x : m.span()) x = k++;
  Vector<double> dx(3, 1.0);
  const Vector<double> dy{1, -1};
  matvec_transposed_accumulate<double>(m, dy.span(), dx.span());
  CHECK(dx == Vector<double>{1 - 3, 1 - 3, 1 - 3});

  Matrix<double> dm(2, 3);
  const Vector<double> x{1, 2, 3};
  outer_accumulate<double>(dm, dy.span(), x.span());
  CHECK(dm(0, 2) == 3);
  CHECK(dm(1, 1) == -2);
}

TEST_CASE("softmax examples") {
  const auto u = softmax_stable(Vector<double>{0, 0, 0});
  for (double p : u) CHECK(p == doctest::Approx(1.0 / 3).epsilon(1e-15));

  const auto p = softmax_stable(Vector<double>{1, 2, 3});
  const double z = std::exp(1.0) + std::exp(2.0) + std::exp(3.0);
  CHECK(std::abs(p[0] - std::exp(1.0) / z) < 1e-7);
  CHECK(std::abs(p[1] - std::exp(2.0) / z) < 1e-7);
  CHECK(std::abs(p[2] - std::exp(3.0) / z) < 1e-7);

  CHECK_THROWS_AS(softmax_stable(Vector<double>{1, NAN}), std::domain_error);
  CHECK_THROWS_AS(softmax_stable(Vector<double>{INFINITY, 0}), std::domain_error);
}

TEST_CASE("softmax property: normalized, positive, shift invariant") {
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    Vector<double> s(1 + rng.below(40));
    for (auto &x : s) x = rng.uniform(-50, 50);
    Vector<double> shifted = s;
    for (auto &x : shifted) x += 1000.0;
    const auto p = softmax_stable(s), q = softmax_stable(shifted);
    double total = 0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      CHECK(p[i] > 0.0);
      CHECK(std::abs(p[i] - q[i]) < 1e-12);
      total += p[i];
    }
    CHECK(std::abs(total - 1.0) < 1e-9);
  }
}

TEST_CASE("sigmoid") {
  CHECK(sigmoid(0.0) == 0.5);
  CHECK(std::abs(sigmoid(4.0) - 0.9820137900) < 1e-10);
  CHECK(sigmoid(1000.0) == 1.0);
  CHECK(sigmoid(-1000.0) >= 0.0);
  CHECK(std::isfinite(sigmoid(-1000.0f)));
  Rng rng(5);
  for (int i = 0; i < 1000; ++i) {
    const double x = rng.uniform(-30, 30);
    const double a = sigmoid(x), b = sigmoid(-x);
    CHECK(a > 0.0);
    CHECK(a < 1.0);
    CHECK(std::abs(a + b - 1.0) < 1e-12);
  }
  const auto v = sigmoid(Vector<double>{-2, 0, 2});
  CHECK(v[1] == 0.5);
  CHECK_THROWS(sigmoid(Vector<double>{NAN}));
}

TEST_CASE("cross entropy") {
  CHECK(cross_entropy(Vector<double>(4, 0.25), 2) == doctest::Approx(std::log(4.0)));
  CHECK(cross_entropy(Vector<double>{0, 1, 0}, 1) == 0.0);
  CHECK(std::abs(cross_entropy(Vector<double>{0.1, 0.7, 0.2}, 1) - 0.3566749) < 1e-7);
  CHECK_THROWS_AS(cross_entropy(Vector<double>{0.5, 0.5}, 2), std::out_of_range);

  const Vector<double> s{0.3, -1.2, 2.0};
  const auto p = softmax_stable(s);
  CHECK(cross_entropy_from_logits<double>(s.span(), 0) ==
        doctest::Approx(-std::log(p[0])).epsilon(1e-12));
  // A huge logit gap underflows p but not the log-space form.
  const Vector<double> far{0.0, 2000.0};
  CHECK(cross_entropy_from_logits<double>(far.span(), 0) == doctest::Approx(2000.0));
}

TEST_CASE("finite differences on analytic functions") {
  auto square = [](std::span<const double> t) { return t[0] * t[0]; };
  const std::vector<double> three{3.0};
  CHECK(std::abs(finite_difference_gradient(square, three)[0] - 6.0) < 1e-6);

  auto constant = [](std::span<const double>) { return 42.0; };
  const std::vector<double> pt{1.0, -2.0, 0.5};
  for (double g : finite_difference_gradient(constant, pt)) CHECK(g == 0.0);

  // d/ds log-sum-exp(s) = softmax(s)
  auto lse = [](std::span<const double> t) { return log_sum_exp(t); };
  const auto g = finite_difference_gradient(lse, pt);
  const auto p = softmax_stable(Vector<double>(pt));
  for (std::size_t i = 0; i < pt.size(); ++i) CHECK(std::abs(g[i] - p[i]) < 1e-6);

  // Only the requested coordinates are differentiated.
  const std::vector<std::size_t> one{1};
  const auto partial = finite_difference_gradient(lse, pt, 1e-6, one);
  CHECK(partial[0] == 0.0);
  CHECK(std::abs(partial[1] - p[1]) < 1e-6);
}

TEST_CASE("finite differences reject a non-deterministic loss") {
  int calls = 0;
  auto flaky = [&](std::span<const double> t) { return t[0] + 1e-3 * (calls++); };
  const std::vector<double> x{1.0};
  CHECK_THROWS(finite_difference_gradient(flaky, x));
}
