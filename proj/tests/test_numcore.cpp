#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "doctest.h"
#include "sdoh/error.hpp"
#include "sdoh/numcore.hpp"

using namespace sdoh;

namespace {

Matrix random_matrix(std::mt19937_64& rng, std::size_t r, std::size_t c, double scale) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Matrix m(r, c);
  for (auto& v : m.data()) v = u(rng);
  return m;
}

}  // namespace

TEST_SUITE("numcore") {
  TEST_CASE("softmax") {
    const auto p = softmax(std::vector<double>{0, 0, 0});
    for (double x : p) CHECK(x == doctest::Approx(1.0 / 3.0));
    const auto a = softmax(std::vector<double>{1.0, -2.0, 0.5});
    const auto b = softmax(std::vector<double>{101.0, 98.0, 100.5});
    for (std::size_t i = 0; i < 3; ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-12));
    const auto big = softmax(std::vector<double>{1000.0, 0.0});
    CHECK(std::isfinite(big[0]));
    CHECK(big[0] == doctest::Approx(1.0));
    CHECK(big[1] >= 0.0);
    CHECK(big[1] < 1e-300);
  }

  TEST_CASE("softmax backward matches finite differences") {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(-3, 3);
    std::vector<double> z(5), w(5);
    for (auto& x : z) x = u(rng);
    for (auto& x : w) x = u(rng);
    auto f = [&](const std::vector<double>& logits) {
      const auto p = softmax(logits);
      double s = 0.0;
      for (std::size_t i = 0; i < p.size(); ++i) s += w[i] * p[i];
      return s;
    };
    const auto g = softmax_backward(softmax(z), w);
    for (std::size_t i = 0; i < z.size(); ++i) {
      auto up = z, down = z;
      up[i] += 1e-6;
      down[i] -= 1e-6;
      CHECK(g[i] == doctest::Approx((f(up) - f(down)) / 2e-6).epsilon(1e-6));
    }
  }

  TEST_CASE("attention pooling") {
    Matrix one(1, 3);
    one(0, 0) = 1.0;
    one(0, 1) = -2.0;
    one(0, 2) = 0.5;
    const auto r1 = attention_pool(one, std::vector<double>{0.3, 0.1, 9.0});
    CHECK(r1.weights == std::vector<double>{1.0});
    CHECK(r1.context == std::vector<double>{1.0, -2.0, 0.5});

    std::mt19937_64 rng(1);
    const Matrix v = random_matrix(rng, 4, 3, 2.0);
    const auto r0 = attention_pool(v, std::vector<double>{0, 0, 0});
    for (std::size_t c = 0; c < 3; ++c) {
      double mean = 0.0;
      for (std::size_t r = 0; r < 4; ++r) mean += v(r, c) / 4.0;
      CHECK(r0.context[c] == doctest::Approx(mean));
    }

    Matrix eye(3, 3);
    for (std::size_t i = 0; i < 3; ++i) eye(i, i) = 1.0;
    const auto r2 = attention_pool(eye, std::vector<double>{0.0, 2.0, 0.0});
    CHECK(r2.argmax == 1);
    CHECK(r2.weights[1] > r2.weights[0]);
  }

  TEST_CASE("attention weights sum to one and argmax survives query scaling") {
    std::mt19937_64 rng(9);
    for (int trial = 0; trial < 200; ++trial) {
      const Matrix v = random_matrix(rng, 1 + trial % 7, 4, 1e3);
      const Matrix q = random_matrix(rng, 1, 4, 1.0);
      const auto r = attention_pool(v, q.row(0));
      double s = 0.0;
      for (double w : r.weights) {
        CHECK(std::isfinite(w));
        s += w;
      }
      CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
      for (double c : r.context) CHECK(std::isfinite(c));
      std::vector<double> scaled(q.row(0).begin(), q.row(0).end());
      for (auto& x : scaled) x *= 3.0;
      CHECK(attention_pool(v, scaled).argmax == r.argmax);
    }
  }

  TEST_CASE("cross entropy") {
    CHECK(cross_entropy(std::vector<double>{0, 1, 0}, 1) == 0.0);
    CHECK(cross_entropy(std::vector<double>{0.25, 0.25, 0.25, 0.25}, 2) == doctest::Approx(std::log(4.0)));
    CHECK(cross_entropy(std::vector<double>{0.5, 0.5}, 0) == doctest::Approx(0.6931).epsilon(1e-4));
    CHECK(std::isfinite(cross_entropy(std::vector<double>{1, 0}, 1)));
    CHECK_THROWS_AS(cross_entropy(std::vector<double>{1, 0}, 2), Error);
  }

  TEST_CASE("grad check on a quadratic") {
    ParamStore ps;
    const auto h = ps.add("p", 3, 4);
    ps.initialize(5);
    auto loss = [&](bool with_grad) {
      double l = 0.0;
      auto v = ps[h].value.data();
      auto g = ps[h].grad.data();
      for (std::size_t i = 0; i < v.size(); ++i) {
        l += 0.5 * v[i] * v[i];
        if (with_grad) g[i] += v[i];
      }
      return l;
    };
    const auto r = grad_check(loss, ps, 1e-5);
    CHECK(r.coordinates_checked == 12);
    CHECK(r.max_relative_error < 1e-8);

    ParamStore bad;
    bad.add("p", 1, 1);
    bad.value_at(0) = 1.0;
    auto wrong = [&](bool with_grad) {
      if (with_grad) bad[0].grad(0, 0) += 5.0;
      return bad.value_at(0) * bad.value_at(0);
    };
    CHECK(grad_check(wrong, bad).max_relative_error > 0.1);
  }

  TEST_CASE("attention backward matches finite differences") {
    std::mt19937_64 rng(12);
    const Matrix v = random_matrix(rng, 5, 3, 1.0);
    const Matrix w = random_matrix(rng, 1, 3, 1.0);
    ParamStore ps;
    const auto q = ps.add("q", 1, 3);
    ps.initialize(3);
    auto loss = [&](bool with_grad) {
      const auto r = attention_pool(v, ps[q].value.row(0));
      double l = 0.0;
      for (std::size_t i = 0; i < 3; ++i) l += w(0, i) * r.context[i];
      if (with_grad) attention_pool_backward(v, r, w.row(0), ps[q].grad.row(0));
      return l;
    };
    CHECK(grad_check(loss, ps).max_relative_error < 1e-8);
  }

  TEST_CASE("sgd steps") {
    ParamStore ps;
    ps.add("p", 1, 1);
    ps.value_at(0) = 1.0;
    ps[0].grad(0, 0) = 2.0;
    sgd_step(ps, {0.0, 0.0});
    CHECK(ps.value_at(0) == 1.0);
    CHECK(ps.grad_at(0) == 0.0);
    ps[0].grad(0, 0) = 2.0;
    sgd_step(ps, {0.1, 0.0});
    CHECK(ps.value_at(0) == doctest::Approx(0.8));
    ps[0].grad(0, 0) = 2.0;
    sgd_step(ps, {0.1, 0.0});
    CHECK(ps.value_at(0) == doctest::Approx(0.6));
    ps[0].grad(0, 0) = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(sgd_step(ps, {0.1, 0.0}), Error);
  }

  TEST_CASE("initialization and checkpoints") {
    ParamStore a;
    a.add("w", 4, 6);
    a.add("b", 1, 4, Init::zero);
    a.initialize(42);
    const double r = std::sqrt(6.0 / 10.0);
    for (double v : a[0].value.data()) CHECK(std::abs(v) <= r);
    for (double v : a[1].value.data()) CHECK(v == 0.0);

    ParamStore b;
    b.add("w", 4, 6);
    b.add("b", 1, 4, Init::zero);
    b.initialize(42);
    CHECK(a[0].value == b[0].value);

    ParamStore c;
    c.add("w", 4, 6);
    c.add("b", 1, 4, Init::zero);
    c.load_json(a.to_json());
    CHECK(c[0].value == a[0].value);
    CHECK(c.to_json().dump() == a.to_json().dump());

    ParamStore wrong;
    wrong.add("w", 6, 4);
    wrong.add("b", 1, 4);
    CHECK_THROWS_AS(wrong.load_json(a.to_json()), Error);
  }

  TEST_CASE("matrix helpers") {
    Matrix m(2, 3);
    m(0, 0) = 1;
    m(0, 2) = 2;
    m(1, 1) = -1;
    std::vector<double> out(2);
    matvec(m, std::vector<double>{1, 2, 3}, out);
    CHECK(out == std::vector<double>{7, -2});
    std::vector<double> back(3, 1.0);
    matvec_transposed_add(m, std::vector<double>{1, 1}, back);
    CHECK(back == std::vector<double>{2, 0, 3});
    outer_add(m, std::vector<double>{1, 0}, std::vector<double>{1, 1, 1}, 2.0);
    CHECK(m(0, 1) == 2.0);
    CHECK(argmax(std::vector<double>{1, 3, 3}) == 1);
  }
}
