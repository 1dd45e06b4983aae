#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "fixtures.hpp"
#include "oracles.hpp"
#include "sdoh/crf.hpp"
#include "sdoh/error.hpp"

using namespace sdoh;

TEST_SUITE("crf") {
  TEST_CASE("closed-form partitions") {
    const auto s = CrfStructure::unconstrained(2);
    Matrix trans(2, 2);
    const std::vector<double> start(2, 0.0);
    Matrix e(1, 2);
    e(0, 0) = 0.3;
    e(0, 1) = -1.2;
    CHECK(crf_log_partition(s, {trans, start}, e) == doctest::Approx(std::log(std::exp(0.3) + std::exp(-1.2))));

    const auto s4 = CrfStructure::unconstrained(4);
    Matrix t4(4, 4);
    const std::vector<double> st4(4, 0.0);
    Matrix e4(5, 4);
    CHECK(crf_log_partition(s4, {t4, st4}, e4) == doctest::Approx(5.0 * std::log(4.0)));
  }

  TEST_CASE("bio mask") {
    const auto s = CrfStructure::bio(2);
    CHECK(bio_label_names(std::vector<std::string>{"Amount", "Type"}) ==
          std::vector<std::string>{"O", "B-Amount", "I-Amount", "B-Type", "I-Type"});
    CHECK_FALSE(s.can_start(bio_inside(0)));
    CHECK(s.can_start(bio_begin(1)));
    CHECK_FALSE(s.can_move(0, bio_inside(0)));
    CHECK_FALSE(s.can_move(bio_begin(0), bio_inside(1)));
    CHECK_FALSE(s.can_move(bio_inside(1), bio_inside(0)));
    CHECK(s.can_move(bio_begin(0), bio_inside(0)));
    CHECK(s.can_move(bio_inside(0), bio_inside(0)));
    CHECK(s.can_move(bio_inside(0), bio_begin(1)));
  }

  TEST_CASE("viterbi avoids an illegal start") {
    const auto s = CrfStructure::bio(1);
    Matrix trans(3, 3);
    const std::vector<double> start(3, 0.0);
    Matrix e(2, 3);
    e(0, 2) = 5.0;
    e(1, 2) = 5.0;
    const auto path = crf_viterbi(s, {trans, start}, e);
    CHECK(path == std::vector<std::size_t>{1, 2});
    CHECK(s.is_legal(path));

    const auto free = CrfStructure::unconstrained(3);
    CHECK(crf_viterbi(free, {trans, start}, e) == std::vector<std::size_t>{2, 2});
    Matrix zero(3, 3);
    CHECK(crf_viterbi(free, {trans, start}, zero) == std::vector<std::size_t>{0, 0, 0});
  }

  TEST_CASE("single legal path has zero loss") {
    // With n = 1 and only O allowed to start, [O] is the sole legal path.
    auto s = CrfStructure::bio(1);
    s.allowed_start = {1, 0, 0};
    Matrix trans(3, 3);
    const std::vector<double> start(3, 0.0);
    Matrix e(1, 3);
    e(0, 1) = 4.0;
    const std::vector<std::size_t> gold = {0};
    CHECK(crf_nll_and_grad(s, {trans, start}, e, gold).loss == doctest::Approx(0.0));
    const std::vector<std::size_t> illegal = {2};
    CHECK_THROWS_AS(crf_nll_and_grad(s, {trans, start}, e, illegal), Error);
    const std::vector<std::size_t> short_gold = {};
    CHECK_THROWS_AS(crf_nll_and_grad(s, {trans, start}, e, short_gold), Error);
  }

  TEST_CASE("enumeration oracle") {
    std::mt19937_64 rng(21);
    for (int trial = 0; trial < 300; ++trial) {
      const auto inst = fixture::random_crf(rng, trial % 2 == 1);
      const auto s = fixture::crf_structure(inst);
      const auto trans = fixture::to_matrix(inst.transitions);
      const auto e = fixture::to_matrix(inst.emissions);
      const CrfParams p{trans, inst.start};
      const double logz = crf_log_partition(s, p, e);
      CHECK(std::abs(logz - oracle::log_partition(inst)) <= 1e-9);
      const auto best = crf_viterbi(s, p, e);
      CHECK(best == oracle::best_path(inst));
      CHECK(crf_path_score(s, p, e, best) <= logz + 1e-12);
      CHECK(crf_nll_and_grad(s, p, e, best).loss >= -1e-12);
    }
  }

  TEST_CASE("nll gradient matches finite differences") {
    std::mt19937_64 rng(22);
    for (int trial = 0; trial < 50; ++trial) {
      const auto inst = fixture::random_crf(rng, trial % 2 == 0);
      const auto s = fixture::crf_structure(inst);
      const auto gold = oracle::best_path(inst);
      ParamStore ps;
      const auto he = ps.add("e", inst.n, inst.k);
      const auto ht = ps.add("t", inst.k, inst.k);
      const auto hs = ps.add("s", 1, inst.k);
      ps[he].value = fixture::to_matrix(inst.emissions);
      ps[ht].value = fixture::to_matrix(inst.transitions);
      for (std::size_t y = 0; y < inst.k; ++y) ps[hs].value(0, y) = inst.start[y];
      auto loss = [&](bool with_grad) {
        const CrfParams p{ps[ht].value, ps[hs].value.row(0)};
        auto r = crf_nll_and_grad(s, p, ps[he].value, gold);
        if (with_grad) {
          for (std::size_t i = 0; i < r.d_emissions.size(); ++i) ps[he].grad.data()[i] += r.d_emissions.data()[i];
          for (std::size_t i = 0; i < r.d_transitions.size(); ++i)
            ps[ht].grad.data()[i] += r.d_transitions.data()[i];
          for (std::size_t y = 0; y < inst.k; ++y) ps[hs].grad(0, y) += r.d_start[y];
        }
        return r.loss;
      };
      CHECK(grad_check(loss, ps, 1e-5, 1000).max_relative_error <= 1e-4);
    }
  }
}
