#include <omp.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "doctest.h"
#include "oracles.hpp"
#include "sdoh/error.hpp"
#include "sdoh/select.hpp"

using namespace sdoh;

namespace {

struct Pool {
  std::vector<oracle::PoolItem> items;
  std::vector<std::string> ids;
  std::vector<ProbProfile> profiles;
  std::vector<SampleVector> vectors;

  void index() {
    ids.clear();
    profiles.clear();
    vectors.clear();
    for (const auto& it : items) {
      ids.push_back(it.id);
      profiles.push_back({it.id, it.heads});
      vectors.push_back({it.id, it.vec, std::sqrt(oracle::dot(it.vec, it.vec))});
    }
  }
};

std::vector<double> random_distribution(std::mt19937_64& rng, std::size_t n) {
  std::gamma_distribution<double> g(0.7, 1.0);
  std::vector<double> p(n);
  double s = 0.0;
  for (auto& x : p) s += (x = g(rng));
  for (auto& x : p) x /= s;
  return p;
}

Pool random_pool(std::mt19937_64& rng, std::size_t n, std::size_t dim) {
  std::normal_distribution<double> g(0.0, 1.0);
  Pool p;
  for (std::size_t i = 0; i < n; ++i) {
    oracle::PoolItem it;
    it.id = "s" + std::to_string(rng() % 100000) + "_" + std::to_string(i);
    it.vec.resize(dim);
    for (auto& x : it.vec) x = g(rng);
    for (std::size_t k = 0; k < 5; ++k) it.heads.push_back(random_distribution(rng, 3 + k % 3));
    p.items.push_back(std::move(it));
  }
  p.index();
  return p;
}

SelectionConfig config_of(const oracle::GreedyOptions& o) {
  SelectionConfig c;
  c.batch_size = o.n;
  c.alpha = o.alpha;
  c.similarity = o.maximum ? SimilarityMode::maximum : SimilarityMode::average;
  c.uncertainty = o.loop ? UncertaintyMode::loop : UncertaintyMode::sum;
  c.rescore_final_batch = o.rescore;
  return c;
}

SampleVector vec(std::string id, std::vector<double> v) {
  const double n = std::sqrt(oracle::dot(v, v));
  return {std::move(id), std::move(v), n};
}

}  // namespace

TEST_SUITE("select") {
  TEST_CASE("similarity to the batch") {
    const auto c = vec("c", {1, 0});
    CHECK(similarity_to_batch(c, {}, SimilarityMode::maximum) == 0.0);
    CHECK(diversity_weight(0.0, 0.1) == 1.0);
    const std::vector<SampleVector> same = {vec("m", {2, 0}), vec("n", {0, 1})};
    CHECK(similarity_to_batch(c, same, SimilarityMode::maximum) == doctest::Approx(1.0));
    // Cosines 0.2 and 0.8 against unit vectors.
    const std::vector<SampleVector> two = {vec("a", {0.2, std::sqrt(1 - 0.04)}), vec("b", {0.8, std::sqrt(1 - 0.64)})};
    CHECK(similarity_to_batch(c, two, SimilarityMode::average) == doctest::Approx(0.5));
    CHECK(similarity_to_batch(c, two, SimilarityMode::maximum) == doctest::Approx(0.8));
    const std::vector<SampleVector> self = {vec("c", {1, 0})};
    CHECK(similarity_to_batch(c, self, SimilarityMode::maximum) == 0.0);
    CHECK_THROWS_AS(similarity_to_batch(c, std::vector<SampleVector>{vec("z", {1, 0, 0})}, SimilarityMode::average),
                    Error);
    CHECK(diversity_weight(1.0, 0.1) == 0.0);
    CHECK(diversity_weight(1.0 + 1e-15, 0.5) == 0.0);
  }

  TEST_CASE("batch score examples") {
    SelectionConfig cfg;
    cfg.similarity = SimilarityMode::maximum;
    const std::vector<SampleVector> single = {vec("a", {1, 2})};
    CHECK(batch_score(single, std::vector<double>{0.7}, cfg) == doctest::Approx(0.7));
    const std::vector<SampleVector> pair = {vec("a", {1, 0}), vec("b", {0.5, std::sqrt(0.75)})};
    cfg.alpha = 1.0;
    CHECK(batch_score(pair, std::vector<double>{1, 1}, cfg) == doctest::Approx(1.0));
    cfg.alpha = 0.1;
    CHECK(batch_score(pair, std::vector<double>{1, 1}, cfg) == doctest::Approx(2.0 * std::pow(0.5, 0.1)));
    CHECK(batch_score(pair, std::vector<double>{1, 1}, cfg) == doctest::Approx(1.8661).epsilon(1e-4));
  }

  TEST_CASE("q is monotone in each uncertainty") {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(0.0, 3.0);
    for (int trial = 0; trial < 200; ++trial) {
      auto pool = random_pool(rng, 6, 4);
      std::vector<double> us(6);
      for (auto& x : us) x = u(rng);
      SelectionConfig cfg;
      cfg.alpha = trial % 2 ? 0.1 : 2.0;
      cfg.similarity = trial % 3 ? SimilarityMode::maximum : SimilarityMode::average;
      const double q = batch_score(pool.vectors, us, cfg);
      auto bumped = us;
      bumped[trial % 6] += u(rng);
      CHECK(batch_score(pool.vectors, bumped, cfg) >= q);
    }
  }

  TEST_CASE("trivial batch sizes") {
    std::mt19937_64 rng(4);
    auto pool = random_pool(rng, 8, 3);
    SelectionInputs inputs(pool.profiles, pool.vectors);
    SelectionConfig cfg;
    cfg.batch_size = 1;
    const auto one = greedy_select(pool.ids, inputs, cfg);
    REQUIRE(one.ids.size() == 1);
    std::size_t best = 0;
    for (std::size_t i = 1; i < pool.items.size(); ++i)
      if (sample_uncertainty(pool.profiles[i], UncertaintyMode::sum, 0) >
          sample_uncertainty(pool.profiles[best], UncertaintyMode::sum, 0))
        best = i;
    CHECK(one.ids[0] == pool.ids[best]);

    cfg.batch_size = 20;
    const auto all = greedy_select(pool.ids, inputs, cfg);
    CHECK(all.ids.size() == 8);
    auto sorted = all.ids;
    std::sort(sorted.begin(), sorted.end());
    auto expected = pool.ids;
    std::sort(expected.begin(), expected.end());
    CHECK(sorted == expected);
  }

  TEST_CASE("ties go to the smallest id") {
    const std::vector<double> uni(3, 1.0 / 3.0);
    std::vector<ProbProfile> profiles = {{"b", {uni}}, {"a", {uni}}, {"c", {uni}}};
    std::vector<SampleVector> vectors = {vec("b", {1, 0}), vec("a", {1, 0}), vec("c", {1, 0})};
    SelectionInputs inputs(profiles, vectors);
    const std::vector<std::string> pool = {"b", "c", "a"};
    SelectionConfig cfg;
    cfg.batch_size = 3;
    const auto batch = greedy_select(pool, inputs, cfg);
    CHECK(batch.ids == std::vector<std::string>{"a", "b", "c"});
    CHECK(greedy_select_reference(pool, inputs, cfg).ids == batch.ids);
  }

  TEST_CASE("missing inputs and duplicate ids") {
    std::mt19937_64 rng(5);
    auto pool = random_pool(rng, 3, 2);
    SelectionInputs inputs(pool.profiles, pool.vectors);
    SelectionConfig cfg;
    auto ids = pool.ids;
    ids.push_back("ghost");
    CHECK_THROWS_AS(greedy_select(ids, inputs, cfg), Error);
    ids.back() = ids.front();
    CHECK_THROWS_AS(greedy_select(ids, inputs, cfg), Error);
    cfg.alpha = 0.0;
    CHECK_THROWS_AS(greedy_select(pool.ids, inputs, cfg), Error);
    cfg.alpha = 0.1;
    cfg.batch_size = 0;
    CHECK_THROWS_AS(greedy_select(pool.ids, inputs, cfg), Error);
  }

  TEST_CASE("every pick matches the naive oracle") {
    std::mt19937_64 rng(13);
    const double alphas[] = {0.1, 1.0, 2.0};
    for (int trial = 0; trial < 48; ++trial) {
      auto pool = random_pool(rng, 5 + rng() % 40, 2 + rng() % 6);
      oracle::GreedyOptions o;
      o.n = 1 + rng() % 10;
      o.alpha = alphas[trial % 3];
      o.maximum = (trial / 3) % 2 == 0;
      o.loop = (trial / 6) % 2 == 0;
      o.rescore = (trial / 12) % 2 == 0;
      SelectionInputs inputs(pool.profiles, pool.vectors);
      const auto expected = oracle::greedy(pool.items, o);
      const auto fast = greedy_select(pool.ids, inputs, config_of(o));
      const auto ref = greedy_select_reference(pool.ids, inputs, config_of(o));
      CHECK(fast.ids == expected);
      CHECK(ref.ids == expected);
      REQUIRE(fast.steps.size() == ref.steps.size());
      for (std::size_t i = 0; i < fast.steps.size(); ++i) {
        CHECK(fast.steps[i].uncertainty == doctest::Approx(ref.steps[i].uncertainty));
        CHECK(fast.steps[i].similarity == doctest::Approx(ref.steps[i].similarity));
        CHECK(fast.steps[i].q_marginal == doctest::Approx(ref.steps[i].q_marginal));
      }
    }
  }

  TEST_CASE("thread count does not change the batch") {
    std::mt19937_64 rng(29);
    auto pool = random_pool(rng, 300, 16);
    SelectionInputs inputs(pool.profiles, pool.vectors);
    SelectionConfig cfg;
    cfg.batch_size = 20;
    const auto ref = greedy_select_reference(pool.ids, inputs, cfg);
    const int saved = omp_get_max_threads();
    for (int threads : {1, 2, 4, 7}) {
      omp_set_num_threads(threads);
      const auto fast = greedy_select(pool.ids, inputs, cfg);
      CHECK(fast.ids == ref.ids);
      for (std::size_t i = 0; i < fast.steps.size(); ++i)
        CHECK(fast.steps[i].q_marginal == doctest::Approx(ref.steps[i].q_marginal));
    }
    omp_set_num_threads(saved);
  }

  TEST_CASE("a clone of a selected sample is never preferred") {
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 30; ++trial) {
      auto pool = random_pool(rng, 20, 5);
      SelectionConfig cfg;
      cfg.batch_size = 8;
      SelectionInputs base_inputs(pool.profiles, pool.vectors);
      const auto base = greedy_select(pool.ids, base_inputs, cfg);

      auto cloned = pool;
      const auto& first = pool.items[std::find(pool.ids.begin(), pool.ids.end(), base.ids[0]) - pool.ids.begin()];
      auto clone = first;
      clone.id = "zz_clone";
      cloned.items.push_back(clone);
      cloned.index();
      SelectionInputs inputs(cloned.profiles, cloned.vectors);
      const auto with_clone = greedy_select(cloned.ids, inputs, cfg);
      CHECK(with_clone.ids == base.ids);
    }
  }

  TEST_CASE("tiny alpha orders by uncertainty") {
    std::mt19937_64 rng(23);
    for (int trial = 0; trial < 30; ++trial) {
      auto pool = random_pool(rng, 15, 6);
      SelectionInputs inputs(pool.profiles, pool.vectors);
      SelectionConfig cfg;
      cfg.alpha = 1e-6;
      cfg.batch_size = 15;
      const auto batch = greedy_select(pool.ids, inputs, cfg);
      auto order = pool.ids;
      std::vector<double> u;
      for (const auto& p : pool.profiles) u.push_back(sample_uncertainty(p, UncertaintyMode::sum, 0));
      std::vector<std::size_t> idx(order.size());
      std::iota(idx.begin(), idx.end(), 0);
      std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return u[a] > u[b]; });
      std::vector<std::string> expected;
      for (auto i : idx) expected.push_back(pool.ids[i]);
      CHECK(batch.ids == expected);
    }
  }

  TEST_CASE("random selection and csv") {
    const std::vector<std::string> pool = {"a", "b", "c", "d", "e"};
    const auto x = random_select(pool, 3, 9);
    CHECK(x.size() == 3);
    CHECK(x == random_select(pool, 3, 9));
    CHECK(random_select(pool, 10, 1).size() == 5);
    Batch b;
    b.ids = {"a"};
    b.steps = {{"a", 1.5, 0.0, 1.5}};
    CHECK(batch_to_csv(b) == "rank,sample_id,u,s,q_marginal\n1,a,1.5,0,1.5\n");
    SelectionConfig c;
    c.alpha = 2.0;
    c.uncertainty = UncertaintyMode::loop;
    const auto back = selection_config_from_json(selection_config_to_json(c));
    CHECK(back.alpha == 2.0);
    CHECK(back.uncertainty == UncertaintyMode::loop);
  }
}
