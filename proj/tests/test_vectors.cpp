#include <omp.h>

#include <cmath>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "oracles.hpp"
#include "sdoh/error.hpp"
#include "sdoh/vectors.hpp"

using namespace sdoh;

namespace {

EmbeddingTable table_from(const std::string& text) {
  std::istringstream in(text);
  return read_embeddings(in);
}

}  // namespace

TEST_SUITE("vectors") {
  TEST_CASE("embedding file grammar") {
    const auto t = table_from("1 2\nfoo 1.0 0.0\n");
    CHECK(t.dim() == 2);
    REQUIRE(t.find("foo") != nullptr);
    CHECK(*t.find("FOO") == std::vector<double>{1.0, 0.0});
    CHECK(t.find("bar") == nullptr);
    CHECK_THROWS_AS(table_from("1 2\nfoo 1 2 3\n"), Error);
    const auto empty = table_from("0 5\n");
    CHECK(empty.size() == 0);
    CHECK(empty.dim() == 5);
    CHECK_THROWS_AS(table_from("2 2\nfoo 1 0\n"), Error);
    CHECK_THROWS_AS(table_from("1 2\nfoo 1 nan\n"), Error);
    CHECK_THROWS_AS(table_from("2 1\nfoo 1\nfoo 2\n"), Error);
  }

  TEST_CASE("embedding write and read round trip") {
    EmbeddingTable t(3);
    t.add("a", {0.1, -2.5, 1e-17});
    t.add("b", {3.0, 0.0, 1.0 / 3.0});
    std::ostringstream out;
    const std::vector<std::string> vocab = {"a", "b"};
    write_embeddings(out, t, vocab);
    const auto back = table_from(out.str());
    CHECK(*back.find("a") == *t.find("a"));
    CHECK(*back.find("b") == *t.find("b"));
  }

  TEST_CASE("smoothed idf") {
    std::vector<Sample> docs = {make_sample("1", "s", "SH", "common rare"), make_sample("2", "s", "SH", "common"),
                                make_sample("3", "s", "SH", "common")};
    const auto m = fit_tfidf(docs);
    CHECK(m.idf("s", "common") == doctest::Approx(1.0));
    CHECK(m.idf("s", "rare") == doctest::Approx(std::log(2.0) + 1.0));
    CHECK(m.idf("s", "rare") == doctest::Approx(1.6931).epsilon(1e-4));
    CHECK_THROWS_AS(m.idf("other", "rare"), Error);
  }

  TEST_CASE("sources are fitted independently") {
    std::vector<Sample> docs = {make_sample("1", "mimic", "SH", "etoh"), make_sample("2", "mimic", "SH", "x"),
                                make_sample("3", "uw", "SH", "etoh")};
    const auto m = fit_tfidf(docs);
    CHECK(m.idf("mimic", "etoh") == doctest::Approx(std::log(3.0 / 2.0) + 1.0));
    CHECK(m.idf("uw", "etoh") == doctest::Approx(1.0));
  }

  TEST_CASE("tfidf fitting ignores sample order") {
    std::vector<Sample> docs = {make_sample("1", "s", "SH", "a b c"), make_sample("2", "s", "SH", "b c"),
                                make_sample("3", "t", "SH", "c d")};
    const auto m1 = fit_tfidf(docs);
    std::reverse(docs.begin(), docs.end());
    CHECK(fit_tfidf(docs).to_json() == m1.to_json());
    CHECK(TfidfModel::from_json(m1.to_json()).to_json() == m1.to_json());
  }

  TEST_CASE("sample vectors are tfidf-weighted means") {
    EmbeddingTable e(2);
    e.add("a", {1.0, 0.0});
    e.add("b", {0.0, 1.0});
    const std::vector<Sample> one = {make_sample("1", "s", "SH", "a a b")};
    const auto v = sample_vector(one[0], e, fit_tfidf(one));
    CHECK(v.values[0] == doctest::Approx(2.0 / 3.0));
    CHECK(v.values[1] == doctest::Approx(1.0 / 3.0));

    const std::vector<Sample> single = {make_sample("2", "s", "SH", "b zzz")};
    const auto sv = sample_vector(single[0], e, fit_tfidf(single));
    CHECK(sv.values == std::vector<double>{0.0, 1.0});

    const std::vector<Sample> oov = {make_sample("3", "s", "SH", "qq rr")};
    const auto z = sample_vector(oov[0], e, fit_tfidf(oov));
    CHECK(z.values == std::vector<double>{0.0, 0.0});
    CHECK(z.norm == 0.0);
  }

  TEST_CASE("parallel batch matches per-sample vectors") {
    EmbeddingTable e(3);
    const char* words[] = {"a", "b", "c", "d", "e"};
    for (int w = 0; w < 5; ++w) e.add(words[w], {w * 0.5, 1.0 - w, w % 2 ? 1.0 : -1.0});
    std::mt19937_64 rng(3);
    std::vector<Sample> docs;
    for (int i = 0; i < 200; ++i) {
      std::string text;
      for (int t = 0; t < 1 + static_cast<int>(rng() % 12); ++t) text += std::string(words[rng() % 6 % 5]) + " ";
      docs.push_back(make_sample(std::to_string(i), i % 3 ? "x" : "y", "SH", text));
    }
    const auto m = fit_tfidf(docs);
    const int saved = omp_get_max_threads();
    omp_set_num_threads(4);
    const auto batch = sample_vectors(docs, e, m);
    omp_set_num_threads(saved);
    REQUIRE(batch.size() == docs.size());
    for (std::size_t i = 0; i < docs.size(); ++i) CHECK(batch[i].values == sample_vector(docs[i], e, m).values);
  }

  TEST_CASE("uniform weight scaling leaves the vector unchanged") {
    EmbeddingTable e(2);
    e.add("a", {1.0, 2.0});
    e.add("b", {-1.0, 0.5});
    const std::vector<Sample> docs = {make_sample("1", "s", "SH", "a b b"), make_sample("2", "s", "SH", "a")};
    const auto raw = sample_vector(docs[0], e, fit_tfidf(docs));
    // Doubling every count doubles every raw-tf weight.
    const std::vector<Sample> doubled = {make_sample("1", "s", "SH", "a a b b b b"), make_sample("2", "s", "SH", "a")};
    const auto scaled = sample_vector(doubled[0], e, fit_tfidf(doubled));
    CHECK(scaled.values[0] == doctest::Approx(raw.values[0]));
    CHECK(scaled.values[1] == doctest::Approx(raw.values[1]));
  }

  TEST_CASE("cosine") {
    const std::vector<double> u = {1.0, 2.0, 3.0};
    CHECK(cosine(u, u) == doctest::Approx(1.0));
    CHECK(cosine(std::vector<double>{1, 0}, std::vector<double>{0, 1}) == 0.0);
    CHECK(cosine(std::vector<double>{0, 0}, std::vector<double>{3, 1}) == 0.0);
    CHECK_THROWS_AS(cosine(std::vector<double>{1}, std::vector<double>{1, 2}), Error);

    std::mt19937_64 rng(2);
    std::normal_distribution<double> g(0.0, 10.0);
    for (int trial = 0; trial < 1000; ++trial) {
      std::vector<double> a(5), b(5);
      for (auto& x : a) x = g(rng);
      for (auto& x : b) x = g(rng);
      const double c = cosine(a, b);
      CHECK(c == cosine(b, a));
      CHECK(std::abs(c) <= 1.0 + 1e-12);
      CHECK(c == doctest::Approx(oracle::cosine(a, b)));
      CHECK(cosine(a, a) == doctest::Approx(1.0));
    }
  }

  TEST_CASE("vectors json round trip") {
    std::vector<SampleVector> v = {{"x", {0.5, -1.25}, 0.0}};
    const auto back = vectors_from_json(vectors_to_json(v));
    REQUIRE(back.size() == 1);
    CHECK(back[0].values == v[0].values);
    CHECK(back[0].norm == doctest::Approx(std::sqrt(0.25 + 1.5625)));
  }
}
