#pragma once

#include <cstddef>
#include <random>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "sdoh/corpus.hpp"
#include "sdoh/crf.hpp"
#include "sdoh/numcore.hpp"
#include "sdoh/schema.hpp"
#include "sdoh/standoff.hpp"

namespace fixture {

// "w0 w1 ... w{n-1}" as one sample.
inline sdoh::Sample filler_sample(const std::string& id, std::size_t n) {
  std::string text;
  for (std::size_t i = 0; i < n; ++i) {
    if (i) text += ' ';
    text += "w" + std::to_string(i);
  }
  return sdoh::make_sample(id, "src", "SH", text);
}

inline std::size_t pick(std::mt19937_64& rng, std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

inline sdoh::TokenSpan random_span(std::mt19937_64& rng, std::size_t n_tokens, std::size_t max_len = 3) {
  const std::size_t b = pick(rng, n_tokens);
  const std::size_t len = 1 + pick(rng, std::min(max_len, n_tokens - b));
  return {b, b + len};
}

// Schema-valid event with random spans, labeled args and span-only args.
inline sdoh::Event random_event(std::mt19937_64& rng, const sdoh::EventSchema& schema, std::size_t n_tokens) {
  const auto& type = schema.event_types()[pick(rng, schema.size())];
  sdoh::Event e;
  e.trigger = {type.name, random_span(rng, n_tokens, 2)};
  for (const auto& arg : type.labeled_args)
    if (pick(rng, 4) != 0) e.labeled_args.push_back({arg.name, random_span(rng, n_tokens), arg.labels[pick(rng, arg.labels.size())]});
  const std::size_t spans = pick(rng, 3);
  for (std::size_t k = 0; k < spans; ++k)
    e.span_args.push_back({type.span_args[pick(rng, type.span_args.size())], random_span(rng, n_tokens)});
  return e;
}

// Random instance with n <= 6 tokens and at most 4 labels. BIO instances take
// the first 3 or 4 labels of O, B-a, I-a, B-b, I-b.
inline oracle::CrfInstance random_crf(std::mt19937_64& rng, bool bio) {
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  oracle::CrfInstance c;
  c.n = 1 + pick(rng, 6);
  c.k = bio ? 3 + pick(rng, 2) : 1 + pick(rng, 4);
  c.bio = bio;
  c.emissions.assign(c.n, std::vector<double>(c.k));
  for (auto& row : c.emissions)
    for (auto& x : row) x = u(rng);
  c.transitions.assign(c.k, std::vector<double>(c.k));
  for (auto& row : c.transitions)
    for (auto& x : row) x = u(rng);
  c.start.resize(c.k);
  for (auto& x : c.start) x = u(rng);
  return c;
}

inline sdoh::CrfStructure crf_structure(const oracle::CrfInstance& c) {
  if (!c.bio) return sdoh::CrfStructure::unconstrained(c.k);
  const auto s = sdoh::CrfStructure::bio(2);
  sdoh::CrfStructure t;
  t.labels = c.k;
  t.allowed.resize(c.k * c.k);
  t.allowed_start.resize(c.k);
  for (std::size_t a = 0; a < c.k; ++a) {
    t.allowed_start[a] = s.allowed_start[a];
    for (std::size_t b = 0; b < c.k; ++b) t.allowed[a * c.k + b] = s.allowed[a * s.labels + b];
  }
  return t;
}

inline sdoh::Matrix to_matrix(const std::vector<std::vector<double>>& rows) {
  sdoh::Matrix m(rows.size(), rows.empty() ? 0 : rows[0].size());
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < rows[r].size(); ++c) m(r, c) = rows[r][c];
  return m;
}

}  // namespace fixture
