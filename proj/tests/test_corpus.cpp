#include <random>
#include <string>
#include <vector>

#include "doctest.h"
#include "sdoh/corpus.hpp"

using namespace sdoh;

namespace {

std::vector<std::string> texts(const std::vector<Token>& tokens) {
  std::vector<std::string> out;
  for (const auto& t : tokens) out.push_back(t.text);
  return out;
}

std::string random_text(std::mt19937_64& rng) {
  static const std::vector<std::string> pieces = {"smokes", "1-2", "ppd", ".", ",", " ", "  ", "\n", "(etoh)",
                                                  "quit!", "lives", "alone", "\t", "wife;", "?", "...", "x"};
  std::string s;
  const std::size_t n = std::uniform_int_distribution<std::size_t>(0, 30)(rng);
  for (std::size_t i = 0; i < n; ++i) s += pieces[std::uniform_int_distribution<std::size_t>(0, pieces.size() - 1)(rng)];
  return s;
}

}  // namespace

TEST_SUITE("corpus") {
  TEST_CASE("sections split at line-anchored headings") {
    const std::string doc = "SH: smokes 1 ppd\nFH: none";
    const auto s = extract_sections(doc);
    REQUIRE(s.size() == 2);
    CHECK(s[0].heading == "SH");
    CHECK(doc.substr(s[0].body_begin, s[0].body_end - s[0].body_begin) == " smokes 1 ppd\n");
    CHECK(s[1].heading == "FH");
    CHECK(doc.substr(s[1].body_begin, s[1].body_end - s[1].body_begin) == " none");
    CHECK(extract_sections("").empty());
    CHECK(extract_sections("no headings here").empty());
  }

  TEST_CASE("text before the first heading is dropped") {
    const std::string doc = "preamble line\nSocial History: lives alone\n";
    const auto s = extract_sections(doc);
    REQUIRE(s.size() == 1);
    CHECK(s[0].heading == "Social History");
  }

  TEST_CASE("social history filter normalizes case") {
    const std::vector<SectionSplit> sections = {{"Social History", 0, 1}, {"FH", 1, 2}};
    const auto kept = filter_social_history(sections, {"social history", "sh"});
    REQUIRE(kept.size() == 1);
    CHECK(kept[0].heading == "Social History");
    CHECK(filter_social_history(sections, {}).empty());
    const std::vector<SectionSplit> sh = {{"SH", 0, 1}};
    CHECK(filter_social_history(sh, {"sh"}).size() == 1);
  }

  TEST_CASE("tokenizer peels edge punctuation only") {
    CHECK(texts(tokenize("cocaine use.")) == std::vector<std::string>{"cocaine", "use", "."});
    CHECK(tokenize("").empty());
    CHECK(texts(tokenize("1-2 ppd")) == std::vector<std::string>{"1-2", "ppd"});
    CHECK(texts(tokenize("(etoh),")) == std::vector<std::string>{"(", "etoh", ")", ","});
  }

  TEST_CASE("sentence splitting") {
    const auto toks = tokenize("quit smoking . drinks daily");
    CHECK(split_sentences(toks) == std::vector<SentenceBound>{{0, 3}, {3, 5}});
    CHECK(split_sentences({}).empty());
    const auto one = tokenize("lives with wife");
    CHECK(split_sentences(one) == std::vector<SentenceBound>{{0, 3}});
    const std::string text = "lives alone\nworks days";
    CHECK(split_sentences(tokenize(text), text) == std::vector<SentenceBound>{{0, 2}, {2, 4}});
  }

  TEST_CASE("tokens reconstruct the text and sentences partition them") {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 500; ++trial) {
      const std::string text = random_text(rng);
      const auto sample = make_sample("s", "src", "SH", text);
      std::string rebuilt;
      std::size_t cursor = 0;
      for (std::size_t i = 0; i < sample.tokens.size(); ++i) {
        const auto& t = sample.tokens[i];
        REQUIRE(t.char_start < t.char_end);
        REQUIRE(t.char_start >= cursor);
        CHECK(t.index == i);
        CHECK(text.substr(t.char_start, t.char_end - t.char_start) == t.text);
        rebuilt += text.substr(cursor, t.char_start - cursor);
        rebuilt += t.text;
        cursor = t.char_end;
      }
      rebuilt += text.substr(cursor);
      CHECK(rebuilt == text);

      std::size_t next = 0;
      for (const auto& b : sample.sentences) {
        CHECK(b.begin == next);
        CHECK(b.end > b.begin);
        next = b.end;
      }
      CHECK(next == sample.tokens.size());
      for (std::size_t i = 0; i < sample.tokens.size(); ++i) {
        const auto& b = sample.sentences[sample.sentence_of(i)];
        CHECK((b.begin <= i && i < b.end));
      }
    }
  }

  TEST_CASE("sections never overlap") {
    std::mt19937_64 rng(11);
    const std::vector<std::string> lines = {"SH: a b", "FH: none", "plain text", "Social History: lives alone",
                                            "x/y & z: q", "", ": empty", "HPI:"};
    for (int trial = 0; trial < 300; ++trial) {
      std::string doc;
      const std::size_t n = std::uniform_int_distribution<std::size_t>(0, 8)(rng);
      for (std::size_t i = 0; i < n; ++i) doc += lines[std::uniform_int_distribution<std::size_t>(0, lines.size() - 1)(rng)] + "\n";
      const auto s = extract_sections(doc);
      std::size_t prev_end = 0;
      for (const auto& sec : s) {
        CHECK(sec.body_begin >= prev_end);
        CHECK(sec.body_begin <= sec.body_end);
        CHECK(sec.body_end <= doc.size());
        prev_end = sec.body_end;
      }
    }
  }

  TEST_CASE("one sample per matched section") {
    const std::string doc = "SH: smokes\nFH: none\nSocial History: drinks\n";
    const auto samples = samples_from_document("note1", doc, default_social_history_aliases(), "mimic");
    REQUIRE(samples.size() == 2);
    CHECK(samples[0].id == "note1#0");
    CHECK(samples[1].id == "note1#1");
    CHECK(samples[1].heading == "Social History");
    CHECK(samples[0].source == "mimic");
    CHECK(samples[0].text == " smokes\n");
  }
}
