#pragma once

#include <compare>
#include <cstddef>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace sdoh {

struct Token {
  std::string text;
  std::size_t char_start = 0;  // byte offset into the sample text
  std::size_t char_end = 0;    // exclusive
  std::size_t index = 0;

  bool operator==(const Token&) const = default;
};

// Half-open token range [begin, end) of one sentence.
struct SentenceBound {
  std::size_t begin = 0;
  std::size_t end = 0;

  auto operator<=>(const SentenceBound&) const = default;
};

struct Sample {
  std::string id;
  std::string source;
  std::string heading;
  std::string text;
  std::vector<Token> tokens;
  std::vector<SentenceBound> sentences;

  // Index of the sentence containing token `token`.
  std::size_t sentence_of(std::size_t token) const;
};

struct SectionSplit {
  std::string heading;
  std::size_t body_begin = 0;
  std::size_t body_end = 0;

  bool operator==(const SectionSplit&) const = default;
};

// Headings are runs of [A-Za-z0-9/\& ] anchored at a line start and closed by
// ':'. A body extends from just after the colon to the next heading. Text
// before the first heading is dropped.
std::vector<SectionSplit> extract_sections(std::string_view document);

// Keeps sections whose lowercased, whitespace-collapsed heading is in
// `aliases`.
std::vector<SectionSplit> filter_social_history(std::span<const SectionSplit> sections,
                                                const std::set<std::string>& aliases);

std::set<std::string> default_social_history_aliases();

// Whitespace split, then leading and trailing ASCII punctuation peeled off one
// character per token.
std::vector<Token> tokenize(std::string_view text);

// Breaks after ".", "!", "?" tokens and wherever the gap between two tokens in
// `text` contains a newline. Without `text` only the punctuation rule applies.
std::vector<SentenceBound> split_sentences(std::span<const Token> tokens,
                                           std::string_view text = {});

Sample make_sample(std::string id, std::string source, std::string heading, std::string text);

// One sample per matched section, ids "{stem}#{k}" with k counting matched
// sections from 0.
std::vector<Sample> samples_from_document(std::string_view stem, std::string_view document,
                                          const std::set<std::string>& aliases,
                                          const std::string& source);

}  // namespace sdoh
