#include "sdoh/corpus.hpp"

#include <algorithm>
#include <cctype>

namespace sdoh {

namespace {

bool is_heading_char(char c) {
  const auto u = static_cast<unsigned char>(c);
  return std::isalnum(u) || c == '/' || c == '\\' || c == '&' || c == ' ' || c == '\t';
}

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

bool is_punct(char c) {
  const auto u = static_cast<unsigned char>(c);
  return u < 0x80 && std::ispunct(u);
}

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && is_space(s[b])) ++b;
  while (e > b && is_space(s[e - 1])) --e;
  return std::string(s.substr(b, e - b));
}

std::string normalize_heading(std::string_view heading) {
  std::string out;
  bool pending_space = false;
  for (char c : heading) {
    if (is_space(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  return out;
}

}  // namespace

std::size_t Sample::sentence_of(std::size_t token) const {
  auto it = std::upper_bound(sentences.begin(), sentences.end(), token,
                             [](std::size_t t, const SentenceBound& s) { return t < s.end; });
  return static_cast<std::size_t>(it - sentences.begin());
}

std::vector<SectionSplit> extract_sections(std::string_view document) {
  struct Heading {
    std::string text;
    std::size_t line_start;
    std::size_t body_start;
  };
  std::vector<Heading> headings;

  std::size_t line = 0;
  while (line <= document.size()) {
    std::size_t j = line;
    while (j < document.size() && is_heading_char(document[j])) ++j;
    if (j > line && j < document.size() && document[j] == ':') {
      std::string text = trim(document.substr(line, j - line));
      if (!text.empty()) headings.push_back({std::move(text), line, j + 1});
    }
    const std::size_t nl = document.find('\n', line);
    if (nl == std::string_view::npos) break;
    line = nl + 1;
  }

  std::vector<SectionSplit> out;
  out.reserve(headings.size());
  for (std::size_t h = 0; h < headings.size(); ++h) {
    const std::size_t end = h + 1 < headings.size() ? headings[h + 1].line_start : document.size();
    out.push_back({headings[h].text, headings[h].body_start, end});
  }
  return out;
}

std::vector<SectionSplit> filter_social_history(std::span<const SectionSplit> sections,
                                                const std::set<std::string>& aliases) {
  std::vector<SectionSplit> out;
  for (const auto& s : sections)
    if (aliases.count(normalize_heading(s.heading))) out.push_back(s);
  return out;
}

std::set<std::string> default_social_history_aliases() {
  return {"social history", "sh", "social hx", "shx", "social", "social history/habits"};
}

std::vector<Token> tokenize(std::string_view text) {
  std::vector<Token> tokens;
  auto emit = [&](std::size_t b, std::size_t e) {
    tokens.push_back({std::string(text.substr(b, e - b)), b, e, tokens.size()});
  };

  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    if (i >= text.size()) break;
    std::size_t end = i;
    while (end < text.size() && !is_space(text[end])) ++end;

    // Peel punctuation from both ends of the whitespace-delimited chunk.
    std::size_t core_b = i, core_e = end;
    while (core_b < core_e && is_punct(text[core_b])) ++core_b;
    while (core_e > core_b && is_punct(text[core_e - 1])) --core_e;

    for (std::size_t p = i; p < core_b; ++p) emit(p, p + 1);
    if (core_b < core_e) emit(core_b, core_e);
    for (std::size_t p = std::max(core_e, core_b); p < end; ++p) emit(p, p + 1);
    i = end;
  }
  return tokens;
}

std::vector<SentenceBound> split_sentences(std::span<const Token> tokens, std::string_view text) {
  std::vector<SentenceBound> out;
  std::size_t begin = 0;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    bool brk = tokens[i].text == "." || tokens[i].text == "!" || tokens[i].text == "?";
    if (!brk && !text.empty() && i + 1 < tokens.size()) {
      const std::size_t gap_b = std::min(tokens[i].char_end, text.size());
      const std::size_t gap_e = std::min(tokens[i + 1].char_start, text.size());
      brk = gap_e > gap_b && text.substr(gap_b, gap_e - gap_b).find('\n') != std::string_view::npos;
    }
    if (brk) {
      out.push_back({begin, i + 1});
      begin = i + 1;
    }
  }
  if (begin < tokens.size()) out.push_back({begin, tokens.size()});
  return out;
}

Sample make_sample(std::string id, std::string source, std::string heading, std::string text) {
  Sample s;
  s.id = std::move(id);
  s.source = std::move(source);
  s.heading = std::move(heading);
  s.text = std::move(text);
  s.tokens = tokenize(s.text);
  s.sentences = split_sentences(s.tokens, s.text);
  return s;
}

std::vector<Sample> samples_from_document(std::string_view stem, std::string_view document,
                                          const std::set<std::string>& aliases,
                                          const std::string& source) {
  const auto sections = filter_social_history(extract_sections(document), aliases);
  std::vector<Sample> out;
  out.reserve(sections.size());
  for (std::size_t k = 0; k < sections.size(); ++k) {
    const auto& s = sections[k];
    out.push_back(make_sample(std::string(stem) + "#" + std::to_string(k), source, s.heading,
                              std::string(document.substr(s.body_begin, s.body_end - s.body_begin))));
  }
  return out;
}

}  // namespace sdoh
