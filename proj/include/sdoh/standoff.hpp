#pragma once

#include <cstddef>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "sdoh/corpus.hpp"
#include "sdoh/schema.hpp"

namespace sdoh {

// Contiguous half-open token range.
struct TokenSpan {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const { return end - begin; }
  bool empty() const { return end <= begin; }
  double center() const { return (static_cast<double>(begin) + static_cast<double>(end) - 1.0) / 2.0; }

  auto operator<=>(const TokenSpan&) const = default;
};

struct Trigger {
  std::string event_type;
  TokenSpan span;

  bool operator==(const Trigger&) const = default;
};

struct LabeledArgument {
  std::string arg_type;
  TokenSpan span;
  std::string subtype;

  bool operator==(const LabeledArgument&) const = default;
};

struct SpanOnlyArgument {
  std::string arg_type;
  TokenSpan span;

  bool operator==(const SpanOnlyArgument&) const = default;
};

struct Event {
  Trigger trigger;
  std::vector<LabeledArgument> labeled_args;
  std::vector<SpanOnlyArgument> span_args;

  bool operator==(const Event&) const = default;
  const LabeledArgument* find_labeled(std::string_view arg_type) const;
};

// sample id -> events of that sample.
using AnnotationSet = std::map<std::string, std::vector<Event>>;

// Throws SchemaError/RangeError for events that cannot belong to `schema` or
// to a sample of `n_tokens` tokens. Returns non-fatal warnings (missing
// required arguments).
std::vector<std::string> validate_event(const Event& event, const EventSchema& schema,
                                        std::size_t n_tokens);

// Tokens overlapping the byte range [char_begin, char_end). Throws RangeError
// when the range leaves the sample text or touches no token.
TokenSpan char_range_to_tokens(const Sample& sample, std::size_t char_begin, std::size_t char_end);

// Record grammar (tab separated):
//   T<id>  <Label> <start> <end>  <text>
//   E<id>  <EventType>:T<id> (<Arg>[ordinal]:T<id>)*
//   A<id>  <AttrName> T<id> <subtype>
// Arguments whose text-bound record carries an A record are labeled
// arguments; the rest are span-only. R/N/# records are skipped with a warning.
std::vector<Event> parse_standoff(std::string_view ann_text, const Sample& sample,
                                  const EventSchema& schema,
                                  std::vector<std::string>* warnings = nullptr);

std::string serialize_standoff(const std::vector<Event>& events, const Sample& sample);

struct SlotRecord {
  std::string event_type;
  std::map<std::string, std::string> labeled;                       // arg type -> subtype
  std::vector<std::pair<std::string, std::set<std::size_t>>> spans;  // one entry per argument

  bool operator==(const SlotRecord&) const = default;
};

SlotRecord events_to_slots(const Event& event);

}  // namespace sdoh
