#include <algorithm>
#include <random>
#include <string>
#include <vector>

#include "doctest.h"
#include "fixtures.hpp"
#include "sdoh/error.hpp"
#include "sdoh/standoff.hpp"

using namespace sdoh;

namespace {

// Tokens: She0 has1 a2 history3 of4 drug5 use6 IV7 cocaine8 currently9 .10
const std::string kText = "She has a history of drug use IV cocaine currently .";

std::string char_span(const Sample& s, std::size_t b, std::size_t e) {
  return std::to_string(s.tokens[b].char_start) + " " + std::to_string(s.tokens[e - 1].char_end);
}

}  // namespace

TEST_SUITE("standoff") {
  TEST_CASE("drug event with status and type") {
    const auto sample = make_sample("n1", "src", "SH", kText);
    const auto schema = EventSchema::defaults();
    const std::string ann = "T1\tDrug " + char_span(sample, 8, 9) + "\tcocaine\n" + "T2\tStatus " +
                            char_span(sample, 9, 10) + "\tcurrently\n" + "T3\tType " + char_span(sample, 7, 8) +
                            "\tIV\n" + "E1\tDrug:T1 Status:T2 Type:T3\n" + "A1\tStatusVal T2 current\n";
    const auto events = parse_standoff(ann, sample, schema);
    REQUIRE(events.size() == 1);
    const auto& e = events[0];
    CHECK(e.trigger.event_type == "Drug");
    CHECK(e.trigger.span == TokenSpan{8, 9});
    REQUIRE(e.labeled_args.size() == 1);
    CHECK(e.labeled_args[0].arg_type == "Status");
    CHECK(e.labeled_args[0].subtype == "current");
    CHECK(e.labeled_args[0].span == TokenSpan{9, 10});
    REQUIRE(e.span_args.size() == 1);
    CHECK(e.span_args[0].arg_type == "Type");
    CHECK(e.span_args[0].span == TokenSpan{7, 8});

    const auto slots = events_to_slots(e);
    CHECK(slots.event_type == "Drug");
    CHECK(slots.labeled == std::map<std::string, std::string>{{"Status", "current"}});
    REQUIRE(slots.spans.size() == 1);
    CHECK(slots.spans[0].first == "Type");
    CHECK(slots.spans[0].second == std::set<std::size_t>{7});
  }

  TEST_CASE("character spans map to every overlapped token") {
    const auto sample = make_sample("n1", "src", "SH", kText);
    CHECK(char_range_to_tokens(sample, sample.tokens[8].char_start, sample.tokens[9].char_end) == TokenSpan{8, 10});
    CHECK(char_range_to_tokens(sample, sample.tokens[8].char_start + 1, sample.tokens[8].char_start + 2) ==
          TokenSpan{8, 9});
    CHECK_THROWS_AS(char_range_to_tokens(sample, 0, kText.size() + 5), RangeError);
    const auto gap = sample.tokens[0].char_end;
    CHECK_THROWS_AS(char_range_to_tokens(sample, gap, gap + 1), RangeError);
  }

  TEST_CASE("char to token mapping is monotone") {
    const auto sample = make_sample("n1", "src", "SH", kText);
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 2000; ++trial) {
      const std::size_t b = fixture::pick(rng, kText.size() - 1);
      const std::size_t e = b + 1 + fixture::pick(rng, kText.size() - b);
      TokenSpan small;
      try {
        small = char_range_to_tokens(sample, b, e);
      } catch (const RangeError&) {
        continue;
      }
      const std::size_t b2 = b - std::min(b, fixture::pick(rng, 4));
      const std::size_t e2 = std::min(kText.size(), e + fixture::pick(rng, 4));
      const auto big = char_range_to_tokens(sample, b2, e2);
      CHECK(big.begin <= small.begin);
      CHECK(big.end >= small.end);
    }
  }

  TEST_CASE("empty input and records outside the grammar") {
    const auto sample = make_sample("n1", "src", "SH", kText);
    const auto schema = EventSchema::defaults();
    CHECK(parse_standoff("", sample, schema).empty());
    CHECK(serialize_standoff({}, sample).empty());
    std::vector<std::string> warnings;
    CHECK(parse_standoff("R1\tRel Arg1:T1 Arg2:T2\n#1\tNote T1\tx\n", sample, schema, &warnings).empty());
    CHECK(warnings.size() == 2);
    CHECK_THROWS_AS(parse_standoff("T1\tDrug 0 3;4 5\tx\n", sample, schema), ParseError);
    CHECK_THROWS_AS(parse_standoff("T1\tDrug 0 3\tShe\nE1\tDrug:T9\n", sample, schema), ParseError);
    CHECK_THROWS_AS(parse_standoff("T1\tGambling 0 3\tShe\nE1\tGambling:T1\n", sample, schema), SchemaError);
    CHECK_THROWS_AS(parse_standoff("X1\tfoo\n", sample, schema), ParseError);
  }

  TEST_CASE("serialized events have the expected record counts") {
    const auto sample = make_sample("n1", "src", "SH", kText);
    Event trigger_only;
    trigger_only.trigger = {"Tobacco", {2, 3}};
    const auto ann = serialize_standoff({trigger_only}, sample);
    CHECK(std::count(ann.begin(), ann.end(), '\n') == 2);
    CHECK(ann.rfind("T1\t", 0) == 0);
    CHECK(ann.find("\nE1\tTobacco:T1\n") != std::string::npos);

    Event labeled = trigger_only;
    labeled.labeled_args.push_back({"Status", {9, 10}, "past"});
    const auto ann2 = serialize_standoff({labeled}, sample);
    CHECK(std::count(ann2.begin(), ann2.end(), '\n') == 4);
    CHECK(parse_standoff(ann2, sample, EventSchema::defaults()) == std::vector<Event>{labeled});
  }

  TEST_CASE("span args of one type stay separate in slots") {
    Event e;
    e.trigger = {"Drug", {1, 2}};
    e.span_args = {{"Type", {3, 4}}, {"Type", {5, 7}}};
    const auto slots = events_to_slots(e);
    REQUIRE(slots.spans.size() == 2);
    CHECK(slots.spans[0].second == std::set<std::size_t>{3});
    CHECK(slots.spans[1].second == std::set<std::size_t>{5, 6});
    Event bare;
    bare.trigger = {"Alcohol", {0, 1}};
    const auto s2 = events_to_slots(bare);
    CHECK(s2.labeled.empty());
    CHECK(s2.spans.empty());
  }

  TEST_CASE("parse and serialize round trip on random event sets") {
    const auto schema = EventSchema::defaults();
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 300; ++trial) {
      const std::size_t n = 1 + fixture::pick(rng, 15);
      const auto sample = fixture::filler_sample("r", n);
      std::vector<Event> events;
      const std::size_t k = fixture::pick(rng, 5);
      for (std::size_t i = 0; i < k; ++i) events.push_back(fixture::random_event(rng, schema, n));
      const auto parsed = parse_standoff(serialize_standoff(events, sample), sample, schema);
      CHECK(parsed == events);
    }
  }

  TEST_CASE("validation rejects foreign arguments and bad spans") {
    const auto schema = EventSchema::defaults();
    Event e;
    e.trigger = {"Employment", {0, 1}};
    e.labeled_args.push_back({"Status", {1, 2}, "current"});
    CHECK_THROWS_AS(validate_event(e, schema, 5), SchemaError);
    e.labeled_args[0].subtype = "retired";
    CHECK(validate_event(e, schema, 5).empty());
    e.span_args.push_back({"Method", {2, 3}});
    CHECK_THROWS_AS(validate_event(e, schema, 5), SchemaError);
    e.span_args.clear();
    e.trigger.span = {4, 6};
    CHECK_THROWS_AS(validate_event(e, schema, 5), RangeError);
    Event missing;
    missing.trigger = {"Alcohol", {0, 1}};
    CHECK(validate_event(missing, schema, 5).size() == 1);
  }
}
