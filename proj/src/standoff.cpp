#include "sdoh/standoff.hpp"

#include <algorithm>
#include <charconv>
#include <sstream>
#include <unordered_map>

#include "sdoh/error.hpp"

namespace sdoh {

namespace {

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t b = 0;
  while (true) {
    const std::size_t e = s.find(sep, b);
    out.push_back(s.substr(b, e == std::string_view::npos ? std::string_view::npos : e - b));
    if (e == std::string_view::npos) break;
    b = e + 1;
  }
  return out;
}

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
    const std::size_t b = i;
    while (i < s.size() && s[i] != ' ' && s[i] != '\t') ++i;
    if (i > b) out.push_back(s.substr(b, i - b));
  }
  return out;
}

bool parse_size(std::string_view s, std::size_t& out) {
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && p == s.data() + s.size();
}

std::string strip_ordinal(std::string_view role) {
  std::size_t e = role.size();
  while (e > 1 && role[e - 1] >= '0' && role[e - 1] <= '9') --e;
  return std::string(role.substr(0, e));
}

std::string at_line(std::size_t line, const std::string& msg) {
  return "line " + std::to_string(line) + ": " + msg;
}

struct TextBound {
  std::string label;
  std::size_t begin;
  std::size_t end;
  std::size_t line;
};

struct EventRecord {
  std::string type;
  std::string trigger_id;
  std::vector<std::pair<std::string, std::string>> args;  // role, T id
  std::size_t line;
};

struct Attribute {
  std::string value;
  std::size_t line;
};

}  // namespace

const LabeledArgument* Event::find_labeled(std::string_view arg_type) const {
  for (const auto& a : labeled_args)
    if (a.arg_type == arg_type) return &a;
  return nullptr;
}

std::vector<std::string> validate_event(const Event& event, const EventSchema& schema,
                                        std::size_t n_tokens) {
  const auto& type = schema.at(event.trigger.event_type);
  auto check_span = [&](const TokenSpan& s, const std::string& what) {
    if (s.empty() || s.end > n_tokens)
      throw RangeError(what + " span [" + std::to_string(s.begin) + "," + std::to_string(s.end) +
                       ") outside sample of " + std::to_string(n_tokens) + " tokens");
  };
  check_span(event.trigger.span, "trigger");

  std::vector<std::string> warnings;
  std::set<std::string> seen;
  for (const auto& a : event.labeled_args) {
    const auto* spec = type.find_labeled(a.arg_type);
    if (!spec) throw SchemaError(type.name + ": '" + a.arg_type + "' is not a labeled argument");
    if (!seen.insert(a.arg_type).second)
      throw SchemaError(type.name + ": duplicate labeled argument " + a.arg_type);
    if (spec->label_index(a.subtype) == spec->labels.size())
      throw SchemaError(type.name + "/" + a.arg_type + ": unknown subtype '" + a.subtype + "'");
    check_span(a.span, a.arg_type);
  }
  for (const auto& a : event.span_args) {
    if (!type.has_span_arg(a.arg_type))
      throw SchemaError(type.name + ": '" + a.arg_type + "' is not a span-only argument");
    check_span(a.span, a.arg_type);
  }
  for (const auto& spec : type.labeled_args)
    if (spec.required && !seen.count(spec.name))
      warnings.push_back(type.name + " event missing required argument " + spec.name);
  return warnings;
}

TokenSpan char_range_to_tokens(const Sample& sample, std::size_t char_begin, std::size_t char_end) {
  if (char_begin >= char_end || char_end > sample.text.size())
    throw RangeError("character span [" + std::to_string(char_begin) + "," + std::to_string(char_end) +
                     ") outside sample text of length " + std::to_string(sample.text.size()));
  const auto& toks = sample.tokens;
  // First token ending after char_begin, first token starting at/after char_end.
  auto first = std::partition_point(toks.begin(), toks.end(),
                                    [&](const Token& t) { return t.char_end <= char_begin; });
  auto last = std::partition_point(first, toks.end(),
                                   [&](const Token& t) { return t.char_start < char_end; });
  if (first == last)
    throw RangeError("character span [" + std::to_string(char_begin) + "," + std::to_string(char_end) +
                     ") covers no token");
  return {static_cast<std::size_t>(first - toks.begin()), static_cast<std::size_t>(last - toks.begin())};
}

std::vector<Event> parse_standoff(std::string_view ann_text, const Sample& sample,
                                  const EventSchema& schema, std::vector<std::string>* warnings) {
  std::unordered_map<std::string, TextBound> bounds;
  std::unordered_map<std::string, Attribute> attributes;  // keyed by T id
  std::vector<EventRecord> records;
  auto warn = [&](std::string msg) {
    if (warnings) warnings->push_back(std::move(msg));
  };

  std::size_t line_no = 0;
  for (auto line : split(ann_text, '\n')) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") == std::string_view::npos) continue;

    const auto fields = split(line, '\t');
    const std::string id(fields[0]);
    if (!id.empty() && (id[0] == 'R' || id[0] == 'N' || id[0] == '#' || id[0] == '*')) {
      warn(at_line(line_no, "ignored " + std::string(1, id[0]) + " record"));
      continue;
    }
    if (id.size() < 2 || fields.size() < 2) throw ParseError(line_no, "malformed record");

    switch (id[0]) {
      case 'T': {
        const auto parts = split_ws(fields[1]);
        if (fields[1].find(';') != std::string_view::npos)
          throw ParseError(line_no, "discontinuous spans are not supported");
        TextBound tb;
        if (parts.size() != 3 || !parse_size(parts[1], tb.begin) || !parse_size(parts[2], tb.end))
          throw ParseError(line_no, "expected '<Label> <start> <end>'");
        tb.label = std::string(parts[0]);
        tb.line = line_no;
        if (!bounds.emplace(id, std::move(tb)).second) throw ParseError(line_no, "duplicate id " + id);
        break;
      }
      case 'E': {
        const auto parts = split_ws(fields[1]);
        if (parts.empty()) throw ParseError(line_no, "empty event record");
        EventRecord rec;
        rec.line = line_no;
        for (std::size_t i = 0; i < parts.size(); ++i) {
          const auto colon = parts[i].find(':');
          if (colon == std::string_view::npos || colon == 0 || colon + 1 == parts[i].size())
            throw ParseError(line_no, "expected '<Role>:<Tid>', got '" + std::string(parts[i]) + "'");
          std::string role(parts[i].substr(0, colon));
          std::string target(parts[i].substr(colon + 1));
          if (i == 0) {
            rec.type = std::move(role);
            rec.trigger_id = std::move(target);
          } else {
            rec.args.emplace_back(strip_ordinal(role), std::move(target));
          }
        }
        records.push_back(std::move(rec));
        break;
      }
      case 'A':
      case 'M': {
        const auto parts = split_ws(fields[1]);
        if (parts.size() < 2 || parts.size() > 3)
          throw ParseError(line_no, "expected '<Attr> <Tid> [value]'");
        std::string target(parts[1]);
        std::string value = parts.size() == 3 ? std::string(parts[2]) : std::string{};
        auto [it, fresh] = attributes.emplace(target, Attribute{value, line_no});
        if (!fresh && it->second.value != value)
          throw ParseError(line_no, "conflicting attributes on " + target);
        break;
      }
      default:
        throw ParseError(line_no, "unknown record type '" + id + "'");
    }
  }

  auto resolve = [&](const std::string& tid, std::size_t line) -> std::pair<TokenSpan, const TextBound*> {
    auto it = bounds.find(tid);
    if (it == bounds.end()) throw ParseError(line, "reference to undefined " + tid);
    try {
      return {char_range_to_tokens(sample, it->second.begin, it->second.end), &it->second};
    } catch (const RangeError& e) {
      throw RangeError(at_line(it->second.line, e.what()));
    }
  };

  std::vector<Event> events;
  events.reserve(records.size());
  for (const auto& rec : records) {
    const auto* type = schema.find(rec.type);
    if (!type) throw SchemaError(at_line(rec.line, "unknown event type '" + rec.type + "'"));
    Event ev;
    ev.trigger = {rec.type, resolve(rec.trigger_id, rec.line).first};
    for (const auto& [role, tid] : rec.args) {
      const TokenSpan span = resolve(tid, rec.line).first;
      auto attr = attributes.find(tid);
      if (const auto* spec = type->find_labeled(role)) {
        if (attr == attributes.end() || attr->second.value.empty())
          throw SchemaError(at_line(rec.line, rec.type + "/" + role + " has no subtype attribute"));
        if (spec->label_index(attr->second.value) == spec->labels.size())
          throw SchemaError(at_line(attr->second.line, rec.type + "/" + role + ": unknown subtype '" +
                                                           attr->second.value + "'"));
        if (ev.find_labeled(role))
          throw SchemaError(at_line(rec.line, rec.type + ": duplicate labeled argument " + role));
        ev.labeled_args.push_back({role, span, attr->second.value});
      } else if (type->has_span_arg(role)) {
        if (attr != attributes.end() && !attr->second.value.empty())
          throw SchemaError(at_line(rec.line, rec.type + "/" + role + " is span-only but carries a subtype"));
        ev.span_args.push_back({role, span});
      } else {
        throw SchemaError(at_line(rec.line, rec.type + ": unknown argument '" + role + "'"));
      }
    }
    for (auto& w : validate_event(ev, schema, sample.tokens.size())) warn(at_line(rec.line, w));
    events.push_back(std::move(ev));
  }
  return events;
}

std::string serialize_standoff(const std::vector<Event>& events, const Sample& sample) {
  std::ostringstream out;
  std::size_t next_t = 1, next_a = 1, next_e = 1;

  auto text_bound = [&](const std::string& label, const TokenSpan& span) {
    if (span.empty() || span.end > sample.tokens.size())
      throw RangeError(label + " span [" + std::to_string(span.begin) + "," + std::to_string(span.end) +
                       ") outside sample " + sample.id);
    const std::size_t b = sample.tokens[span.begin].char_start;
    const std::size_t e = sample.tokens[span.end - 1].char_end;
    std::string text = sample.text.substr(b, e - b);
    std::replace_if(text.begin(), text.end(), [](char c) { return c == '\n' || c == '\t' || c == '\r'; }, ' ');
    const std::string id = "T" + std::to_string(next_t++);
    out << id << '\t' << label << ' ' << b << ' ' << e << '\t' << text << '\n';
    return id;
  };

  for (const auto& ev : events) {
    const std::string trig = text_bound(ev.trigger.event_type, ev.trigger.span);
    std::vector<std::pair<std::string, std::string>> roles;
    std::vector<std::pair<std::string, std::string>> attrs;  // T id, attr line body
    std::map<std::string, int> role_count;
    auto role_name = [&](const std::string& arg) {
      const int k = ++role_count[arg];
      return k == 1 ? arg : arg + std::to_string(k);
    };
    for (const auto& a : ev.labeled_args) {
      const std::string tid = text_bound(a.arg_type, a.span);
      roles.emplace_back(role_name(a.arg_type), tid);
      attrs.emplace_back(tid, a.arg_type + "Val " + tid + " " + a.subtype);
    }
    for (const auto& a : ev.span_args) roles.emplace_back(role_name(a.arg_type), text_bound(a.arg_type, a.span));

    out << 'E' << next_e++ << '\t' << ev.trigger.event_type << ':' << trig;
    for (const auto& [role, tid] : roles) out << ' ' << role << ':' << tid;
    out << '\n';
    for (const auto& [tid, body] : attrs) out << 'A' << next_a++ << '\t' << body << '\n';
  }
  return out.str();
}

SlotRecord events_to_slots(const Event& event) {
  SlotRecord slots;
  slots.event_type = event.trigger.event_type;
  for (const auto& a : event.labeled_args) slots.labeled[a.arg_type] = a.subtype;
  for (const auto& a : event.span_args) {
    std::set<std::size_t> tokens;
    for (std::size_t t = a.span.begin; t < a.span.end; ++t) tokens.insert(t);
    slots.spans.emplace_back(a.arg_type, std::move(tokens));
  }
  return slots;
}

}  // namespace sdoh
