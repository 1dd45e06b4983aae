#include "sdoh/schema.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "sdoh/error.hpp"

namespace sdoh {

std::size_t LabeledArgSpec::label_index(std::string_view label) const {
  auto it = std::find(labels.begin(), labels.end(), label);
  return static_cast<std::size_t>(it - labels.begin());
}

const LabeledArgSpec* EventTypeSpec::find_labeled(std::string_view arg) const {
  for (const auto& a : labeled_args)
    if (a.name == arg) return &a;
  return nullptr;
}

bool EventTypeSpec::has_span_arg(std::string_view arg) const {
  return std::find(span_args.begin(), span_args.end(), arg) != span_args.end();
}

const LabeledArgSpec& EventTypeSpec::salient() const {
  const auto* a = find_labeled(salient_arg);
  if (!a) throw SchemaError("event type " + name + ": salient argument '" + salient_arg + "' is not a labeled argument");
  return *a;
}

EventSchema::EventSchema(std::vector<EventTypeSpec> types) : types_(std::move(types)) {
  if (types_.empty()) throw SchemaError("schema has no event types");
  std::set<std::string> seen;
  for (auto& t : types_) {
    if (!seen.insert(t.name).second) throw SchemaError("duplicate event type " + t.name);
    std::set<std::string> args;
    for (const auto& a : t.labeled_args) {
      if (a.labels.empty()) throw SchemaError(t.name + "/" + a.name + ": empty label set");
      if (!args.insert(a.name).second) throw SchemaError(t.name + ": duplicate argument " + a.name);
      if (std::set<std::string>(a.labels.begin(), a.labels.end()).size() != a.labels.size())
        throw SchemaError(t.name + "/" + a.name + ": duplicate label");
    }
    for (const auto& a : t.span_args)
      if (!args.insert(a).second) throw SchemaError(t.name + ": duplicate argument " + a);
    if (t.salient_arg.empty() && !t.labeled_args.empty()) t.salient_arg = t.labeled_args.front().name;
    if (!t.salient_arg.empty()) (void)t.salient();
  }
}

EventSchema EventSchema::defaults() {
  const std::vector<std::string> substance_status = {"none", "current", "past"};
  const std::vector<std::string> substance_spans = {"Duration", "History", "Type", "Amount", "Frequency"};
  std::vector<EventTypeSpec> types;
  types.push_back({"Alcohol", {{"Status", substance_status, true}}, substance_spans, "Status"});
  auto drug_spans = substance_spans;
  drug_spans.push_back("Method");
  types.push_back({"Drug", {{"Status", substance_status, true}}, drug_spans, "Status"});
  types.push_back({"Tobacco", {{"Status", substance_status, true}}, substance_spans, "Status"});
  types.push_back({"Employment",
                   {{"Status", {"employed", "unemployed", "retired", "on_disability", "student", "homemaker"}, true}},
                   {"Duration", "History", "Type"},
                   "Status"});
  types.push_back({"LivingStatus",
                   {{"Status", {"current", "past", "future"}, true},
                    {"Type", {"alone", "with_family", "with_others", "homeless"}, true}},
                   {"Duration", "History"},
                   "Status"});
  return EventSchema(std::move(types));
}

EventSchema EventSchema::from_json(const nlohmann::json& j) {
  try {
    std::vector<EventTypeSpec> types;
    for (const auto& jt : j.at("event_types")) {
      EventTypeSpec t;
      t.name = jt.at("name").get<std::string>();
      for (const auto& ja : jt.value("labeled_args", nlohmann::json::array())) {
        LabeledArgSpec a;
        a.name = ja.at("name").get<std::string>();
        a.labels = ja.at("labels").get<std::vector<std::string>>();
        a.required = ja.value("required", false);
        t.labeled_args.push_back(std::move(a));
      }
      t.span_args = jt.value("span_args", std::vector<std::string>{});
      t.salient_arg = jt.value("salient_arg", std::string{});
      types.push_back(std::move(t));
    }
    return EventSchema(std::move(types));
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("malformed schema: ") + e.what());
  }
}

EventSchema EventSchema::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open schema " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(path.string() + ": " + e.what());
  }
  return from_json(j);
}

nlohmann::json EventSchema::to_json() const {
  nlohmann::json out;
  out["event_types"] = nlohmann::json::array();
  for (const auto& t : types_) {
    nlohmann::json jt;
    jt["name"] = t.name;
    jt["labeled_args"] = nlohmann::json::array();
    for (const auto& a : t.labeled_args)
      jt["labeled_args"].push_back({{"name", a.name}, {"labels", a.labels}, {"required", a.required}});
    jt["span_args"] = t.span_args;
    jt["salient_arg"] = t.salient_arg;
    out["event_types"].push_back(std::move(jt));
  }
  return out;
}

const EventTypeSpec* EventSchema::find(std::string_view event_type) const {
  for (const auto& t : types_)
    if (t.name == event_type) return &t;
  return nullptr;
}

const EventTypeSpec& EventSchema::at(std::string_view event_type) const {
  const auto* t = find(event_type);
  if (!t) throw SchemaError("unknown event type " + std::string(event_type));
  return *t;
}

std::size_t EventSchema::index_of(std::string_view event_type) const {
  for (std::size_t i = 0; i < types_.size(); ++i)
    if (types_[i].name == event_type) return i;
  throw SchemaError("unknown event type " + std::string(event_type));
}

}  // namespace sdoh
