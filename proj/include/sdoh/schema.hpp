#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace sdoh {

struct LabeledArgSpec {
  std::string name;
  std::vector<std::string> labels;
  bool required = false;

  std::size_t label_index(std::string_view label) const;  // labels.size() if unknown
};

struct EventTypeSpec {
  std::string name;
  std::vector<LabeledArgSpec> labeled_args;
  std::vector<std::string> span_args;
  // Labeled argument whose subtype stands for the whole event in the
  // sample-level surrogate task.
  std::string salient_arg;

  const LabeledArgSpec* find_labeled(std::string_view arg) const;
  bool has_span_arg(std::string_view arg) const;
  const LabeledArgSpec& salient() const;
};

// Event types with their argument inventory. Order of event types is
// significant: it fixes head order in the models and the "loop" uncertainty
// cycle.
class EventSchema {
 public:
  EventSchema() = default;
  explicit EventSchema(std::vector<EventTypeSpec> types);

  // Alcohol, Drug, Tobacco, Employment, LivingStatus.
  static EventSchema defaults();
  static EventSchema from_json(const nlohmann::json& j);
  static EventSchema load(const std::filesystem::path& path);
  nlohmann::json to_json() const;

  const std::vector<EventTypeSpec>& event_types() const { return types_; }
  std::size_t size() const { return types_.size(); }
  const EventTypeSpec* find(std::string_view event_type) const;
  const EventTypeSpec& at(std::string_view event_type) const;  // throws SchemaError
  std::size_t index_of(std::string_view event_type) const;     // throws SchemaError

 private:
  std::vector<EventTypeSpec> types_;
};

}  // namespace sdoh
