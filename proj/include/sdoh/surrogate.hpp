#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "sdoh/corpus.hpp"
#include "sdoh/numcore.hpp"
#include "sdoh/schema.hpp"
#include "sdoh/standoff.hpp"
#include "sdoh/vectors.hpp"

namespace sdoh {

inline constexpr std::string_view kMultipleClass = "multiple";
inline constexpr std::string_view kAbsentClass = "absent";

// Salient-argument labels followed by "multiple" and "absent".
std::vector<std::string> surrogate_classes(const EventTypeSpec& type);

// absent for no event of the type, the salient subtype for exactly one,
// multiple for two or more. A lone event without the salient argument maps to
// absent and appends a warning.
std::string derive_sample_label(std::span<const Event> events, const EventTypeSpec& type,
                                std::vector<std::string>* warnings = nullptr);

// event type -> class
using SampleLabels = std::map<std::string, std::string>;
// sample id -> labels
using LabelTable = std::map<std::string, SampleLabels>;

LabelTable derive_labels(const AnnotationSet& annotations, std::span<const Sample> samples,
                         const EventSchema& schema, std::vector<std::string>* warnings = nullptr);

nlohmann::json labels_to_json(const LabelTable& labels);
LabelTable labels_from_json(const nlohmann::json& j);

// Per event type (schema order) probability vector over surrogate_classes().
struct ProbProfile {
  std::string sample_id;
  std::vector<std::vector<double>> distributions;
};

nlohmann::json profiles_to_json(std::span<const ProbProfile> profiles, const EventSchema& schema);
std::vector<ProbProfile> profiles_from_json(const nlohmann::json& j, const EventSchema& schema);

// One row per token; out-of-vocabulary tokens are skipped (`skip_oov`) or
// left as zero rows.
Matrix encode_tokens(const Sample& sample, const EmbeddingTable& embeddings, bool skip_oov,
                     std::size_t token_begin = 0, std::size_t token_end = static_cast<std::size_t>(-1));

struct SurrogateExample {
  Matrix values;                   // encoded tokens, possibly zero rows
  std::vector<std::size_t> gold;  // class index per event type
};

class SurrogateModel {
 public:
  SurrogateModel(EventSchema schema, std::size_t dim);

  const EventSchema& schema() const { return schema_; }
  std::size_t dim() const { return dim_; }
  const std::vector<std::string>& classes(std::size_t head) const { return classes_[head]; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }

  // Per-head distributions. Uniform when `values` has no rows.
  std::vector<std::vector<double>> forward(const Matrix& values) const;
  ProbProfile profile(const Sample& sample, const EmbeddingTable& embeddings) const;

  // Summed cross-entropy over heads; accumulates gradients when asked.
  double loss(const SurrogateExample& example, bool with_grad);

  SurrogateExample make_example(const Sample& sample, const EmbeddingTable& embeddings,
                                const SampleLabels& labels) const;

  nlohmann::json to_json() const;
  static SurrogateModel from_json(const nlohmann::json& j);

 private:
  struct Head {
    std::size_t query, weight, bias;
  };

  EventSchema schema_;
  std::size_t dim_;
  std::vector<std::vector<std::string>> classes_;
  ParamStore params_;
  std::vector<Head> heads_;
};

struct SurrogateTrainConfig {
  double learning_rate = 0.05;
  double momentum = 0.9;
  std::size_t epochs = 100;
  std::size_t batch_size = 8;
  std::uint64_t seed = 1;
};

SurrogateTrainConfig surrogate_config_from_json(const nlohmann::json& j);
nlohmann::json surrogate_config_to_json(const SurrogateTrainConfig& c);

// Mini-batch SGD on the summed head cross-entropy, examples shuffled per epoch
// from `config.seed`. When `epoch_losses` is given it receives the mean
// training loss before training and after every epoch.
SurrogateModel train_surrogate(const EventSchema& schema, std::size_t dim, std::span<const SurrogateExample> examples,
                               const SurrogateTrainConfig& config, std::vector<double>* epoch_losses = nullptr);

SurrogateModel train_surrogate(const EventSchema& schema, std::span<const Sample> samples, const LabelTable& labels,
                               const EmbeddingTable& embeddings, const SurrogateTrainConfig& config);

// Parallel over samples; output in input order.
std::vector<ProbProfile> predict_profiles(const SurrogateModel& model, std::span<const Sample> samples,
                                          const EmbeddingTable& embeddings);

// Argmax class per head.
SampleLabels predicted_labels(const SurrogateModel& model, const ProbProfile& profile);

// -sum p ln p, with 0 ln 0 = 0.
double entropy(std::span<const double> distribution);

enum class UncertaintyMode { sum, loop };

UncertaintyMode parse_uncertainty_mode(std::string_view s);
std::string to_string(UncertaintyMode m);

// sum: total entropy over heads. loop: entropy of head (slot mod K).
double sample_uncertainty(const ProbProfile& profile, UncertaintyMode mode, std::size_t slot);

}  // namespace sdoh
