#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "sdoh/corpus.hpp"
#include "sdoh/crf.hpp"
#include "sdoh/numcore.hpp"
#include "sdoh/schema.hpp"
#include "sdoh/standoff.hpp"
#include "sdoh/vectors.hpp"

namespace sdoh {

// Sentence-level outputs. Token indices are sentence-local.
struct SentencePrediction {
  struct TriggerOut {
    double p_present = 0.0;
    std::size_t token = 0;
  };
  struct LabeledOut {
    std::vector<double> distribution;
    std::size_t token = 0;
  };
  std::vector<TriggerOut> triggers;             // per event type
  std::vector<LabeledOut> labeled;              // per labeled-argument head
  std::vector<std::vector<std::size_t>> tags;  // per event type, BIO index per token
};

// Sentence-level training targets. `labeled[h]` is empty when head h is
// masked out (its event type is absent, or the event lacks the argument).
struct SentenceGold {
  std::vector<int> present;
  std::vector<std::optional<std::size_t>> labeled;
  std::vector<std::vector<std::size_t>> tags;
};

// Detection needs P(present) strictly above 0.5.
inline constexpr double kDetectionThreshold = 0.5;

// Trigger heads per event type, labeled-argument heads fed [P^t, context],
// and one BIO CRF per event type over [token embedding, P^s].
class ExtractorModel {
 public:
  struct LabeledHeadInfo {
    std::size_t event_index;
    std::string event_type;
    std::string arg_type;
    std::vector<std::string> labels;
  };

  ExtractorModel(EventSchema schema, std::size_t dim);

  const EventSchema& schema() const { return schema_; }
  std::size_t dim() const { return dim_; }
  std::size_t event_count() const { return schema_.size(); }
  const std::vector<LabeledHeadInfo>& labeled_heads() const { return labeled_info_; }
  const CrfStructure& crf_structure(std::size_t event_index) const { return crf_[event_index].structure; }
  const std::vector<std::string>& crf_labels(std::size_t event_index) const { return crf_[event_index].names; }
  // Width of flattened P^s, the sum of labeled-head label counts.
  std::size_t labeled_feature_size() const { return ps_size_; }

  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }

  SentencePrediction predict(const Matrix& values) const;

  // Joint loss: trigger cross-entropies + unmasked labeled-argument
  // cross-entropies + CRF negative log-likelihoods.
  double loss(const Matrix& values, const SentenceGold& gold, bool with_grad);

  std::vector<Event> predict_sample(const Sample& sample, const EmbeddingTable& embeddings) const;

  nlohmann::json to_json() const;
  static ExtractorModel from_json(const nlohmann::json& j);

  // Forward-pass pieces, exposed for head-level tests.
  struct TriggerForward {
    AttentionResult attention;
    std::vector<double> p;  // {not present, present}
  };
  struct LabeledForward {
    AttentionResult attention;
    std::vector<double> features;
    std::vector<double> p;
  };
  std::vector<TriggerForward> trigger_forward(const Matrix& values) const;
  std::vector<double> flatten_trigger_probs(std::span<const TriggerForward> triggers) const;
  std::vector<LabeledForward> labeled_arg_forward(const Matrix& values, std::span<const double> trigger_probs) const;
  Matrix crf_emissions(std::size_t event_index, const Matrix& values, std::span<const double> labeled_probs) const;
  CrfParams crf_params(std::size_t event_index) const;

 private:
  struct TriggerHead {
    std::size_t query, weight, bias;
  };
  struct LabeledHead {
    std::size_t query, weight, bias;
  };
  struct CrfHead {
    CrfStructure structure;
    std::vector<std::string> names;
    std::size_t token_weight, prob_weight, bias, transitions, start;
  };

  EventSchema schema_;
  std::size_t dim_;
  std::size_t ps_size_ = 0;
  ParamStore params_;
  std::vector<TriggerHead> triggers_;
  std::vector<LabeledHead> labeled_;
  std::vector<LabeledHeadInfo> labeled_info_;
  std::vector<CrfHead> crf_;
};

// Presence, labeled classes and BIO tags for sentence `sentence` of `sample`.
// Throws Error when span-only arguments of one event type overlap.
SentenceGold derive_sentence_gold(const ExtractorModel& model, const Sample& sample, std::size_t sentence,
                                  std::span<const Event> events);

// Events for the detected types only, one per type. Token indices are shifted
// by `token_offset` into sample coordinates.
std::vector<Event> assemble_events(const SentencePrediction& pred, const ExtractorModel& model,
                                   std::size_t token_offset = 0);

struct ExtractorTrainConfig {
  double learning_rate = 0.1;
  double momentum = 0.0;
  std::size_t epochs = 20;
  std::uint64_t seed = 1;
};

ExtractorTrainConfig extractor_config_from_json(const nlohmann::json& j);
nlohmann::json extractor_config_to_json(const ExtractorTrainConfig& c);

// Per-sentence SGD over the joint loss, sentence order shuffled each epoch.
ExtractorModel train_extractor(const EventSchema& schema, std::span<const Sample> samples,
                               const AnnotationSet& gold, const EmbeddingTable& embeddings,
                               const ExtractorTrainConfig& config, std::vector<double>* epoch_losses = nullptr);

// Parallel over samples.
AnnotationSet predict_events(const ExtractorModel& model, std::span<const Sample> samples,
                             const EmbeddingTable& embeddings);

}  // namespace sdoh
