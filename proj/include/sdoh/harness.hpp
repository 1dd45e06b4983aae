#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "sdoh/corpus.hpp"
#include "sdoh/extractor.hpp"
#include "sdoh/schema.hpp"
#include "sdoh/scoring.hpp"
#include "sdoh/select.hpp"
#include "sdoh/standoff.hpp"
#include "sdoh/surrogate.hpp"
#include "sdoh/vectors.hpp"

namespace sdoh {

// One surrogate class of one event type. Cue keywords mark the salient
// subtype next to the trigger; with probability `cue_noise` the cue is swapped
// for an ambiguous word.
struct SyntheticClass {
  double prevalence = 0.0;
  std::vector<std::string> cues;
  double cue_noise = 0.0;
  bool rare = false;
};

struct SyntheticSpanArg {
  std::string arg_type;
  std::vector<std::string> cues;
  double rate = 0.0;
};

struct SyntheticEventType {
  std::vector<std::string> trigger_cues;
  // Keyed by surrogate class, covering every class of the type.
  std::map<std::string, SyntheticClass> classes;
  // Non-salient labeled argument -> label -> cues.
  std::map<std::string, std::map<std::string, std::vector<std::string>>> other_labeled_cues;
  std::vector<SyntheticSpanArg> span_args;
  // Ambiguous words for this type; SyntheticSpec::ambiguous_cues when empty.
  std::vector<std::string> ambiguous_cues;
};

struct SyntheticSpec {
  EventSchema schema = EventSchema::defaults();
  std::map<std::string, SyntheticEventType> types;
  std::vector<std::string> ambiguous_cues;
  std::size_t filler_vocabulary = 200;
  std::size_t samples = 1000;
  std::size_t filler_min = 2;  // filler words per event sentence
  std::size_t filler_max = 6;
  std::size_t background_min = 0;  // filler-only sentences per sample
  std::size_t background_max = 2;
  std::size_t dim = 128;
  std::uint64_t seed = 1;

  // Throws Error on inconsistent specs.
  void validate() const;
};

// Cue words, including per-type ambiguous words, are derived from type,
// argument and label names. Each type gets
// `absent_rate`, `multiple_rate` and the rest spread evenly over its salient
// labels; all classes share `cue_noise`.
SyntheticSpec default_synthetic_spec(const EventSchema& schema = EventSchema::defaults(), double absent_rate = 0.4,
                                     double multiple_rate = 0.05, double cue_noise = 0.0);

// The last salient label of every type is rare, with prevalence
// `rare_prevalence` and cue noise `rare_noise`; the other labels share the
// remaining mass and `common_noise`.
SyntheticSpec rare_class_spec(const EventSchema& schema = EventSchema::defaults(), double rare_prevalence = 0.1,
                              double rare_noise = 0.8, double common_noise = 0.18, double absent_rate = 0.4,
                              double multiple_rate = 0.05);

nlohmann::json synthetic_spec_to_json(const SyntheticSpec& spec);
SyntheticSpec synthetic_spec_from_json(const nlohmann::json& j);

struct SyntheticCorpus {
  EventSchema schema;
  std::vector<Sample> samples;
  AnnotationSet gold;
  LabelTable labels;
  EmbeddingTable embeddings;
  std::vector<std::string> vocabulary;  // sorted
};

SyntheticCorpus generate_corpus(const SyntheticSpec& spec);

enum class Strategy { active, random };
std::string to_string(Strategy s);

struct CycleConfig {
  std::size_t eval_size = 100;
  std::size_t seed_size = 100;
  std::size_t rounds = 2;
  std::size_t batch_size = 50;
  SelectionConfig selection;
  SurrogateTrainConfig surrogate;
  TfMode tf_mode = TfMode::raw;
  std::optional<ExtractorTrainConfig> extractor;  // also train and score the extractor per round
  std::uint64_t seed = 1;

  void validate(std::size_t corpus_size) const;
};

nlohmann::json cycle_config_to_json(const CycleConfig& c);
CycleConfig cycle_config_from_json(const nlohmann::json& j);

struct RoundMetrics {
  std::size_t round = 0;  // 0 is the seed-set model
  std::size_t labeled = 0;
  std::vector<std::string> selected;  // ids queried after this round's model
  bool truncated = false;
  Prf surrogate;
  std::optional<Prf> extractor_triggers;
  std::optional<Prf> extractor_labeled;
};

struct RunMetrics {
  Strategy strategy = Strategy::random;
  std::vector<std::string> eval_ids;
  std::vector<std::string> seed_ids;
  std::vector<RoundMetrics> rounds;

  // Every id queried after the seed set, in query order.
  std::vector<std::string> selected_ids() const;
};

// Eval split and seed set depend only on `config.seed`; the query stream
// depends on the strategy, so both arms start from identical data.
RunMetrics run_cycle(const SyntheticCorpus& corpus, const CycleConfig& config, Strategy strategy);

// Micro P/R/F1 over (event type, class) keys with "absent" excluded.
Prf surrogate_f1(const LabelTable& gold, const LabelTable& predicted, std::span<const std::string> ids);

struct EnrichmentRow {
  std::string event_type;
  std::string label;
  double selected_rate = 0.0;  // occurrences per sample
  double baseline_rate = 0.0;
  double ratio = 0.0;  // +inf when the baseline rate is 0
};

// Non-absent labels present in either multiset. Throws when either is empty.
std::vector<EnrichmentRow> enrichment(std::span<const SampleLabels> selected, std::span<const SampleLabels> baseline);
std::string enrichment_to_csv(std::span<const EnrichmentRow> rows);

// Occurrences of rare classes per sample.
double rare_label_rate(std::span<const SampleLabels> labels, const SyntheticSpec& spec);

struct SimulationResult {
  RunMetrics active;
  RunMetrics random;
  std::vector<EnrichmentRow> enrichment;
  double rare_rate_active = 0.0;
  double rare_rate_random = 0.0;
};

SimulationResult simulate(const SyntheticSpec& spec, const CycleConfig& config);

nlohmann::json run_metrics_to_json(const RunMetrics& m);
nlohmann::json simulation_to_json(const SimulationResult& r);

}  // namespace sdoh
