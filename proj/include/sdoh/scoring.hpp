#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "sdoh/corpus.hpp"
#include "sdoh/standoff.hpp"

namespace sdoh {

struct AlignedPair {
  std::size_t gold_index = 0;
  std::size_t pred_index = 0;
  std::string event_type;
  double center_distance = 0.0;
};

struct Tally {
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  std::int64_t fn = 0;

  Tally& operator+=(const Tally& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    return *this;
  }
  bool operator==(const Tally&) const = default;
};

// 0/0 is scored as 0 for all three.
struct Prf {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

Prf prf(const Tally& t);

// Empty trailing fields mean "not part of the key" (trigger keys carry only
// the event type; span-only keys carry event and argument type).
struct ScoreKey {
  std::string event_type;
  std::string arg_type;
  std::string subtype;

  auto operator<=>(const ScoreKey&) const = default;
  std::string str() const;
};

struct ScoreReport {
  std::map<ScoreKey, Tally> per_key;

  Tally micro() const;
  Prf micro_prf() const { return prf(micro()); }
  ScoreReport& operator+=(const ScoreReport& o);
};

// Pools tallies across keys; precision/recall/F1 come from the pooled counts.
ScoreReport micro_average(std::span<const ScoreReport> reports);

// Greedy nearest-center one-to-one matching of same-type triggers, ordered by
// (distance, gold start, pred start). No distance cutoff.
std::vector<AlignedPair> align_triggers(std::span<const Event> gold, std::span<const Event> pred,
                                        std::string_view event_type);

ScoreReport score_triggers(const AnnotationSet& gold, const AnnotationSet& pred);
ScoreReport score_labeled_args(const AnnotationSet& gold, const AnnotationSet& pred);
ScoreReport score_span_args(const AnnotationSet& gold, const AnnotationSet& pred);

struct KappaReport {
  std::string event_type;
  // n<a><b>: a/b = 1 when annotator A/B marks the type present in a sentence.
  std::int64_t n00 = 0, n01 = 0, n10 = 0, n11 = 0;
  double p_o = 0.0;
  double p_e = 0.0;
  double kappa = 0.0;
  double coverage_fraction = 0.0;
};

// Kappa from a 2x2 presence table. Throws Error when the table is empty.
KappaReport kappa_from_counts(std::int64_t n00, std::int64_t n01, std::int64_t n10, std::int64_t n11);

// Sentence-level trigger agreement, restricted to sentences where neither
// annotator has two or more triggers of `event_type`. A trigger belongs to
// the sentence of its first token.
KappaReport cohens_kappa(const AnnotationSet& a, const AnnotationSet& b, std::span<const Sample> samples,
                         std::string_view event_type);

nlohmann::json report_to_json(const ScoreReport& report);
nlohmann::json kappa_to_json(const KappaReport& k);
// Rows: level,event_type,arg_type,subtype,tp,fp,fn,precision,recall,f1.
std::string report_to_csv(const std::string& level, const ScoreReport& report, bool header);

}  // namespace sdoh
