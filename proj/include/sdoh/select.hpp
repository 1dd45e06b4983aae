#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "sdoh/surrogate.hpp"
#include "sdoh/vectors.hpp"

namespace sdoh {

enum class SimilarityMode { average, maximum };

SimilarityMode parse_similarity_mode(std::string_view s);
std::string to_string(SimilarityMode m);

struct SelectionConfig {
  std::size_t batch_size = 10;
  double alpha = 0.1;
  SimilarityMode similarity = SimilarityMode::maximum;
  UncertaintyMode uncertainty = UncertaintyMode::sum;
  // false: each member's similarity is frozen against the members picked
  // before it, so a greedy step adds (1 - s_i)^alpha u(i). true: every step
  // maximizes Q over the whole candidate batch, re-scoring earlier members.
  bool rescore_final_batch = false;
  std::uint64_t seed = 0;

  void validate() const;  // throws Error
};

nlohmann::json selection_config_to_json(const SelectionConfig& c);
SelectionConfig selection_config_from_json(const nlohmann::json& j);

struct BatchStep {
  std::string id;
  double uncertainty = 0.0;
  double similarity = 0.0;
  double q_marginal = 0.0;
};

struct Batch {
  std::vector<std::string> ids;
  std::vector<BatchStep> steps;
};

// Mean or max cosine to the batch members, skipping members with the
// candidate's id. 0 for an empty comparison set.
double similarity_to_batch(const SampleVector& candidate, std::span<const SampleVector> batch, SimilarityMode mode);

// (1 - s)^alpha with the base clamped at 0.
double diversity_weight(double similarity, double alpha);

// Q(B) = sum_i (1 - s_i)^alpha u_i, each s_i taken against all other members.
// `uncertainties[i]` belongs to `members[i]`.
double batch_score(std::span<const SampleVector> members, std::span<const double> uncertainties,
                   const SelectionConfig& config);

// Lookup tables keyed by sample id.
class SelectionInputs {
 public:
  SelectionInputs(std::span<const ProbProfile> profiles, std::span<const SampleVector> vectors);

  const ProbProfile& profile(const std::string& id) const;  // throws Error
  const SampleVector& vector(const std::string& id) const;  // throws Error

 private:
  std::unordered_map<std::string, const ProbProfile*> profiles_;
  std::unordered_map<std::string, const SampleVector*> vectors_;
};

// Q of an ordered batch: loop-mode slots follow batch positions; in frozen
// mode each s_i is taken against the preceding members only.
double ordered_batch_score(std::span<const std::string> batch, const SelectionInputs& inputs,
                           const SelectionConfig& config);

// Greedy argmax_i Q(B u {i}) until |B| = N or the pool is exhausted; ties go
// to the lexicographically smallest id. Candidate scoring within a step runs
// in parallel over cached per-candidate similarity state.
Batch greedy_select(std::span<const std::string> pool, const SelectionInputs& inputs, const SelectionConfig& config);

// Same contract, evaluated serially by recomputing Q(B u {i}) from scratch for
// every candidate at every step.
Batch greedy_select_reference(std::span<const std::string> pool, const SelectionInputs& inputs,
                              const SelectionConfig& config);

// Uniform sample without replacement, in draw order.
std::vector<std::string> random_select(std::span<const std::string> pool, std::size_t n, std::uint64_t seed);

// rank,sample_id,u,s,q_marginal
std::string batch_to_csv(const Batch& batch);

}  // namespace sdoh
