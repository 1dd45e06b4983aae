#include "sdoh/select.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <unordered_set>

#include "sdoh/error.hpp"

namespace sdoh {

namespace {

constexpr double kNoScore = -std::numeric_limits<double>::infinity();

struct Best {
  double score = kNoScore;
  std::size_t index = std::numeric_limits<std::size_t>::max();
};

// Total order: higher score first, then smaller id.
bool better(double score, const std::string& id, const Best& best, std::span<const std::string> ids) {
  if (best.index == std::numeric_limits<std::size_t>::max()) return true;
  if (score != best.score) return score > best.score;
  return id < ids[best.index];
}

void check_pool(std::span<const std::string> pool) {
  std::unordered_set<std::string> seen;
  for (const auto& id : pool)
    if (!seen.insert(id).second) throw Error("duplicate sample id in pool: " + id);
}

}  // namespace

SimilarityMode parse_similarity_mode(std::string_view s) {
  if (s == "average") return SimilarityMode::average;
  if (s == "maximum") return SimilarityMode::maximum;
  throw Error("unknown similarity mode '" + std::string(s) + "'");
}

std::string to_string(SimilarityMode m) { return m == SimilarityMode::average ? "average" : "maximum"; }

void SelectionConfig::validate() const {
  if (batch_size == 0) throw Error("batch size must be at least 1");
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw Error("alpha must be positive");
}

nlohmann::json selection_config_to_json(const SelectionConfig& c) {
  return {{"batch_size", c.batch_size},
          {"alpha", c.alpha},
          {"similarity", to_string(c.similarity)},
          {"uncertainty", to_string(c.uncertainty)},
          {"rescore_final_batch", c.rescore_final_batch},
          {"seed", c.seed}};
}

SelectionConfig selection_config_from_json(const nlohmann::json& j) {
  SelectionConfig c;
  c.batch_size = j.value("batch_size", c.batch_size);
  c.alpha = j.value("alpha", c.alpha);
  c.similarity = parse_similarity_mode(j.value("similarity", to_string(c.similarity)));
  c.uncertainty = parse_uncertainty_mode(j.value("uncertainty", to_string(c.uncertainty)));
  c.rescore_final_batch = j.value("rescore_final_batch", c.rescore_final_batch);
  c.seed = j.value("seed", c.seed);
  c.validate();
  return c;
}

double similarity_to_batch(const SampleVector& candidate, std::span<const SampleVector> batch, SimilarityMode mode) {
  double acc = mode == SimilarityMode::maximum ? -std::numeric_limits<double>::infinity() : 0.0;
  std::size_t count = 0;
  for (const auto& member : batch) {
    if (member.sample_id == candidate.sample_id) continue;
    const double c = cosine(candidate, member);
    acc = mode == SimilarityMode::maximum ? std::max(acc, c) : acc + c;
    ++count;
  }
  if (count == 0) return 0.0;
  return mode == SimilarityMode::maximum ? acc : acc / static_cast<double>(count);
}

double diversity_weight(double similarity, double alpha) { return std::pow(std::max(0.0, 1.0 - similarity), alpha); }

double batch_score(std::span<const SampleVector> members, std::span<const double> uncertainties,
                   const SelectionConfig& config) {
  if (members.size() != uncertainties.size()) throw Error("batch_score: size mismatch");
  double q = 0.0;
  for (std::size_t i = 0; i < members.size(); ++i)
    q += diversity_weight(similarity_to_batch(members[i], members, config.similarity), config.alpha) *
         uncertainties[i];
  return q;
}

SelectionInputs::SelectionInputs(std::span<const ProbProfile> profiles, std::span<const SampleVector> vectors) {
  for (const auto& p : profiles) profiles_[p.sample_id] = &p;
  for (const auto& v : vectors) vectors_[v.sample_id] = &v;
}

const ProbProfile& SelectionInputs::profile(const std::string& id) const {
  auto it = profiles_.find(id);
  if (it == profiles_.end()) throw Error("no uncertainty profile for sample " + id);
  return *it->second;
}

const SampleVector& SelectionInputs::vector(const std::string& id) const {
  auto it = vectors_.find(id);
  if (it == vectors_.end()) throw Error("no sample vector for sample " + id);
  return *it->second;
}

double ordered_batch_score(std::span<const std::string> batch, const SelectionInputs& inputs,
                           const SelectionConfig& config) {
  std::vector<SampleVector> members;
  std::vector<double> u;
  for (std::size_t pos = 0; pos < batch.size(); ++pos) {
    members.push_back(inputs.vector(batch[pos]));
    u.push_back(sample_uncertainty(inputs.profile(batch[pos]), config.uncertainty, pos));
  }
  if (config.rescore_final_batch) return batch_score(members, u, config);
  double q = 0.0;
  for (std::size_t pos = 0; pos < members.size(); ++pos) {
    const double s = similarity_to_batch(members[pos], std::span<const SampleVector>(members).first(pos),
                                         config.similarity);
    q += diversity_weight(s, config.alpha) * u[pos];
  }
  return q;
}

Batch greedy_select_reference(std::span<const std::string> pool, const SelectionInputs& inputs,
                              const SelectionConfig& config) {
  config.validate();
  check_pool(pool);
  for (const auto& id : pool) (void)inputs.profile(id), (void)inputs.vector(id);

  std::vector<std::string> remaining(pool.begin(), pool.end());
  Batch batch;
  double q_current = 0.0;
  while (batch.ids.size() < config.batch_size && !remaining.empty()) {
    Best best;
    for (std::size_t i = 0; i < remaining.size(); ++i) {
      auto trial = batch.ids;
      trial.push_back(remaining[i]);
      const double q = ordered_batch_score(trial, inputs, config);
      if (better(q, remaining[i], best, remaining)) best = {q, i};
    }
    const std::string id = remaining[best.index];
    std::vector<SampleVector> members;
    for (const auto& m : batch.ids) members.push_back(inputs.vector(m));
    BatchStep step;
    step.id = id;
    step.uncertainty = sample_uncertainty(inputs.profile(id), config.uncertainty, batch.ids.size());
    step.similarity = similarity_to_batch(inputs.vector(id), members, config.similarity);
    step.q_marginal = best.score - q_current;
    q_current = best.score;
    batch.ids.push_back(id);
    batch.steps.push_back(std::move(step));
    remaining.erase(remaining.begin() + static_cast<std::ptrdiff_t>(best.index));
  }
  return batch;
}

Batch greedy_select(std::span<const std::string> pool, const SelectionInputs& inputs, const SelectionConfig& config) {
  config.validate();
  check_pool(pool);
  const std::size_t n = pool.size();
  std::vector<const SampleVector*> vec(n);
  std::vector<const ProbProfile*> prof(n);
  for (std::size_t i = 0; i < n; ++i) {
    prof[i] = &inputs.profile(pool[i]);
    vec[i] = &inputs.vector(pool[i]);
  }
  const bool maximum = config.similarity == SimilarityMode::maximum;

  // Per candidate: running max or running sum of cosines to the batch.
  std::vector<double> sim_acc(n, maximum ? -std::numeric_limits<double>::infinity() : 0.0);
  std::vector<std::uint8_t> taken(n, 0);
  // Rescoring needs every member's cosine to every candidate, plus each
  // member's current accumulator and uncertainty.
  std::vector<std::vector<double>> member_cos;
  std::vector<std::size_t> members;
  std::vector<double> member_u;

  Batch batch;
  double q_current = 0.0;
  const std::size_t target = std::min(config.batch_size, n);
  const auto sn = static_cast<std::ptrdiff_t>(n);

  while (batch.ids.size() < target) {
    const std::size_t b = batch.ids.size();
    auto candidate_similarity = [&](std::size_t i) {
      if (b == 0) return 0.0;
      return maximum ? sim_acc[i] : sim_acc[i] / static_cast<double>(b);
    };
    auto candidate_score = [&](std::size_t i) {
      const double u = sample_uncertainty(*prof[i], config.uncertainty, b);
      const double own = diversity_weight(candidate_similarity(i), config.alpha) * u;
      if (!config.rescore_final_batch) return q_current + own;
      double q = own;
      for (std::size_t m = 0; m < members.size(); ++m) {
        const std::size_t j = members[m];
        const double c = member_cos[m][i];
        // Member j's comparison set grows from B\{j} to B\{j} u {i}.
        const double s = maximum ? (b == 1 ? c : std::max(sim_acc[j], c)) : (sim_acc[j] + c) / static_cast<double>(b);
        q += diversity_weight(s, config.alpha) * member_u[m];
      }
      return q;
    };

    Best best;
#pragma omp parallel
    {
      Best local;
#pragma omp for schedule(static) nowait
      for (std::ptrdiff_t si = 0; si < sn; ++si) {
        const auto i = static_cast<std::size_t>(si);
        if (taken[i]) continue;
        const double q = candidate_score(i);
        if (better(q, pool[i], local, pool)) local = {q, i};
      }
#pragma omp critical
      if (local.index != std::numeric_limits<std::size_t>::max() && better(local.score, pool[local.index], best, pool))
        best = local;
    }

    const std::size_t k = best.index;
    BatchStep step;
    step.id = pool[k];
    step.uncertainty = sample_uncertainty(*prof[k], config.uncertainty, b);
    step.similarity = candidate_similarity(k);
    step.q_marginal = best.score - q_current;
    q_current = best.score;
    taken[k] = 1;

    // Fold the new member into every accumulator.
    std::vector<double> cos_k(n, 0.0);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t si = 0; si < sn; ++si) {
      const auto i = static_cast<std::size_t>(si);
      const double c = cosine(*vec[i], *vec[k]);
      cos_k[i] = c;
      if (taken[i] && i != k) continue;
      if (i == k) continue;
      sim_acc[i] = maximum ? std::max(sim_acc[i], c) : sim_acc[i] + c;
    }
    if (config.rescore_final_batch) {
      for (std::size_t m = 0; m < members.size(); ++m) {
        const std::size_t j = members[m];
        sim_acc[j] = maximum ? std::max(sim_acc[j], cos_k[j]) : sim_acc[j] + cos_k[j];
      }
      // sim_acc[k] already holds k's accumulator over the earlier members.
      members.push_back(k);
      member_u.push_back(step.uncertainty);
      member_cos.push_back(std::move(cos_k));
    }
    batch.ids.push_back(step.id);
    batch.steps.push_back(std::move(step));
  }
  return batch;
}

std::vector<std::string> random_select(std::span<const std::string> pool, std::size_t n, std::uint64_t seed) {
  std::vector<std::string> ids(pool.begin(), pool.end());
  std::mt19937_64 rng(seed);
  n = std::min(n, ids.size());
  for (std::size_t i = 0; i < n; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, ids.size() - 1);
    std::swap(ids[i], ids[pick(rng)]);
  }
  ids.resize(n);
  return ids;
}

std::string batch_to_csv(const Batch& batch) {
  std::ostringstream out;
  out.precision(17);
  out << "rank,sample_id,u,s,q_marginal\n";
  for (std::size_t r = 0; r < batch.steps.size(); ++r) {
    const auto& s = batch.steps[r];
    out << r + 1 << ',' << s.id << ',' << s.uncertainty << ',' << s.similarity << ',' << s.q_marginal << '\n';
  }
  return out.str();
}

}  // namespace sdoh
