#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sdoh/numcore.hpp"

namespace sdoh {

// Which transitions a linear-chain CRF may take. Disallowed moves score -inf.
struct CrfStructure {
  std::size_t labels = 0;
  std::vector<std::uint8_t> allowed;        // labels x labels, [from * labels + to]
  std::vector<std::uint8_t> allowed_start;  // labels

  static CrfStructure unconstrained(std::size_t labels);
  // Labels O, B-a0, I-a0, B-a1, I-a1, ... Forbids O->I-x, B-x->I-y and
  // I-x->I-y for x != y, and starting on I-x.
  static CrfStructure bio(std::size_t arg_types);

  bool can_move(std::size_t from, std::size_t to) const { return allowed[from * labels + to] != 0; }
  bool can_start(std::size_t label) const { return allowed_start[label] != 0; }
  bool is_legal(std::span<const std::size_t> path) const;
};

std::vector<std::string> bio_label_names(std::span<const std::string> arg_types);
inline std::size_t bio_begin(std::size_t arg) { return 1 + 2 * arg; }
inline std::size_t bio_inside(std::size_t arg) { return 2 + 2 * arg; }

// Transition scores (labels x labels) and start scores (labels).
struct CrfParams {
  const Matrix& transitions;
  std::span<const double> start;
};

// -inf for an illegal path.
double crf_path_score(const CrfStructure& s, const CrfParams& p, const Matrix& emissions,
                      std::span<const std::size_t> path);

// log of the summed exp-score over all legal paths (forward algorithm).
double crf_log_partition(const CrfStructure& s, const CrfParams& p, const Matrix& emissions);

// Best legal path; ties go to the lower label index.
std::vector<std::size_t> crf_viterbi(const CrfStructure& s, const CrfParams& p, const Matrix& emissions);

struct CrfLossGrad {
  double loss = 0.0;
  Matrix d_emissions;    // n x labels
  Matrix d_transitions;  // labels x labels
  std::vector<double> d_start;
};

// Negative log-likelihood of `gold` and its gradient from forward-backward
// marginals. Throws Error when `gold` is illegal or has the wrong length.
CrfLossGrad crf_nll_and_grad(const CrfStructure& s, const CrfParams& p, const Matrix& emissions,
                             std::span<const std::size_t> gold);

}  // namespace sdoh
