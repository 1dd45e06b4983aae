#include "sdoh/crf.hpp"

#include <cmath>
#include <limits>

#include "sdoh/error.hpp"

namespace sdoh {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// log(exp(a) + exp(b)) with -inf as the additive identity.
double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  return a > b ? a + std::log1p(std::exp(b - a)) : b + std::log1p(std::exp(a - b));
}

double safe_exp(double x) { return x == kNegInf ? 0.0 : std::exp(x); }

void check_shapes(const CrfStructure& s, const CrfParams& p, const Matrix& emissions) {
  if (emissions.rows() == 0) throw Error("CRF: empty sequence");
  if (emissions.cols() != s.labels || p.transitions.rows() != s.labels || p.transitions.cols() != s.labels ||
      p.start.size() != s.labels)
    throw Error("CRF: shape mismatch");
}

Matrix forward_table(const CrfStructure& s, const CrfParams& p, const Matrix& e) {
  const std::size_t n = e.rows(), L = s.labels;
  Matrix alpha(n, L, kNegInf);
  for (std::size_t y = 0; y < L; ++y)
    if (s.can_start(y)) alpha(0, y) = p.start[y] + e(0, y);
  for (std::size_t t = 1; t < n; ++t)
    for (std::size_t y = 0; y < L; ++y) {
      double acc = kNegInf;
      for (std::size_t prev = 0; prev < L; ++prev)
        if (s.can_move(prev, y) && alpha(t - 1, prev) != kNegInf)
          acc = log_add(acc, alpha(t - 1, prev) + p.transitions(prev, y));
      alpha(t, y) = acc == kNegInf ? kNegInf : acc + e(t, y);
    }
  return alpha;
}

Matrix backward_table(const CrfStructure& s, const CrfParams& p, const Matrix& e) {
  const std::size_t n = e.rows(), L = s.labels;
  Matrix beta(n, L, kNegInf);
  for (std::size_t y = 0; y < L; ++y) beta(n - 1, y) = 0.0;
  for (std::size_t t = n - 1; t-- > 0;)
    for (std::size_t y = 0; y < L; ++y) {
      double acc = kNegInf;
      for (std::size_t next = 0; next < L; ++next)
        if (s.can_move(y, next) && beta(t + 1, next) != kNegInf)
          acc = log_add(acc, p.transitions(y, next) + e(t + 1, next) + beta(t + 1, next));
      beta(t, y) = acc;
    }
  return beta;
}

double log_sum_row(const Matrix& m, std::size_t r) {
  double acc = kNegInf;
  for (double v : m.row(r)) acc = log_add(acc, v);
  return acc;
}

}  // namespace

CrfStructure CrfStructure::unconstrained(std::size_t labels) {
  return {labels, std::vector<std::uint8_t>(labels * labels, 1), std::vector<std::uint8_t>(labels, 1)};
}

CrfStructure CrfStructure::bio(std::size_t arg_types) {
  CrfStructure s = unconstrained(1 + 2 * arg_types);
  for (std::size_t x = 0; x < arg_types; ++x) {
    s.allowed_start[bio_inside(x)] = 0;
    s.allowed[0 * s.labels + bio_inside(x)] = 0;
    for (std::size_t y = 0; y < arg_types; ++y) {
      if (x == y) continue;
      s.allowed[bio_begin(x) * s.labels + bio_inside(y)] = 0;
      s.allowed[bio_inside(x) * s.labels + bio_inside(y)] = 0;
    }
  }
  return s;
}

bool CrfStructure::is_legal(std::span<const std::size_t> path) const {
  if (path.empty()) return true;
  for (auto y : path)
    if (y >= labels) return false;
  if (!can_start(path[0])) return false;
  for (std::size_t t = 1; t < path.size(); ++t)
    if (!can_move(path[t - 1], path[t])) return false;
  return true;
}

std::vector<std::string> bio_label_names(std::span<const std::string> arg_types) {
  std::vector<std::string> names{"O"};
  for (const auto& a : arg_types) {
    names.push_back("B-" + a);
    names.push_back("I-" + a);
  }
  return names;
}

double crf_path_score(const CrfStructure& s, const CrfParams& p, const Matrix& emissions,
                      std::span<const std::size_t> path) {
  check_shapes(s, p, emissions);
  if (path.size() != emissions.rows() || !s.is_legal(path)) return kNegInf;
  double score = p.start[path[0]] + emissions(0, path[0]);
  for (std::size_t t = 1; t < path.size(); ++t) score += p.transitions(path[t - 1], path[t]) + emissions(t, path[t]);
  return score;
}

double crf_log_partition(const CrfStructure& s, const CrfParams& p, const Matrix& emissions) {
  check_shapes(s, p, emissions);
  const Matrix alpha = forward_table(s, p, emissions);
  return log_sum_row(alpha, emissions.rows() - 1);
}

std::vector<std::size_t> crf_viterbi(const CrfStructure& s, const CrfParams& p, const Matrix& emissions) {
  check_shapes(s, p, emissions);
  const std::size_t n = emissions.rows(), L = s.labels;
  Matrix best(n, L, kNegInf);
  std::vector<std::size_t> back(n * L, 0);
  for (std::size_t y = 0; y < L; ++y)
    if (s.can_start(y)) best(0, y) = p.start[y] + emissions(0, y);
  for (std::size_t t = 1; t < n; ++t)
    for (std::size_t y = 0; y < L; ++y) {
      double top = kNegInf;
      std::size_t arg = 0;
      for (std::size_t prev = 0; prev < L; ++prev) {
        if (!s.can_move(prev, y) || best(t - 1, prev) == kNegInf) continue;
        const double v = best(t - 1, prev) + p.transitions(prev, y);
        if (v > top) {
          top = v;
          arg = prev;
        }
      }
      if (top == kNegInf) continue;
      best(t, y) = top + emissions(t, y);
      back[t * L + y] = arg;
    }

  std::vector<std::size_t> path(n);
  std::size_t last = 0;
  for (std::size_t y = 1; y < L; ++y)
    if (best(n - 1, y) > best(n - 1, last)) last = y;
  if (best(n - 1, last) == kNegInf) throw Error("CRF: no legal path");
  path[n - 1] = last;
  for (std::size_t t = n - 1; t > 0; --t) path[t - 1] = back[t * L + path[t]];
  return path;
}

CrfLossGrad crf_nll_and_grad(const CrfStructure& s, const CrfParams& p, const Matrix& emissions,
                             std::span<const std::size_t> gold) {
  check_shapes(s, p, emissions);
  const std::size_t n = emissions.rows(), L = s.labels;
  if (gold.size() != n) throw Error("CRF: gold length does not match sequence length");
  if (!s.is_legal(gold)) throw Error("CRF: gold tag sequence violates the transition constraints");

  const Matrix alpha = forward_table(s, p, emissions);
  const Matrix beta = backward_table(s, p, emissions);
  const double log_z = log_sum_row(alpha, n - 1);

  CrfLossGrad g;
  g.loss = log_z - crf_path_score(s, p, emissions, gold);
  g.d_emissions = Matrix(n, L);
  g.d_transitions = Matrix(L, L);
  g.d_start.assign(L, 0.0);

  for (std::size_t t = 0; t < n; ++t)
    for (std::size_t y = 0; y < L; ++y) g.d_emissions(t, y) = safe_exp(alpha(t, y) + beta(t, y) - log_z);
  for (std::size_t y = 0; y < L; ++y) g.d_start[y] = g.d_emissions(0, y);
  for (std::size_t t = 0; t + 1 < n; ++t)
    for (std::size_t y = 0; y < L; ++y) {
      if (alpha(t, y) == kNegInf) continue;
      for (std::size_t next = 0; next < L; ++next) {
        if (!s.can_move(y, next) || beta(t + 1, next) == kNegInf) continue;
        g.d_transitions(y, next) +=
            std::exp(alpha(t, y) + p.transitions(y, next) + emissions(t + 1, next) + beta(t + 1, next) - log_z);
      }
    }

  // Subtract observed counts.
  g.d_start[gold[0]] -= 1.0;
  for (std::size_t t = 0; t < n; ++t) g.d_emissions(t, gold[t]) -= 1.0;
  for (std::size_t t = 1; t < n; ++t) g.d_transitions(gold[t - 1], gold[t]) -= 1.0;
  return g;
}

}  // namespace sdoh
