#include "sdoh/numcore.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "sdoh/error.hpp"

namespace sdoh {

bool Matrix::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

void matvec(const Matrix& m, std::span<const double> x, std::span<double> out, bool accumulate) {
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const auto row = m.row(r);
    const double* a = row.data();
    const double* b = x.data();
    const std::size_t n = row.size();
    double s = 0.0;
#pragma omp simd reduction(+ : s)
    for (std::size_t c = 0; c < n; ++c) s += a[c] * b[c];
    out[r] = accumulate ? out[r] + s : s;
  }
}

void matvec_transposed_add(const Matrix& m, std::span<const double> x, std::span<double> out) {
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const auto row = m.row(r);
    const double xr = x[r];
    if (xr == 0.0) continue;
    for (std::size_t c = 0; c < row.size(); ++c) out[c] += row[c] * xr;
  }
}

void outer_add(Matrix& m, std::span<const double> a, std::span<const double> b, double scale) {
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const double ar = a[r] * scale;
    if (ar == 0.0) continue;
    auto row = m.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) row[c] += ar * b[c];
  }
}

std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> p(logits.begin(), logits.end());
  if (p.empty()) return p;
  const double mx = *std::max_element(p.begin(), p.end());
  double z = 0.0;
  for (auto& v : p) z += (v = std::exp(v - mx));
  for (auto& v : p) v /= z;
  return p;
}

std::vector<double> softmax_backward(std::span<const double> p, std::span<const double> dp) {
  double inner = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) inner += p[i] * dp[i];
  std::vector<double> dz(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) dz[i] = p[i] * (dp[i] - inner);
  return dz;
}

std::size_t argmax(std::span<const double> v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

AttentionResult attention_pool(const Matrix& values, std::span<const double> query) {
  AttentionResult out;
  std::vector<double> scores(values.rows());
  matvec(values, query, scores);
  out.weights = softmax(scores);
  out.argmax = argmax(out.weights);
  out.context.assign(values.cols(), 0.0);
  matvec_transposed_add(values, out.weights, out.context);
  return out;
}

void attention_pool_backward(const Matrix& values, const AttentionResult& fwd, std::span<const double> dcontext,
                             std::span<double> dquery) {
  // d context / d weight_i = V_i, then through the softmax onto the scores.
  std::vector<double> dweights(values.rows());
  matvec(values, dcontext, dweights);
  const auto dscores = softmax_backward(fwd.weights, dweights);
  matvec_transposed_add(values, dscores, dquery);
}

double cross_entropy(std::span<const double> pred, std::size_t gold_class) {
  if (gold_class >= pred.size())
    throw Error("cross_entropy: class " + std::to_string(gold_class) + " out of range " + std::to_string(pred.size()));
  return -std::log(std::max(pred[gold_class], 1e-12));
}

std::size_t ParamStore::add(std::string name, std::size_t rows, std::size_t cols, Init init) {
  Tensor t;
  t.name = std::move(name);
  t.init = init;
  t.value = Matrix(rows, cols);
  t.grad = Matrix(rows, cols);
  t.velocity = Matrix(rows, cols);
  tensors_.push_back(std::move(t));
  return tensors_.size() - 1;
}

std::size_t ParamStore::find(std::string_view name) const {
  for (std::size_t i = 0; i < tensors_.size(); ++i)
    if (tensors_[i].name == name) return i;
  throw Error("no parameter named " + std::string(name));
}

std::size_t ParamStore::parameter_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors_) n += t.value.size();
  return n;
}

void ParamStore::initialize(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (auto& t : tensors_) {
    t.velocity.fill(0.0);
    t.grad.fill(0.0);
    if (t.init == Init::zero) {
      t.value.fill(0.0);
      continue;
    }
    const double r = std::sqrt(6.0 / static_cast<double>(t.value.rows() + t.value.cols()));
    std::uniform_real_distribution<double> dist(-r, r);
    for (auto& v : t.value.data()) v = dist(rng);
  }
}

void ParamStore::zero_grad() {
  for (auto& t : tensors_) t.grad.fill(0.0);
}

double& ParamStore::value_at(std::size_t flat) {
  for (auto& t : tensors_) {
    if (flat < t.value.size()) return t.value.data()[flat];
    flat -= t.value.size();
  }
  throw Error("parameter index out of range");
}

double ParamStore::grad_at(std::size_t flat) const {
  for (const auto& t : tensors_) {
    if (flat < t.grad.size()) return t.grad.data()[flat];
    flat -= t.grad.size();
  }
  throw Error("parameter index out of range");
}

nlohmann::json ParamStore::to_json() const {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& t : tensors_) {
    out.push_back({{"name", t.name},
                   {"shape", {t.value.rows(), t.value.cols()}},
                   {"data", std::vector<double>(t.value.data().begin(), t.value.data().end())}});
  }
  return out;
}

void ParamStore::load_json(const nlohmann::json& j) {
  try {
    if (j.size() != tensors_.size())
      throw Error("checkpoint has " + std::to_string(j.size()) + " tensors, model expects " +
                  std::to_string(tensors_.size()));
    for (std::size_t i = 0; i < tensors_.size(); ++i) {
      auto& t = tensors_[i];
      const auto& jt = j[i];
      const auto name = jt.at("name").get<std::string>();
      const auto shape = jt.at("shape").get<std::vector<std::size_t>>();
      if (name != t.name || shape.size() != 2 || shape[0] != t.value.rows() || shape[1] != t.value.cols())
        throw Error("checkpoint tensor " + name + " does not match model tensor " + t.name);
      const auto data = jt.at("data").get<std::vector<double>>();
      if (data.size() != t.value.size()) throw Error("checkpoint tensor " + name + " has wrong element count");
      std::copy(data.begin(), data.end(), t.value.data().begin());
      if (!t.value.all_finite()) throw Error("checkpoint tensor " + name + " has non-finite values");
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("malformed checkpoint: ") + e.what());
  }
  zero_grad();
}

void sgd_step(ParamStore& params, const SgdConfig& config) {
  for (auto& t : params.tensors()) {
    auto v = t.velocity.data();
    auto g = t.grad.data();
    auto p = t.value.data();
    for (std::size_t i = 0; i < p.size(); ++i) {
      v[i] = config.momentum * v[i] + g[i];
      p[i] -= config.learning_rate * v[i];
      if (!std::isfinite(p[i])) throw Error("non-finite parameter after update in " + t.name);
    }
    t.grad.fill(0.0);
  }
}

GradCheckResult grad_check(const LossFn& loss, ParamStore& params, double epsilon, std::size_t max_coords,
                           std::uint64_t seed) {
  params.zero_grad();
  const double base = loss(true);
  if (!std::isfinite(base)) throw Error("grad_check: non-finite loss");

  const std::size_t total = params.parameter_count();
  std::vector<std::size_t> coords(total);
  std::iota(coords.begin(), coords.end(), std::size_t{0});
  if (total > max_coords) {
    std::mt19937_64 rng(seed);
    std::shuffle(coords.begin(), coords.end(), rng);
    coords.resize(max_coords);
    std::sort(coords.begin(), coords.end());
  }

  std::vector<double> analytic(coords.size());
  for (std::size_t k = 0; k < coords.size(); ++k) analytic[k] = params.grad_at(coords[k]);

  GradCheckResult result;
  result.coordinates_checked = coords.size();
  for (std::size_t k = 0; k < coords.size(); ++k) {
    double& p = params.value_at(coords[k]);
    const double saved = p;
    p = saved + epsilon;
    const double up = loss(false);
    p = saved - epsilon;
    const double down = loss(false);
    p = saved;
    if (!std::isfinite(up) || !std::isfinite(down)) throw Error("grad_check: non-finite loss");
    const double numeric = (up - down) / (2.0 * epsilon);
    const double err = std::abs(analytic[k] - numeric) / std::max(1.0, std::abs(analytic[k]) + std::abs(numeric));
    if (err > result.max_relative_error) {
      result.max_relative_error = err;
      result.worst_coordinate = coords[k];
    }
  }
  params.zero_grad();
  return result;
}

}  // namespace sdoh
