#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace sdoh {

// Dense row-major float64 matrix.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0) : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }
  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  void fill(double v) { std::fill(data_.begin(), data_.end(), v); }
  bool all_finite() const;

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// out = M x (+= when accumulate).
void matvec(const Matrix& m, std::span<const double> x, std::span<double> out, bool accumulate = false);
// out += M^T x
void matvec_transposed_add(const Matrix& m, std::span<const double> x, std::span<double> out);
// M += scale * a b^T
void outer_add(Matrix& m, std::span<const double> a, std::span<const double> b, double scale = 1.0);

// Max-subtracted softmax.
std::vector<double> softmax(std::span<const double> logits);
// Gradient w.r.t. logits given p = softmax(logits) and dL/dp.
std::vector<double> softmax_backward(std::span<const double> p, std::span<const double> dp);

std::size_t argmax(std::span<const double> v);  // lowest index on ties

struct AttentionResult {
  std::vector<double> context;  // d
  std::vector<double> weights;  // n
  std::size_t argmax = 0;
};

// weights = softmax(V y), context = weights^T V.
AttentionResult attention_pool(const Matrix& values, std::span<const double> query);

// Accumulates dL/dquery into `dquery` given dL/dcontext. The values matrix is
// treated as a constant input.
void attention_pool_backward(const Matrix& values, const AttentionResult& fwd, std::span<const double> dcontext,
                             std::span<double> dquery);

// -ln(max(pred[gold], 1e-12)). Throws Error when gold is out of range.
double cross_entropy(std::span<const double> pred, std::size_t gold_class);

enum class Init { glorot, zero };

struct Tensor {
  std::string name;
  Init init = Init::glorot;
  Matrix value;
  Matrix grad;
  Matrix velocity;
};

// Named parameters with matching gradient buffers. Tensor handles are stable
// indices into the store.
class ParamStore {
 public:
  std::size_t add(std::string name, std::size_t rows, std::size_t cols, Init init = Init::glorot);

  Tensor& operator[](std::size_t handle) { return tensors_[handle]; }
  const Tensor& operator[](std::size_t handle) const { return tensors_[handle]; }
  std::size_t find(std::string_view name) const;  // throws Error if absent
  std::span<Tensor> tensors() { return tensors_; }
  std::span<const Tensor> tensors() const { return tensors_; }
  std::size_t parameter_count() const;

  // Glorot-uniform weights with r = sqrt(6 / (fan_in + fan_out)); zero biases.
  void initialize(std::uint64_t seed);
  void zero_grad();

  // Flat views across all tensors, in insertion order.
  double& value_at(std::size_t flat);
  double grad_at(std::size_t flat) const;

  nlohmann::json to_json() const;
  // Shapes and names must match the tensors already declared.
  void load_json(const nlohmann::json& j);

 private:
  std::vector<Tensor> tensors_;
};

struct SgdConfig {
  double learning_rate = 0.05;
  double momentum = 0.0;
};

// p <- p - lr * v with v <- momentum * v + g; gradients are zeroed afterwards.
void sgd_step(ParamStore& params, const SgdConfig& config);

// Loss closure. When `with_grad` is set it must accumulate gradients into the
// store (which the checker zeroes first).
using LossFn = std::function<double(bool with_grad)>;

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t coordinates_checked = 0;
  std::size_t worst_coordinate = 0;
};

// Central differences on every coordinate, or on `max_coords` coordinates
// drawn with `seed` when the store is larger. Relative error is
// |a - n| / max(1, |a| + |n|).
GradCheckResult grad_check(const LossFn& loss, ParamStore& params, double epsilon = 1e-5,
                           std::size_t max_coords = 64, std::uint64_t seed = 0);

}  // namespace sdoh
