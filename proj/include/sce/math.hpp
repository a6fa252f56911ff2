#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace sce {

using Vector = std::vector<double>;

/// Dense row-major matrix with fixed dimensions.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static Matrix identity(std::size_t n);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<double> flat() noexcept { return data_; }
  std::span<const double> flat() const noexcept { return data_; }

  void fill(double value);

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

enum class Activation { none, rectifier };

/// A trainable tensor and its same-shape gradient accumulator.
struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;
  bool trainable = true;
};

/// Named, ordered collection of parameters. Indices are stable once added.
class ParamSet {
 public:
  std::size_t add(std::string name, Matrix value, bool trainable = true);

  Parameter& operator[](std::size_t i) { return params_.at(i); }
  const Parameter& operator[](std::size_t i) const { return params_.at(i); }

  /// Throws ContractError when no parameter has this name.
  std::size_t index_of(const std::string& name) const;

  std::size_t size() const noexcept { return params_.size(); }
  std::size_t scalar_count() const noexcept;

  void zero_grad();

  auto begin() noexcept { return params_.begin(); }
  auto end() noexcept { return params_.end(); }
  auto begin() const noexcept { return params_.begin(); }
  auto end() const noexcept { return params_.end(); }

 private:
  std::vector<Parameter> params_;
};

// Forward primitives. Every one checks shapes and throws DimensionError.

Vector affine_forward(std::span<const double> x, const Matrix& weight, std::span<const double> bias,
                      Activation activation);
Vector hadamard(std::span<const double> a, std::span<const double> b);
Vector softmax(std::span<const double> logits);
double euclidean_distance(std::span<const double> a, std::span<const double> b);
double squared_norm(std::span<const double> a);
Vector concat(std::initializer_list<std::span<const double>> parts);

// Backward rules. Parameter gradients are accumulated (+=), never overwritten.

/// `output` is the value returned by affine_forward for the same input. The
/// rectifier derivative is taken as 0 wherever the output is exactly 0.
Vector affine_backward(std::span<const double> x, const Matrix& weight, std::span<const double> output,
                       std::span<const double> grad_output, Activation activation, Matrix& grad_weight,
                       std::span<double> grad_bias);

/// Gradient of the loss with respect to the logits, given the softmax output.
Vector softmax_backward(std::span<const double> probs, std::span<const double> grad_probs);

/// Adds scale * d/da ||a-b|| to grad_a and its negation to grad_b. The
/// subgradient at a == b is zero.
void euclidean_distance_backward(std::span<const double> a, std::span<const double> b, double scale,
                                 std::span<double> grad_a, std::span<double> grad_b);

void axpy(double alpha, std::span<const double> x, std::span<double> y);
bool all_finite(std::span<const double> values) noexcept;

struct GradientCheckEntry {
  std::string parameter;
  double max_relative_error = 0.0;
  std::size_t worst_index = 0;
  std::size_t flagged = 0;
};

struct GradientReport {
  std::vector<GradientCheckEntry> entries;
  double max_relative_error = 0.0;
  bool passed = true;
};

/// Evaluates the loss at `params`. When called by the checker, gradients have
/// been zeroed and the function must accumulate its analytic gradient.
using LossFunction = std::function<double(ParamSet&)>;

/// Compares analytic gradients against central finite differences,
/// (f(θ+eps) - f(θ-eps)) / (2 eps), for every entry of every parameter.
/// Relative error is |analytic - numeric| / max(|analytic|, |numeric|, floor)
/// with floor = 1e-4, so gradients smaller than the floor are compared
/// absolutely. Parameter values are restored on return; gradients are left
/// holding the analytic gradient.
GradientReport check_gradients(const LossFunction& loss, ParamSet& params, double eps, double tol);

}  // namespace sce
