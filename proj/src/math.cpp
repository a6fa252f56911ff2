#include "sce/math.hpp"

#include <algorithm>
#include <cmath>

#include "sce/error.hpp"

namespace sce {
namespace {

void require_same_length(std::span<const double> a, std::span<const double> b, const char* op) {
  if (a.size() != b.size()) {
    throw DimensionError(std::string(op) + ": length mismatch (" + std::to_string(a.size()) + " vs " +
                         std::to_string(b.size()) + ")");
  }
}

void require_affine_shapes(std::span<const double> x, const Matrix& weight, std::span<const double> bias) {
  if (weight.cols() != x.size() || weight.rows() != bias.size()) {
    throw DimensionError("affine: weight is " + std::to_string(weight.rows()) + "x" + std::to_string(weight.cols()) +
                         ", input " + std::to_string(x.size()) + ", bias " + std::to_string(bias.size()));
  }
}

constexpr double kRelativeFloor = 1e-4;

}  // namespace

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

void Matrix::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

std::size_t ParamSet::add(std::string name, Matrix value, bool trainable) {
  Matrix grad(value.rows(), value.cols());
  params_.push_back(Parameter{std::move(name), std::move(value), std::move(grad), trainable});
  return params_.size() - 1;
}

std::size_t ParamSet::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (params_[i].name == name) return i;
  }
  throw ContractError("no parameter named '" + name + "'");
}

std::size_t ParamSet::scalar_count() const noexcept {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

void ParamSet::zero_grad() {
  for (auto& p : params_) p.grad.fill(0.0);
}

Vector affine_forward(std::span<const double> x, const Matrix& weight, std::span<const double> bias,
                      Activation activation) {
  require_affine_shapes(x, weight, bias);
  Vector out(bias.begin(), bias.end());
  for (std::size_t r = 0; r < weight.rows(); ++r) {
    const auto w = weight.row(r);
    double acc = 0.0;
    for (std::size_t c = 0; c < x.size(); ++c) acc += w[c] * x[c];
    out[r] += acc;
  }
  if (activation == Activation::rectifier) {
    for (auto& v : out) v = v > 0.0 ? v : 0.0;
  }
  return out;
}

Vector affine_backward(std::span<const double> x, const Matrix& weight, std::span<const double> output,
                       std::span<const double> grad_output, Activation activation, Matrix& grad_weight,
                       std::span<double> grad_bias) {
  require_affine_shapes(x, weight, grad_bias);
  require_same_length(output, grad_output, "affine_backward");
  if (grad_weight.rows() != weight.rows() || grad_weight.cols() != weight.cols()) {
    throw DimensionError("affine_backward: gradient slot shape differs from weight");
  }
  Vector grad_x(x.size(), 0.0);
  for (std::size_t r = 0; r < weight.rows(); ++r) {
    double g = grad_output[r];
    if (activation == Activation::rectifier && !(output[r] > 0.0)) g = 0.0;
    if (g == 0.0) continue;
    grad_bias[r] += g;
    auto gw = grad_weight.row(r);
    const auto w = weight.row(r);
    for (std::size_t c = 0; c < x.size(); ++c) {
      gw[c] += g * x[c];
      grad_x[c] += g * w[c];
    }
  }
  return grad_x;
}

Vector hadamard(std::span<const double> a, std::span<const double> b) {
  require_same_length(a, b, "hadamard");
  Vector out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
  return out;
}

Vector softmax(std::span<const double> logits) {
  if (logits.empty()) throw DimensionError("softmax: empty input");
  const double peak = *std::max_element(logits.begin(), logits.end());
  Vector out(logits.size());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - peak);
    total += out[i];
  }
  for (auto& v : out) v /= total;
  return out;
}

Vector softmax_backward(std::span<const double> probs, std::span<const double> grad_probs) {
  require_same_length(probs, grad_probs, "softmax_backward");
  double dot = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) dot += probs[i] * grad_probs[i];
  Vector out(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) out[i] = probs[i] * (grad_probs[i] - dot);
  return out;
}

double squared_norm(std::span<const double> a) {
  double s = 0.0;
  for (double v : a) s += v * v;
  return s;
}

double euclidean_distance(std::span<const double> a, std::span<const double> b) {
  require_same_length(a, b, "euclidean_distance");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return std::sqrt(s);
}

void euclidean_distance_backward(std::span<const double> a, std::span<const double> b, double scale,
                                 std::span<double> grad_a, std::span<double> grad_b) {
  require_same_length(a, b, "euclidean_distance_backward");
  const double d = euclidean_distance(a, b);
  if (d == 0.0 || scale == 0.0) return;
  const double k = scale / d;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double g = k * (a[i] - b[i]);
    grad_a[i] += g;
    grad_b[i] -= g;
  }
}

Vector concat(std::initializer_list<std::span<const double>> parts) {
  Vector out;
  for (const auto& p : parts) out.insert(out.end(), p.begin(), p.end());
  return out;
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  require_same_length(x, std::span<const double>(y.data(), y.size()), "axpy");
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

bool all_finite(std::span<const double> values) noexcept {
  return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
}

GradientReport check_gradients(const LossFunction& loss, ParamSet& params, double eps, double tol) {
  if (!(eps > 0.0)) throw ContractError("check_gradients: eps must be positive");
  params.zero_grad();
  const double base = loss(params);
  if (!std::isfinite(base)) throw NumericError("check_gradients: loss is not finite");

  std::vector<Matrix> analytic;
  analytic.reserve(params.size());
  for (const auto& p : params) analytic.push_back(p.grad);

  GradientReport report;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    GradientCheckEntry entry{params[pi].name};
    auto values = params[pi].value.flat();
    const auto expected = analytic[pi].flat();
    for (std::size_t k = 0; k < values.size(); ++k) {
      const double saved = values[k];
      values[k] = saved + eps;
      const double up = loss(params);
      values[k] = saved - eps;
      const double down = loss(params);
      values[k] = saved;
      if (!std::isfinite(up) || !std::isfinite(down)) {
        throw NumericError("check_gradients: loss not finite near " + params[pi].name + "[" + std::to_string(k) + "]");
      }
      const double numeric = (up - down) / (2.0 * eps);
      const double scale = std::max({std::abs(expected[k]), std::abs(numeric), kRelativeFloor});
      const double rel = std::abs(expected[k] - numeric) / scale;
      if (rel > entry.max_relative_error) {
        entry.max_relative_error = rel;
        entry.worst_index = k;
      }
      if (rel > tol) ++entry.flagged;
    }
    report.max_relative_error = std::max(report.max_relative_error, entry.max_relative_error);
    if (entry.flagged > 0) report.passed = false;
    report.entries.push_back(std::move(entry));
  }

  for (std::size_t pi = 0; pi < params.size(); ++pi) params[pi].grad = analytic[pi];
  return report;
}

}  // namespace sce
