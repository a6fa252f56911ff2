#include <doctest.h>

#include <cmath>
#include <numeric>

#include "helpers.hpp"
#include "sce/error.hpp"
#include "sce/math.hpp"

using namespace sce;
using testing::random_vector;

TEST_CASE("affine_forward analytic cases") {
  Matrix w(1, 1, 2.0);
  CHECK(affine_forward(Vector{3.0}, w, Vector{1.0}, Activation::none) == Vector{7.0});

  Rng rng(3);
  const Vector x = random_vector(rng, 5);
  CHECK(affine_forward(x, Matrix::identity(5), Vector(5, 0.0), Activation::none) == x);
  CHECK(affine_forward(Vector{-1.0, 2.0}, Matrix::identity(2), Vector(2, 0.0), Activation::rectifier) ==
        Vector{0.0, 2.0});
}

TEST_CASE("affine_forward rejects mismatched shapes") {
  CHECK_THROWS_AS(affine_forward(Vector{1.0, 2.0}, Matrix(2, 3), Vector(2, 0.0), Activation::none), DimensionError);
  CHECK_THROWS_AS(affine_forward(Vector{1.0, 2.0, 3.0}, Matrix(2, 3), Vector(3, 0.0), Activation::none),
                  DimensionError);
}

TEST_CASE("hadamard") {
  CHECK(hadamard(Vector{2, 3}, Vector{4, 5}) == Vector{8, 15});
  Rng rng(4);
  for (int k = 0; k < 20; ++k) {
    const Vector v = random_vector(rng, 1 + k);
    CHECK(hadamard(v, Vector(v.size(), 1.0)) == v);
    CHECK(hadamard(v, Vector(v.size(), 0.0)) == Vector(v.size(), 0.0));
  }
  CHECK_THROWS_AS(hadamard(Vector{1}, Vector{1, 2}), DimensionError);
}

TEST_CASE("softmax analytic and stability cases") {
  CHECK(softmax(Vector{0, 0}) == Vector{0.5, 0.5});
  const Vector p = softmax(Vector{std::log(2.0), 0.0});
  CHECK(p[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(p[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  const Vector big = softmax(Vector{1000.0, 0.0});
  CHECK(std::abs(big[0] - 1.0) <= 1e-12);
  CHECK(std::abs(big[1]) <= 1e-12);
  CHECK(all_finite(big));
}

TEST_CASE("softmax stays on the simplex") {
  Rng rng(5);
  for (int k = 0; k < 1000; ++k) {
    const Vector logits = random_vector(rng, 1 + uniform_index(rng, 32), 10.0);
    const Vector p = softmax(logits);
    const double sum = std::accumulate(p.begin(), p.end(), 0.0);
    CHECK(std::abs(sum - 1.0) <= 1e-6);
    for (double x : p) {
      CHECK(x > 0.0);
      CHECK(x <= 1.0);
    }
  }
}

TEST_CASE("euclidean_distance") {
  Rng rng(6);
  const Vector v = random_vector(rng, 4);
  CHECK(euclidean_distance(v, v) == 0.0);
  CHECK(euclidean_distance(Vector{0, 3}, Vector{4, 0}) == 5.0);
  for (int k = 0; k < 200; ++k) {
    const std::size_t n = 1 + uniform_index(rng, 10);
    const Vector a = random_vector(rng, n), b = random_vector(rng, n), c = random_vector(rng, n);
    double sq = 0.0;
    for (std::size_t i = 0; i < n; ++i) sq += (a[i] - b[i]) * (a[i] - b[i]);
    CHECK(euclidean_distance(a, b) == doctest::Approx(std::sqrt(sq)).epsilon(1e-14));
    CHECK(std::abs(euclidean_distance(a, b) - euclidean_distance(b, a)) <= 1e-9);
    CHECK(euclidean_distance(a, c) <= euclidean_distance(a, b) + euclidean_distance(b, c) + 1e-9);
  }
}

TEST_CASE("check_gradients on a quadratic") {
  ParamSet params;
  Rng rng(7);
  Matrix theta(2, 3);
  for (auto& x : theta.flat()) x = gaussian(rng);
  params.add("theta", theta);
  auto loss = [](ParamSet& ps) {
    auto& p = ps[0];
    double f = 0.0;
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      f += p.value.flat()[i] * p.value.flat()[i];
      p.grad.flat()[i] += 2.0 * p.value.flat()[i];
    }
    return f;
  };
  const auto report = check_gradients(loss, params, 1e-5, 1e-4);
  CHECK(report.passed);
  CHECK(report.max_relative_error < 1e-8);
  CHECK(params[0].value == theta);  // values restored
}

TEST_CASE("check_gradients flags a corrupted gradient") {
  ParamSet params;
  params.add("theta", Matrix(1, 4, 0.7));
  auto loss = [](ParamSet& ps) {
    auto& p = ps[0];
    double f = 0.0;
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      f += p.value.flat()[i] * p.value.flat()[i];
      p.grad.flat()[i] += 1.1 * 2.0 * p.value.flat()[i];
    }
    return f;
  };
  const auto report = check_gradients(loss, params, 1e-5, 1e-4);
  CHECK_FALSE(report.passed);
  REQUIRE(report.entries.size() == 1);
  CHECK(report.entries[0].flagged == 4);
}

namespace {

// Scalar loss exercising every primitive and its backward rule:
// L = d(softmax(W2 relu(W1 x + b1)) ⊙ u, v) + ||W1 x||^2 / 10
struct PrimitiveChain {
  Vector x, u, v;

  double operator()(ParamSet& ps) const {
    auto& w1 = ps[0];
    auto& b1 = ps[1];
    auto& w2 = ps[2];
    const Vector h = affine_forward(x, w1.value, b1.value.flat(), Activation::rectifier);
    const Vector z = affine_forward(h, w2.value, Vector(w2.value.rows(), 0.0), Activation::none);
    const Vector p = softmax(z);
    const Vector e = hadamard(p, u);
    const double d = euclidean_distance(e, v);

    const Vector lin = affine_forward(x, w1.value, Vector(w1.value.rows(), 0.0), Activation::none);
    const double reg = squared_norm(lin) / 10.0;

    Vector ge(e.size(), 0.0), gv(v.size(), 0.0);
    euclidean_distance_backward(e, v, 1.0, ge, gv);
    const Vector gp = hadamard(ge, u);
    const Vector gz = softmax_backward(p, gp);
    Vector gb2(w2.value.rows(), 0.0);
    const Vector gh = affine_backward(h, w2.value, z, gz, Activation::none, w2.grad, gb2);
    affine_backward(x, w1.value, h, gh, Activation::rectifier, w1.grad, b1.grad.flat());
    Vector glin(lin.size());
    for (std::size_t i = 0; i < lin.size(); ++i) glin[i] = 2.0 * lin[i] / 10.0;
    Vector gb_unused(lin.size(), 0.0);
    affine_backward(x, w1.value, lin, glin, Activation::none, w1.grad, gb_unused);
    return d + reg;
  }
};

}  // namespace

TEST_CASE("primitive backward rules pass the gradient check") {
  Rng rng(8);
  for (int trial = 0; trial < 5; ++trial) {
    ParamSet params;
    Matrix w1(5, 4), w2(3, 5), b1(1, 5);
    for (auto* m : {&w1, &w2, &b1}) {
      for (auto& x : m->flat()) x = gaussian(rng, 0.7);
    }
    params.add("w1", w1);
    params.add("b1", b1);
    params.add("w2", w2);
    PrimitiveChain chain{random_vector(rng, 4), random_vector(rng, 3), random_vector(rng, 3)};
    // Nudge rectifier inputs away from the kink.
    const Vector pre = affine_forward(chain.x, params[0].value, params[1].value.flat(), Activation::none);
    for (std::size_t i = 0; i < pre.size(); ++i) {
      if (std::abs(pre[i]) < 1e-3) params[1].value(0, i) += 0.01;
    }
    const auto report = check_gradients(std::ref(chain), params, 1e-5, 1e-4);
    CHECK(report.passed);
    CHECK(report.max_relative_error < 1e-4);
  }
}

TEST_CASE("ParamSet bookkeeping") {
  ParamSet ps;
  const auto a = ps.add("a", Matrix(2, 3, 1.0));
  const auto b = ps.add("b", Matrix(1, 4, 1.0), false);
  CHECK(ps.index_of("b") == b);
  CHECK(ps.index_of("a") == a);
  CHECK(ps.scalar_count() == 10);
  CHECK_FALSE(ps[b].trainable);
  ps[a].grad.fill(3.0);
  ps.zero_grad();
  CHECK(ps[a].grad == Matrix(2, 3, 0.0));
  CHECK_THROWS_AS(ps.index_of("zzz"), ContractError);
}
