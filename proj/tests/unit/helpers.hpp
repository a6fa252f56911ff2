#pragma once

#include <filesystem>
#include <string>

#include "sce/data.hpp"
#include "sce/model.hpp"
#include "sce/random.hpp"

namespace testing {

inline const std::filesystem::path kFixtures = std::filesystem::path(SCE_SOURCE_DIR) / "tests" / "fixtures";

inline sce::Vector random_vector(sce::Rng& rng, std::size_t n, double scale = 1.0) {
  sce::Vector v(n);
  for (auto& x : v) x = sce::gaussian(rng, scale);
  return v;
}

inline sce::ModelShape small_shape(sce::BranchMode mode = sce::BranchMode::pair_visual, std::size_t m = 3) {
  sce::ModelShape s;
  s.feature_dim = 8;
  s.embed_dim = 6;
  s.conditions = m;
  s.text_dim = 5;
  s.mode = mode;
  s.branch_hidden = sce::ModelShape::default_branch_hidden(m);
  return s;
}

// Items g0..g{n-1} with random visual (F) and text (T) features.
inline sce::ItemTable random_items(std::size_t n, std::size_t f, std::size_t t, std::uint64_t seed) {
  sce::Rng rng(seed);
  sce::ItemTable items;
  for (std::size_t i = 0; i < n; ++i) {
    sce::Item item{"g" + std::to_string(i), "c" + std::to_string(i % 3), random_vector(rng, f), {}};
    if (t > 0) item.text = random_vector(rng, t);
    items.add(std::move(item));
  }
  return items;
}

// Plain matrix-vector product, kept apart from the library's affine code.
inline sce::Vector matvec(const sce::Matrix& w, const sce::Vector& x, const sce::Matrix& b) {
  sce::Vector y(w.rows());
  for (std::size_t r = 0; r < w.rows(); ++r) {
    double acc = b(0, r);
    for (std::size_t c = 0; c < w.cols(); ++c) acc += w(r, c) * x[c];
    y[r] = acc;
  }
  return y;
}

}  // namespace testing
