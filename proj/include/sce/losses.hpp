#pragma once

#include <span>

#include "sce/data.hpp"
#include "sce/math.hpp"
#include "sce/model.hpp"

namespace sce {

struct LossWeights {
  double margin = 0.2;  // μ
  double l1 = 5e-4;     // λ₁, mask sparsity
  double l2 = 5e-4;     // λ₂, general-embedding norm
  double vse = 5e-5;    // λ₃
  double sim = 5e-5;    // λ₄

  /// Throws ConfigError unless every field is finite and nonnegative.
  void validate() const;
};

/// max{0, d_pos - d_neg + margin}
double triplet_loss(double d_pos, double d_neg, double margin);

/// Mean |C_jd| over all M x D entries.
double l1_mask_penalty(const Matrix& masks);

/// Mean squared Euclidean norm over the batch.
double l2_embedding_penalty(std::span<const Vector> general_embeddings);

/// Image-to-description hinge for one anchor role: the image should be closer
/// to its own description than to either of the other two.
double vse_loss(std::span<const double> image, std::span<const double> own_text,
                std::span<const double> other_text_a, std::span<const double> other_text_b, double margin);

/// max{0, d(V_j, V_k) - d(V_i, V_j) + margin}, V_j and V_k being the
/// same-category pair of a triplet and V_i its anchor.
double sim_loss(std::span<const double> same_a, std::span<const double> same_b, std::span<const double> anchor,
                double margin);

struct ObjectiveTerms {
  double total = 0.0;
  double triplet = 0.0;  // batch mean
  double l1 = 0.0;
  double l2 = 0.0;
  double vse = 0.0;      // batch mean of the per-triplet average over anchor roles
  double sim = 0.0;      // batch mean
};

struct ObjectiveOptions {
  LossWeights weights;
  Weighting weighting = Weighting::per_pair;
  bool use_vse_sim = false;
};

/// Mean triplet loss + λ₁ l1 + λ₂ l2 (+ λ₃ VSE + λ₄ Sim), with the gradient
/// of the total accumulated into model.params().
ObjectiveTerms total_objective(SceModel& model, const ItemTable& items, std::span<const Triplet> batch,
                               const ObjectiveOptions& options);

/// Same value as total_objective without touching gradients.
ObjectiveTerms objective_value(const SceModel& model, const ItemTable& items, std::span<const Triplet> batch,
                               const ObjectiveOptions& options);

}  // namespace sce
