#include "sce/losses.hpp"

#include <array>
#include <cmath>

#include "sce/error.hpp"

namespace sce {
namespace {

void require_nonnegative(double v, const char* name) {
  if (!std::isfinite(v) || v < 0.0) throw ConfigError(std::string(name) + " must be finite and nonnegative");
}

struct ItemForward {
  EncodeTrace encoded;
  Vector grad_general;
  MlpTrace text_trace;
  Vector text_embedded;
  Vector grad_text;
};

// Forward pass over the batch; when `grads` is non-null the gradient of the
// total is accumulated into it (it must alias `model`).
ObjectiveTerms run_objective(const SceModel& model, SceModel* grads, const ItemTable& items,
                             std::span<const Triplet> batch, const ObjectiveOptions& options) {
  if (batch.empty()) throw InputError("objective: empty batch");
  options.weights.validate();
  const auto& lw = options.weights;
  const auto& shape = model.shape();
  const std::size_t d = shape.embed_dim;
  const double inv_batch = 1.0 / static_cast<double>(batch.size());
  const double inv_items = 1.0 / static_cast<double>(3 * batch.size());
  const bool text_terms = options.use_vse_sim;
  if (text_terms && !model.text_embedding()) {
    throw InputError("VSE/Sim terms need a model with text_dim > 0");
  }
  const bool shared = options.weighting == Weighting::shared_triplet;
  if (shared != (shape.mode == BranchMode::triplet_visual)) {
    throw ContractError("weighting " + to_string(options.weighting) + " does not match branch mode " +
                        to_string(shape.mode));
  }

  ObjectiveTerms terms;
  const Matrix& masks = model.masks();
  std::optional<Mlp> text_layer;
  if (model.text_embedding()) text_layer = Mlp{{*model.text_embedding()}};

  for (const auto& t : batch) {
    const std::array<std::size_t, 3> ids{t.anchor, t.positive, t.negative};
    std::array<ItemForward, 3> f;
    for (std::size_t r = 0; r < 3; ++r) {
      const auto& item = items[ids[r]];
      f[r].encoded = encode_traced(model, item.visual);
      f[r].grad_general.assign(d, 0.0);
      if (text_terms) {
        if (item.text.empty()) throw InputError("item '" + item.id + "' has no text but VSE/Sim terms are enabled");
        f[r].text_embedded = text_layer->forward(model.params(), item.text, &f[r].text_trace);
        f[r].grad_text.assign(d, 0.0);
      }
    }
    const Vector& va = f[0].encoded.general;
    const Vector& vp = f[1].encoded.general;
    const Vector& vn = f[2].encoded.general;
    const ItemInput ia{va, items[t.anchor].text};
    const ItemInput ip{vp, items[t.positive].text};
    const ItemInput in{vn, items[t.negative].text};

    BranchInput branch_pos;
    BranchInput branch_neg;
    WeightTrace w_pos;
    WeightTrace w_neg;
    if (shared) {
      branch_pos = make_branch_input(shape.mode, {ia, ip, in});
      w_pos = weights_traced(model, branch_pos, t.condition);
    } else {
      branch_pos = make_branch_input(shape.mode, {ia, ip});
      branch_neg = make_branch_input(shape.mode, {ia, in});
      w_pos = weights_traced(model, branch_pos, t.condition);
      w_neg = weights_traced(model, branch_neg, t.condition);
    }
    const Vector& wp = w_pos.weights;
    const Vector& wn = shared ? w_pos.weights : w_neg.weights;

    const Vector e_ap = masked_mixture(masks, va, wp);
    const Vector e_p = masked_mixture(masks, vp, wp);
    const Vector e_an = shared ? e_ap : masked_mixture(masks, va, wn);
    const Vector e_n = masked_mixture(masks, vn, wn);
    const double d_pos = euclidean_distance(e_ap, e_p);
    const double d_neg = euclidean_distance(e_an, e_n);
    const double hinge = triplet_loss(d_pos, d_neg, lw.margin);
    terms.triplet += hinge * inv_batch;

    double l2_here = 0.0;
    for (const auto& fr : f) l2_here += squared_norm(fr.encoded.general);
    terms.l2 += l2_here * inv_items;

    if (text_terms) {
      double vse_here = 0.0;
      for (std::size_t r = 0; r < 3; ++r) {
        const auto& a = f[(r + 1) % 3].text_embedded;
        const auto& b = f[(r + 2) % 3].text_embedded;
        vse_here += vse_loss(f[r].encoded.general, f[r].text_embedded, a, b, lw.margin);
      }
      terms.vse += vse_here / 3.0 * inv_batch;
      terms.sim += sim_loss(vp, vn, va, lw.margin) * inv_batch;
    }

    if (!grads) continue;

    // Triplet hinge.
    if (hinge > 0.0) {
      Vector g_ap(d, 0.0), g_p(d, 0.0), g_an(d, 0.0), g_n(d, 0.0);
      euclidean_distance_backward(e_ap, e_p, inv_batch, g_ap, g_p);
      euclidean_distance_backward(e_an, e_n, -inv_batch, g_an, g_n);
      Vector gw_pos(shape.conditions, 0.0);
      Vector gw_neg(shape.conditions, 0.0);
      Vector& gw_n = shared ? gw_pos : gw_neg;
      compose_backward(*grads, va, wp, g_ap, f[0].grad_general, gw_pos);
      compose_backward(*grads, vp, wp, g_p, f[1].grad_general, gw_pos);
      compose_backward(*grads, va, wn, g_an, f[0].grad_general, gw_n);
      compose_backward(*grads, vn, wn, g_n, f[2].grad_general, gw_n);
      if (shared) {
        const auto gv = weights_backward(*grads, w_pos, branch_pos, gw_pos);
        for (std::size_t r = 0; r < gv.size(); ++r) {
          if (!gv[r].empty()) axpy(1.0, gv[r], f[r].grad_general);
        }
      } else {
        const auto gv_pos = weights_backward(*grads, w_pos, branch_pos, gw_pos);
        const auto gv_neg = weights_backward(*grads, w_neg, branch_neg, gw_neg);
        if (!gv_pos.empty() && !gv_pos[0].empty()) {
          axpy(1.0, gv_pos[0], f[0].grad_general);
          axpy(1.0, gv_pos[1], f[1].grad_general);
          axpy(1.0, gv_neg[0], f[0].grad_general);
          axpy(1.0, gv_neg[1], f[2].grad_general);
        }
      }
    }

    // l2 on the general embeddings.
    if (lw.l2 > 0.0) {
      for (auto& fr : f) axpy(2.0 * lw.l2 * inv_items, fr.encoded.general, fr.grad_general);
    }

    if (text_terms) {
      const double vse_scale = lw.vse * inv_batch / 3.0;
      if (vse_scale > 0.0) {
        for (std::size_t r = 0; r < 3; ++r) {
          auto& self = f[r];
          auto& oa = f[(r + 1) % 3];
          auto& ob = f[(r + 2) % 3];
          const double d_own = euclidean_distance(self.encoded.general, self.text_embedded);
          for (ItemForward* other : {&oa, &ob}) {
            const double d_other = euclidean_distance(self.encoded.general, other->text_embedded);
            if (d_own - d_other + lw.margin > 0.0) {
              euclidean_distance_backward(self.encoded.general, self.text_embedded, vse_scale, self.grad_general,
                                          self.grad_text);
              euclidean_distance_backward(self.encoded.general, other->text_embedded, -vse_scale, self.grad_general,
                                          other->grad_text);
            }
          }
        }
      }
      const double sim_scale = lw.sim * inv_batch;
      if (sim_scale > 0.0 && euclidean_distance(vp, vn) - euclidean_distance(va, vp) + lw.margin > 0.0) {
        euclidean_distance_backward(vp, vn, sim_scale, f[1].grad_general, f[2].grad_general);
        euclidean_distance_backward(va, vp, -sim_scale, f[0].grad_general, f[1].grad_general);
      }
      for (auto& fr : f) text_layer->backward(grads->params(), fr.text_trace, fr.grad_text);
    }

    for (auto& fr : f) encode_backward(*grads, fr.encoded, fr.grad_general);
  }

  terms.l1 = l1_mask_penalty(masks);
  if (grads && lw.l1 > 0.0) {
    auto& p = grads->params()[grads->masks_index()];
    const double scale = lw.l1 / static_cast<double>(p.value.size());
    const auto values = p.value.flat();
    auto g = p.grad.flat();
    for (std::size_t k = 0; k < values.size(); ++k) {
      if (values[k] > 0.0) g[k] += scale;
      else if (values[k] < 0.0) g[k] -= scale;
    }
  }

  terms.total = terms.triplet + lw.l1 * terms.l1 + lw.l2 * terms.l2;
  if (text_terms) terms.total += lw.vse * terms.vse + lw.sim * terms.sim;
  if (!std::isfinite(terms.total)) throw NumericError("objective is not finite");
  return terms;
}

}  // namespace

void LossWeights::validate() const {
  require_nonnegative(margin, "margin");
  require_nonnegative(l1, "lambda_l1");
  require_nonnegative(l2, "lambda_l2");
  require_nonnegative(vse, "lambda_vse");
  require_nonnegative(sim, "lambda_sim");
}

double triplet_loss(double d_pos, double d_neg, double margin) {
  if (d_pos < 0.0 || d_neg < 0.0) throw ContractError("triplet_loss: distances must be nonnegative");
  const double h = d_pos - d_neg + margin;
  return h > 0.0 ? h : 0.0;
}

double l1_mask_penalty(const Matrix& masks) {
  if (masks.size() == 0) return 0.0;
  double s = 0.0;
  for (double v : masks.flat()) s += std::abs(v);
  return s / static_cast<double>(masks.size());
}

double l2_embedding_penalty(std::span<const Vector> general_embeddings) {
  if (general_embeddings.empty()) throw InputError("l2_embedding_penalty: empty batch");
  double s = 0.0;
  for (const auto& v : general_embeddings) s += squared_norm(v);
  return s / static_cast<double>(general_embeddings.size());
}

double vse_loss(std::span<const double> image, std::span<const double> own_text,
                std::span<const double> other_text_a, std::span<const double> other_text_b, double margin) {
  const double d_own = euclidean_distance(image, own_text);
  const double a = d_own - euclidean_distance(image, other_text_a) + margin;
  const double b = d_own - euclidean_distance(image, other_text_b) + margin;
  return (a > 0.0 ? a : 0.0) + (b > 0.0 ? b : 0.0);
}

double sim_loss(std::span<const double> same_a, std::span<const double> same_b, std::span<const double> anchor,
                double margin) {
  const double h = euclidean_distance(same_a, same_b) - euclidean_distance(anchor, same_a) + margin;
  return h > 0.0 ? h : 0.0;
}

ObjectiveTerms total_objective(SceModel& model, const ItemTable& items, std::span<const Triplet> batch,
                               const ObjectiveOptions& options) {
  return run_objective(model, &model, items, batch, options);
}

ObjectiveTerms objective_value(const SceModel& model, const ItemTable& items, std::span<const Triplet> batch,
                               const ObjectiveOptions& options) {
  return run_objective(model, nullptr, items, batch, options);
}

}  // namespace sce
