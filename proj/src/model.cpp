#include "sce/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

#include "sce/error.hpp"
#include "sce/random.hpp"

namespace sce {
namespace {

constexpr double kSimplexTolerance = 1e-6;

void require_length(std::span<const double> v, std::size_t n, const char* what) {
  if (v.size() != n) {
    throw DimensionError(std::string(what) + ": expected length " + std::to_string(n) + ", got " +
                         std::to_string(v.size()));
  }
}

void check_branch_input(const SceModel& model, const BranchInput& input) {
  const auto& shape = model.shape();
  std::size_t want_visual = 0;
  std::size_t want_text = 0;
  switch (shape.mode) {
    case BranchMode::pair_visual: want_visual = 2; break;
    case BranchMode::triplet_visual: want_visual = 3; break;
    case BranchMode::pair_text: want_text = 2; break;
    case BranchMode::pair_visual_text: want_visual = 2; want_text = 2; break;
  }
  if (input.visual.size() != want_visual || input.text.size() != want_text) {
    throw ContractError("weight branch in mode " + to_string(shape.mode) + " expects " + std::to_string(want_visual) +
                        " visual and " + std::to_string(want_text) + " text inputs, got " +
                        std::to_string(input.visual.size()) + " and " + std::to_string(input.text.size()));
  }
  for (const auto& v : input.visual) require_length(v, shape.embed_dim, "weight branch visual input");
  for (const auto& t : input.text) require_length(t, shape.text_dim, "weight branch text input");
}

Vector random_weights(const SceModel& model, const BranchInput& input) {
  std::uint64_t h = mix_seed(model.random_seed());
  auto absorb = [&h](std::span<const double> values) {
    for (double v : values) h = mix_seed(h ^ std::bit_cast<std::uint64_t>(v));
    h = mix_seed(h ^ values.size());
  };
  for (const auto& v : input.visual) absorb(v);
  for (const auto& t : input.text) absorb(t);
  Rng rng(h);
  return sample_simplex(rng, model.shape().conditions);
}

Vector non_learned_weights(const SceModel& model, const BranchInput& input,
                           const std::optional<std::string>& condition_label) {
  const std::size_t m = model.shape().conditions;
  switch (model.weight_source()) {
    case WeightSource::uniform: return Vector(m, 1.0 / static_cast<double>(m));
    case WeightSource::random: return random_weights(model, input);
    case WeightSource::fixed_disjoint: {
      // Unlabelled pairs (outfits, FITB) compare in the union of all blocks.
      if (!condition_label) return Vector(m, 1.0 / static_cast<double>(m));
      const auto& labels = model.condition_labels();
      const auto it = std::find(labels.begin(), labels.end(), *condition_label);
      if (it == labels.end()) throw InputError("unknown condition label '" + *condition_label + "'");
      Vector w(m, 0.0);
      w[static_cast<std::size_t>(it - labels.begin())] = 1.0;
      return w;
    }
    case WeightSource::learned: break;
  }
  throw ContractError("non_learned_weights called for the learned source");
}

// Input vector of the branch network, plus the projected text in visual-text mode.
Vector branch_network_input(const SceModel& model, const BranchInput& input, WeightTrace* trace) {
  const auto& shape = model.shape();
  switch (shape.mode) {
    case BranchMode::pair_visual: return concat({input.visual[0], input.visual[1]});
    case BranchMode::triplet_visual: return concat({input.visual[0], input.visual[1], input.visual[2]});
    case BranchMode::pair_text: return concat({input.text[0], input.text[1]});
    case BranchMode::pair_visual_text: {
      const DenseLayer& proj = *model.text_projection();
      Mlp projection{{proj}};
      Vector out;
      out.reserve(2 * shape.embed_dim);
      for (std::size_t k = 0; k < 2; ++k) {
        MlpTrace pt;
        Vector p = projection.forward(model.params(), input.text[k], trace ? &pt : nullptr);
        const Vector mixed = hadamard(input.visual[k], p);
        out.insert(out.end(), mixed.begin(), mixed.end());
        if (trace) {
          trace->projected_text.push_back(std::move(p));
          trace->projection.push_back(std::move(pt));
        }
      }
      return out;
    }
  }
  throw ContractError("unknown branch mode");
}

}  // namespace

Vector sample_simplex(Rng& rng, std::size_t n) {
  Vector w(n);
  double total = 0.0;
  for (auto& v : w) {
    // 1 - u keeps the argument of log in (0, 1].
    v = -std::log(1.0 - uniform(rng, 0.0, 1.0));
    total += v;
  }
  if (!(total > 0.0)) return Vector(n, 1.0 / static_cast<double>(n));
  for (auto& v : w) v /= total;
  return w;
}

std::string to_string(BranchMode mode) {
  switch (mode) {
    case BranchMode::pair_visual: return "pair-visual";
    case BranchMode::triplet_visual: return "triplet-visual";
    case BranchMode::pair_text: return "pair-text";
    case BranchMode::pair_visual_text: return "pair-visual-text";
  }
  return "?";
}

std::string to_string(Weighting weighting) {
  return weighting == Weighting::per_pair ? "per-pair" : "shared-triplet";
}

std::string to_string(WeightSource source) {
  switch (source) {
    case WeightSource::learned: return "learned";
    case WeightSource::uniform: return "uniform";
    case WeightSource::random: return "random";
    case WeightSource::fixed_disjoint: return "fixed-disjoint";
  }
  return "?";
}

BranchMode parse_branch_mode(std::string_view text) {
  for (auto m : {BranchMode::pair_visual, BranchMode::triplet_visual, BranchMode::pair_text,
                 BranchMode::pair_visual_text}) {
    if (to_string(m) == text) return m;
  }
  throw ConfigError("unknown branch mode '" + std::string(text) + "'");
}

Weighting parse_weighting(std::string_view text) {
  if (text == "per-pair") return Weighting::per_pair;
  if (text == "shared-triplet") return Weighting::shared_triplet;
  throw ConfigError("unknown weighting '" + std::string(text) + "'");
}

WeightSource parse_weight_source(std::string_view text) {
  for (auto s : {WeightSource::learned, WeightSource::uniform, WeightSource::random, WeightSource::fixed_disjoint}) {
    if (to_string(s) == text) return s;
  }
  throw ConfigError("unknown weight source '" + std::string(text) + "'");
}

std::size_t Mlp::input_width(const ParamSet& params) const {
  return layers.empty() ? 0 : params[layers.front().weight].value.cols();
}

std::size_t Mlp::output_width(const ParamSet& params) const {
  return layers.empty() ? 0 : params[layers.back().weight].value.rows();
}

Vector Mlp::forward(const ParamSet& params, std::span<const double> x, MlpTrace* trace) const {
  Vector current(x.begin(), x.end());
  for (const auto& layer : layers) {
    Vector next = affine_forward(current, params[layer.weight].value, params[layer.bias].value.flat(), layer.activation);
    if (trace) {
      trace->inputs.push_back(std::move(current));
      trace->outputs.push_back(next);
    }
    current = std::move(next);
  }
  return current;
}

Vector Mlp::backward(ParamSet& params, const MlpTrace& trace, std::span<const double> grad_output) const {
  Vector grad(grad_output.begin(), grad_output.end());
  for (std::size_t k = layers.size(); k-- > 0;) {
    const auto& layer = layers[k];
    auto& w = params[layer.weight];
    auto& b = params[layer.bias];
    grad = affine_backward(trace.inputs[k], w.value, trace.outputs[k], grad, layer.activation, w.grad, b.grad.flat());
  }
  return grad;
}

std::vector<std::size_t> ModelShape::default_branch_hidden(std::size_t conditions) {
  return {2 * conditions, 2 * conditions};
}

std::size_t ModelShape::branch_input_width() const {
  switch (mode) {
    case BranchMode::pair_visual: return 2 * embed_dim;
    case BranchMode::triplet_visual: return 3 * embed_dim;
    case BranchMode::pair_text: return 2 * text_dim;
    case BranchMode::pair_visual_text: return 2 * embed_dim;
  }
  return 0;
}

void ModelShape::validate() const {
  if (feature_dim == 0) throw ConfigError("feature_dim (F) must be positive");
  if (embed_dim == 0) throw ConfigError("embed_dim (D) must be positive");
  if (conditions == 0) throw ConfigError("conditions (M) must be at least 1");
  if ((mode == BranchMode::pair_text || mode == BranchMode::pair_visual_text) && text_dim == 0) {
    throw ConfigError("branch mode " + to_string(mode) + " needs text_dim (T) > 0");
  }
  for (auto w : encoder_hidden) {
    if (w == 0) throw ConfigError("encoder hidden widths must be positive");
  }
  for (auto w : branch_hidden) {
    if (w == 0) throw ConfigError("branch hidden widths must be positive");
  }
}

SceModel::SceModel(ModelShape shape) : shape_(std::move(shape)) {
  shape_.validate();

  std::size_t in = shape_.feature_dim;
  for (std::size_t k = 0; k < shape_.encoder_hidden.size(); ++k) {
    encoder_.layers.push_back(
        add_layer("encoder." + std::to_string(k), in, shape_.encoder_hidden[k], Activation::rectifier));
    in = shape_.encoder_hidden[k];
  }
  encoder_.layers.push_back(
      add_layer("encoder." + std::to_string(shape_.encoder_hidden.size()), in, shape_.embed_dim, Activation::none));

  masks_ = params_.add("masks", Matrix(shape_.conditions, shape_.embed_dim));

  in = shape_.branch_input_width();
  for (std::size_t k = 0; k < shape_.branch_hidden.size(); ++k) {
    branch_.layers.push_back(
        add_layer("branch." + std::to_string(k), in, shape_.branch_hidden[k], Activation::rectifier));
    in = shape_.branch_hidden[k];
  }
  branch_.layers.push_back(
      add_layer("branch." + std::to_string(shape_.branch_hidden.size()), in, shape_.conditions, Activation::none));

  if (shape_.mode == BranchMode::pair_visual_text) {
    text_projection_ = add_layer("text_projection", shape_.text_dim, shape_.embed_dim, Activation::none);
  }
  if (shape_.text_dim > 0) {
    text_embedding_ = add_layer("text_embedding", shape_.text_dim, shape_.embed_dim, Activation::none);
  }
}

DenseLayer SceModel::add_layer(const std::string& prefix, std::size_t in, std::size_t out, Activation activation) {
  DenseLayer layer;
  layer.weight = params_.add(prefix + ".weight", Matrix(out, in));
  layer.bias = params_.add(prefix + ".bias", Matrix(1, out));
  layer.activation = activation;
  return layer;
}

SceModel SceModel::create(const ModelShape& shape, std::uint64_t seed) {
  SceModel model(shape);
  Rng rng(derive_seed(seed, 0x5ce));
  for (auto& p : model.params_) {
    if (p.name == "masks") {
      for (auto& v : p.value.flat()) v = uniform(rng, 0.9, 1.1);
    } else if (p.name.ends_with(".weight")) {
      const double limit = std::sqrt(6.0 / static_cast<double>(p.value.rows() + p.value.cols()));
      for (auto& v : p.value.flat()) v = uniform(rng, -limit, limit);
    }
  }
  return model;
}

void SceModel::set_weight_source(WeightSource source, std::uint64_t random_seed) {
  source_ = source;
  random_seed_ = random_seed;
}

void SceModel::set_condition_labels(std::vector<std::string> labels) {
  if (labels.size() > shape_.conditions) {
    throw ConfigError(std::to_string(labels.size()) + " condition labels exceed M=" +
                      std::to_string(shape_.conditions));
  }
  condition_labels_ = std::move(labels);
}

void SceModel::set_masks_trainable(bool trainable) { params_[masks_].trainable = trainable; }

Vector encode(const SceModel& model, std::span<const double> raw) {
  require_length(raw, model.shape().feature_dim, "encode");
  return model.encoder().forward(model.params(), raw);
}

Matrix apply_masks(std::span<const double> general, const Matrix& masks) {
  require_length(general, masks.cols(), "apply_masks");
  Matrix out(masks.rows(), masks.cols());
  for (std::size_t j = 0; j < masks.rows(); ++j) {
    const auto c = masks.row(j);
    auto o = out.row(j);
    for (std::size_t d = 0; d < general.size(); ++d) o[d] = c[d] * general[d];
  }
  return out;
}

Vector compose_embedding(const Matrix& masked, std::span<const double> weights) {
  require_length(weights, masked.rows(), "compose_embedding weights");
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= -kSimplexTolerance)) throw ContractError("compose_embedding: weights must be nonnegative");
    total += w;
  }
  if (std::abs(total - 1.0) > kSimplexTolerance) {
    throw ContractError("compose_embedding: weights sum to " + std::to_string(total) + ", not 1");
  }
  Vector out(masked.cols(), 0.0);
  for (std::size_t j = 0; j < masked.rows(); ++j) axpy(weights[j], masked.row(j), out);
  return out;
}

Vector masked_mixture(const Matrix& masks, std::span<const double> general, std::span<const double> weights) {
  require_length(general, masks.cols(), "masked_mixture");
  require_length(weights, masks.rows(), "masked_mixture weights");
  Vector out(general.size(), 0.0);
  for (std::size_t j = 0; j < masks.rows(); ++j) {
    const auto c = masks.row(j);
    const double w = weights[j];
    for (std::size_t d = 0; d < general.size(); ++d) out[d] += w * c[d] * general[d];
  }
  return out;
}

Vector compute_condition_weights(const SceModel& model, const BranchInput& input) {
  check_branch_input(model, input);
  const Vector x = branch_network_input(model, input, nullptr);
  return softmax(model.branch().forward(model.params(), x));
}

Vector resolve_condition_weights(const SceModel& model, const BranchInput& input,
                                 const std::optional<std::string>& condition_label) {
  if (model.weight_source() == WeightSource::learned) return compute_condition_weights(model, input);
  check_branch_input(model, input);
  return non_learned_weights(model, input, condition_label);
}

BranchInput make_branch_input(BranchMode mode, std::initializer_list<ItemInput> items) {
  BranchInput input;
  const bool wants_visual = mode != BranchMode::pair_text;
  const bool wants_text = mode == BranchMode::pair_text || mode == BranchMode::pair_visual_text;
  for (const auto& item : items) {
    if (wants_visual) input.visual.push_back(item.visual);
    if (wants_text) {
      if (item.text.empty()) throw InputError("branch mode " + to_string(mode) + " needs text features for every item");
      input.text.push_back(item.text);
    }
  }
  return input;
}

PairEmbedding embed_pair(const SceModel& model, const ItemInput& first, const ItemInput& second,
                         const std::optional<std::string>& condition_label) {
  const auto& shape = model.shape();
  if (shape.mode == BranchMode::triplet_visual) {
    throw ContractError("embed_pair: branch mode triplet-visual conditions on three items");
  }
  const Vector v1 = encode(model, first.visual);
  const Vector v2 = encode(model, second.visual);
  const BranchInput input = make_branch_input(shape.mode, {ItemInput{v1, first.text}, ItemInput{v2, second.text}});
  PairEmbedding out;
  out.weights = resolve_condition_weights(model, input, condition_label);
  out.first = masked_mixture(model.masks(), v1, out.weights);
  out.second = masked_mixture(model.masks(), v2, out.weights);
  return out;
}

TripletEmbedding embed_triplet(const SceModel& model, const ItemInput& anchor, const ItemInput& positive,
                               const ItemInput& negative, Weighting weighting,
                               const std::optional<std::string>& condition_label) {
  const auto& shape = model.shape();
  const bool triplet_branch = shape.mode == BranchMode::triplet_visual;
  if ((weighting == Weighting::shared_triplet) != triplet_branch) {
    throw ContractError("weighting " + to_string(weighting) + " does not match branch mode " + to_string(shape.mode));
  }
  const Vector va = encode(model, anchor.visual);
  const Vector vp = encode(model, positive.visual);
  const Vector vn = encode(model, negative.visual);
  TripletEmbedding out;
  if (weighting == Weighting::shared_triplet) {
    const BranchInput input = make_branch_input(shape.mode, {ItemInput{va, {}}, ItemInput{vp, {}}, ItemInput{vn, {}}});
    out.weights_positive = resolve_condition_weights(model, input, condition_label);
    out.weights_negative = out.weights_positive;
  } else {
    out.weights_positive = resolve_condition_weights(
        model, make_branch_input(shape.mode, {ItemInput{va, anchor.text}, ItemInput{vp, positive.text}}),
        condition_label);
    out.weights_negative = resolve_condition_weights(
        model, make_branch_input(shape.mode, {ItemInput{va, anchor.text}, ItemInput{vn, negative.text}}),
        condition_label);
  }
  out.anchor_for_positive = masked_mixture(model.masks(), va, out.weights_positive);
  out.positive = masked_mixture(model.masks(), vp, out.weights_positive);
  out.anchor_for_negative = masked_mixture(model.masks(), va, out.weights_negative);
  out.negative = masked_mixture(model.masks(), vn, out.weights_negative);
  return out;
}

Matrix condition_embeddings(const SceModel& model, std::span<const double> raw) {
  return apply_masks(encode(model, raw), model.masks());
}

EncodeTrace encode_traced(const SceModel& model, std::span<const double> raw) {
  require_length(raw, model.shape().feature_dim, "encode");
  EncodeTrace trace;
  trace.general = model.encoder().forward(model.params(), raw, &trace.mlp);
  return trace;
}

void encode_backward(SceModel& model, const EncodeTrace& trace, std::span<const double> grad_general) {
  model.encoder().backward(model.params(), trace.mlp, grad_general);
}

WeightTrace weights_traced(const SceModel& model, const BranchInput& input,
                           const std::optional<std::string>& condition_label) {
  check_branch_input(model, input);
  WeightTrace trace;
  if (model.weight_source() != WeightSource::learned) {
    trace.weights = non_learned_weights(model, input, condition_label);
    return trace;
  }
  trace.learned = true;
  const Vector x = branch_network_input(model, input, &trace);
  trace.weights = softmax(model.branch().forward(model.params(), x, &trace.branch));
  return trace;
}

std::vector<Vector> weights_backward(SceModel& model, const WeightTrace& trace, const BranchInput& input,
                                     std::span<const double> grad_weights) {
  std::vector<Vector> grad_visual(input.visual.size());
  if (!trace.learned) return grad_visual;

  const Vector grad_logits = softmax_backward(trace.weights, grad_weights);
  const Vector grad_in = model.branch().backward(model.params(), trace.branch, grad_logits);
  const std::size_t d = model.shape().embed_dim;

  switch (model.shape().mode) {
    case BranchMode::pair_visual:
    case BranchMode::triplet_visual:
      for (std::size_t k = 0; k < input.visual.size(); ++k) {
        grad_visual[k].assign(grad_in.begin() + static_cast<std::ptrdiff_t>(k * d),
                              grad_in.begin() + static_cast<std::ptrdiff_t>((k + 1) * d));
      }
      break;
    case BranchMode::pair_text: break;
    case BranchMode::pair_visual_text: {
      Mlp projection{{*model.text_projection()}};
      for (std::size_t k = 0; k < 2; ++k) {
        const std::span<const double> g(grad_in.data() + k * d, d);
        grad_visual[k] = hadamard(g, trace.projected_text[k]);
        projection.backward(model.params(), trace.projection[k], hadamard(g, input.visual[k]));
      }
      break;
    }
  }
  return grad_visual;
}

void compose_backward(SceModel& model, std::span<const double> general, std::span<const double> weights,
                      std::span<const double> grad_embedding, std::span<double> grad_general,
                      std::span<double> grad_weights) {
  auto& masks = model.params()[model.masks_index()];
  const std::size_t m = masks.value.rows();
  const std::size_t d = masks.value.cols();
  for (std::size_t j = 0; j < m; ++j) {
    const auto c = masks.value.row(j);
    auto gc = masks.grad.row(j);
    const double w = weights[j];
    double gw = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
      const double cv = c[k] * general[k];
      gw += cv * grad_embedding[k];
      gc[k] += w * general[k] * grad_embedding[k];
      grad_general[k] += w * c[k] * grad_embedding[k];
    }
    grad_weights[j] += gw;
  }
}

}  // namespace sce
