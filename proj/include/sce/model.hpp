#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sce/math.hpp"

namespace sce {

/// What the condition weight branch looks at.
enum class BranchMode {
  pair_visual,       // concat(V_i, V_j)
  triplet_visual,    // concat(V_a, V_p, V_n)
  pair_text,         // concat(T_i, T_j)
  pair_visual_text,  // concat(V_i ⊙ P(T_i), V_j ⊙ P(T_j)), P an affine T->D projection
};

/// How a training/evaluation triplet is embedded.
enum class Weighting {
  per_pair,        // w(a,p) embeds a and p; w(a,n) embeds a and n
  shared_triplet,  // one w(a,p,n) embeds all three
};

/// Where the mixing weights come from. Everything but `learned` is a baseline.
enum class WeightSource {
  learned,         // weight branch + softmax
  uniform,         // constant 1/M
  random,          // seeded uniform sample from the simplex, per pair
  fixed_disjoint,  // one-hot on the record's condition label; uniform when unlabelled
};

std::string to_string(BranchMode mode);
std::string to_string(Weighting weighting);
std::string to_string(WeightSource source);
BranchMode parse_branch_mode(std::string_view text);
Weighting parse_weighting(std::string_view text);
WeightSource parse_weight_source(std::string_view text);

/// One affine layer whose parameters live in a ParamSet.
struct DenseLayer {
  std::size_t weight = 0;
  std::size_t bias = 0;
  Activation activation = Activation::none;
};

struct MlpTrace {
  std::vector<Vector> inputs;
  std::vector<Vector> outputs;
};

class Mlp {
 public:
  std::vector<DenseLayer> layers;

  std::size_t input_width(const ParamSet& params) const;
  std::size_t output_width(const ParamSet& params) const;

  Vector forward(const ParamSet& params, std::span<const double> x, MlpTrace* trace = nullptr) const;
  /// Accumulates parameter gradients and returns the gradient wrt the input.
  Vector backward(ParamSet& params, const MlpTrace& trace, std::span<const double> grad_output) const;
};

struct ModelShape {
  std::size_t feature_dim = 0;  // F
  std::size_t embed_dim = 0;    // D
  std::size_t conditions = 1;   // M
  std::size_t text_dim = 0;     // T, 0 when items carry no text
  BranchMode mode = BranchMode::pair_visual;
  std::vector<std::size_t> encoder_hidden;  // rectifier layers before the final F->D affine
  std::vector<std::size_t> branch_hidden;   // rectifier layers before the final affine to M

  /// Two rectifier layers of width 2M.
  static std::vector<std::size_t> default_branch_hidden(std::size_t conditions);

  std::size_t branch_input_width() const;
  /// Throws ConfigError on an inconsistent shape.
  void validate() const;

  friend bool operator==(const ModelShape&, const ModelShape&) = default;
};

/// Encoder g, mask bank C (M x D), condition weight branch and the optional
/// text layers, all backed by a single ParamSet.
class SceModel {
 public:
  /// Parameters laid out but zero-valued; used by the checkpoint loader.
  explicit SceModel(ModelShape shape);

  /// Encoder and branch weights Glorot-uniform, biases zero, masks U[0.9, 1.1].
  static SceModel create(const ModelShape& shape, std::uint64_t seed);

  const ModelShape& shape() const noexcept { return shape_; }
  ParamSet& params() noexcept { return params_; }
  const ParamSet& params() const noexcept { return params_; }

  const Mlp& encoder() const noexcept { return encoder_; }
  const Mlp& branch() const noexcept { return branch_; }
  std::size_t masks_index() const noexcept { return masks_; }
  const Matrix& masks() const { return params_[masks_].value; }
  Matrix& masks() { return params_[masks_].value; }

  /// Present only in pair-visual-text mode (feeds the branch).
  const std::optional<DenseLayer>& text_projection() const noexcept { return text_projection_; }
  /// Present whenever T > 0 (embeds text into the general space for VSE).
  const std::optional<DenseLayer>& text_embedding() const noexcept { return text_embedding_; }

  WeightSource weight_source() const noexcept { return source_; }
  std::uint64_t random_seed() const noexcept { return random_seed_; }
  const std::vector<std::string>& condition_labels() const noexcept { return condition_labels_; }

  void set_weight_source(WeightSource source, std::uint64_t random_seed = 0);
  void set_condition_labels(std::vector<std::string> labels);
  void set_masks_trainable(bool trainable);

 private:
  DenseLayer add_layer(const std::string& prefix, std::size_t in, std::size_t out, Activation activation);

  ModelShape shape_;
  ParamSet params_;
  Mlp encoder_;
  Mlp branch_;
  std::size_t masks_ = 0;
  std::optional<DenseLayer> text_projection_;
  std::optional<DenseLayer> text_embedding_;
  WeightSource source_ = WeightSource::learned;
  std::uint64_t random_seed_ = 0;
  std::vector<std::string> condition_labels_;
};

/// Features of one item as seen by the model. `text` is empty when absent.
struct ItemInput {
  std::span<const double> visual;
  std::span<const double> text;
};

/// Inputs to the weight branch. Which fields must be filled depends on the
/// branch mode; see BranchMode.
struct BranchInput {
  std::vector<std::span<const double>> visual;
  std::vector<std::span<const double>> text;
};

Vector encode(const SceModel& model, std::span<const double> raw);
Matrix apply_masks(std::span<const double> general, const Matrix& masks);
/// Σ_j w_j · row_j(masked). `w` must lie on the simplex within 1e-6.
Vector compose_embedding(const Matrix& masked, std::span<const double> weights);
/// The learned branch: network forward followed by softmax.
Vector compute_condition_weights(const SceModel& model, const BranchInput& input);

/// Weights according to the model's WeightSource. `condition_label` is only
/// consulted by the fixed-disjoint source.
Vector resolve_condition_weights(const SceModel& model, const BranchInput& input,
                                 const std::optional<std::string>& condition_label = std::nullopt);

struct PairEmbedding {
  Vector first;
  Vector second;
  Vector weights;
};

PairEmbedding embed_pair(const SceModel& model, const ItemInput& first, const ItemInput& second,
                         const std::optional<std::string>& condition_label = std::nullopt);

/// With per-pair weighting `anchor_for_positive` and `anchor_for_negative`
/// differ; with shared-triplet weighting they are identical.
struct TripletEmbedding {
  Vector anchor_for_positive;
  Vector positive;
  Vector anchor_for_negative;
  Vector negative;
  Vector weights_positive;
  Vector weights_negative;
};

TripletEmbedding embed_triplet(const SceModel& model, const ItemInput& anchor, const ItemInput& positive,
                               const ItemInput& negative, Weighting weighting,
                               const std::optional<std::string>& condition_label = std::nullopt);

/// Each item's masked embedding under every condition, C_j ⊙ g(x).
Matrix condition_embeddings(const SceModel& model, std::span<const double> raw);

// Traced forward passes and their backward rules, used by the objective.

struct EncodeTrace {
  MlpTrace mlp;
  Vector general;
};

EncodeTrace encode_traced(const SceModel& model, std::span<const double> raw);
void encode_backward(SceModel& model, const EncodeTrace& trace, std::span<const double> grad_general);

struct WeightTrace {
  Vector weights;
  bool learned = false;
  MlpTrace branch;
  std::vector<Vector> projected_text;   // pair-visual-text only
  std::vector<MlpTrace> projection;     // pair-visual-text only
};

WeightTrace weights_traced(const SceModel& model, const BranchInput& input,
                           const std::optional<std::string>& condition_label);

/// Returns gradients with respect to each `input.visual` entry (empty vectors
/// when the branch does not read visual features). Non-learned sources
/// contribute nothing.
std::vector<Vector> weights_backward(SceModel& model, const WeightTrace& trace, const BranchInput& input,
                                     std::span<const double> grad_weights);

/// Backward of E = Σ_j w_j C_j ⊙ V. Accumulates the mask gradient and adds
/// into grad_general / grad_weights.
void compose_backward(SceModel& model, std::span<const double> general, std::span<const double> weights,
                      std::span<const double> grad_embedding, std::span<double> grad_general,
                      std::span<double> grad_weights);

/// Final embedding C-weighted by w, without materialising the M x D matrix.
Vector masked_mixture(const Matrix& masks, std::span<const double> general, std::span<const double> weights);

BranchInput make_branch_input(BranchMode mode, std::initializer_list<ItemInput> items);

}  // namespace sce
