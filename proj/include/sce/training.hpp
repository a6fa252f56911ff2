#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "sce/data.hpp"
#include "sce/losses.hpp"
#include "sce/model.hpp"

namespace sce {

struct AdamSettings {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  std::vector<Matrix> first_moment;
  std::vector<Matrix> second_moment;
  std::uint64_t step = 0;

  static AdamState for_params(const ParamSet& params);
};

/// Bias-corrected Adam update of every trainable parameter, then zeroes all
/// gradients. Throws NumericError naming the first non-finite gradient.
void adam_step(ParamSet& params, AdamState& state, const AdamSettings& settings);

struct TrainConfig {
  std::size_t conditions = 4;  // M
  std::size_t embed_dim = 64;  // D
  BranchMode branch_mode = BranchMode::pair_visual;
  Weighting weighting = Weighting::per_pair;
  std::vector<std::size_t> encoder_hidden;
  std::optional<std::vector<std::size_t>> branch_hidden;  // unset: two layers of width 2M
  LossWeights loss;
  bool use_vse_sim = false;
  AdamSettings adam;
  std::size_t batch_size = 64;
  std::size_t epochs = 30;
  std::uint64_t seed = 1;
  double noise_fraction = 0.0;
  double validation_fraction = 0.1;  // held out of the training triplets by the CLI
  std::size_t eval_every = 1;        // epochs between validation snapshots

  /// Throws ConfigError on out-of-range fields.
  void validate() const;
  ModelShape model_shape(std::size_t feature_dim, std::size_t text_dim) const;
  ObjectiveOptions objective() const;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  std::optional<double> validation_error;
  double seconds = 0.0;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
};

/// A freshly initialised model sized for `items`, seeded from config.seed.
SceModel initial_model(const TrainConfig& config, const ItemTable& items);

/// Shuffled minibatch passes over `triplets`, one Adam step per batch.
/// Noise (config.noise_fraction) is injected once up front. When `validation`
/// is nonempty its triplet error is recorded every `eval_every` epochs.
/// Deterministic given (config.seed, data, initial model).
TrainHistory train(SceModel& model, const ItemTable& items, const TripletSet& triplets, const TrainConfig& config,
                   const TripletSet& validation = {});

struct GradientSuiteSettings {
  std::size_t feature_dim = 8;
  std::size_t embed_dim = 6;
  std::size_t conditions = 3;
  std::size_t text_dim = 5;
  std::size_t batch = 4;
  std::vector<std::size_t> encoder_hidden;
  double eps = 1e-5;
  double tol = 1e-4;
  std::uint64_t seed = 1;
};

struct GradientSuiteCase {
  BranchMode mode = BranchMode::pair_visual;
  bool vse_sim = false;
  GradientReport report;
};

/// Finite-difference check of the full objective on a random model and a
/// random batch, for every branch mode with and without the VSE/Sim terms.
/// Triplet-visual runs with shared-triplet weighting, the rest per pair.
std::vector<GradientSuiteCase> gradient_suite(const GradientSuiteSettings& settings);

}  // namespace sce
