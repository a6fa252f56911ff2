#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "sce/data.hpp"
#include "sce/training.hpp"

namespace sce {

struct DataPaths {
  std::string items;
  std::string train_triplets;
  std::string test_triplets;
  std::string outfits;
  std::string fitb;
};

/// Everything a CLI run reads from its configuration file.
struct RunConfig {
  TrainConfig train;
  DataPaths data;
  SyntheticSpec synthetic;
  double synthetic_holdout = 0.1;  // share of generated triplets written as the test split
  std::string checkpoint;
  std::vector<std::string> exclude_categories;
  std::string ablation_axis;
  std::vector<double> ablation_values;
  std::string baseline_kind;
};

/// JSON with every field at its default value. Keys:
///   top level: TrainConfig fields (conditions, embed_dim, branch_mode,
///   weighting, encoder_hidden, branch_hidden, margin, lambda_l1, lambda_l2,
///   lambda_vse, lambda_sim, use_vse_sim, lr, beta1, beta2, adam_eps,
///   batch_size, epochs, seed, noise_fraction, validation_fraction,
///   eval_every), checkpoint, exclude_categories, ablation_axis,
///   ablation_values, baseline_kind;
///   "data": items, train_triplets, test_triplets, outfits, fitb;
///   "synthetic": SyntheticSpec fields plus holdout_fraction.
nlohmann::json default_config_json();

nlohmann::json to_json(const RunConfig& config);

/// Strict: unknown keys and wrongly typed values throw ConfigError.
RunConfig run_config_from_json(const nlohmann::json& json);

/// Recursively overlays `overrides` onto `base` (objects merge, everything
/// else replaces).
void merge_json(nlohmann::json& base, const nlohmann::json& overrides);

nlohmann::json read_json_file(const std::filesystem::path& path);

/// FNV-1a of the canonical dump, as 16 hex digits.
std::string config_hash(const nlohmann::json& json);

}  // namespace sce
