#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "sce/data.hpp"
#include "sce/model.hpp"
#include "sce/training.hpp"

namespace sce {

/// Metric table plus run metadata. Serialised as tab-separated text:
///
///   # sce-report 1
///   # <key>\t<value>            (metadata, in insertion order)
///   setting\tmetric\tvalue
///   <setting>\t<metric>\t<value>
///
/// Values use shortest round-trip decimal form; the same run always yields
/// the same bytes.
class EvalReport {
 public:
  struct Row {
    std::string setting;
    std::string metric;
    double value = 0.0;

    friend bool operator==(const Row&, const Row&) = default;
  };

  void set_meta(const std::string& key, const std::string& value);
  /// Throws NumericError for a non-finite value.
  void add(const std::string& setting, const std::string& metric, double value);
  void append(const EvalReport& other, const std::string& setting_prefix = "");

  const std::vector<std::pair<std::string, std::string>>& metadata() const noexcept { return meta_; }
  const std::vector<Row>& rows() const noexcept { return rows_; }
  /// First value recorded for (setting, metric); throws InputError when absent.
  double value(const std::string& setting, const std::string& metric) const;

  void write(std::ostream& out) const;
  static EvalReport read(std::istream& in, const std::string& source = "<report>");

  friend bool operator==(const EvalReport&, const EvalReport&) = default;

 private:
  std::vector<std::pair<std::string, std::string>> meta_;
  std::vector<Row> rows_;
};

/// Fraction of triplets with d(E_a, E_p) >= d(E_a, E_n); ties are errors.
double triplet_error_rate(const SceModel& model, const ItemTable& items, const TripletSet& triplets,
                          Weighting weighting);

/// Mann-Whitney statistic by average ranks: P(pos > neg) + 0.5 P(pos == neg).
double roc_auc(std::span<const double> positive_scores, std::span<const double> negative_scores);

/// Negated mean final-embedding distance over all unordered pairs, each pair
/// embedded with its own weights. Higher means more compatible.
double outfit_score(const SceModel& model, const ItemTable& items, std::span<const std::size_t> outfit);

double compatibility_auc(const SceModel& model, const ItemTable& items, const OutfitSet& outfits);

/// A question is answered correctly when the candidate with the smallest
/// summed distance to the partial outfit is the answer; ties go to the lowest
/// candidate index.
double fitb_accuracy(const SceModel& model, const ItemTable& items, const FitbSet& questions);

/// Index chosen by the FITB rule for one question.
std::size_t fitb_choice(const SceModel& model, const ItemTable& items, const FitbQuestion& question);

enum class BaselineKind {
  single_embedding,  // M = 1, all-ones frozen mask
  uniform_average,   // w = 1/M
  random_weights,    // per-pair random simplex draw
  fixed_disjoint,    // frozen 0/1 blocks of width D/M, selected by condition label
};

std::string to_string(BaselineKind kind);
BaselineKind parse_baseline_kind(std::string_view text);

/// An untrained baseline model with the same dimensions as `config` would
/// give. fixed-disjoint takes its condition labels (sorted) from `triplets`.
SceModel make_baseline(BaselineKind kind, const TrainConfig& config, const ItemTable& items,
                       const TripletSet& triplets, std::uint64_t seed);

/// Assigns every triplet to argmax of its shared-triplet weights and returns
/// Σ_groups (majority label count) / N.
double condition_purity(const SceModel& model, const ItemTable& items, const TripletSet& triplets);

/// Purity of an explicit assignment; exposed for oracle tests.
double purity_of_assignment(std::span<const std::size_t> groups, std::span<const std::string> labels);

/// Candidates sorted by final-embedding distance to the query (ties by id),
/// truncated to k.
std::vector<std::size_t> top_k_compatible(const SceModel& model, const ItemTable& items, std::size_t query,
                                          std::span<const std::size_t> candidates, long k);

/// Triplet error, compatibility AUC and FITB accuracy for whichever of the
/// sets are nonempty.
EvalReport evaluate_all(const SceModel& model, const ItemTable& items, const TripletSet& test_triplets,
                        const OutfitSet& outfits, const FitbSet& fitb, Weighting weighting);

enum class AblationAxis { conditions, noise_fraction, train_size };

std::string to_string(AblationAxis axis);
AblationAxis parse_ablation_axis(std::string_view text);

struct AblationData {
  const ItemTable& items;
  const TripletSet& train;
  const TripletSet& test;
  const OutfitSet& outfits;
  const FitbSet& fitb;
};

/// One model per axis value, otherwise identical config and seed. Rows are
/// keyed "<axis>=<value>". train-size values are record counts taken as a
/// prefix of the deterministic training order.
EvalReport ablation_sweep(const TrainConfig& base, AblationAxis axis, std::span<const double> values,
                          const AblationData& data);

/// One line per (item, condition) in item order: id \t j \t comma-separated
/// C_j ⊙ g(x), shortest round-trip decimals.
void write_condition_embeddings(std::ostream& out, const SceModel& model, const ItemTable& items);
void export_condition_embeddings(const SceModel& model, const ItemTable& items, const std::filesystem::path& path);

struct ConditionEmbeddingRow {
  std::string id;
  std::size_t condition = 0;
  Vector values;
};

std::vector<ConditionEmbeddingRow> read_condition_embeddings(std::istream& in,
                                                             const std::string& source = "<embeddings>");

}  // namespace sce
