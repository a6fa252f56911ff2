#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "sce/math.hpp"
#include "sce/model.hpp"

namespace sce {

struct Item {
  std::string id;
  std::string category;
  Vector visual;
  Vector text;  // empty when the item has no description
};

/// Items keyed by unique id. All visual vectors share length F; all present
/// text vectors share length T.
class ItemTable {
 public:
  /// Throws ValidationError on a duplicate id and DimensionError on a ragged vector.
  std::size_t add(Item item);

  std::size_t size() const noexcept { return items_.size(); }
  bool empty() const noexcept { return items_.empty(); }
  const Item& operator[](std::size_t i) const { return items_.at(i); }

  std::optional<std::size_t> find(std::string_view id) const;
  /// Throws ReferenceError for an unknown id.
  std::size_t index_of(std::string_view id) const;

  std::size_t feature_dim() const noexcept { return feature_dim_; }
  std::size_t text_dim() const noexcept { return text_dim_; }
  bool all_have_text() const noexcept { return with_text_ == items_.size() && !items_.empty(); }

  ItemInput input(std::size_t i) const { return {items_.at(i).visual, items_.at(i).text}; }

  auto begin() const noexcept { return items_.begin(); }
  auto end() const noexcept { return items_.end(); }

 private:
  std::vector<Item> items_;
  std::unordered_map<std::string, std::size_t> by_id_;
  std::size_t feature_dim_ = 0;
  std::size_t text_dim_ = 0;
  std::size_t with_text_ = 0;
};

/// Indices refer to the companion ItemTable.
struct Triplet {
  std::size_t anchor = 0;
  std::size_t positive = 0;
  std::size_t negative = 0;
  std::optional<std::string> condition;

  friend bool operator==(const Triplet&, const Triplet&) = default;
};
using TripletSet = std::vector<Triplet>;

struct Outfit {
  std::string id;
  std::vector<std::size_t> items;
  bool compatible = true;

  friend bool operator==(const Outfit&, const Outfit&) = default;
};
using OutfitSet = std::vector<Outfit>;

struct FitbQuestion {
  std::vector<std::size_t> partial;
  std::vector<std::size_t> candidates;
  std::size_t answer = 0;

  friend bool operator==(const FitbQuestion&, const FitbQuestion&) = default;
};
using FitbSet = std::vector<FitbQuestion>;

// Loaders. `source` names the stream in error messages. Every parse failure
// throws ParseError carrying the offending line number.

ItemTable read_feature_table(std::istream& in, const std::string& source = "<features>");
TripletSet read_triplets(std::istream& in, const ItemTable& items, const std::string& source = "<triplets>");
OutfitSet read_outfits(std::istream& in, const ItemTable& items, const std::string& source = "<outfits>");
FitbSet read_fitb(std::istream& in, const ItemTable& items, const std::string& source = "<fitb>");

ItemTable load_feature_table(const std::filesystem::path& path);
TripletSet load_triplets(const std::filesystem::path& path, const ItemTable& items);
OutfitSet load_outfits(const std::filesystem::path& path, const ItemTable& items);
FitbSet load_fitb(const std::filesystem::path& path, const ItemTable& items);

void write_feature_table(std::ostream& out, const ItemTable& items);
void write_triplets(std::ostream& out, const TripletSet& triplets, const ItemTable& items);
void write_outfits(std::ostream& out, const OutfitSet& outfits, const ItemTable& items);
void write_fitb(std::ostream& out, const FitbSet& questions, const ItemTable& items);

/// Shortest decimal form that parses back to the same double.
std::string format_double(double value);
/// Strict full-string parse; nullopt on garbage, overflow or non-finite values.
std::optional<double> parse_double(std::string_view text);

/// Replaces exactly floor(p * N) uniformly chosen records by uniformly random
/// triplets of three distinct items. A replaced record keeps its slot's
/// condition label, as a random triplet would inside a per-condition file.
TripletSet inject_noise(const TripletSet& triplets, double fraction, const ItemTable& items, std::uint64_t seed);

/// Deterministic shuffle followed by a split; the held-out part gets
/// round(fraction * N) records.
std::pair<TripletSet, TripletSet> split_triplets(const TripletSet& triplets, double holdout_fraction,
                                                 std::uint64_t seed);

struct CategoryFilterResult {
  TripletSet train_triplets;
  FitbSet train_fitb;
  FitbSet eval_fitb;  // questions whose candidates all lie in excluded categories
};

CategoryFilterResult filter_categories(const ItemTable& items, const TripletSet& triplets, const FitbSet& fitb,
                                       const std::set<std::string>& excluded);

/// Signed feature hashing of a bag of tokens into T buckets, L2-normalised
/// when nonzero. Token order does not matter.
Vector hash_text_features(const std::vector<std::string>& tokens, std::size_t dim);

/// Desk-scale stand-in for multi-condition similarity data.
///
/// Every item carries K latent blocks (one per condition) plus a category
/// code. Categories are grouped into K families; family c's items are
/// compared under condition c. In block c, items of family c are drawn around
/// one of `clusters` centres, so a condition-c triplet has its positive in the
/// anchor's block-c cluster and its negative outside it (strictly farther in
/// block c, enforced by rejection). Raw features are a fixed random linear mix
/// of the latent vector plus Gaussian noise of `noise_scale`.
struct SyntheticSpec {
  std::size_t conditions = 4;           // K
  std::size_t items = 2400;
  std::size_t feature_dim = 48;         // F
  std::size_t block_width = 4;          // latent width per condition
  std::size_t latent_dim = 0;           // 0 means K * block_width; otherwise must equal it
  std::size_t category_width = 8;       // width of the category code appended to the latent
  std::size_t types_per_family = 3;     // categories per family
  std::size_t clusters = 6;             // centres per block
  double cluster_spread = 0.25;         // within-cluster stddev, relative to unit-variance centres
  double noise_scale = 0.05;
  std::size_t triplets_per_condition = 12000;
  std::size_t outfits = 600;            // half compatible, half not
  std::size_t outfit_size = 3;
  std::size_t fitb_questions = 600;
  std::size_t fitb_candidates = 4;
  std::size_t text_dim = 0;             // 0: no text features
  std::uint64_t seed = 1;

  void validate() const;
};

struct SyntheticData {
  ItemTable items;
  TripletSet triplets;  // labelled "c0".."c{K-1}"
  OutfitSet outfits;
  FitbSet fitb;
  Matrix latent;  // items x (K * block_width); block c occupies columns [c*w, (c+1)*w)
  std::vector<std::size_t> family;  // per item
};

SyntheticData generate_synthetic(const SyntheticSpec& spec);

/// Category name used by the generator: "f{family}t{type}".
std::string synthetic_category(std::size_t family, std::size_t type);

}  // namespace sce
