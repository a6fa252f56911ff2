#include <algorithm>
#include <cmath>
#include <numeric>

#include "sce/data.hpp"
#include "sce/error.hpp"
#include "sce/random.hpp"

namespace sce {
namespace {

constexpr std::size_t kMaxAttempts = 1000;

class Generator {
 public:
  explicit Generator(const SyntheticSpec& spec) : spec_(spec), rng_(derive_seed(spec.seed, 0x5e7)) {}

  SyntheticData run() {
    make_items();
    make_triplets();
    make_outfits();
    make_fitb();
    return std::move(data_);
  }

 private:
  std::size_t categories() const { return spec_.conditions * spec_.types_per_family; }
  std::size_t category_index(std::size_t family, std::size_t type) const {
    return family * spec_.types_per_family + type;
  }
  double block_distance(std::size_t a, std::size_t b, std::size_t block) const {
    const auto w = spec_.block_width;
    return euclidean_distance(data_.latent.row(a).subspan(block * w, w), data_.latent.row(b).subspan(block * w, w));
  }
  const std::vector<std::size_t>& bucket(std::size_t category, std::size_t cluster) const {
    return buckets_[category * spec_.clusters + cluster];
  }

  void make_items() {
    const std::size_t k = spec_.conditions;
    const std::size_t w = spec_.block_width;
    const std::size_t latent_width = k * w;
    const std::size_t code_width = spec_.category_width;
    const std::size_t z_width = latent_width + code_width;

    std::vector<Matrix> centres(k, Matrix(spec_.clusters, w));
    for (auto& c : centres) {
      for (auto& v : c.flat()) v = gaussian(rng_);
    }
    Matrix family_code(k, code_width);
    for (auto& v : family_code.flat()) v = gaussian(rng_);
    Matrix type_code(categories(), code_width);
    for (auto& v : type_code.flat()) v = 0.5 * gaussian(rng_);
    Matrix mixing(spec_.feature_dim, z_width);
    const double mix_scale = 1.0 / std::sqrt(static_cast<double>(z_width));
    for (auto& v : mixing.flat()) v = mix_scale * gaussian(rng_);

    data_.latent = Matrix(spec_.items, latent_width);
    cluster_of_.assign(spec_.items * k, 0);
    category_of_.assign(spec_.items, 0);
    data_.family.assign(spec_.items, 0);
    buckets_.assign(categories() * spec_.clusters, {});
    by_category_.assign(categories(), {});
    by_family_.assign(k, {});

    Rng text_rng(derive_seed(spec_.seed, 0x7e47));
    for (std::size_t i = 0; i < spec_.items; ++i) {
      const std::size_t cat = i % categories();
      const std::size_t fam = cat / spec_.types_per_family;
      category_of_[i] = cat;
      data_.family[i] = fam;
      by_category_[cat].push_back(i);
      by_family_[fam].push_back(i);

      Vector z(z_width, 0.0);
      for (std::size_t b = 0; b < k; ++b) {
        const std::size_t q = uniform_index(rng_, spec_.clusters);
        cluster_of_[i * k + b] = q;
        for (std::size_t d = 0; d < w; ++d) {
          const double v = centres[b](q, d) + spec_.cluster_spread * gaussian(rng_);
          data_.latent(i, b * w + d) = v;
          z[b * w + d] = v;
        }
      }
      buckets_[cat * spec_.clusters + cluster_of_[i * k + fam]].push_back(i);
      for (std::size_t d = 0; d < code_width; ++d) z[latent_width + d] = family_code(fam, d) + type_code(cat, d);

      Item item;
      char id[32];
      std::snprintf(id, sizeof(id), "i%05zu", i);
      item.id = id;
      item.category = synthetic_category(fam, cat % spec_.types_per_family);
      item.visual = affine_forward(z, mixing, Vector(spec_.feature_dim, 0.0), Activation::none);
      for (auto& v : item.visual) v += spec_.noise_scale * gaussian(rng_);
      if (spec_.text_dim > 0) {
        item.text = hash_text_features(
            {item.category, "family" + std::to_string(fam), "tone" + std::to_string(cluster_of_[i * k + fam])},
            spec_.text_dim);
      }
      data_.items.add(std::move(item));
    }
  }

  std::size_t pick(const std::vector<std::size_t>& pool) { return pool[uniform_index(rng_, pool.size())]; }

  void make_triplets() {
    const std::size_t k = spec_.conditions;
    for (std::size_t c = 0; c < k; ++c) {
      const std::string label = "c" + std::to_string(c);
      std::size_t made = 0;
      std::size_t failures = 0;
      while (made < spec_.triplets_per_condition) {
        if (failures > kMaxAttempts * spec_.triplets_per_condition) {
          throw ConfigError("synthetic spec too small to draw condition-" + std::to_string(c) + " triplets");
        }
        const std::size_t anchor = pick(by_family_[c]);
        const std::size_t q = cluster_of_[anchor * k + c];
        const std::size_t cat = category_index(c, uniform_index(rng_, spec_.types_per_family));
        const auto& same = bucket(cat, q);
        const std::size_t positive = same.empty() ? anchor : pick(same);
        const std::size_t negative = pick(by_category_[cat]);
        if (positive == anchor || negative == anchor || negative == positive ||
            cluster_of_[negative * k + c] == q || !(block_distance(anchor, positive, c) < block_distance(anchor, negative, c))) {
          ++failures;
          continue;
        }
        data_.triplets.push_back(Triplet{anchor, positive, negative, label});
        ++made;
      }
    }
  }

  // Items of distinct types of one family, all in the same block cluster.
  std::vector<std::size_t> compatible_outfit(std::size_t& family_out) {
    for (std::size_t attempt = 0; attempt < kMaxAttempts; ++attempt) {
      const std::size_t fam = uniform_index(rng_, spec_.conditions);
      const std::size_t q = uniform_index(rng_, spec_.clusters);
      std::vector<std::size_t> types(spec_.types_per_family);
      std::iota(types.begin(), types.end(), 0);
      std::shuffle(types.begin(), types.end(), rng_);
      std::vector<std::size_t> outfit;
      for (std::size_t s = 0; s < spec_.outfit_size; ++s) {
        const auto& pool = bucket(category_index(fam, types[s]), q);
        if (pool.empty()) break;
        outfit.push_back(pick(pool));
      }
      if (outfit.size() == spec_.outfit_size) {
        family_out = fam;
        return outfit;
      }
    }
    throw ConfigError("synthetic spec too small to assemble outfits");
  }

  void make_outfits() {
    for (std::size_t n = 0; n < spec_.outfits; ++n) {
      std::size_t fam = 0;
      Outfit o;
      o.id = "o" + std::to_string(n);
      o.items = compatible_outfit(fam);
      o.compatible = n % 2 == 0;
      if (!o.compatible) {
        for (auto& item : o.items) item = pick(by_category_[category_of_[item]]);
      }
      data_.outfits.push_back(std::move(o));
    }
  }

  void make_fitb() {
    const std::size_t k = spec_.conditions;
    for (std::size_t n = 0; n < spec_.fitb_questions; ++n) {
      for (std::size_t attempt = 0;; ++attempt) {
        if (attempt > kMaxAttempts) throw ConfigError("synthetic spec too small to assemble FITB questions");
        std::size_t fam = 0;
        auto outfit = compatible_outfit(fam);
        const std::size_t answer = outfit.back();
        outfit.pop_back();
        const std::size_t q = cluster_of_[answer * k + fam];
        const auto& pool = by_category_[category_of_[answer]];
        std::vector<std::size_t> candidates{answer};
        for (std::size_t tries = 0; candidates.size() < spec_.fitb_candidates && tries < kMaxAttempts; ++tries) {
          const std::size_t c = pick(pool);
          if (cluster_of_[c * k + fam] == q) continue;
          if (std::find(candidates.begin(), candidates.end(), c) != candidates.end()) continue;
          candidates.push_back(c);
        }
        if (candidates.size() < spec_.fitb_candidates) continue;
        std::shuffle(candidates.begin(), candidates.end(), rng_);
        FitbQuestion question;
        question.partial = std::move(outfit);
        question.answer =
            static_cast<std::size_t>(std::find(candidates.begin(), candidates.end(), answer) - candidates.begin());
        question.candidates = std::move(candidates);
        data_.fitb.push_back(std::move(question));
        break;
      }
    }
  }

  const SyntheticSpec& spec_;
  Rng rng_;
  SyntheticData data_;
  std::vector<std::size_t> cluster_of_;  // item * K + block
  std::vector<std::size_t> category_of_;
  std::vector<std::vector<std::size_t>> buckets_;  // (category, cluster in its family block)
  std::vector<std::vector<std::size_t>> by_category_;
  std::vector<std::vector<std::size_t>> by_family_;
};

}  // namespace

std::string synthetic_category(std::size_t family, std::size_t type) {
  return "f" + std::to_string(family) + "t" + std::to_string(type);
}

void SyntheticSpec::validate() const {
  if (conditions == 0) throw ConfigError("synthetic: conditions (K) must be at least 1");
  if (items == 0) throw ConfigError("synthetic: item count must be positive");
  if (feature_dim == 0 || block_width == 0) throw ConfigError("synthetic: feature_dim and block_width must be positive");
  if (latent_dim != 0 && latent_dim != conditions * block_width) {
    throw ConfigError("synthetic: latent_dim " + std::to_string(latent_dim) + " != conditions * block_width = " +
                      std::to_string(conditions * block_width));
  }
  if (types_per_family == 0) throw ConfigError("synthetic: types_per_family must be positive");
  if (clusters < 2) throw ConfigError("synthetic: need at least 2 clusters per block");
  if (items < conditions * types_per_family) throw ConfigError("synthetic: fewer items than categories");
  if (outfits > 0 || fitb_questions > 0) {
    if (outfit_size < 2 || outfit_size > types_per_family) {
      throw ConfigError("synthetic: outfit_size must lie in [2, types_per_family]");
    }
  }
  if (fitb_questions > 0 && fitb_candidates < 2) throw ConfigError("synthetic: fitb_candidates must be at least 2");
  if (!(noise_scale >= 0.0) || !(cluster_spread >= 0.0)) throw ConfigError("synthetic: scales must be nonnegative");
}

SyntheticData generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  return Generator(spec).run();
}

}  // namespace sce
