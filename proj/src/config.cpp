#include "sce/config.hpp"

#include <cstdio>
#include <fstream>

#include "sce/error.hpp"

namespace sce {
namespace {

using nlohmann::json;

void reject_unknown(const json& given, const json& known, const std::string& where) {
  if (!given.is_object()) throw ConfigError((where.empty() ? "configuration" : where) + " must be a JSON object");
  for (const auto& [key, value] : given.items()) {
    const std::string path = where.empty() ? key : where + "." + key;
    if (!known.contains(key)) throw ConfigError("unknown configuration key '" + path + "'");
    if (known.at(key).is_object()) reject_unknown(value, known.at(key), path);
  }
}

template <typename T>
T field(const json& j, const char* key, const std::string& where = "") {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("configuration key '" + (where.empty() ? std::string(key) : where + "." + key) +
                      "' has the wrong type");
  }
}

}  // namespace

json to_json(const RunConfig& c) {
  const auto& t = c.train;
  json j;
  j["conditions"] = t.conditions;
  j["embed_dim"] = t.embed_dim;
  j["branch_mode"] = to_string(t.branch_mode);
  j["weighting"] = to_string(t.weighting);
  j["encoder_hidden"] = t.encoder_hidden;
  j["branch_hidden"] = t.branch_hidden ? json(*t.branch_hidden) : json(nullptr);
  j["margin"] = t.loss.margin;
  j["lambda_l1"] = t.loss.l1;
  j["lambda_l2"] = t.loss.l2;
  j["lambda_vse"] = t.loss.vse;
  j["lambda_sim"] = t.loss.sim;
  j["use_vse_sim"] = t.use_vse_sim;
  j["lr"] = t.adam.learning_rate;
  j["beta1"] = t.adam.beta1;
  j["beta2"] = t.adam.beta2;
  j["adam_eps"] = t.adam.epsilon;
  j["batch_size"] = t.batch_size;
  j["epochs"] = t.epochs;
  j["seed"] = t.seed;
  j["noise_fraction"] = t.noise_fraction;
  j["validation_fraction"] = t.validation_fraction;
  j["eval_every"] = t.eval_every;
  j["checkpoint"] = c.checkpoint;
  j["exclude_categories"] = c.exclude_categories;
  j["ablation_axis"] = c.ablation_axis;
  j["ablation_values"] = c.ablation_values;
  j["baseline_kind"] = c.baseline_kind;
  j["data"] = {{"items", c.data.items},
               {"train_triplets", c.data.train_triplets},
               {"test_triplets", c.data.test_triplets},
               {"outfits", c.data.outfits},
               {"fitb", c.data.fitb}};
  const auto& s = c.synthetic;
  j["synthetic"] = {{"conditions", s.conditions},
                    {"items", s.items},
                    {"feature_dim", s.feature_dim},
                    {"block_width", s.block_width},
                    {"latent_dim", s.latent_dim},
                    {"category_width", s.category_width},
                    {"types_per_family", s.types_per_family},
                    {"clusters", s.clusters},
                    {"cluster_spread", s.cluster_spread},
                    {"noise_scale", s.noise_scale},
                    {"triplets_per_condition", s.triplets_per_condition},
                    {"outfits", s.outfits},
                    {"outfit_size", s.outfit_size},
                    {"fitb_questions", s.fitb_questions},
                    {"fitb_candidates", s.fitb_candidates},
                    {"text_dim", s.text_dim},
                    {"seed", s.seed},
                    {"holdout_fraction", c.synthetic_holdout}};
  return j;
}

json default_config_json() { return to_json(RunConfig{}); }

RunConfig run_config_from_json(const json& given) {
  const json defaults = default_config_json();
  reject_unknown(given, defaults, "");
  json j = defaults;
  merge_json(j, given);

  RunConfig c;
  auto& t = c.train;
  t.conditions = field<std::size_t>(j, "conditions");
  t.embed_dim = field<std::size_t>(j, "embed_dim");
  t.branch_mode = parse_branch_mode(field<std::string>(j, "branch_mode"));
  t.weighting = parse_weighting(field<std::string>(j, "weighting"));
  t.encoder_hidden = field<std::vector<std::size_t>>(j, "encoder_hidden");
  if (!j.at("branch_hidden").is_null()) t.branch_hidden = field<std::vector<std::size_t>>(j, "branch_hidden");
  t.loss.margin = field<double>(j, "margin");
  t.loss.l1 = field<double>(j, "lambda_l1");
  t.loss.l2 = field<double>(j, "lambda_l2");
  t.loss.vse = field<double>(j, "lambda_vse");
  t.loss.sim = field<double>(j, "lambda_sim");
  t.use_vse_sim = field<bool>(j, "use_vse_sim");
  t.adam.learning_rate = field<double>(j, "lr");
  t.adam.beta1 = field<double>(j, "beta1");
  t.adam.beta2 = field<double>(j, "beta2");
  t.adam.epsilon = field<double>(j, "adam_eps");
  t.batch_size = field<std::size_t>(j, "batch_size");
  t.epochs = field<std::size_t>(j, "epochs");
  t.seed = field<std::uint64_t>(j, "seed");
  t.noise_fraction = field<double>(j, "noise_fraction");
  t.validation_fraction = field<double>(j, "validation_fraction");
  t.eval_every = field<std::size_t>(j, "eval_every");

  c.checkpoint = field<std::string>(j, "checkpoint");
  c.exclude_categories = field<std::vector<std::string>>(j, "exclude_categories");
  c.ablation_axis = field<std::string>(j, "ablation_axis");
  c.ablation_values = field<std::vector<double>>(j, "ablation_values");
  c.baseline_kind = field<std::string>(j, "baseline_kind");

  const json& d = j.at("data");
  c.data.items = field<std::string>(d, "items", "data");
  c.data.train_triplets = field<std::string>(d, "train_triplets", "data");
  c.data.test_triplets = field<std::string>(d, "test_triplets", "data");
  c.data.outfits = field<std::string>(d, "outfits", "data");
  c.data.fitb = field<std::string>(d, "fitb", "data");

  const json& s = j.at("synthetic");
  auto& spec = c.synthetic;
  spec.conditions = field<std::size_t>(s, "conditions", "synthetic");
  spec.items = field<std::size_t>(s, "items", "synthetic");
  spec.feature_dim = field<std::size_t>(s, "feature_dim", "synthetic");
  spec.block_width = field<std::size_t>(s, "block_width", "synthetic");
  spec.latent_dim = field<std::size_t>(s, "latent_dim", "synthetic");
  spec.category_width = field<std::size_t>(s, "category_width", "synthetic");
  spec.types_per_family = field<std::size_t>(s, "types_per_family", "synthetic");
  spec.clusters = field<std::size_t>(s, "clusters", "synthetic");
  spec.cluster_spread = field<double>(s, "cluster_spread", "synthetic");
  spec.noise_scale = field<double>(s, "noise_scale", "synthetic");
  spec.triplets_per_condition = field<std::size_t>(s, "triplets_per_condition", "synthetic");
  spec.outfits = field<std::size_t>(s, "outfits", "synthetic");
  spec.outfit_size = field<std::size_t>(s, "outfit_size", "synthetic");
  spec.fitb_questions = field<std::size_t>(s, "fitb_questions", "synthetic");
  spec.fitb_candidates = field<std::size_t>(s, "fitb_candidates", "synthetic");
  spec.text_dim = field<std::size_t>(s, "text_dim", "synthetic");
  spec.seed = field<std::uint64_t>(s, "seed", "synthetic");
  c.synthetic_holdout = field<double>(s, "holdout_fraction", "synthetic");
  return c;
}

void merge_json(json& base, const json& overrides) {
  for (const auto& [key, value] : overrides.items()) {
    if (value.is_object() && base.contains(key) && base[key].is_object()) {
      merge_json(base[key], value);
    } else {
      base[key] = value;
    }
  }
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open configuration file " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::string config_hash(const json& j) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : j.dump()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace sce
