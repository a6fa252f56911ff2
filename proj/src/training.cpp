#include "sce/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "sce/error.hpp"
#include "sce/evaluation.hpp"
#include "sce/random.hpp"

namespace sce {

AdamState AdamState::for_params(const ParamSet& params) {
  AdamState state;
  for (const auto& p : params) {
    state.first_moment.emplace_back(p.value.rows(), p.value.cols());
    state.second_moment.emplace_back(p.value.rows(), p.value.cols());
  }
  return state;
}

void adam_step(ParamSet& params, AdamState& state, const AdamSettings& settings) {
  if (state.first_moment.size() != params.size()) state = AdamState::for_params(params);
  for (const auto& p : params) {
    if (!all_finite(p.grad.flat())) throw NumericError("non-finite gradient in parameter '" + p.name + "'");
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(settings.beta1, t);
  const double correction2 = 1.0 - std::pow(settings.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i];
    if (p.trainable) {
      auto value = p.value.flat();
      const auto grad = p.grad.flat();
      auto m = state.first_moment[i].flat();
      auto v = state.second_moment[i].flat();
      for (std::size_t k = 0; k < value.size(); ++k) {
        m[k] = settings.beta1 * m[k] + (1.0 - settings.beta1) * grad[k];
        v[k] = settings.beta2 * v[k] + (1.0 - settings.beta2) * grad[k] * grad[k];
        const double m_hat = m[k] / correction1;
        const double v_hat = v[k] / correction2;
        value[k] -= settings.learning_rate * m_hat / (std::sqrt(v_hat) + settings.epsilon);
      }
    }
    p.grad.fill(0.0);
  }
}

void TrainConfig::validate() const {
  if (conditions == 0) throw ConfigError("conditions (M) must be at least 1");
  if (embed_dim == 0) throw ConfigError("embed_dim (D) must be positive");
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (eval_every == 0) throw ConfigError("eval_every must be positive");
  if (!(adam.learning_rate > 0.0) || !std::isfinite(adam.learning_rate)) throw ConfigError("lr must be positive");
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0)) throw ConfigError("beta1 must lie in [0, 1)");
  if (!(adam.beta2 >= 0.0 && adam.beta2 < 1.0)) throw ConfigError("beta2 must lie in [0, 1)");
  if (!(adam.epsilon > 0.0)) throw ConfigError("adam_eps must be positive");
  if (!(noise_fraction >= 0.0 && noise_fraction <= 1.0)) throw ConfigError("noise_fraction must lie in [0, 1]");
  if (!(validation_fraction >= 0.0 && validation_fraction < 1.0)) {
    throw ConfigError("validation_fraction must lie in [0, 1)");
  }
  if ((weighting == Weighting::shared_triplet) != (branch_mode == BranchMode::triplet_visual)) {
    throw ConfigError("weighting shared-triplet goes with branch_mode triplet-visual, and only with it");
  }
  loss.validate();
}

ModelShape TrainConfig::model_shape(std::size_t feature_dim, std::size_t text_dim) const {
  ModelShape shape;
  shape.feature_dim = feature_dim;
  shape.embed_dim = embed_dim;
  shape.conditions = conditions;
  shape.text_dim = text_dim;
  shape.mode = branch_mode;
  shape.encoder_hidden = encoder_hidden;
  shape.branch_hidden = branch_hidden.value_or(ModelShape::default_branch_hidden(conditions));
  shape.validate();
  return shape;
}

ObjectiveOptions TrainConfig::objective() const { return ObjectiveOptions{loss, weighting, use_vse_sim}; }

SceModel initial_model(const TrainConfig& config, const ItemTable& items) {
  config.validate();
  return SceModel::create(config.model_shape(items.feature_dim(), items.text_dim()), config.seed);
}

TrainHistory train(SceModel& model, const ItemTable& items, const TripletSet& triplets, const TrainConfig& config,
                   const TripletSet& validation) {
  config.validate();
  TrainHistory history;
  if (config.epochs == 0) return history;
  if (triplets.empty()) throw InputError("train: no training triplets");
  if (model.shape().feature_dim != items.feature_dim()) {
    throw DimensionError("train: model expects F=" + std::to_string(model.shape().feature_dim) + ", items have F=" +
                         std::to_string(items.feature_dim()));
  }

  const TripletSet data = config.noise_fraction > 0.0
                              ? inject_noise(triplets, config.noise_fraction, items, derive_seed(config.seed, 0xa015e))
                              : triplets;
  const ObjectiveOptions objective = config.objective();
  AdamState adam = AdamState::for_params(model.params());
  model.params().zero_grad();

  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  TripletSet batch;
  batch.reserve(config.batch_size);

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    Rng rng(derive_seed(config.seed, 0xe0c0000 + epoch));
    std::shuffle(order.begin(), order.end(), rng);

    double loss_sum = 0.0;
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size, ++batch_index) {
      const std::size_t stop = std::min(order.size(), start + config.batch_size);
      batch.clear();
      for (std::size_t k = start; k < stop; ++k) batch.push_back(data[order[k]]);
      try {
        const auto terms = total_objective(model, items, batch, objective);
        adam_step(model.params(), adam, config.adam);
        loss_sum += terms.total * static_cast<double>(batch.size());
      } catch (const NumericError& e) {
        throw NumericError("epoch " + std::to_string(epoch) + " batch " + std::to_string(batch_index) + ": " + e.what());
      } catch (const InputError& e) {
        throw InputError("epoch " + std::to_string(epoch) + " batch " + std::to_string(batch_index) + ": " + e.what());
      }
    }
    for (const auto& p : model.params()) {
      if (!all_finite(p.value.flat())) {
        throw NumericError("epoch " + std::to_string(epoch) + ": parameter '" + p.name + "' became non-finite");
      }
    }

    EpochRecord record;
    record.epoch = epoch;
    record.train_loss = loss_sum / static_cast<double>(data.size());
    if (!validation.empty() && (epoch % config.eval_every == 0 || epoch == config.epochs)) {
      record.validation_error = triplet_error_rate(model, items, validation, config.weighting);
    }
    record.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    history.epochs.push_back(record);
  }
  return history;
}

std::vector<GradientSuiteCase> gradient_suite(const GradientSuiteSettings& settings) {
  if (settings.batch == 0 || settings.feature_dim == 0) throw ConfigError("gradient suite needs a nonempty batch");
  Rng rng(derive_seed(settings.seed, 0x9c4ec));
  ItemTable items;
  const std::size_t count = std::max<std::size_t>(3, 3 * settings.batch);
  for (std::size_t i = 0; i < count; ++i) {
    Item item;
    item.id = "g" + std::to_string(i);
    item.category = "c" + std::to_string(i % 3);
    for (std::size_t k = 0; k < settings.feature_dim; ++k) item.visual.push_back(gaussian(rng));
    for (std::size_t k = 0; k < settings.text_dim; ++k) item.text.push_back(gaussian(rng));
    items.add(std::move(item));
  }
  TripletSet batch;
  for (std::size_t b = 0; b < settings.batch; ++b) {
    batch.push_back({3 * b % count, (3 * b + 1) % count, (3 * b + 2) % count, std::nullopt});
  }

  std::vector<GradientSuiteCase> cases;
  for (auto mode : {BranchMode::pair_visual, BranchMode::triplet_visual, BranchMode::pair_text,
                    BranchMode::pair_visual_text}) {
    if (settings.text_dim == 0 && (mode == BranchMode::pair_text || mode == BranchMode::pair_visual_text)) continue;
    for (bool vse : {false, true}) {
      if (vse && settings.text_dim == 0) continue;
      TrainConfig config;
      config.conditions = settings.conditions;
      config.embed_dim = settings.embed_dim;
      config.branch_mode = mode;
      config.weighting = mode == BranchMode::triplet_visual ? Weighting::shared_triplet : Weighting::per_pair;
      config.encoder_hidden = settings.encoder_hidden;
      config.use_vse_sim = vse;
      // Penalties scaled up so their gradients are not lost under the floor.
      config.loss.l1 = 0.05;
      config.loss.l2 = 0.05;
      config.loss.vse = 0.5;
      config.loss.sim = 0.5;
      SceModel model = SceModel::create(config.model_shape(settings.feature_dim, settings.text_dim),
                                        derive_seed(settings.seed, cases.size()));
      // Random biases too: a zero bias behind a dead layer leaves a
      // pre-activation exactly on the rectifier kink.
      for (auto& p : model.params()) {
        if (p.name.size() > 5 && p.name.compare(p.name.size() - 5, 5, ".bias") == 0) {
          for (auto& x : p.value.flat()) x = gaussian(rng, 0.1);
        }
      }
      const ObjectiveOptions options = config.objective();
      auto loss = [&](ParamSet&) { return total_objective(model, items, batch, options).total; };
      model.params().zero_grad();
      cases.push_back({mode, vse, check_gradients(loss, model.params(), settings.eps, settings.tol)});
    }
  }
  return cases;
}

}  // namespace sce
