#include "sce/cli.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <memory>
#include <ostream>
#include <set>

#include <CLI11.hpp>

#include "sce/checkpoint.hpp"
#include "sce/data.hpp"
#include "sce/evaluation.hpp"
#include "sce/random.hpp"
#include "sce/training.hpp"

namespace sce::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr const char* kExitCodes =
    "Exit codes:\n"
    "  0  success\n"
    "  1  internal error\n"
    "  2  usage error (unknown verb or flag, missing or conflicting options)\n"
    "  3  input error (malformed file, unknown id, bad config, checkpoint mismatch)\n"
    "  4  numeric error (non-finite values, failed gradient check)\n"
    "  5  i/o error (unreadable input file, unwritable output)\n";

// Flag values are collected here and copied into the override JSON only when
// the flag was given, so config-file values survive absent flags.
class FlagBinder {
 public:
  template <typename T>
  CLI::Option* bind(CLI::App* app, const std::string& flag, const std::string& key, const std::string& help) {
    auto storage = std::make_shared<T>();
    CLI::Option* opt = app->add_option(flag, *storage, help);
    if constexpr (!std::is_same_v<T, std::string> && requires(T t) { t.begin(); }) opt->delimiter(',');
    appliers_.push_back([opt, storage, key](json& j) {
      if (opt->count() > 0) j[json::json_pointer(key)] = *storage;
    });
    return opt;
  }

  void switch_pair(CLI::App* app, const std::string& on, const std::string& off, const std::string& key,
                   const std::string& help) {
    CLI::Option* yes = app->add_flag(on)->description(help);
    CLI::Option* no = app->add_flag(off)->description("Disable: " + help);
    yes->excludes(no);
    appliers_.push_back([yes, no, key](json& j) {
      if (yes->count() > 0) j[json::json_pointer(key)] = true;
      if (no->count() > 0) j[json::json_pointer(key)] = false;
    });
  }

  json overrides() const {
    json j = json::object();
    for (const auto& apply : appliers_) apply(j);
    return j;
  }

 private:
  std::vector<std::function<void(json&)>> appliers_;
};

const std::vector<std::string> kBranchModes = {"pair-visual", "triplet-visual", "pair-text", "pair-visual-text"};
const std::vector<std::string> kWeightings = {"per-pair", "shared-triplet"};
const std::vector<std::string> kBaselines = {"single", "uniform", "random", "fixed-disjoint"};
const std::vector<std::string> kAxes = {"M", "noise", "size"};

void add_training_flags(FlagBinder& b, CLI::App* app) {
  b.bind<std::uint64_t>(app, "--seed", "/seed", "Training seed");
  b.bind<std::size_t>(app, "--epochs", "/epochs", "Training epochs");
  b.bind<double>(app, "--lr", "/lr", "Adam learning rate");
  b.bind<std::size_t>(app, "--batch-size", "/batch_size", "Minibatch size");
  b.bind<std::size_t>(app, "--conditions", "/conditions", "Number of condition masks M");
  b.bind<std::size_t>(app, "--embed-dim", "/embed_dim", "Embedding width D");
  b.bind<std::string>(app, "--branch-mode", "/branch_mode", "Weight branch input")->check(CLI::IsMember(kBranchModes));
  b.bind<std::string>(app, "--weighting", "/weighting", "Weighting protocol")->check(CLI::IsMember(kWeightings));
  b.bind<std::vector<std::size_t>>(app, "--encoder-hidden", "/encoder_hidden", "Encoder hidden widths, comma separated");
  b.bind<std::vector<std::size_t>>(app, "--branch-hidden", "/branch_hidden", "Branch hidden widths, comma separated");
  b.bind<double>(app, "--margin", "/margin", "Triplet margin");
  b.bind<double>(app, "--lambda-l1", "/lambda_l1", "Mask L1 weight");
  b.bind<double>(app, "--lambda-l2", "/lambda_l2", "Embedding L2 weight");
  b.bind<double>(app, "--lambda-vse", "/lambda_vse", "Visual-semantic loss weight");
  b.bind<double>(app, "--lambda-sim", "/lambda_sim", "Text-similarity loss weight");
  b.switch_pair(app, "--use-vse-sim", "--no-vse-sim", "/use_vse_sim", "VSE and Sim loss terms");
  b.bind<double>(app, "--noise", "/noise_fraction", "Fraction of training triplets replaced by random ones");
  b.bind<double>(app, "--validation-fraction", "/validation_fraction", "Share of training triplets held out");
  b.bind<std::size_t>(app, "--eval-every", "/eval_every", "Epochs between validation snapshots");
}

void add_data_flags(FlagBinder& b, CLI::App* app) {
  b.bind<std::string>(app, "--items", "/data/items", "Feature table");
  b.bind<std::string>(app, "--train-triplets", "/data/train_triplets", "Training triplets");
  b.bind<std::string>(app, "--test-triplets", "/data/test_triplets", "Held-out triplets");
  b.bind<std::string>(app, "--outfits", "/data/outfits", "Outfit compatibility file");
  b.bind<std::string>(app, "--fitb", "/data/fitb", "Fill-in-the-blank questions");
  b.bind<std::vector<std::string>>(app, "--exclude-category", "/exclude_categories",
                                   "Categories withheld from training, comma separated");
}

Verb verb_of(const std::string& name) {
  static const std::pair<const char*, Verb> table[] = {
      {"gen-synthetic", Verb::gen_synthetic}, {"train", Verb::train},
      {"eval", Verb::eval},                   {"ablate", Verb::ablate},
      {"baseline", Verb::baseline},           {"export-embeddings", Verb::export_embeddings},
      {"check-grads", Verb::check_grads}};
  for (const auto& [n, v] : table) {
    if (name == n) return v;
  }
  throw UsageError("unknown verb '" + name + "'");
}

bool is_path_key(const std::string& key) { return key == "checkpoint"; }

// Relative paths inside a config file are taken relative to that file.
void anchor_paths(json& j, const fs::path& base) {
  auto fix = [&](json& value) {
    if (!value.is_string()) return;
    const std::string s = value.get<std::string>();
    if (s.empty()) return;
    fs::path p(s);
    if (p.is_relative()) p = base / p;
    value = fs::absolute(p).lexically_normal().string();
  };
  for (auto& [key, value] : j.items()) {
    if (is_path_key(key)) fix(value);
  }
  if (j.contains("data") && j["data"].is_object()) {
    for (auto& [key, value] : j["data"].items()) fix(value);
  }
}

bool has_key(const json& j, const char* pointer) { return j.contains(json::json_pointer(pointer)); }

}  // namespace

std::string to_string(Verb verb) {
  switch (verb) {
    case Verb::gen_synthetic: return "gen-synthetic";
    case Verb::train: return "train";
    case Verb::eval: return "eval";
    case Verb::ablate: return "ablate";
    case Verb::baseline: return "baseline";
    case Verb::export_embeddings: return "export-embeddings";
    case Verb::check_grads: return "check-grads";
  }
  return "?";
}

Command parse_args(const std::vector<std::string>& args) {
  CLI::App app{"Similarity condition embedding networks: data generation, training and evaluation.", "sce"};
  app.require_subcommand(1, 1);
  app.footer(kExitCodes);

  FlagBinder binder;
  std::string config_path;
  std::string out_dir;
  GradientSuiteSettings grad;

  auto common = [&](CLI::App* sub, bool config_required) {
    auto* c = sub->add_option("--config", config_path, "JSON configuration file; flags override its values");
    if (config_required) c->required();
    sub->add_option("--out", out_dir, "Output directory")->required();
  };

  auto* gen = app.add_subcommand("gen-synthetic", "Write a synthetic multi-condition dataset");
  common(gen, false);
  binder.bind<std::uint64_t>(gen, "--seed", "/synthetic/seed", "Generator seed");
  binder.bind<std::size_t>(gen, "--conditions", "/synthetic/conditions", "Latent conditions K");
  binder.bind<std::size_t>(gen, "--num-items", "/synthetic/items", "Number of items");
  binder.bind<std::size_t>(gen, "--feature-dim", "/synthetic/feature_dim", "Feature width F");
  binder.bind<std::size_t>(gen, "--triplets-per-condition", "/synthetic/triplets_per_condition", "Triplets per condition");
  binder.bind<std::size_t>(gen, "--num-outfits", "/synthetic/outfits", "Number of outfits");
  binder.bind<std::size_t>(gen, "--num-fitb", "/synthetic/fitb_questions", "Number of FITB questions");
  binder.bind<std::size_t>(gen, "--text-dim", "/synthetic/text_dim", "Hashed text width T (0: none)");
  binder.bind<double>(gen, "--holdout", "/synthetic/holdout_fraction", "Share of triplets written as the test split");

  auto* train_cmd = app.add_subcommand("train", "Train a model; writes model.ckpt, history.tsv and report.tsv");
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint; writes report.tsv");
  auto* ablate_cmd = app.add_subcommand("ablate", "Train one model per axis value; writes ablation.tsv");
  auto* baseline_cmd = app.add_subcommand("baseline", "Train and evaluate a baseline; writes baseline.ckpt and report.tsv");
  auto* export_cmd = app.add_subcommand("export-embeddings", "Write per-condition embeddings of every item");
  for (auto* sub : {train_cmd, eval_cmd, ablate_cmd, baseline_cmd, export_cmd}) {
    common(sub, true);
    add_training_flags(binder, sub);
    add_data_flags(binder, sub);
  }
  for (auto* sub : {eval_cmd, export_cmd}) binder.bind<std::string>(sub, "--checkpoint", "/checkpoint", "Model checkpoint");
  binder.bind<std::string>(ablate_cmd, "--axis", "/ablation_axis", "M, noise or size")->check(CLI::IsMember(kAxes));
  binder.bind<std::vector<double>>(ablate_cmd, "--values", "/ablation_values", "Axis values, comma separated");
  binder.bind<std::string>(baseline_cmd, "--kind", "/baseline_kind", "single, uniform, random or fixed-disjoint")
      ->check(CLI::IsMember(kBaselines));

  auto* grads = app.add_subcommand("check-grads", "Finite-difference check of every parameter in every branch mode");
  common(grads, false);
  grads->add_option("--seed", grad.seed, "Model and batch seed");
  grads->add_option("--feature-dim", grad.feature_dim, "Feature width F");
  grads->add_option("--embed-dim", grad.embed_dim, "Embedding width D");
  grads->add_option("--conditions", grad.conditions, "Number of masks M");
  grads->add_option("--text-dim", grad.text_dim, "Text width T");
  grads->add_option("--batch", grad.batch, "Triplets per batch");
  grads->add_option("--encoder-hidden", grad.encoder_hidden, "Encoder hidden widths")->delimiter(',');
  grads->add_option("--eps", grad.eps, "Finite-difference step");
  grads->add_option("--tol", grad.tol, "Maximum relative error");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    const auto parsed = app.get_subcommands();
    throw HelpRequested(parsed.empty() ? app.help() : parsed.front()->help());
  } catch (const CLI::CallForAllHelp&) {
    throw HelpRequested(app.help("", CLI::AppFormatMode::All));
  } catch (const CLI::ParseError& e) {
    throw UsageError(e.what());
  }

  Command command;
  command.verb = verb_of(app.get_subcommands().front()->get_name());
  command.config_path = config_path;
  command.out_dir = out_dir;
  command.overrides = binder.overrides();
  command.grad = grad;

  json file = json::object();
  if (!config_path.empty()) {
    if (!fs::is_regular_file(config_path)) throw UsageError("config file not found: " + config_path);
    file = read_json_file(config_path);
    if (!file.is_object()) throw ConfigError(config_path + ": configuration must be a JSON object");
    anchor_paths(file, fs::path(config_path).parent_path());
  }
  json flags = command.overrides;
  anchor_paths(flags, fs::current_path());
  merge_json(file, flags);
  command.config = run_config_from_json(file);

  const auto& o = command.overrides;
  const auto& t = command.config.train;
  const bool triplet_mode = t.branch_mode == BranchMode::triplet_visual;
  if ((has_key(o, "/branch_mode") || has_key(o, "/weighting")) &&
      triplet_mode != (t.weighting == Weighting::shared_triplet)) {
    throw UsageError("conflicting options: branch mode " + sce::to_string(t.branch_mode) + " with weighting " +
                     sce::to_string(t.weighting) + " (shared-triplet goes with triplet-visual only)");
  }
  if (command.verb == Verb::ablate) {
    const auto& axis = command.config.ablation_axis;
    if (axis.empty()) throw UsageError("ablate: missing ablation axis (--axis or \"ablation_axis\")");
    if (command.config.ablation_values.empty()) {
      throw UsageError("ablate: missing ablation values (--values or \"ablation_values\")");
    }
    if ((axis == "M" && has_key(o, "/conditions")) || (axis == "noise" && has_key(o, "/noise_fraction"))) {
      throw UsageError("conflicting options: --axis " + axis + " sweeps the value also set by flag");
    }
  }
  if ((command.verb == Verb::eval || command.verb == Verb::export_embeddings) && command.config.checkpoint.empty()) {
    throw UsageError(to_string(command.verb) + ": missing checkpoint (--checkpoint or \"checkpoint\")");
  }
  if (command.verb == Verb::baseline && command.config.baseline_kind.empty()) {
    throw UsageError("baseline: missing baseline kind (--kind or \"baseline_kind\")");
  }
  return command;
}

namespace {

struct LoadedData {
  ItemTable items;
  TripletSet train;
  TripletSet test;
  OutfitSet outfits;
  FitbSet fitb;
  TripletSet seen_train;  // train with excluded categories removed
  FitbSet seen_fitb;
  FitbSet unseen_fitb;
};

LoadedData load_data(const RunConfig& config, bool need_train) {
  const auto& paths = config.data;
  if (paths.items.empty()) throw ConfigError("data.items is not set");
  LoadedData d;
  d.items = load_feature_table(paths.items);
  if (need_train) {
    if (paths.train_triplets.empty()) throw ConfigError("data.train_triplets is not set");
    d.train = load_triplets(paths.train_triplets, d.items);
  }
  if (!paths.test_triplets.empty()) d.test = load_triplets(paths.test_triplets, d.items);
  if (!paths.outfits.empty()) d.outfits = load_outfits(paths.outfits, d.items);
  if (!paths.fitb.empty()) d.fitb = load_fitb(paths.fitb, d.items);
  const std::set<std::string> excluded(config.exclude_categories.begin(), config.exclude_categories.end());
  auto filtered = filter_categories(d.items, d.train, d.fitb, excluded);
  d.seen_train = std::move(filtered.train_triplets);
  d.seen_fitb = std::move(filtered.train_fitb);
  d.unseen_fitb = std::move(filtered.eval_fitb);
  return d;
}

void write_file(const fs::path& path, const std::function<void(std::ostream&)>& body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  body(out);
  out.flush();
  if (!out) throw IoError("write failed: " + path.string());
}

void write_report(const fs::path& path, const EvalReport& report) {
  write_file(path, [&](std::ostream& out) { report.write(out); });
}

EvalReport base_report(const Command& command, const json& effective) {
  EvalReport report;
  report.set_meta("verb", to_string(command.verb));
  report.set_meta("config_hash", config_hash(effective));
  report.set_meta("seed", std::to_string(command.config.train.seed));
  if (!command.config.data.items.empty()) {
    report.set_meta("items", fs::path(command.config.data.items).filename().string());
  }
  return report;
}

double mean_chance(const FitbSet& questions) {
  double sum = 0.0;
  for (const auto& q : questions) sum += 1.0 / static_cast<double>(q.candidates.size());
  return questions.empty() ? 0.0 : sum / static_cast<double>(questions.size());
}

void evaluate_into(EvalReport& report, const SceModel& model, const LoadedData& d, Weighting weighting) {
  report.append(evaluate_all(model, d.items, d.test, d.outfits, d.fitb, weighting));
  const bool labelled = !d.test.empty() && std::all_of(d.test.begin(), d.test.end(),
                                                       [](const Triplet& t) { return t.condition.has_value(); });
  if (model.shape().mode == BranchMode::triplet_visual && labelled) {
    report.add("-", "condition_purity", condition_purity(model, d.items, d.test));
  }
  if (!d.unseen_fitb.empty()) {
    report.add("unseen", "fitb_accuracy", fitb_accuracy(model, d.items, d.unseen_fitb));
    report.add("unseen", "fitb_chance", mean_chance(d.unseen_fitb));
    report.add("unseen", "questions", static_cast<double>(d.unseen_fitb.size()));
  }
}

// Splits validation triplets off the (category-filtered) training set.
std::pair<TripletSet, TripletSet> fit_split(const LoadedData& d, const TrainConfig& config) {
  if (config.validation_fraction <= 0.0) return {d.seen_train, {}};
  return split_triplets(d.seen_train, config.validation_fraction, derive_seed(config.seed, 0x5a11d));
}

void log_history(std::ostream& log, const TrainHistory& history, EvalReport& report) {
  for (const auto& e : history.epochs) {
    const std::string setting = "epoch=" + std::to_string(e.epoch);
    report.add(setting, "train_loss", e.train_loss);
    log << "epoch " << e.epoch << " loss " << format_double(e.train_loss);
    if (e.validation_error) {
      report.add(setting, "validation_error", *e.validation_error);
      log << " validation_error " << format_double(*e.validation_error);
    }
    log << " (" << format_double(std::round(e.seconds * 100.0) / 100.0) << " s)\n";
  }
}

void log_rows(std::ostream& log, const EvalReport& report) {
  for (const auto& row : report.rows()) {
    if (row.setting.rfind("epoch=", 0) == 0) continue;
    log << row.setting << '\t' << row.metric << '\t' << format_double(row.value) << '\n';
  }
}

void run_gen_synthetic(const Command& command, std::ostream& log) {
  const auto& cfg = command.config;
  const SyntheticData data = generate_synthetic(cfg.synthetic);
  auto [train, test] = split_triplets(data.triplets, cfg.synthetic_holdout, derive_seed(cfg.synthetic.seed, 0x4e1d));
  const fs::path dir = command.out_dir;
  write_file(dir / "items.tsv", [&](std::ostream& o) { write_feature_table(o, data.items); });
  write_file(dir / "train_triplets.txt", [&](std::ostream& o) { write_triplets(o, train, data.items); });
  write_file(dir / "test_triplets.txt", [&](std::ostream& o) { write_triplets(o, test, data.items); });
  write_file(dir / "outfits.txt", [&](std::ostream& o) { write_outfits(o, data.outfits, data.items); });
  write_file(dir / "fitb.txt", [&](std::ostream& o) { write_fitb(o, data.fitb, data.items); });
  log << "wrote " << data.items.size() << " items, " << train.size() << " train and " << test.size()
      << " test triplets, " << data.outfits.size() << " outfits, " << data.fitb.size() << " FITB questions to "
      << dir.string() << '\n';
}

void run_train(const Command& command, const json& effective, std::ostream& log) {
  const auto& cfg = command.config;
  const LoadedData d = load_data(cfg, true);
  auto [fit, validation] = fit_split(d, cfg.train);
  SceModel model = initial_model(cfg.train, d.items);
  log << "training on " << fit.size() << " triplets (" << validation.size() << " validation)\n";
  const TrainHistory history = train(model, d.items, fit, cfg.train, validation);
  EvalReport hist = base_report(command, effective);
  log_history(log, history, hist);
  write_report(command.out_dir / "history.tsv", hist);
  save_checkpoint(model, command.out_dir / "model.ckpt");
  EvalReport report = base_report(command, effective);
  evaluate_into(report, model, d, cfg.train.weighting);
  write_report(command.out_dir / "report.tsv", report);
  log_rows(log, report);
}

void run_eval(const Command& command, const json& effective, std::ostream& log) {
  const auto& cfg = command.config;
  const LoadedData d = load_data(cfg, false);
  cfg.train.validate();
  const SceModel model = load_checkpoint(cfg.checkpoint);
  require_shape(model, cfg.train.model_shape(d.items.feature_dim(), d.items.text_dim()));
  EvalReport report = base_report(command, effective);
  report.set_meta("checkpoint", fs::path(cfg.checkpoint).filename().string());
  evaluate_into(report, model, d, cfg.train.weighting);
  write_report(command.out_dir / "report.tsv", report);
  log_rows(log, report);
}

void run_ablate(const Command& command, const json& effective, std::ostream& log) {
  const auto& cfg = command.config;
  const LoadedData d = load_data(cfg, true);
  const AblationAxis axis = parse_ablation_axis(cfg.ablation_axis);
  EvalReport report = base_report(command, effective);
  report.set_meta("axis", cfg.ablation_axis);
  report.append(ablation_sweep(cfg.train, axis, cfg.ablation_values,
                               AblationData{d.items, d.seen_train, d.test, d.outfits, d.fitb}));
  write_report(command.out_dir / "ablation.tsv", report);
  log_rows(log, report);
}

void run_baseline(const Command& command, const json& effective, std::ostream& log) {
  const auto& cfg = command.config;
  const LoadedData d = load_data(cfg, true);
  const BaselineKind kind = parse_baseline_kind(cfg.baseline_kind);
  auto [fit, validation] = fit_split(d, cfg.train);
  SceModel model = make_baseline(kind, cfg.train, d.items, fit, cfg.train.seed);
  const TrainHistory history = train(model, d.items, fit, cfg.train, validation);
  EvalReport report = base_report(command, effective);
  report.set_meta("baseline", to_string(kind));
  log_history(log, history, report);
  evaluate_into(report, model, d, cfg.train.weighting);
  save_checkpoint(model, command.out_dir / "baseline.ckpt");
  write_report(command.out_dir / "report.tsv", report);
  log_rows(log, report);
}

void run_export(const Command& command, std::ostream& log) {
  const auto& cfg = command.config;
  const LoadedData d = load_data(cfg, false);
  const SceModel model = load_checkpoint(cfg.checkpoint);
  if (model.shape().feature_dim != d.items.feature_dim()) {
    throw CheckpointError("checkpoint shape mismatch in feature_dim (F): checkpoint has " +
                          std::to_string(model.shape().feature_dim) + ", items have " +
                          std::to_string(d.items.feature_dim()));
  }
  export_condition_embeddings(model, d.items, command.out_dir / "embeddings.tsv");
  log << "wrote " << d.items.size() * model.shape().conditions << " rows to "
      << (command.out_dir / "embeddings.tsv").string() << '\n';
}

void run_check_grads(const Command& command, const json& effective, std::ostream& log) {
  const auto& g = command.grad;
  EvalReport report = base_report(command, effective);
  report.set_meta("seed", std::to_string(g.seed));
  report.set_meta("shape", "F=" + std::to_string(g.feature_dim) + " D=" + std::to_string(g.embed_dim) +
                               " M=" + std::to_string(g.conditions) + " T=" + std::to_string(g.text_dim) +
                               " batch=" + std::to_string(g.batch));
  report.set_meta("eps", format_double(g.eps));
  report.set_meta("tol", format_double(g.tol));
  std::string failed;
  for (const auto& c : gradient_suite(g)) {
    const std::string setting = sce::to_string(c.mode) + (c.vse_sim ? "+vse-sim" : "");
    std::size_t flagged = 0;
    for (const auto& e : c.report.entries) flagged += e.flagged;
    report.add(setting, "max_rel_error", c.report.max_relative_error);
    report.add(setting, "flagged", static_cast<double>(flagged));
    log << setting << " max_rel_error " << format_double(c.report.max_relative_error)
        << (c.report.passed ? " ok" : " FAILED") << '\n';
    if (!c.report.passed) failed += (failed.empty() ? "" : ", ") + setting;
  }
  write_report(command.out_dir / "gradcheck.tsv", report);
  if (!failed.empty()) throw NumericError("gradient check failed for " + failed);
}

}  // namespace

void run(const Command& command, std::ostream& log) {
  std::error_code ec;
  fs::create_directories(command.out_dir, ec);
  if (ec) throw IoError("cannot create output directory " + command.out_dir.string() + ": " + ec.message());
  RunConfig resolved = command.config;
  if (command.verb == Verb::gen_synthetic) {
    // Point the echoed config at the generated files so it can drive the next verb.
    const fs::path dir = fs::absolute(command.out_dir).lexically_normal();
    resolved.data = {(dir / "items.tsv").string(), (dir / "train_triplets.txt").string(),
                     (dir / "test_triplets.txt").string(), (dir / "outfits.txt").string(),
                     (dir / "fitb.txt").string()};
  }
  const json effective = to_json(resolved);
  write_file(command.out_dir / "effective_config.json", [&](std::ostream& o) { o << effective.dump(2) << '\n'; });

  switch (command.verb) {
    case Verb::gen_synthetic: run_gen_synthetic(command, log); break;
    case Verb::train: run_train(command, effective, log); break;
    case Verb::eval: run_eval(command, effective, log); break;
    case Verb::ablate: run_ablate(command, effective, log); break;
    case Verb::baseline: run_baseline(command, effective, log); break;
    case Verb::export_embeddings: run_export(command, log); break;
    case Verb::check_grads: run_check_grads(command, effective, log); break;
  }
}

int exit_code_for(const std::exception& error) noexcept {
  if (dynamic_cast<const UsageError*>(&error)) return exit_usage;
  if (dynamic_cast<const InputError*>(&error)) return exit_input;
  if (dynamic_cast<const DimensionError*>(&error)) return exit_input;
  if (dynamic_cast<const NumericError*>(&error)) return exit_numeric;
  if (dynamic_cast<const IoError*>(&error)) return exit_io;
  return exit_internal;
}

int main_entry(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  try {
    const Command command = parse_args(args);
    run(command, out);
    return exit_ok;
  } catch (const HelpRequested& help) {
    out << help.what();
    return exit_ok;
  } catch (const std::exception& e) {
    err << "sce: error: " << e.what() << '\n';
    return exit_code_for(e);
  }
}

}  // namespace sce::cli
