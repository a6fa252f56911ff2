// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fail.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "sce/checkpoint.hpp"
#include "sce/cli.hpp"
#include "sce/config.hpp"
#include "sce/data.hpp"
#include "sce/evaluation.hpp"
#include "sce/random.hpp"
#include "sce/training.hpp"

namespace fs = std::filesystem;
using namespace sce;

namespace {

const fs::path kSource = SCE_SOURCE_DIR;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string num(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*g", digits, v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

struct Fixture {
  RunConfig config;
  SyntheticData data;
  TripletSet train;
  TripletSet test;
};

// Same generation and split as `sce gen-synthetic`.
Fixture load_fixture(const std::string& name) {
  Fixture f;
  f.config = run_config_from_json(read_json_file(kSource / "configs" / name));
  f.data = generate_synthetic(f.config.synthetic);
  auto [train, test] =
      split_triplets(f.data.triplets, f.config.synthetic_holdout, derive_seed(f.config.synthetic.seed, 0x4e1d));
  f.train = std::move(train);
  f.test = std::move(test);
  return f;
}

struct Scores {
  double error = 0.0;
  double auc = 0.0;
  double fitb = 0.0;
};

Scores score(const SceModel& model, const Fixture& f, Weighting weighting) {
  return {triplet_error_rate(model, f.data.items, f.test, weighting),
          compatibility_auc(model, f.data.items, f.data.outfits), fitb_accuracy(model, f.data.items, f.data.fitb)};
}

SceModel trained(const Fixture& f, const TrainConfig& config, const TripletSet& triplets) {
  SceModel model = initial_model(config, f.data.items);
  train(model, f.data.items, triplets, config);
  return model;
}

SceModel trained_baseline(const Fixture& f, BaselineKind kind, const TrainConfig& config) {
  SceModel model = make_baseline(kind, config, f.data.items, f.train, config.seed);
  train(model, f.data.items, f.train, config);
  return model;
}

Outcome gradient_suite_criterion() {
  const auto t0 = std::chrono::steady_clock::now();
  double worst = 0.0;
  bool all = true;
  std::size_t cases = 0;
  for (const std::vector<std::size_t>& hidden : {std::vector<std::size_t>{}, std::vector<std::size_t>{7}}) {
    GradientSuiteSettings settings;  // F=8, D=6, M=3, batch 4, eps 1e-5, tol 1e-4
    settings.encoder_hidden = hidden;
    for (const auto& c : gradient_suite(settings)) {
      ++cases;
      worst = std::max(worst, c.report.max_relative_error);
      all = all && c.report.passed && c.report.max_relative_error < 1e-4;
    }
  }
  const double elapsed = seconds_since(t0);
  return {all && cases == 16 && elapsed < 60.0, std::to_string(cases) + " cases, max relative error " + num(worst) +
                                                     " (< 1e-4), " + num(elapsed, 3) + " s (< 60 s)"};
}

Vector random_vector(Rng& rng, std::size_t n) {
  Vector v(n);
  for (auto& x : v) x = gaussian(rng);
  return v;
}

Outcome simplex_criterion() {
  Rng rng(derive_seed(2024, 2));
  const BranchMode modes[] = {BranchMode::pair_visual, BranchMode::triplet_visual, BranchMode::pair_text,
                              BranchMode::pair_visual_text};
  double worst_sum = 0.0;
  bool nonnegative = true;
  for (int k = 0; k < 1000; ++k) {
    ModelShape shape;
    shape.feature_dim = 5;
    shape.embed_dim = 6;
    shape.conditions = 2 + k % 4;
    shape.text_dim = 3;
    shape.mode = modes[k % 4];
    shape.branch_hidden = ModelShape::default_branch_hidden(shape.conditions);
    const SceModel model = SceModel::create(shape, derive_seed(77, k));
    std::vector<Vector> vis, txt;
    for (int i = 0; i < 3; ++i) {
      vis.push_back(random_vector(rng, 6));  // the branch reads general embeddings (D)
      for (auto& x : vis.back()) x *= 5.0;  // large logits stress the softmax
      txt.push_back(random_vector(rng, 3));
    }
    const std::size_t n = shape.mode == BranchMode::triplet_visual ? 3 : 2;
    BranchInput in;
    for (std::size_t i = 0; i < n; ++i) {
      if (shape.mode != BranchMode::pair_text) in.visual.push_back(vis[i]);
      if (shape.mode == BranchMode::pair_text || shape.mode == BranchMode::pair_visual_text) in.text.push_back(txt[i]);
    }
    const Vector w = compute_condition_weights(model, in);
    double sum = 0.0;
    for (double x : w) {
      sum += x;
      nonnegative = nonnegative && x >= 0.0;
    }
    worst_sum = std::max(worst_sum, std::abs(sum - 1.0));
  }

  // All-ones masks: the weighted mixture collapses to the general embedding.
  double worst_ones = 0.0;
  for (int k = 0; k < 200; ++k) {
    ModelShape shape;
    shape.feature_dim = 7;
    shape.embed_dim = 5;
    shape.conditions = 1 + k % 5;
    shape.branch_hidden = ModelShape::default_branch_hidden(shape.conditions);
    SceModel model = SceModel::create(shape, derive_seed(91, k));
    model.masks().fill(1.0);
    const Vector a = random_vector(rng, 7), b = random_vector(rng, 7);
    const auto pair = embed_pair(model, {a, {}}, {b, {}});
    const Vector ga = encode(model, a), gb = encode(model, b);
    for (std::size_t d = 0; d < 5; ++d) {
      worst_ones = std::max({worst_ones, std::abs(pair.first[d] - ga[d]), std::abs(pair.second[d] - gb[d])});
    }
  }

  // M = 1: two models differing only in branch parameters give identical bits.
  bool independent = true;
  for (int k = 0; k < 50; ++k) {
    ModelShape shape;
    shape.feature_dim = 6;
    shape.embed_dim = 4;
    shape.conditions = 1;
    shape.branch_hidden = ModelShape::default_branch_hidden(1);
    const SceModel first = SceModel::create(shape, derive_seed(5, k));
    SceModel second = first;
    for (auto& p : second.params()) {
      if (p.name.rfind("branch.", 0) == 0) {
        for (auto& x : p.value.flat()) x = gaussian(rng, 3.0);
      }
    }
    const Vector a = random_vector(rng, 6), b = random_vector(rng, 6);
    const auto e1 = embed_pair(first, {a, {}}, {b, {}});
    const auto e2 = embed_pair(second, {a, {}}, {b, {}});
    independent = independent && e1.first == e2.first && e1.second == e2.second;
  }
  return {worst_sum <= 1e-6 && nonnegative && worst_ones <= 1e-12 && independent,
          "simplex deviation " + num(worst_sum) + " (<= 1e-6), all-ones deviation " + num(worst_ones) +
              " (<= 1e-12), M=1 branch-independent " + (independent ? "yes" : "no")};
}

double brute_auc(const std::vector<double>& pos, const std::vector<double>& neg) {
  double wins = 0.0;
  for (double p : pos) {
    for (double n : neg) wins += p > n ? 1.0 : (p == n ? 0.5 : 0.0);
  }
  return wins / (static_cast<double>(pos.size()) * static_cast<double>(neg.size()));
}

Outcome auc_criterion() {
  Rng rng(derive_seed(2024, 3));
  int mismatches = 0;
  int tie_heavy = 0;
  for (int k = 0; k < 200; ++k) {
    const std::size_t p = 1 + uniform_index(rng, 40), n = 1 + uniform_index(rng, 40);
    // Every other instance draws from a handful of levels so ties dominate.
    const bool ties = k % 2 == 0;
    tie_heavy += ties;
    auto draw = [&] { return ties ? static_cast<double>(uniform_index(rng, 4)) : gaussian(rng); };
    std::vector<double> pos(p), neg(n);
    for (auto& x : pos) x = draw();
    for (auto& x : neg) x = draw();
    if (roc_auc(pos, neg) != brute_auc(pos, neg)) ++mismatches;
  }
  return {mismatches == 0, "200 instances (" + std::to_string(tie_heavy) + " tie-heavy), exact mismatches " +
                               std::to_string(mismatches)};
}

// Shared by criteria 4 to 6: the clean M=4 model on the K=4 fixture.
struct K4Results {
  Fixture fixture;
  Scores m4;
  double elapsed_m4 = 0.0;
};

Outcome condition_count_criterion(K4Results& k4) {
  const auto t0 = std::chrono::steady_clock::now();
  const Fixture& f = k4.fixture;
  std::vector<double> err;
  for (std::size_t m : {2, 3, 4}) {
    TrainConfig config = f.config.train;
    config.conditions = m;
    const auto tm = std::chrono::steady_clock::now();
    const SceModel model = trained(f, config, f.train);
    const Scores s = score(model, f, config.weighting);
    err.push_back(s.error);
    if (m == 4) {
      k4.m4 = s;
      k4.elapsed_m4 = seconds_since(tm);
    }
  }
  const double elapsed = seconds_since(t0);
  const bool size_ok = f.data.items.size() >= 2000 && f.data.triplets.size() >= 40000;
  return {size_ok && err[2] < err[1] && err[1] < err[0] && err[2] < 0.10 && elapsed < 900.0,
          std::to_string(f.data.items.size()) + " items, " + std::to_string(f.data.triplets.size()) +
              " triplets; err M=2/3/4 = " + num(err[0]) + " / " + num(err[1]) + " / " + num(err[2]) +
              " (decreasing, M=4 < 0.1), " + num(elapsed, 3) + " s (< 900 s)"};
}

Outcome branch_value_criterion(const K4Results& k4) {
  const Fixture& f = k4.fixture;
  const Scores uni = score(trained_baseline(f, BaselineKind::uniform_average, f.config.train), f, Weighting::per_pair);
  const Scores rnd = score(trained_baseline(f, BaselineKind::random_weights, f.config.train), f, Weighting::per_pair);
  const double fitb_gap = k4.m4.fitb - std::max(uni.fitb, rnd.fitb);
  const double auc_gap = k4.m4.auc - std::max(uni.auc, rnd.auc);
  return {fitb_gap >= 0.05 && auc_gap >= 0.03,
          "FITB sce/uniform/random = " + num(k4.m4.fitb) + " / " + num(uni.fitb) + " / " + num(rnd.fitb) +
              " (gap " + num(fitb_gap) + " >= 0.05); AUC = " + num(k4.m4.auc) + " / " + num(uni.auc) + " / " +
              num(rnd.auc) + " (gap " + num(auc_gap) + " >= 0.03)"};
}

Outcome noise_criterion(const K4Results& k4) {
  const Fixture& f = k4.fixture;
  TrainConfig config = f.config.train;
  config.noise_fraction = 0.125;
  const double low = score(trained(f, config, f.train), f, config.weighting).error;
  config.noise_fraction = 0.5;
  const double high = score(trained(f, config, f.train), f, config.weighting).error;
  const double single =
      score(trained_baseline(f, BaselineKind::single_embedding, f.config.train), f, Weighting::per_pair).error;
  const double clean = k4.m4.error;
  return {std::abs(low - clean) <= 0.02 && high < single,
          "err clean/12.5%/50% = " + num(clean) + " / " + num(low) + " / " + num(high) + " (|12.5% - clean| <= 0.02)" +
              "; single-embedding clean err " + num(single) + " (> 50% err)"};
}

Outcome purity_criterion() {
  const Fixture f = load_fixture("synthetic_k3.json");
  const TrainConfig& config = f.config.train;
  const SceModel model = trained(f, config, f.train);
  const double purity = condition_purity(model, f.data.items, f.test);
  return {config.conditions == 3 && config.weighting == Weighting::shared_triplet && purity >= 0.8,
          "K=3, M=3, shared-triplet weighting: purity " + num(purity) + " (>= 0.8)"};
}

Outcome unseen_criterion(const K4Results& k4) {
  const Fixture& f = k4.fixture;
  const std::string excluded = synthetic_category(0, 2);
  const auto split = filter_categories(f.data.items, f.train, f.data.fitb, {excluded});
  const SceModel model = trained(f, f.config.train, split.train_triplets);
  const double acc = fitb_accuracy(model, f.data.items, split.eval_fitb);
  double chance = 0.0;
  for (const auto& q : split.eval_fitb) chance += 1.0 / static_cast<double>(q.candidates.size());
  chance /= static_cast<double>(std::max<std::size_t>(1, split.eval_fitb.size()));
  return {!split.eval_fitb.empty() && acc - chance >= 0.15,
          "excluded " + excluded + ": " + std::to_string(split.eval_fitb.size()) + " questions, FITB " + num(acc) +
              " vs chance " + num(chance) + " (margin >= 0.15)"};
}

std::string checkpoint_bytes(const SceModel& model) {
  std::ostringstream out;
  write_checkpoint(out, model);
  return out.str();
}

std::string report_bytes(const EvalReport& report) {
  std::ostringstream out;
  report.write(out);
  return out.str();
}

Outcome determinism_criterion() {
  std::vector<std::string> problems;
  const Fixture f = load_fixture("smoke.json");
  auto run_once = [&] {
    SceModel model = trained(f, f.config.train, f.train);
    const EvalReport report =
        evaluate_all(model, f.data.items, f.test, f.data.outfits, f.data.fitb, f.config.train.weighting);
    return std::pair{checkpoint_bytes(model), report_bytes(report)};
  };
  const auto first = run_once();
  const auto second = run_once();
  if (first.first != second.first) problems.push_back("checkpoints differ");
  if (first.second != second.second) problems.push_back("reports differ");

  std::istringstream ckpt_in(first.first);
  const SceModel restored = read_checkpoint(ckpt_in, "<memory>");
  if (checkpoint_bytes(restored) != first.first) problems.push_back("checkpoint round-trip changed bytes");
  const SceModel original = trained(f, f.config.train, f.train);
  for (std::size_t i = 0; i < original.params().size(); ++i) {
    if (!(original.params()[i].value == restored.params()[i].value)) problems.push_back("parameter values changed");
  }

  std::ostringstream emb_out;
  write_condition_embeddings(emb_out, restored, f.data.items);
  std::istringstream emb_in(emb_out.str());
  const auto rows = read_condition_embeddings(emb_in);
  bool lossless = rows.size() == f.data.items.size() * restored.shape().conditions;
  for (const auto& row : rows) {
    if (!lossless) break;
    const Matrix expected = condition_embeddings(restored, f.data.items[f.data.items.index_of(row.id)].visual);
    const auto want = expected.row(row.condition);
    lossless = std::equal(want.begin(), want.end(), row.values.begin(), row.values.end());
  }
  if (!lossless) problems.push_back("embedding export round-trip is lossy");

  // Malformed-input corpus through the CLI entry point.
  const fs::path fixtures = kSource / "tests" / "fixtures";
  const fs::path out = fs::temp_directory_path() / "sce-acceptance-bad";
  std::ifstream manifest(fixtures / "bad" / "manifest.tsv");
  std::size_t checked = 0;
  for (std::string line; std::getline(manifest, line);) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream fields(line);
    std::string file, role;
    std::size_t expected_line = 0;
    int expected_exit = 0;
    fields >> file >> role >> expected_line >> expected_exit;
    const std::string path = (fixtures / "bad" / file).string();
    std::vector<std::string> args = {role == "checkpoint" ? "eval" : "train", "--config",
                                     role == "config" ? path : (fixtures / "config.json").string(), "--out",
                                     out.string()};
    if (role != "config") {
      args.push_back("--" + (role == "train_triplets" ? std::string("train-triplets") : role));
      args.push_back(path);
    }
    std::ostringstream sink, err;
    const int code = cli::main_entry(args, sink, err);
    const std::string message = err.str();
    const std::string tag = role == "config" ? "line " + std::to_string(expected_line) + ","
                                             : file + ":" + std::to_string(expected_line) + ":";
    if (code != expected_exit || message.find(tag) == std::string::npos) {
      problems.push_back(file + " gave exit " + std::to_string(code) + ": " + message);
    }
    ++checked;
  }
  fs::remove_all(out);
  if (checked == 0) problems.push_back("malformed-input manifest is empty");

  std::string detail = "repeat runs bit-identical, checkpoint and export round-trips lossless, " +
                       std::to_string(checked) + " malformed fixtures rejected with line numbers";
  if (!problems.empty()) {
    detail = problems.front();
    if (!detail.empty() && detail.back() == '\n') detail.pop_back();
    if (problems.size() > 1) detail += " (+" + std::to_string(problems.size() - 1) + " more)";
  }
  return {problems.empty(), detail};
}

}  // namespace

int main() {
  int failures = 0;
  auto line = [&](int n, const char* title, const std::function<Outcome()>& check) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    failures += !o.pass;
    std::cout << "criterion " << n << " " << (o.pass ? "PASS" : "FAIL") << "  " << title << ": " << o.detail
              << std::endl;
  };

  line(1, "gradient suite", gradient_suite_criterion);
  line(2, "simplex and reduction invariants", simplex_criterion);
  line(3, "AUC oracle equivalence", auc_criterion);

  K4Results k4;
  bool have_k4 = false;
  line(4, "condition-count trend", [&] {
    k4.fixture = load_fixture("synthetic_k4.json");
    have_k4 = true;
    return condition_count_criterion(k4);
  });
  auto needs_k4 = [&](Outcome (*check)(const K4Results&)) {
    return [&, check] { return have_k4 ? check(k4) : Outcome{false, "K=4 fixture unavailable"}; };
  };
  line(5, "weight-branch value", needs_k4(branch_value_criterion));
  line(6, "noise robustness", needs_k4(noise_criterion));
  line(7, "condition purity", purity_criterion);
  line(8, "unseen-category FITB", needs_k4(unseen_criterion));
  line(9, "determinism and round-trips", determinism_criterion);

  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures == 0 ? 0 : 1;
}
