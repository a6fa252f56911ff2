#include "sce/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "sce/error.hpp"

namespace sce {
namespace {

std::vector<Vector> encode_all(const SceModel& model, const ItemTable& items) {
  std::vector<Vector> out;
  out.reserve(items.size());
  for (const auto& item : items) out.push_back(encode(model, item.visual));
  return out;
}

// Distances between final embeddings of item pairs, with general embeddings
// computed once. Unordered pairs reach the branch in item-table order.
class PairScorer {
 public:
  PairScorer(const SceModel& model, const ItemTable& items)
      : model_(model), items_(items), general_(encode_all(model, items)) {
    if (model.shape().mode == BranchMode::triplet_visual) {
      throw ContractError("pairwise scoring needs a pair-conditioned branch; this model is triplet-visual");
    }
  }

  double distance(std::size_t a, std::size_t b) const {
    if (b < a) std::swap(a, b);
    const BranchInput input = make_branch_input(
        model_.shape().mode, {ItemInput{general_[a], items_[a].text}, ItemInput{general_[b], items_[b].text}});
    const Vector w = resolve_condition_weights(model_, input);
    return euclidean_distance(masked_mixture(model_.masks(), general_[a], w),
                              masked_mixture(model_.masks(), general_[b], w));
  }

 private:
  const SceModel& model_;
  const ItemTable& items_;
  std::vector<Vector> general_;
};

std::string trim_copy(std::string s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) s.pop_back();
  return s;
}

}  // namespace

void EvalReport::set_meta(const std::string& key, const std::string& value) {
  for (auto& [k, v] : meta_) {
    if (k == key) {
      v = value;
      return;
    }
  }
  meta_.emplace_back(key, value);
}

void EvalReport::add(const std::string& setting, const std::string& metric, double value) {
  if (!std::isfinite(value)) throw NumericError("report value for " + metric + " is not finite");
  rows_.push_back(Row{setting, metric, value});
}

void EvalReport::append(const EvalReport& other, const std::string& setting_prefix) {
  for (const auto& row : other.rows_) {
    std::string setting = setting_prefix;
    if (row.setting != "-") setting += setting.empty() ? row.setting : "/" + row.setting;
    if (setting.empty()) setting = "-";
    rows_.push_back(Row{setting, row.metric, row.value});
  }
}

double EvalReport::value(const std::string& setting, const std::string& metric) const {
  for (const auto& row : rows_) {
    if (row.setting == setting && row.metric == metric) return row.value;
  }
  throw InputError("report has no value for (" + setting + ", " + metric + ")");
}

void EvalReport::write(std::ostream& out) const {
  out << "# sce-report 1\n";
  for (const auto& [k, v] : meta_) out << "# " << k << '\t' << v << '\n';
  out << "setting\tmetric\tvalue\n";
  for (const auto& row : rows_) out << row.setting << '\t' << row.metric << '\t' << format_double(row.value) << '\n';
}

EvalReport EvalReport::read(std::istream& in, const std::string& source) {
  EvalReport report;
  std::string line;
  std::size_t lineno = 0;
  bool header_seen = false;
  if (!std::getline(in, line) || trim_copy(line) != "# sce-report 1") throw ParseError(source, 1, "not an sce report");
  ++lineno;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim_copy(line);
    if (line.empty()) continue;
    if (!header_seen && line.rfind("# ", 0) == 0) {
      const auto tab = line.find('\t');
      if (tab == std::string::npos) throw ParseError(source, lineno, "metadata line without a tab");
      report.meta_.emplace_back(line.substr(2, tab - 2), line.substr(tab + 1));
      continue;
    }
    if (!header_seen) {
      if (line != "setting\tmetric\tvalue") throw ParseError(source, lineno, "expected column header");
      header_seen = true;
      continue;
    }
    std::istringstream ss(line);
    std::string setting, metric, value;
    if (!std::getline(ss, setting, '\t') || !std::getline(ss, metric, '\t') || !std::getline(ss, value)) {
      throw ParseError(source, lineno, "expected three tab-separated fields");
    }
    const auto v = parse_double(value);
    if (!v) throw ParseError(source, lineno, "bad value '" + value + "'");
    report.rows_.push_back(Row{setting, metric, *v});
  }
  return report;
}

double triplet_error_rate(const SceModel& model, const ItemTable& items, const TripletSet& triplets,
                          Weighting weighting) {
  if (triplets.empty()) throw InputError("triplet_error_rate: empty triplet set");
  const bool shared = weighting == Weighting::shared_triplet;
  if (shared != (model.shape().mode == BranchMode::triplet_visual)) {
    throw ContractError("weighting " + to_string(weighting) + " does not match branch mode " +
                        to_string(model.shape().mode));
  }
  const auto general = encode_all(model, items);
  const auto mode = model.shape().mode;
  const Matrix& masks = model.masks();
  std::size_t errors = 0;
  for (const auto& t : triplets) {
    const ItemInput a{general[t.anchor], items[t.anchor].text};
    const ItemInput p{general[t.positive], items[t.positive].text};
    const ItemInput n{general[t.negative], items[t.negative].text};
    Vector wp, wn;
    if (shared) {
      wp = resolve_condition_weights(model, make_branch_input(mode, {a, p, n}), t.condition);
      wn = wp;
    } else {
      wp = resolve_condition_weights(model, make_branch_input(mode, {a, p}), t.condition);
      wn = resolve_condition_weights(model, make_branch_input(mode, {a, n}), t.condition);
    }
    const double d_pos = euclidean_distance(masked_mixture(masks, a.visual, wp), masked_mixture(masks, p.visual, wp));
    const double d_neg = euclidean_distance(masked_mixture(masks, a.visual, wn), masked_mixture(masks, n.visual, wn));
    if (d_pos >= d_neg) ++errors;
  }
  return static_cast<double>(errors) / static_cast<double>(triplets.size());
}

double roc_auc(std::span<const double> positive_scores, std::span<const double> negative_scores) {
  if (positive_scores.empty() || negative_scores.empty()) throw InputError("roc_auc: both score lists must be nonempty");
  struct Scored {
    double score;
    bool positive;
  };
  std::vector<Scored> all;
  all.reserve(positive_scores.size() + negative_scores.size());
  for (double s : positive_scores) all.push_back({s, true});
  for (double s : negative_scores) all.push_back({s, false});
  std::sort(all.begin(), all.end(), [](const Scored& a, const Scored& b) { return a.score < b.score; });

  // Twice the average rank of a tie block [start, end) is start + 1 + end, an
  // integer, so the statistic is accumulated exactly.
  std::uint64_t twice_rank_sum = 0;
  for (std::size_t start = 0; start < all.size();) {
    std::size_t end = start + 1;
    while (end < all.size() && all[end].score == all[start].score) ++end;
    std::uint64_t positives = 0;
    for (std::size_t k = start; k < end; ++k) positives += all[k].positive ? 1 : 0;
    twice_rank_sum += positives * (start + 1 + end);
    start = end;
  }
  const std::uint64_t p = positive_scores.size();
  const std::uint64_t n = negative_scores.size();
  const std::uint64_t twice_u = twice_rank_sum - p * (p + 1);
  return static_cast<double>(twice_u) / static_cast<double>(2 * p * n);
}

double outfit_score(const SceModel& model, const ItemTable& items, std::span<const std::size_t> outfit) {
  if (outfit.size() < 2) throw InputError("outfit_score: an outfit needs at least 2 items");
  const PairScorer scorer(model, items);
  double total = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < outfit.size(); ++i) {
    for (std::size_t j = i + 1; j < outfit.size(); ++j, ++pairs) total += scorer.distance(outfit[i], outfit[j]);
  }
  return -total / static_cast<double>(pairs);
}

double compatibility_auc(const SceModel& model, const ItemTable& items, const OutfitSet& outfits) {
  const PairScorer scorer(model, items);
  std::vector<double> pos, neg;
  for (const auto& o : outfits) {
    if (o.items.size() < 2) throw InputError("outfit '" + o.id + "' has fewer than 2 items");
    double total = 0.0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < o.items.size(); ++i) {
      for (std::size_t j = i + 1; j < o.items.size(); ++j, ++pairs) total += scorer.distance(o.items[i], o.items[j]);
    }
    (o.compatible ? pos : neg).push_back(-total / static_cast<double>(pairs));
  }
  if (pos.empty() || neg.empty()) throw InputError("compatibility_auc: need both compatible and incompatible outfits");
  return roc_auc(pos, neg);
}

namespace {

std::size_t fitb_choice_with(const PairScorer& scorer, const FitbQuestion& q) {
  if (q.partial.empty() || q.candidates.empty()) throw InputError("FITB question needs partial items and candidates");
  std::size_t best = 0;
  double best_sum = 0.0;
  for (std::size_t c = 0; c < q.candidates.size(); ++c) {
    double sum = 0.0;
    for (auto p : q.partial) sum += scorer.distance(q.candidates[c], p);
    if (c == 0 || sum < best_sum) {
      best = c;
      best_sum = sum;
    }
  }
  return best;
}

}  // namespace

std::size_t fitb_choice(const SceModel& model, const ItemTable& items, const FitbQuestion& question) {
  return fitb_choice_with(PairScorer(model, items), question);
}

double fitb_accuracy(const SceModel& model, const ItemTable& items, const FitbSet& questions) {
  if (questions.empty()) throw InputError("fitb_accuracy: empty question set");
  const PairScorer scorer(model, items);
  std::size_t correct = 0;
  for (const auto& q : questions) {
    if (fitb_choice_with(scorer, q) == q.answer) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(questions.size());
}

std::string to_string(BaselineKind kind) {
  switch (kind) {
    case BaselineKind::single_embedding: return "single";
    case BaselineKind::uniform_average: return "uniform";
    case BaselineKind::random_weights: return "random";
    case BaselineKind::fixed_disjoint: return "fixed-disjoint";
  }
  return "?";
}

BaselineKind parse_baseline_kind(std::string_view text) {
  for (auto k : {BaselineKind::single_embedding, BaselineKind::uniform_average, BaselineKind::random_weights,
                 BaselineKind::fixed_disjoint}) {
    if (to_string(k) == text) return k;
  }
  throw ConfigError("unknown baseline kind '" + std::string(text) + "' (single, uniform, random, fixed-disjoint)");
}

SceModel make_baseline(BaselineKind kind, const TrainConfig& config, const ItemTable& items,
                       const TripletSet& triplets, std::uint64_t seed) {
  TrainConfig adjusted = config;
  adjusted.seed = seed;
  if (kind == BaselineKind::single_embedding) {
    adjusted.conditions = 1;
    if (!config.branch_hidden) adjusted.branch_hidden = ModelShape::default_branch_hidden(1);
  }
  SceModel model = initial_model(adjusted, items);
  switch (kind) {
    case BaselineKind::single_embedding:
      model.masks().fill(1.0);
      model.set_masks_trainable(false);
      break;
    case BaselineKind::uniform_average: model.set_weight_source(WeightSource::uniform); break;
    case BaselineKind::random_weights: model.set_weight_source(WeightSource::random, seed); break;
    case BaselineKind::fixed_disjoint: {
      const std::size_t m = adjusted.conditions;
      const std::size_t d = adjusted.embed_dim;
      if (d % m != 0) {
        throw ConfigError("fixed-disjoint masks need D divisible by M (D=" + std::to_string(d) +
                          ", M=" + std::to_string(m) + ")");
      }
      std::set<std::string> labels;
      for (const auto& t : triplets) {
        if (t.condition) labels.insert(*t.condition);
      }
      if (labels.empty()) throw InputError("fixed-disjoint baseline needs condition-labelled triplets");
      model.set_condition_labels({labels.begin(), labels.end()});
      Matrix& masks = model.masks();
      masks.fill(0.0);
      const std::size_t width = d / m;
      for (std::size_t j = 0; j < m; ++j) {
        for (std::size_t k = j * width; k < (j + 1) * width; ++k) masks(j, k) = 1.0;
      }
      model.set_masks_trainable(false);
      model.set_weight_source(WeightSource::fixed_disjoint);
      break;
    }
  }
  return model;
}

double purity_of_assignment(std::span<const std::size_t> groups, std::span<const std::string> labels) {
  if (groups.size() != labels.size()) throw DimensionError("purity: groups and labels differ in length");
  if (groups.empty()) throw InputError("purity: empty assignment");
  std::map<std::size_t, std::map<std::string, std::size_t>> counts;
  for (std::size_t i = 0; i < groups.size(); ++i) ++counts[groups[i]][labels[i]];
  std::size_t majority = 0;
  for (const auto& [group, by_label] : counts) {
    std::size_t best = 0;
    for (const auto& [label, n] : by_label) best = std::max(best, n);
    majority += best;
  }
  return static_cast<double>(majority) / static_cast<double>(groups.size());
}

double condition_purity(const SceModel& model, const ItemTable& items, const TripletSet& triplets) {
  if (model.shape().mode != BranchMode::triplet_visual) {
    throw ContractError("condition_purity needs shared-triplet weighting (branch mode triplet-visual)");
  }
  if (triplets.empty()) throw InputError("condition_purity: empty triplet set");
  const auto general = encode_all(model, items);
  std::vector<std::size_t> groups;
  std::vector<std::string> labels;
  for (const auto& t : triplets) {
    if (!t.condition) throw InputError("condition_purity: every triplet needs a condition label");
    const Vector w = resolve_condition_weights(
        model, make_branch_input(model.shape().mode, {ItemInput{general[t.anchor], {}},
                                                       ItemInput{general[t.positive], {}},
                                                       ItemInput{general[t.negative], {}}}),
        t.condition);
    groups.push_back(static_cast<std::size_t>(std::max_element(w.begin(), w.end()) - w.begin()));
    labels.push_back(*t.condition);
  }
  return purity_of_assignment(groups, labels);
}

std::vector<std::size_t> top_k_compatible(const SceModel& model, const ItemTable& items, std::size_t query,
                                          std::span<const std::size_t> candidates, long k) {
  if (k <= 0) throw InputError("top_k_compatible: k must be positive");
  if (candidates.empty()) throw InputError("top_k_compatible: no candidates");
  const PairScorer scorer(model, items);
  std::vector<std::pair<double, std::size_t>> scored;
  scored.reserve(candidates.size());
  for (auto c : candidates) scored.emplace_back(c == query ? 0.0 : scorer.distance(query, c), c);
  std::sort(scored.begin(), scored.end(), [&](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first < b.first;
    return items[a.second].id < items[b.second].id;
  });
  const std::size_t keep = std::min<std::size_t>(static_cast<std::size_t>(k), scored.size());
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < keep; ++i) out.push_back(scored[i].second);
  return out;
}

EvalReport evaluate_all(const SceModel& model, const ItemTable& items, const TripletSet& test_triplets,
                        const OutfitSet& outfits, const FitbSet& fitb, Weighting weighting) {
  EvalReport report;
  if (!test_triplets.empty()) {
    report.add("-", "triplet_error", triplet_error_rate(model, items, test_triplets, weighting));
  }
  const bool pairwise = model.shape().mode != BranchMode::triplet_visual;
  if (pairwise && !outfits.empty()) report.add("-", "compat_auc", compatibility_auc(model, items, outfits));
  if (pairwise && !fitb.empty()) report.add("-", "fitb_accuracy", fitb_accuracy(model, items, fitb));
  return report;
}

std::string to_string(AblationAxis axis) {
  switch (axis) {
    case AblationAxis::conditions: return "M";
    case AblationAxis::noise_fraction: return "noise";
    case AblationAxis::train_size: return "size";
  }
  return "?";
}

AblationAxis parse_ablation_axis(std::string_view text) {
  for (auto a : {AblationAxis::conditions, AblationAxis::noise_fraction, AblationAxis::train_size}) {
    if (to_string(a) == text) return a;
  }
  throw ConfigError("unknown ablation axis '" + std::string(text) + "' (M, noise, size)");
}

EvalReport ablation_sweep(const TrainConfig& base, AblationAxis axis, std::span<const double> values,
                          const AblationData& data) {
  if (values.empty()) throw InputError("ablation_sweep: no axis values");
  EvalReport report;
  report.set_meta("axis", to_string(axis));
  report.set_meta("seed", std::to_string(base.seed));
  for (double value : values) {
    TrainConfig config = base;
    TripletSet train_set = data.train;
    switch (axis) {
      case AblationAxis::conditions:
        if (!(value >= 1.0) || value != std::floor(value)) throw ConfigError("M values must be positive integers");
        config.conditions = static_cast<std::size_t>(value);
        if (!base.branch_hidden) config.branch_hidden.reset();
        break;
      case AblationAxis::noise_fraction: config.noise_fraction = value; break;
      case AblationAxis::train_size:
        if (!(value >= 1.0) || value != std::floor(value)) throw ConfigError("size values must be positive integers");
        train_set.resize(std::min(train_set.size(), static_cast<std::size_t>(value)));
        break;
    }
    SceModel model = initial_model(config, data.items);
    train(model, data.items, train_set, config);
    const EvalReport run = evaluate_all(model, data.items, data.test, data.outfits, data.fitb, config.weighting);
    report.append(run, to_string(axis) + "=" + format_double(value));
  }
  return report;
}

void write_condition_embeddings(std::ostream& out, const SceModel& model, const ItemTable& items) {
  for (const auto& item : items) {
    const Matrix rows = condition_embeddings(model, item.visual);
    for (std::size_t j = 0; j < rows.rows(); ++j) {
      out << item.id << '\t' << j << '\t';
      const auto r = rows.row(j);
      for (std::size_t d = 0; d < r.size(); ++d) out << (d ? "," : "") << format_double(r[d]);
      out << '\n';
    }
  }
}

void export_condition_embeddings(const SceModel& model, const ItemTable& items, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  write_condition_embeddings(out, model, items);
  out.flush();
  if (!out) throw IoError("write failed: " + path.string());
}

std::vector<ConditionEmbeddingRow> read_condition_embeddings(std::istream& in, const std::string& source) {
  std::vector<ConditionEmbeddingRow> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim_copy(line);
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string id, cond, values;
    if (!std::getline(ss, id, '\t') || !std::getline(ss, cond, '\t') || !std::getline(ss, values)) {
      throw ParseError(source, lineno, "expected 'id<TAB>condition<TAB>values'");
    }
    ConditionEmbeddingRow row;
    row.id = id;
    const auto c = parse_double(cond);
    if (!c || *c < 0 || *c != std::floor(*c)) throw ParseError(source, lineno, "bad condition index '" + cond + "'");
    row.condition = static_cast<std::size_t>(*c);
    std::istringstream vs(values);
    for (std::string tok; std::getline(vs, tok, ',');) {
      const auto v = parse_double(tok);
      if (!v) throw ParseError(source, lineno, "bad value '" + tok + "'");
      row.values.push_back(*v);
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace sce
