#include "sce/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "sce/error.hpp"
#include "sce/random.hpp"

namespace sce {
namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

bool skippable(std::string_view line) {
  const auto t = trim(line);
  return t.empty() || t.front() == '#';
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(s.substr(start));
      return out;
    }
    out.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
}

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == '\r')) ++i;
    const std::size_t start = i;
    while (i < s.size() && s[i] != ' ' && s[i] != '\t' && s[i] != '\r') ++i;
    if (i > start) out.push_back(s.substr(start, i - start));
  }
  return out;
}

Vector parse_vector(std::string_view field, const std::string& source, std::size_t line, const char* what) {
  Vector out;
  for (const auto token : split(field, ',')) {
    const auto value = parse_double(trim(token));
    if (!value) {
      throw ParseError(source, line, std::string("non-numeric ") + what + " value '" + std::string(trim(token)) + "'");
    }
    out.push_back(*value);
  }
  return out;
}

std::size_t resolve(const ItemTable& items, std::string_view id, const std::string& source, std::size_t line) {
  const auto idx = items.find(id);
  if (!idx) throw ReferenceError(source + ":" + std::to_string(line) + ": unknown item id '" + std::string(id) + "'");
  return *idx;
}

template <typename Reader>
auto load_with(const std::filesystem::path& path, Reader reader) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return reader(in, path.string());
}

template <typename Writer>
void write_line_file(std::ostream& out, Writer writer) {
  writer(out);
  if (!out) throw IoError("write failed");
}

const std::string& id_of(const ItemTable& items, std::size_t idx) { return items[idx].id; }

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

std::string format_double(double value) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

std::optional<double> parse_double(std::string_view text) {
  if (text.empty()) return std::nullopt;
  if (text.front() == '+') text.remove_prefix(1);
  double value = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), value);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size() || !std::isfinite(value)) return std::nullopt;
  return value;
}

std::size_t ItemTable::add(Item item) {
  if (item.id.empty()) throw ValidationError("item id must be nonempty");
  if (by_id_.contains(item.id)) throw ValidationError("duplicate item id '" + item.id + "'");
  if (item.visual.empty()) throw DimensionError("item '" + item.id + "' has no visual features");
  if (!all_finite(item.visual) || !all_finite(item.text)) {
    throw ValidationError("item '" + item.id + "' has non-finite features");
  }
  if (items_.empty()) feature_dim_ = item.visual.size();
  if (item.visual.size() != feature_dim_) {
    throw DimensionError("item '" + item.id + "' has " + std::to_string(item.visual.size()) +
                         " visual values, expected " + std::to_string(feature_dim_));
  }
  if (!item.text.empty()) {
    if (text_dim_ == 0) text_dim_ = item.text.size();
    if (item.text.size() != text_dim_) {
      throw DimensionError("item '" + item.id + "' has " + std::to_string(item.text.size()) +
                           " text values, expected " + std::to_string(text_dim_));
    }
    ++with_text_;
  }
  by_id_.emplace(item.id, items_.size());
  items_.push_back(std::move(item));
  return items_.size() - 1;
}

std::optional<std::size_t> ItemTable::find(std::string_view id) const {
  const auto it = by_id_.find(std::string(id));
  if (it == by_id_.end()) return std::nullopt;
  return it->second;
}

std::size_t ItemTable::index_of(std::string_view id) const {
  const auto idx = find(id);
  if (!idx) throw ReferenceError("unknown item id '" + std::string(id) + "'");
  return *idx;
}

ItemTable read_feature_table(std::istream& in, const std::string& source) {
  ItemTable table;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (skippable(line)) continue;
    auto fields = split(line, '\t');
    if (!fields.empty()) fields.back() = trim(fields.back());
    if (fields.size() < 3 || fields.size() > 4) {
      throw ParseError(source, lineno, "expected 3 or 4 tab-separated fields, got " + std::to_string(fields.size()));
    }
    Item item;
    item.id = std::string(trim(fields[0]));
    item.category = std::string(trim(fields[1]));
    if (item.id.empty()) throw ParseError(source, lineno, "empty item id");
    if (item.category.empty()) throw ParseError(source, lineno, "empty category");
    if (table.find(item.id)) throw ParseError(source, lineno, "duplicate item id '" + item.id + "'");
    item.visual = parse_vector(fields[2], source, lineno, "visual");
    if (!table.empty() && item.visual.size() != table.feature_dim()) {
      throw ParseError(source, lineno, "expected " + std::to_string(table.feature_dim()) + " visual values, got " +
                                           std::to_string(item.visual.size()));
    }
    if (fields.size() == 4 && !trim(fields[3]).empty()) {
      item.text = parse_vector(fields[3], source, lineno, "text");
      if (table.text_dim() != 0 && item.text.size() != table.text_dim()) {
        throw ParseError(source, lineno, "expected " + std::to_string(table.text_dim()) + " text values, got " +
                                             std::to_string(item.text.size()));
      }
    }
    table.add(std::move(item));
  }
  return table;
}

TripletSet read_triplets(std::istream& in, const ItemTable& items, const std::string& source) {
  TripletSet out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (skippable(line)) continue;
    const auto tokens = split_ws(line);
    if (tokens.size() < 3 || tokens.size() > 4) {
      throw ParseError(source, lineno, "expected 'anchor positive negative [condition]', got " +
                                           std::to_string(tokens.size()) + " tokens");
    }
    Triplet t;
    t.anchor = resolve(items, tokens[0], source, lineno);
    t.positive = resolve(items, tokens[1], source, lineno);
    t.negative = resolve(items, tokens[2], source, lineno);
    if (t.anchor == t.positive || t.anchor == t.negative || t.positive == t.negative) {
      throw ValidationError(source + ":" + std::to_string(lineno) + ": triplet repeats an item id");
    }
    if (tokens.size() == 4) t.condition = std::string(tokens[3]);
    out.push_back(std::move(t));
  }
  return out;
}

OutfitSet read_outfits(std::istream& in, const ItemTable& items, const std::string& source) {
  OutfitSet out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (skippable(line)) continue;
    const auto tokens = split_ws(line);
    if (tokens.size() < 2) throw ParseError(source, lineno, "expected 'outfit_id label item...'");
    Outfit o;
    o.id = std::string(tokens[0]);
    if (tokens[1] == "1") o.compatible = true;
    else if (tokens[1] == "0") o.compatible = false;
    else throw ParseError(source, lineno, "label must be 1 or 0, got '" + std::string(tokens[1]) + "'");
    if (tokens.size() < 4) {
      throw ValidationError(source + ":" + std::to_string(lineno) + ": outfit '" + o.id + "' has fewer than 2 items");
    }
    for (std::size_t k = 2; k < tokens.size(); ++k) o.items.push_back(resolve(items, tokens[k], source, lineno));
    out.push_back(std::move(o));
  }
  return out;
}

FitbSet read_fitb(std::istream& in, const ItemTable& items, const std::string& source) {
  FitbSet out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (skippable(line)) continue;
    const auto parts = split(line, '|');
    if (parts.size() != 3) throw ParseError(source, lineno, "expected 'partial... | candidate... | answer_index'");
    FitbQuestion q;
    for (const auto id : split_ws(parts[0])) q.partial.push_back(resolve(items, id, source, lineno));
    for (const auto id : split_ws(parts[1])) q.candidates.push_back(resolve(items, id, source, lineno));
    const auto answer_text = trim(parts[2]);
    std::size_t answer = 0;
    const auto res = std::from_chars(answer_text.data(), answer_text.data() + answer_text.size(), answer);
    if (answer_text.empty() || res.ec != std::errc() || res.ptr != answer_text.data() + answer_text.size()) {
      throw ParseError(source, lineno, "answer index '" + std::string(answer_text) + "' is not a nonnegative integer");
    }
    q.answer = answer;
    const std::string where = source + ":" + std::to_string(lineno) + ": ";
    if (q.partial.empty()) throw ValidationError(where + "empty partial outfit");
    if (q.candidates.empty()) throw ValidationError(where + "no candidates");
    if (q.answer >= q.candidates.size()) throw ValidationError(where + "answer index out of range");
    out.push_back(std::move(q));
  }
  return out;
}

ItemTable load_feature_table(const std::filesystem::path& path) {
  return load_with(path, [](std::istream& in, const std::string& src) { return read_feature_table(in, src); });
}

TripletSet load_triplets(const std::filesystem::path& path, const ItemTable& items) {
  return load_with(path, [&](std::istream& in, const std::string& src) { return read_triplets(in, items, src); });
}

OutfitSet load_outfits(const std::filesystem::path& path, const ItemTable& items) {
  return load_with(path, [&](std::istream& in, const std::string& src) { return read_outfits(in, items, src); });
}

FitbSet load_fitb(const std::filesystem::path& path, const ItemTable& items) {
  return load_with(path, [&](std::istream& in, const std::string& src) { return read_fitb(in, items, src); });
}

void write_feature_table(std::ostream& out, const ItemTable& items) {
  write_line_file(out, [&](std::ostream& os) {
    for (const auto& item : items) {
      os << item.id << '\t' << item.category << '\t';
      for (std::size_t k = 0; k < item.visual.size(); ++k) os << (k ? "," : "") << format_double(item.visual[k]);
      if (!item.text.empty()) {
        os << '\t';
        for (std::size_t k = 0; k < item.text.size(); ++k) os << (k ? "," : "") << format_double(item.text[k]);
      }
      os << '\n';
    }
  });
}

void write_triplets(std::ostream& out, const TripletSet& triplets, const ItemTable& items) {
  write_line_file(out, [&](std::ostream& os) {
    for (const auto& t : triplets) {
      os << id_of(items, t.anchor) << ' ' << id_of(items, t.positive) << ' ' << id_of(items, t.negative);
      if (t.condition) os << ' ' << *t.condition;
      os << '\n';
    }
  });
}

void write_outfits(std::ostream& out, const OutfitSet& outfits, const ItemTable& items) {
  write_line_file(out, [&](std::ostream& os) {
    for (const auto& o : outfits) {
      os << o.id << ' ' << (o.compatible ? '1' : '0');
      for (auto i : o.items) os << ' ' << id_of(items, i);
      os << '\n';
    }
  });
}

void write_fitb(std::ostream& out, const FitbSet& questions, const ItemTable& items) {
  write_line_file(out, [&](std::ostream& os) {
    for (const auto& q : questions) {
      for (std::size_t k = 0; k < q.partial.size(); ++k) os << (k ? " " : "") << id_of(items, q.partial[k]);
      os << " |";
      for (auto c : q.candidates) os << ' ' << id_of(items, c);
      os << " | " << q.answer << '\n';
    }
  });
}

TripletSet inject_noise(const TripletSet& triplets, double fraction, const ItemTable& items, std::uint64_t seed) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) throw ContractError("noise fraction must lie in [0, 1]");
  const auto count = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(triplets.size())));
  TripletSet out = triplets;
  if (count == 0) return out;
  if (items.size() < 3) throw InputError("noise injection needs at least 3 items");

  Rng rng(derive_seed(seed, 0x6e01));
  std::vector<std::size_t> order(triplets.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  for (std::size_t k = 0; k < count; ++k) {
    Triplet& t = out[order[k]];
    t.anchor = uniform_index(rng, items.size());
    do t.positive = uniform_index(rng, items.size()); while (t.positive == t.anchor);
    do t.negative = uniform_index(rng, items.size()); while (t.negative == t.anchor || t.negative == t.positive);
  }
  return out;
}

std::pair<TripletSet, TripletSet> split_triplets(const TripletSet& triplets, double holdout_fraction,
                                                 std::uint64_t seed) {
  if (!(holdout_fraction >= 0.0 && holdout_fraction <= 1.0)) {
    throw ContractError("holdout fraction must lie in [0, 1]");
  }
  const auto holdout = static_cast<std::size_t>(std::llround(holdout_fraction * static_cast<double>(triplets.size())));
  Rng rng(derive_seed(seed, 0x5b17));
  std::vector<std::size_t> order(triplets.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<bool> held(triplets.size(), false);
  for (std::size_t k = 0; k < holdout; ++k) held[order[k]] = true;
  std::pair<TripletSet, TripletSet> out;
  for (std::size_t i = 0; i < triplets.size(); ++i) (held[i] ? out.second : out.first).push_back(triplets[i]);
  return out;
}

CategoryFilterResult filter_categories(const ItemTable& items, const TripletSet& triplets, const FitbSet& fitb,
                                       const std::set<std::string>& excluded) {
  std::set<std::string> present;
  for (const auto& item : items) present.insert(item.category);
  for (const auto& c : excluded) {
    if (!present.contains(c)) throw InputError("excluded category '" + c + "' does not occur in the item table");
  }
  std::vector<bool> out_of_bounds(items.size());
  for (std::size_t i = 0; i < items.size(); ++i) out_of_bounds[i] = excluded.contains(items[i].category);

  CategoryFilterResult result;
  for (const auto& t : triplets) {
    if (!out_of_bounds[t.anchor] && !out_of_bounds[t.positive] && !out_of_bounds[t.negative]) {
      result.train_triplets.push_back(t);
    }
  }
  if (!triplets.empty() && result.train_triplets.empty()) {
    throw InputError("category filter leaves no training triplets");
  }

  for (const auto& q : fitb) {
    const auto touches = [&](std::size_t i) { return out_of_bounds[i]; };
    const bool any_excluded = std::any_of(q.partial.begin(), q.partial.end(), touches) ||
                              std::any_of(q.candidates.begin(), q.candidates.end(), touches);
    if (!any_excluded) result.train_fitb.push_back(q);
    if (!excluded.empty() && std::all_of(q.candidates.begin(), q.candidates.end(), touches)) {
      result.eval_fitb.push_back(q);
    }
  }
  return result;
}

Vector hash_text_features(const std::vector<std::string>& tokens, std::size_t dim) {
  if (dim == 0) throw ContractError("hash_text_features: dimension must be at least 1");
  Vector out(dim, 0.0);
  for (const auto& token : tokens) {
    const std::uint64_t h = fnv1a(token);
    out[mix_seed(h) % dim] += (h >> 63) ? -1.0 : 1.0;
  }
  const double norm = std::sqrt(squared_norm(out));
  if (norm > 0.0) {
    for (auto& v : out) v /= norm;
  }
  return out;
}

}  // namespace sce
