#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "helpers.hpp"
#include "sce/data.hpp"
#include "sce/error.hpp"

using namespace sce;
using testing::kFixtures;

namespace {

ItemTable table_from(const std::string& text) {
  std::istringstream in(text);
  return read_feature_table(in, "t");
}

ItemTable fixture_items() { return load_feature_table(kFixtures / "items.tsv"); }

std::size_t parse_error_line(const std::function<void()>& f) {
  try {
    f();
  } catch (const ParseError& e) {
    return e.line();
  }
  return 0;
}

}  // namespace

TEST_CASE("feature table parsing") {
  const ItemTable two = table_from("a\ttop\t1,2,3\nb\tshoe\t4,5,6\n");
  CHECK(two.size() == 2);
  CHECK(two.feature_dim() == 3);
  CHECK(two[1].visual == Vector{4, 5, 6});
  CHECK(two.index_of("b") == 1);
  CHECK_THROWS_AS(two.index_of("zz"), ReferenceError);

  try {
    table_from("a\ttop\t1,2\na\ttop\t3,4\n");
    FAIL("duplicate accepted");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("'a'") != std::string::npos);
  }
  CHECK(parse_error_line([] { table_from("# c\na\ttop\t1,2,3\nb\ttop\t1,2\n"); }) == 3);

  const ItemTable items = fixture_items();
  CHECK(items.size() == 8);
  CHECK(items.text_dim() == 3);
  CHECK(items.all_have_text());
}

TEST_CASE("triplet parsing") {
  const ItemTable items = fixture_items();
  std::istringstream three("a1 a2 a3\nb1 b2 b3 colour\n\n# note\nc1 c2 a1\n");
  const TripletSet t = read_triplets(three, items);
  CHECK(t.size() == 3);
  CHECK_FALSE(t[0].condition.has_value());
  CHECK(t[1].condition == std::optional<std::string>("colour"));
  CHECK(t[2].anchor == items.index_of("c1"));

  std::istringstream repeat("a1 a1 b1\n");
  CHECK_THROWS_AS(read_triplets(repeat, items), ValidationError);
  std::istringstream unknown("a1 a2 nope\n");
  CHECK_THROWS_AS(read_triplets(unknown, items), ReferenceError);
}

TEST_CASE("outfit and FITB parsing") {
  const ItemTable items = fixture_items();
  const OutfitSet outfits = load_outfits(kFixtures / "outfits.txt", items);
  REQUIRE(outfits.size() == 4);
  CHECK(outfits[0].compatible);
  CHECK_FALSE(outfits[1].compatible);
  CHECK(outfits[2].items.size() == 2);

  const FitbSet fitb = load_fitb(kFixtures / "fitb.txt", items);
  REQUIRE(fitb.size() == 2);
  CHECK(fitb[0].partial.size() == 2);
  CHECK(fitb[1].answer == 2);
  CHECK(fitb[1].candidates[2] == items.index_of("b1"));
}

TEST_CASE("every malformed fixture is rejected with its line number") {
  const ItemTable items = fixture_items();
  std::ifstream manifest(kFixtures / "bad" / "manifest.tsv");
  REQUIRE(manifest);
  std::size_t checked = 0;
  for (std::string line; std::getline(manifest, line);) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream fields(line);
    std::string file, role;
    std::size_t expected = 0;
    fields >> file >> role >> expected;
    if (role == "checkpoint" || role == "config") continue;  // covered elsewhere
    const auto path = kFixtures / "bad" / file;
    INFO(file);
    try {
      if (role == "items") load_feature_table(path);
      if (role == "train_triplets") load_triplets(path, items);
      if (role == "outfits") load_outfits(path, items);
      if (role == "fitb") load_fitb(path, items);
      FAIL("accepted");
    } catch (const InputError& e) {
      const std::string tag = file + ":" + std::to_string(expected) + ":";
      CHECK(std::string(e.what()).find(tag) != std::string::npos);
    }
    ++checked;
  }
  CHECK(checked >= 13);
}

TEST_CASE("missing files are i/o errors") {
  CHECK_THROWS_AS(load_feature_table(kFixtures / "does-not-exist.tsv"), IoError);
}

TEST_CASE("writers round-trip") {
  const ItemTable items = fixture_items();
  std::ostringstream out;
  write_feature_table(out, items);
  const ItemTable again = table_from(out.str());
  REQUIRE(again.size() == items.size());
  for (std::size_t i = 0; i < items.size(); ++i) {
    CHECK(again[i].visual == items[i].visual);
    CHECK(again[i].text == items[i].text);
  }

  const TripletSet t = load_triplets(kFixtures / "triplets.txt", items);
  std::ostringstream tout;
  write_triplets(tout, t, items);
  std::istringstream tin(tout.str());
  CHECK(read_triplets(tin, items) == t);

  const OutfitSet o = load_outfits(kFixtures / "outfits.txt", items);
  std::ostringstream oout;
  write_outfits(oout, o, items);
  std::istringstream oin(oout.str());
  CHECK(read_outfits(oin, items) == o);

  const FitbSet f = load_fitb(kFixtures / "fitb.txt", items);
  std::ostringstream fout;
  write_fitb(fout, f, items);
  std::istringstream fin(fout.str());
  CHECK(read_fitb(fin, items) == f);
}

TEST_CASE("format_double is shortest round-trip") {
  Rng rng(1);
  for (int k = 0; k < 1000; ++k) {
    const double v = gaussian(rng, 1e3) * std::pow(10.0, static_cast<double>(uniform_index(rng, 20)) - 10.0);
    CHECK(parse_double(format_double(v)) == v);
  }
  CHECK(format_double(0.1) == "0.1");
  CHECK_FALSE(parse_double("1.5x").has_value());
  CHECK_FALSE(parse_double("inf").has_value());
}

TEST_CASE("inject_noise") {
  const ItemTable items = testing::random_items(50, 3, 0, 1);
  TripletSet base;
  for (std::size_t i = 0; i + 2 < 50; ++i) base.push_back({i, i + 1, i + 2, "c" + std::to_string(i % 4)});

  CHECK(inject_noise(base, 0.0, items, 3) == base);

  const TripletSet all = inject_noise(base, 1.0, items, 3);
  std::size_t changed = 0;
  for (std::size_t i = 0; i < base.size(); ++i) {
    changed += !(all[i] == base[i]);
    CHECK(all[i].anchor != all[i].positive);
    CHECK(all[i].anchor != all[i].negative);
    CHECK(all[i].positive != all[i].negative);
    CHECK(all[i].condition == base[i].condition);
  }
  CHECK(changed >= base.size() - 2);  // a random draw may coincide with the original

  CHECK(inject_noise(base, 0.3, items, 3) == inject_noise(base, 0.3, items, 3));
  CHECK_THROWS_AS(inject_noise(base, 1.5, items, 3), ContractError);
}

TEST_CASE("inject_noise at the 12.5% level replaces 25000 of 200000 records") {
  const ItemTable items = testing::random_items(40, 2, 0, 2);
  // All records identical and degenerate-free, so replaced ones are detectable
  // unless the random draw repeats (0, 1, 2) exactly.
  const TripletSet base(200000, Triplet{0, 1, 2, std::nullopt});
  const TripletSet noisy = inject_noise(base, 0.125, items, 11);
  std::size_t changed = 0;
  for (const auto& t : noisy) changed += !(t == base[0]);
  CHECK(changed <= 25000);
  CHECK(changed >= 24990);
}

TEST_CASE("split_triplets") {
  TripletSet base;
  for (std::size_t i = 0; i < 100; ++i) base.push_back({i, i + 1, i + 2, std::nullopt});
  const auto [train, held] = split_triplets(base, 0.1, 5);
  CHECK(held.size() == 10);
  CHECK(train.size() == 90);
  const auto again = split_triplets(base, 0.1, 5);
  CHECK(again.first == train);
  std::set<std::size_t> anchors;
  for (const auto& t : train) anchors.insert(t.anchor);
  for (const auto& t : held) CHECK_FALSE(anchors.contains(t.anchor));
}

TEST_CASE("filter_categories") {
  SyntheticSpec spec;
  spec.items = 300;
  spec.triplets_per_condition = 300;
  spec.fitb_questions = 100;
  const SyntheticData data = generate_synthetic(spec);

  const auto none = filter_categories(data.items, data.triplets, data.fitb, {});
  CHECK(none.train_triplets == data.triplets);
  CHECK(none.train_fitb == data.fitb);
  CHECK(none.eval_fitb.empty());

  const std::set<std::string> excluded{synthetic_category(1, 0), synthetic_category(2, 2)};
  const auto mixed = filter_categories(data.items, data.triplets, data.fitb, excluded);
  auto out = [&](std::size_t i) { return excluded.contains(data.items[i].category); };
  std::size_t expected_train = 0;
  for (const auto& t : data.triplets) expected_train += !out(t.anchor) && !out(t.positive) && !out(t.negative);
  CHECK(mixed.train_triplets.size() == expected_train);
  for (const auto& t : mixed.train_triplets) {
    CHECK_FALSE(out(t.anchor));
    CHECK_FALSE(out(t.positive));
    CHECK_FALSE(out(t.negative));
  }
  std::size_t expected_eval = 0;
  for (const auto& q : data.fitb) {
    expected_eval += std::all_of(q.candidates.begin(), q.candidates.end(), out);
  }
  CHECK(mixed.eval_fitb.size() == expected_eval);
  CHECK(expected_eval > 0);

  std::set<std::string> every;
  for (const auto& item : data.items) every.insert(item.category);
  CHECK_THROWS_AS(filter_categories(data.items, data.triplets, data.fitb, every), InputError);
  CHECK_THROWS_AS(filter_categories(data.items, data.triplets, data.fitb, {"nope"}), InputError);
}

TEST_CASE("hash_text_features") {
  CHECK(hash_text_features({}, 8) == Vector(8, 0.0));
  CHECK(hash_text_features({"red", "wool", "coat"}, 16) == hash_text_features({"coat", "red", "wool"}, 16));
  const Vector v = hash_text_features({"red", "coat"}, 16);
  CHECK(squared_norm(v) == doctest::Approx(1.0));

  const std::vector<std::string> words{"red",   "blue",  "green", "black", "white", "wool",  "silk",   "denim",
                                       "coat",  "shirt", "skirt", "boots", "heels", "scarf", "velvet", "linen"};
  std::set<Vector> distinct;
  for (const auto& w : words) {
    const Vector h = hash_text_features({w}, 64);
    CHECK(std::count_if(h.begin(), h.end(), [](double x) { return x != 0.0; }) == 1);
    CHECK(squared_norm(h) == 1.0);
    distinct.insert(h);
  }
  CHECK(distinct.size() >= 12);
}

TEST_CASE("synthetic generator") {
  SyntheticSpec spec;
  spec.items = 400;
  spec.triplets_per_condition = 500;
  spec.outfits = 40;
  spec.fitb_questions = 40;
  const SyntheticData a = generate_synthetic(spec);
  const SyntheticData b = generate_synthetic(spec);

  SUBCASE("deterministic") {
    std::ostringstream sa, sb;
    write_feature_table(sa, a.items);
    write_triplets(sa, a.triplets, a.items);
    write_feature_table(sb, b.items);
    write_triplets(sb, b.triplets, b.items);
    CHECK(sa.str() == sb.str());
  }

  SUBCASE("every triplet agrees with its latent block") {
    const std::size_t w = spec.block_width;
    auto block_distance = [&](std::size_t i, std::size_t j, std::size_t c) {
      double s = 0.0;
      for (std::size_t k = c * w; k < (c + 1) * w; ++k) s += std::pow(a.latent(i, k) - a.latent(j, k), 2);
      return s;
    };
    CHECK(a.triplets.size() == 4 * spec.triplets_per_condition);
    for (const auto& t : a.triplets) {
      REQUIRE(t.condition.has_value());
      const std::size_t c = std::stoul(t.condition->substr(1));
      CHECK(block_distance(t.anchor, t.positive, c) < block_distance(t.anchor, t.negative, c));
    }
  }

  SUBCASE("outfits and questions are well formed") {
    std::size_t compatible = 0;
    for (const auto& o : a.outfits) {
      compatible += o.compatible;
      CHECK(o.items.size() == spec.outfit_size);
    }
    CHECK(compatible == a.outfits.size() / 2);
    for (const auto& q : a.fitb) {
      CHECK(q.candidates.size() == spec.fitb_candidates);
      CHECK(q.answer < q.candidates.size());
    }
  }

  SUBCASE("K = 1 is single-notion data") {
    SyntheticSpec one = spec;
    one.conditions = 1;
    const SyntheticData d = generate_synthetic(one);
    std::set<std::string> labels;
    for (const auto& t : d.triplets) labels.insert(*t.condition);
    CHECK(labels == std::set<std::string>{"c0"});
  }

  SUBCASE("noise-free features still satisfy the oracle") {
    SyntheticSpec clean = spec;
    clean.noise_scale = 0.0;
    const SyntheticData d = generate_synthetic(clean);
    const std::size_t w = clean.block_width;
    for (const auto& t : d.triplets) {
      const std::size_t c = std::stoul(t.condition->substr(1));
      double dp = 0.0, dn = 0.0;
      for (std::size_t k = c * w; k < (c + 1) * w; ++k) {
        dp += std::pow(d.latent(t.anchor, k) - d.latent(t.positive, k), 2);
        dn += std::pow(d.latent(t.anchor, k) - d.latent(t.negative, k), 2);
      }
      CHECK(dp < dn);
    }
  }

  SUBCASE("text features on request") {
    SyntheticSpec text = spec;
    text.text_dim = 6;
    const SyntheticData d = generate_synthetic(text);
    CHECK(d.items.all_have_text());
    CHECK(d.items.text_dim() == 6);
  }

  SUBCASE("invalid specs") {
    SyntheticSpec bad = spec;
    bad.conditions = 0;
    CHECK_THROWS_AS(generate_synthetic(bad), ConfigError);
  }
}
