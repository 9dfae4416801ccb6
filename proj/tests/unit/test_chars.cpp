#include <doctest.h>

#include <cmath>
#include <set>
#include <sstream>

#include "corpus.hpp"
#include "oracles.hpp"
#include "phonosig/chars.hpp"
#include "phonosig/error.hpp"
#include "phonosig/rng.hpp"

using namespace phonosig;

namespace {

WordlistLoad parse(const std::string& text) {
  std::istringstream in(text);
  return parse_wordlists(in, "test.tsv");
}

std::vector<Doculect> docs(const std::string& rows) { return parse("doculect\tform\n" + rows).doculects; }

std::optional<double> value(const CharacterMatrix& m, const std::string& doculect, const std::string& key) {
  const auto col = m.find_key(CharacterKey::parse(key));
  REQUIRE(col);
  for (std::size_t r = 0; r < m.rows(); ++r)
    if (m.doculects()[r] == doculect) return m.at(r, *col);
  FAIL("no doculect " << doculect);
  return std::nullopt;
}

std::string error_of(const std::string& text) {
  try {
    parse(text);
  } catch (const InputError& e) {
    return e.what();
  }
  return "";
}

ClassMap manner_map(std::map<std::string, std::string, std::less<>> classes) {
  return ClassMap{ClassScheme::manner, std::move(classes)};
}

}  // namespace

TEST_CASE("load wordlists") {
  const auto load = parse("doculect\tform\nL1\tp a\nL1\ta p\r\n\nL2\tk i\n");
  REQUIRE(load.doculects.size() == 2);
  CHECK(load.doculects[0].id == "L1");
  CHECK(load.doculects[0].forms.size() == 2);
  CHECK(load.doculects[0].forms[1].segments == std::vector<std::string>{"a", "p"});
  CHECK(load.doculects[1].id == "L2");

  CHECK(error_of("doculect\tform\nL1\tp # a\n").find("test.tsv:2") != std::string::npos);
  CHECK(error_of("doculect\tform\nL1\tp # a\n").find("reserved") != std::string::npos);
  CHECK(error_of("doculect\tform\nL1\tp a\nL1\t  \n").find("test.tsv:3: empty form") != std::string::npos);
  CHECK(error_of("doculect\tform\nL1\tp a\ndoculect\tform\n").find("test.tsv:3: duplicate header") != std::string::npos);
  CHECK(error_of("doculect\tform\nL1\tp a\textra\n").find("test.tsv:2") != std::string::npos);
  CHECK(error_of("lang\tform\nL1\tp a\n").find("header") != std::string::npos);
  CHECK(error_of("doculect\tform\n").find("no forms") != std::string::npos);
  CHECK(error_of("doculect\tform\nL1\tp>a\n").find("'>'") != std::string::npos);

  const auto dup = parse("doculect\tform\nL1\tp a\nL1\tp  a\nL1\ta\n");
  CHECK(dup.doculects[0].forms.size() == 2);
  CHECK(dup.duplicates_dropped == 1);
  CHECK(dup.warnings.size() == 1);
}

TEST_CASE("inventories") {
  const auto d = docs("L1\tp a\nL1\ta p\nL2\tk i\n");
  CHECK(inventory(d[0]) == std::set<std::string>{"a", "p"});
  std::vector<std::string> both;
  const auto i0 = inventory(d[0]), i1 = inventory(d[1]);
  std::set_intersection(i0.begin(), i0.end(), i1.begin(), i1.end(), std::back_inserter(both));
  CHECK(both.empty());

  // 25 tokens spread over forms so that each appears at least once.
  std::vector<std::string> tokens;
  for (int i = 0; i < 25; ++i) tokens.push_back("s" + std::to_string(i));
  Doculect big{"X", {}};
  Rng rng(1);
  for (int f = 0; f < 40; ++f) {
    SegmentedForm form;
    for (int k = 0; k < 4; ++k) form.segments.push_back(tokens[(f * 4 + k) % 25]);
    big.forms.push_back(form);
  }
  std::set<std::string> oracle;
  for (const auto& f : big.forms)
    for (const auto& s : f.segments) oracle.insert(s);
  CHECK(oracle.size() == 25);
  CHECK(inventory(big).size() == 25);
}

TEST_CASE("binary biphones") {
  const auto d = docs("L1\tp a\nL2\tp i\nL2\ta p\n");
  const auto m = binary_biphone_matrix(d);
  CHECK(m.kind() == CharacterKind::binary);
  CHECK(value(m, "L1", "#>p") == 1.0);
  CHECK(value(m, "L1", "p>a") == 1.0);
  CHECK(value(m, "L1", "a>#") == 1.0);
  CHECK_FALSE(value(m, "L1", "p>i"));
  CHECK(value(m, "L1", "a>p") == 0.0);
  CHECK(value(m, "L2", "p>a") == 0.0);
  // Keys are sorted by (first, second) and never "#>#".
  for (std::size_t i = 1; i < m.cols(); ++i) CHECK(m.keys()[i - 1] < m.keys()[i]);
  CHECK_FALSE(m.find_key(CharacterKey{"", "#", "#"}));

  const auto twins = binary_biphone_matrix(docs("A\tp a\nA\tt a p\nB\tp a\nB\tt a p\nC\tk\n"));
  for (std::size_t c = 0; c < twins.cols(); ++c) CHECK(twins.at(0, c) == twins.at(1, c));
}

TEST_CASE("segment transition probabilities") {
  const auto d = docs("L1\tp a\nL1\tp i\nL1\ta p\n");
  const auto f = forward_transition_matrix(d);
  CHECK(value(f, "L1", "p>a") == 1.0 / 3.0);
  CHECK(value(f, "L1", "p>i") == 1.0 / 3.0);
  CHECK(value(f, "L1", "p>#") == 1.0 / 3.0);
  const auto b = backward_transition_matrix(d);
  CHECK(value(b, "L1", "p>a") == 0.5);
  CHECK(value(b, "L1", "#>a") == 0.5);

  const auto single = docs("S\ta\n");
  CHECK(value(forward_transition_matrix(single), "S", "#>a") == 1.0);
  CHECK(value(forward_transition_matrix(single), "S", "a>#") == 1.0);
  CHECK(value(backward_transition_matrix(single), "S", "#>a") == 1.0);
}

TEST_CASE("extraction agrees with direct pair counting on a synthetic corpus") {
  const auto corpus = testing::synthetic_corpus(5, 12);
  const auto bin = binary_biphone_matrix(corpus);
  const auto fwd = forward_transition_matrix(corpus);
  const auto bwd = backward_transition_matrix(corpus);
  REQUIRE(bin.keys().size() == fwd.keys().size());
  for (std::size_t r = 0; r < corpus.size(); ++r) {
    const auto counts = oracle::pair_counts(corpus[r]);
    auto inv = inventory(corpus[r]);
    inv.insert("#");
    std::map<std::string, double> first_total, second_total;
    for (const auto& [k, n] : counts) {
      const auto key = CharacterKey::parse(k);
      first_total[key.first] += n;
      second_total[key.second] += n;
    }
    std::map<std::string, double> fsum, bsum;
    for (std::size_t c = 0; c < bin.cols(); ++c) {
      const auto& key = bin.keys()[c];
      const bool present = inv.count(key.first) && inv.count(key.second);
      const auto it = counts.find(key.to_string());
      const double n = it == counts.end() ? 0.0 : it->second;
      CHECK(bin.at(r, c).has_value() == present);
      CHECK(fwd.at(r, c).has_value() == present);
      if (!present) continue;
      CHECK(*bin.at(r, c) == (n > 0 ? 1.0 : 0.0));
      CHECK(*fwd.at(r, c) == n / first_total[key.first]);
      CHECK(*bwd.at(r, c) == n / second_total[key.second]);
      CHECK((*bin.at(r, c) == 1.0) == (*fwd.at(r, c) > 0.0));
      fsum[key.first] += *fwd.at(r, c);
      bsum[key.second] += *bwd.at(r, c);
    }
    for (const auto& [tok, s] : fsum) CHECK(std::abs(s - 1.0) < 1e-9);
    for (const auto& [tok, s] : bsum) CHECK(std::abs(s - 1.0) < 1e-9);
    CHECK(fsum.size() == inv.size());
  }
}

TEST_CASE("class transitions") {
  const auto m1 = class_transition_matrix(docs("L\tp a\n"), manner_map({{"p", "obstruent"}, {"a", "vowel"}}),
                                          Direction::forward);
  CHECK(m1.keys()[0].scheme == "manner");
  CHECK(value(m1, "L", "manner:obstruent>vowel") == 1.0);

  const auto m2 = class_transition_matrix(docs("L\tn a n a\n"), manner_map({{"n", "nasal"}, {"a", "vowel"}}),
                                          Direction::forward);
  CHECK(value(m2, "L", "manner:nasal>vowel") == 1.0);
  CHECK(value(m2, "L", "manner:vowel>nasal") == 0.5);
  CHECK(value(m2, "L", "manner:vowel>#") == 0.5);

  CHECK_THROWS_AS(class_transition_matrix(docs("L\tn a x\n"), manner_map({{"n", "nasal"}, {"a", "vowel"}}),
                                          Direction::forward),
                  InputError);
}

TEST_CASE("class maps") {
  std::istringstream in(testing::classmap_tsv());
  const auto maps = parse_class_maps(in, "classes.tsv");
  REQUIRE(maps.size() == 3);
  CHECK(maps[0].scheme == ClassScheme::place);
  CHECK(maps[2].class_of("ɹ") == "rhotic glide");
  CHECK(maps[1].class_of("#") == "#");
  CHECK_THROWS_AS(maps[0].class_of("zz"), InputError);

  std::istringstream bad("segment\tplace\tmajor_place\tmanner\np\tlabial\tlabial\tstop\n");
  CHECK_THROWS_WITH_AS(parse_class_maps(bad, "c.tsv"), doctest::Contains("c.tsv:2"), InputError);
  std::istringstream header("segment\tplace\n");
  CHECK_THROWS_AS(parse_class_maps(header, "c.tsv"), InputError);
}

TEST_CASE("class counts are projected segment counts") {
  const auto corpus = testing::synthetic_corpus(9, 10);
  std::istringstream in(testing::classmap_tsv());
  const auto maps = parse_class_maps(in);
  const auto seg_counts = [&](std::size_t r) { return oracle::pair_counts(corpus[r]); };
  for (const auto& map : maps) {
    const auto fwd = class_transition_matrix(corpus, map, Direction::forward);
    const auto bwd = class_transition_matrix(corpus, map, Direction::backward);
    const auto n_classes = scheme_classes(map.scheme).size();
    CHECK(fwd.cols() <= n_classes * n_classes - 1);
    for (std::size_t r = 0; r < corpus.size(); ++r) {
      std::map<std::pair<std::string, std::string>, double> projected;
      std::map<std::string, double> out_total, in_total;
      for (const auto& [k, n] : seg_counts(r)) {
        const auto key = CharacterKey::parse(k);
        const auto a = map.class_of(key.first), b = map.class_of(key.second);
        projected[{a, b}] += n;
        out_total[a] += n;
        in_total[b] += n;
      }
      for (std::size_t c = 0; c < fwd.cols(); ++c) {
        const auto& key = fwd.keys()[c];
        const bool present = out_total.count(key.first) && in_total.count(key.second);
        REQUIRE(fwd.at(r, c).has_value() == present);
        if (!present) continue;
        const double n = projected.count({key.first, key.second}) ? projected[{key.first, key.second}] : 0.0;
        CHECK(std::abs(*fwd.at(r, c) - n / out_total[key.first]) < 1e-12);
        CHECK(std::abs(*bwd.at(r, c) - n / in_total[key.second]) < 1e-12);
      }
    }
  }
}

TEST_CASE("filtering") {
  std::vector<std::string> ids;
  for (int i = 0; i < 60; ++i) ids.push_back("d" + std::to_string(i));
  CharacterMatrix m(CharacterKind::binary, ids,
                    {CharacterKey{"", "a", "b"}, CharacterKey{"", "a", "c"}, CharacterKey{"", "a", "d"}});
  for (int r = 0; r < 60; ++r) {
    m.set(r, 0, r < 49 ? std::optional<double>(r % 2) : std::nullopt);
    m.set(r, 1, 1.0);
    m.set(r, 2, static_cast<double>(r % 3 == 0));
  }
  FilterReport rep;
  const auto kept = filter_characters(m, {50, true, false}, &rep);
  REQUIRE(kept.cols() == 1);
  CHECK(kept.keys()[0].second == "d");
  CHECK(rep.input == 3);
  CHECK(rep.too_few_values == 1);
  CHECK(rep.no_variation == 1);
  CHECK(rep.kept == 1);
  CHECK(filter_characters(m, {0, false, false}).cols() == 3);

  CharacterMatrix f(CharacterKind::forward, std::vector<std::string>(ids.begin(), ids.begin() + 30),
                    {CharacterKey{"", "a", "b"}});
  for (int r = 0; r < 25; ++r) f.set(r, 0, r < 6 ? 0.0 : 0.1 + 0.01 * r);
  CHECK(filter_characters(f, {20, true, true}).cols() == 0);
  const auto no_drop = filter_characters(f, {20, true, false});
  REQUIRE(no_drop.cols() == 1);
  CHECK(no_drop.at(0, 0) == 0.0);
  f.set(25, 0, 0.5);
  const auto dropped = filter_characters(f, {20, true, true});
  REQUIRE(dropped.cols() == 1);
  CHECK_FALSE(dropped.at(0, 0));
  // Binary zeros are data, never NA.
  CHECK(filter_characters(m, {50, true, true}).cols() == 1);
}

TEST_CASE("skew") {
  std::vector<std::optional<double>> col(107, 1.0);
  col.insert(col.end(), 4, 0.0);
  col.push_back(std::nullopt);
  CHECK(std::abs(skew(col) - 107.0 / 111.0) < 1e-15);
  CHECK(std::round(skew(col) * 100) / 100 == 0.96);
  std::vector<std::optional<double>> half{1.0, 0.0, 1.0, 0.0};
  CHECK(skew(half) == 0.5);
  std::vector<std::optional<double>> ones{1.0, 1.0, 1.0};
  CHECK(skew(ones) == 1.0);
  std::vector<std::optional<double>> none{std::nullopt};
  CHECK_THROWS_AS(skew(none), DomainError);
}

TEST_CASE("Tukey normalization") {
  Rng rng(33);
  std::vector<std::optional<double>> normal;
  while (normal.size() < 1000) {
    const double x = 4.0 + rng.normal();
    if (x > 0) normal.push_back(x);
  }
  const auto n = tukey_normalize(normal);
  CHECK_FALSE(n.fallback);
  CHECK(n.lambda >= 0.8);
  CHECK(n.lambda <= 1.2);

  std::vector<std::optional<double>> lognormal;
  for (int i = 0; i < 500; ++i) lognormal.push_back(std::exp(rng.normal()));
  lognormal[10] = std::nullopt;
  const auto l = tukey_normalize(lognormal);
  CHECK(l.lambda >= -0.2);
  CHECK(l.lambda <= 0.2);
  CHECK_FALSE(l.values[10]);
  // Order preserved.
  for (std::size_t i = 0; i + 1 < lognormal.size(); ++i) {
    if (!lognormal[i] || !lognormal[i + 1]) continue;
    CHECK((*lognormal[i] < *lognormal[i + 1]) == (*l.values[i] < *l.values[i + 1]));
  }

  std::vector<std::optional<double>> flat{0.5, 0.5, 0.5 + 1e-12, 0.5};
  const auto fb = tukey_normalize(flat);
  CHECK(fb.fallback);
  CHECK(fb.lambda == 1.0);
  CHECK(fb.values == flat);

  std::vector<std::optional<double>> bad{0.1, 0.0, 0.3, 0.4};
  CHECK_THROWS_AS(tukey_normalize(bad), DomainError);

  CHECK(tukey_transform(4.0, 0.5) == 2.0);
  CHECK(tukey_transform(std::exp(1.0), 0.0) == doctest::Approx(1.0));
  CHECK(tukey_transform(2.0, -1.0) == -0.5);
}

TEST_CASE("character CSV round trip") {
  const auto d = docs("L1\tp a\nL1\tb a\nL2\tp i\n");
  auto m = forward_transition_matrix(d);
  std::istringstream cin(testing::classmap_tsv());
  const auto maps = parse_class_maps(cin);
  std::ostringstream out;
  write_character_csv(out, m);
  std::istringstream in(out.str());
  const auto back = parse_character_csv(in);
  CHECK(back.kind() == CharacterKind::frequency);
  REQUIRE(back.cols() == m.cols());
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < m.cols(); ++c) CHECK(back.at(r, c) == m.at(r, c));
  CHECK(out.str().find("NA") != std::string::npos);

  const auto cls = class_transition_matrix(d, maps[2], Direction::forward);
  std::ostringstream cout;
  write_character_csv(cout, cls);
  CHECK(cout.str().rfind("doculect,manner:#>obstruent", 0) == 0);
  std::istringstream cback(cout.str());
  CHECK(parse_character_csv(cback).keys()[0] == cls.keys()[0]);

  std::ostringstream bout;
  write_character_csv(bout, binary_biphone_matrix(d));
  std::istringstream bin(bout.str());
  CHECK(parse_character_csv(bin).kind() == CharacterKind::binary);

  std::istringstream bad("doculect,a>b\nL1,x\n");
  CHECK_THROWS_WITH_AS(parse_character_csv(bad, "c.csv"), doctest::Contains("c.csv:2"), InputError);
  CHECK(CharacterKey::parse("place:labial>vowel").scheme == "place");
  CHECK(CharacterKey::parse("p:x>a").first == "p:x");
  CHECK_THROWS_AS(CharacterKey::parse("ab"), InputError);
}
