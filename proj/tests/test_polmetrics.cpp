#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "polnet/error.hpp"
#include "polnet/polmetrics.hpp"

using namespace polnet;

namespace {

struct Moments {
  double mean = 0, var = 0;
};

// Enumerate every distinct arrangement of the pool's colours; the first
// draws[0] positions go to product 0, the next draws[1] to product 1, ...
// All distinct permutations of a multiset are equally likely under uniform
// shuffling, so plain averaging gives the null distribution of O.
Moments enumerate_overlap(const std::vector<std::uint32_t>& draws, int red, int blue) {
  std::vector<int> colours(static_cast<std::size_t>(red), 0);
  colours.resize(static_cast<std::size_t>(red + blue), 1);
  double n = 0, s = 0, s2 = 0;
  do {
    std::size_t pos = 0;
    int o = 0;
    for (auto k : draws) {
      bool r = false, b = false;
      for (std::uint32_t i = 0; i < k; ++i, ++pos) (colours[pos] ? b : r) = true;
      o += r && b;
    }
    n += 1;
    s += o;
    s2 += static_cast<double>(o) * o;
  } while (std::next_permutation(colours.begin(), colours.end()));
  Moments m;
  m.mean = s / n;
  m.var = s2 / n - m.mean * m.mean;
  return m;
}

void label(HeteroGraph& g, NodeId v, PolClass cls) {
  PoliticalLabel l;
  l.product = v;
  l.cls = cls;
  g.labels().upsert(l);
}

/// A category of `n` products, each joined to 4 distinct political products out
/// of 20 red and 20 blue. When `pure`, the first half touches only red products
/// and the second half only blue; otherwise targets are uniform over all 40.
HeteroGraph planted_market(std::size_t n, bool pure, std::uint64_t seed) {
  HeteroGraph g;
  std::vector<NodeId> red, blue, all;
  for (int i = 0; i < 20; ++i) {
    red.push_back(g.add_node(NodeKind::kProduct, "red" + std::to_string(i)));
    blue.push_back(g.add_node(NodeKind::kProduct, "blue" + std::to_string(i)));
  }
  for (NodeId v : red) label(g, v, PolClass::kConservative);
  for (NodeId v : blue) label(g, v, PolClass::kLiberal);
  all = red;
  all.insert(all.end(), blue.begin(), blue.end());
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    NodeAttrs a;
    a.main_category = "Books";
    a.big_category = "Culture";
    const NodeId p = g.add_node(NodeKind::kProduct, "p" + std::to_string(i), a);
    std::vector<NodeId> targets = pure ? (i < n / 2 ? red : blue) : all;
    std::shuffle(targets.begin(), targets.end(), rng);
    for (int k = 0; k < 4; ++k) g.add_edge(p, targets[static_cast<std::size_t>(k)], EdgeKind::kAlsoBought);
  }
  return g;
}

}  // namespace

TEST_CASE("published constants give the prior means at zero counts") {
  const auto g = GlobalPoliticalTotals::paper_20core();
  const SegmentCounts zero;
  const double rel = relevance(zero, g);
  const double ali = alignment(zero, g);
  CHECK(std::abs(rel - 2796590.0 / 212929627.0) < 1e-12);
  CHECK(std::abs(ali - 1818415.0 / 2796590.0) < 1e-12);
  // published to 6 and 5 significant decimals respectively
  CHECK(std::abs(rel - 0.013134) < 1e-6);
  CHECK(std::abs(ali - 0.65023) <= 0.5e-5);

  SegmentCounts c{100, 1000, 0, 0};
  CHECK(relevance(c, g) == doctest::Approx(0.0798360).epsilon(1e-6));
  CHECK(std::abs(relevance(c, g) - 0.07984) < 5e-6);

  GlobalPoliticalTotals bad = g;
  bad.d = 0;
  CHECK_THROWS_AS(relevance(zero, bad), Error);
  CHECK_THROWS_AS(alignment(zero, bad), Error);
}

TEST_CASE("relevance and alignment limits and symmetry") {
  GlobalPoliticalTotals g{10.0, 50.0, 1000.0, 25.0, 25.0};
  SegmentCounts half{40, 100, 20, 40};
  CHECK(alignment(half, g) == 0.5);
  SegmentCounts big{1'000'000'000, 1'000'000'000, 1'000'000'000, 1'000'000'000};
  CHECK(relevance(big, g) == doctest::Approx(1.0).epsilon(1e-7));
  CHECK(alignment(big, g) == doctest::Approx(1.0).epsilon(1e-7));
}

TEST_CASE("monotonicity and shrinkage properties") {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<std::uint64_t> cnt(0, 5000);
  std::uniform_real_distribution<double> dd(0.5, 500.0);
  for (int trial = 0; trial < 2000; ++trial) {
    GlobalPoliticalTotals g{dd(rng), 300.0 + static_cast<double>(cnt(rng)), 1e6, 0, 0};
    g.k_red = g.k_political * 0.3;
    g.k_blue = g.k_political - g.k_red;
    SegmentCounts c;
    c.K = cnt(rng) + 1;
    c.X = std::min<std::uint64_t>(cnt(rng), c.K - 1);
    c.K_p = c.X + 1;
    c.X_red = std::min<std::uint64_t>(cnt(rng), c.K_p - 1);
    const double r0 = relevance(c, g), a0 = alignment(c, g);
    CHECK(r0 > 0);
    CHECK(r0 < 1);
    CHECK(a0 > 0);
    CHECK(a0 < 1);
    SegmentCounts up = c;
    ++up.X;
    CHECK(relevance(up, g) > r0);
    up = c;
    ++up.X_red;
    CHECK(alignment(up, g) > a0);

    GlobalPoliticalTotals strong = g;
    strong.d = 1e12;
    CHECK(relevance(c, strong) == doctest::Approx(g.k_political / g.m).epsilon(1e-6));
    CHECK(alignment(c, strong) == doctest::Approx(0.3).epsilon(1e-6));
  }
}

TEST_CASE("enumeration oracle reproduces the 2x2 fixture") {
  const std::vector<std::uint32_t> draws{2, 2};
  const Moments m = enumerate_overlap(draws, 2, 2);
  CHECK(m.mean == doctest::Approx(4.0 / 3.0));
  CHECK(m.var == doctest::Approx(8.0 / 9.0));

  OverlapProblem p{draws, 2, 2, 0};
  NullConfig exact{NullMode::kExact, 0, 0, 1};
  auto r = polarization(p, exact);
  CHECK(r.expected == doctest::Approx(4.0 / 3.0).epsilon(1e-12));
  CHECK(r.variance == doctest::Approx(8.0 / 9.0).epsilon(1e-12));
  REQUIRE(r.z.has_value());
  CHECK(*r.z == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));

  // o = E[O] gives z = 0 (a 3x1 problem with integral mean)
  OverlapProblem q{{2}, 1, 1, 1};
  auto rq = polarization(q, exact);
  CHECK(rq.expected == doctest::Approx(1.0));
  CHECK_FALSE(rq.z.has_value());  // always mixed: var 0, degenerate
}

TEST_CASE("exact DP and closed form agree with full enumeration") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    std::uniform_int_distribution<int> pool(2, 12);
    const int total = pool(rng);
    const int red = std::uniform_int_distribution<int>(1, total - 1)(rng);
    const int blue = total - red;
    std::vector<std::uint32_t> draws;
    int left = total;
    while (left > 0 && draws.size() < 6) {
      const int n = std::uniform_int_distribution<int>(0, std::min(left, 4))(rng);
      draws.push_back(static_cast<std::uint32_t>(n));
      left -= n;
    }
    const Moments m = enumerate_overlap(draws, red, blue);
    OverlapProblem p{draws, static_cast<std::uint64_t>(red), static_cast<std::uint64_t>(blue), 0};
    auto r = polarization(p, NullConfig{NullMode::kExact, 0, 0, 1});
    CHECK(r.expected == doctest::Approx(m.mean).epsilon(1e-10));
    CHECK(r.variance == doctest::Approx(m.var).epsilon(1e-9));
    CHECK(expected_overlap(draws, static_cast<std::uint64_t>(red), static_cast<std::uint64_t>(blue)) ==
          doctest::Approx(m.mean).epsilon(1e-10));
  }
}

TEST_CASE("Monte Carlo converges to the exact answer and ignores thread count") {
  OverlapProblem p{{2, 2}, 2, 2, 0};
  NullConfig mc{NullMode::kMonteCarlo, 200'000, 42, 4};
  auto r = polarization(p, mc);
  CHECK(std::abs(r.expected - 4.0 / 3.0) < 0.01);
  CHECK(std::abs(r.variance - 8.0 / 9.0) < 0.02);
  CHECK(r.replicates == 200'000);
  CHECK(r.seed == 42);

  OverlapProblem big{{3, 1, 4, 1, 5, 9, 2, 6}, 40, 31, 3};
  NullConfig one{NullMode::kMonteCarlo, 5000, 7, 1};
  NullConfig many{NullMode::kMonteCarlo, 5000, 7, 7};
  auto a = polarization(big, one), b = polarization(big, many);
  CHECK(a.expected == b.expected);
  CHECK(a.variance == b.variance);
  CHECK(a.z == b.z);
  NullConfig other{NullMode::kMonteCarlo, 5000, 8, 1};
  CHECK(polarization(big, other).expected != a.expected);
  CHECK(a.expected == doctest::Approx(expected_overlap(big.draws, 40, 31)).epsilon(0.02));
}

TEST_CASE("null model errors") {
  OverlapProblem large{{2, 2}, 15, 15, 0};
  CHECK_THROWS_AS(polarization(large, NullConfig{NullMode::kExact, 0, 0, 1}), Error);
  try {
    polarization(large, NullConfig{NullMode::kExact, 0, 0, 1});
  } catch (const Error& e) {
    CHECK(e.code() == Errc::kMode);
  }
  CHECK_THROWS_AS(polarization(large, NullConfig{NullMode::kMonteCarlo, 1, 0, 1}), Error);
  OverlapProblem no_blue{{1}, 3, 0, 0};
  CHECK_THROWS_AS(polarization(no_blue, NullConfig{}), Error);
  OverlapProblem overdrawn{{5}, 2, 2, 0};
  CHECK_THROWS_AS(polarization(overdrawn, NullConfig{}), Error);
}

TEST_CASE("null calibration: segments drawn from the null give centred z") {
  std::mt19937_64 rng(2024);
  std::vector<double> zs;
  const std::uint64_t R = 150, B = 100;
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<std::uint32_t> draws(40);
    for (auto& d : draws) d = std::uniform_int_distribution<std::uint32_t>(1, 5)(rng);
    // observed colours from the null itself
    std::vector<int> pool(R, 0);
    pool.resize(R + B, 1);
    std::shuffle(pool.begin(), pool.end(), rng);
    std::uint64_t o = 0;
    std::size_t pos = 0;
    for (auto d : draws) {
      bool r = false, b = false;
      for (std::uint32_t k = 0; k < d; ++k, ++pos) (pool[pos] ? b : r) = true;
      o += r && b;
    }
    auto res = polarization(OverlapProblem{draws, R, B, o},
                            NullConfig{NullMode::kMonteCarlo, 1000, static_cast<std::uint64_t>(trial), 0});
    REQUIRE(res.z.has_value());
    zs.push_back(*res.z);
  }
  double mean = 0;
  for (double z : zs) mean += z;
  mean /= static_cast<double>(zs.size());
  const auto inside = std::count_if(zs.begin(), zs.end(), [](double z) { return std::abs(z) < 4; });
  CHECK(std::abs(mean) <= 0.15);
  CHECK(static_cast<double>(inside) >= 0.99 * static_cast<double>(zs.size()));
}

TEST_CASE("planted polarization on a synthetic market") {
  MetricsConfig cfg;
  cfg.null.replicates = 2000;
  cfg.null.seed = 3;
  auto pure = planted_market(100, true, 1);
  auto reports = category_reports(pure, CategoryLevel::kMain, cfg);
  REQUIRE(reports.size() == 1);
  const auto& rp = reports[0];
  CHECK(rp.segment == "Books");
  CHECK(rp.polarization.observed == 0);
  REQUIRE(rp.polarization.z.has_value());
  CHECK(*rp.polarization.z > 10);

  auto mixed = planted_market(100, false, 1);
  auto rm = category_reports(mixed, CategoryLevel::kMain, cfg);
  REQUIRE(rm[0].polarization.z.has_value());
  CHECK(std::abs(*rm[0].polarization.z) < 3);

  // every product touching both colours: o maximal, z strongly negative
  HeteroGraph both = planted_market(0, true, 1);
  std::vector<NodeId> reds, blues;
  for (const auto& [v, l] : both.labels()) (l.cls == PolClass::kConservative ? reds : blues).push_back(v);
  NodeAttrs a;
  a.main_category = "Books";
  for (int i = 0; i < 60; ++i) {
    const NodeId p = both.add_node(NodeKind::kProduct, "m" + std::to_string(i), a);
    both.add_edge(p, reds[static_cast<std::size_t>(i % 20)], EdgeKind::kAlsoBought);
    both.add_edge(p, blues[static_cast<std::size_t>(i % 20)], EdgeKind::kAlsoBought);
  }
  auto rb = category_reports(both, CategoryLevel::kMain, cfg);
  CHECK(rb[0].polarization.observed == 60);
  REQUIRE(rb[0].polarization.z.has_value());
  CHECK(*rb[0].polarization.z < -5);
}

TEST_CASE("segment counts, totals and reports on a hand graph") {
  HeteroGraph g;
  NodeAttrs books;
  books.main_category = "Books";
  books.big_category = "Culture";
  books.name = "Gun Safety Handbook";
  NodeAttrs music;
  music.main_category = "Music";
  music.big_category = "Culture";
  music.name = "Gunther Live";
  const NodeId red = g.add_node(NodeKind::kProduct, "red", books);
  const NodeId blue = g.add_node(NodeKind::kProduct, "blue", books);
  const NodeId p1 = g.add_node(NodeKind::kProduct, "p1", books);
  const NodeId p2 = g.add_node(NodeKind::kProduct, "p2", music);
  const NodeId a1 = g.add_node(NodeKind::kAuthor, "a1");
  const NodeId brand = g.add_node(NodeKind::kBrand, "b");
  label(g, red, PolClass::kConservative);
  label(g, blue, PolClass::kLiberal);
  g.add_edge(p1, red, EdgeKind::kAlsoBought);
  g.add_edge(p1, blue, EdgeKind::kCoReview);
  g.add_edge(p1, p2, EdgeKind::kAlsoViewed);
  g.add_edge(a1, p1, EdgeKind::kReviews);
  g.add_edge(a1, p2, EdgeKind::kReviews);
  g.add_edge(p2, brand, EdgeKind::kHasBrand);  // membership: not counted by default

  Segment s1{"p1", {p1}};
  auto c = segment_counts(g, s1, EdgeKindSet::interaction());
  CHECK(c.K == 4);
  CHECK(c.X == 2);
  CHECK(c.X_red == 1);
  CHECK(c.K_p == 2);
  auto cp = segment_counts(g, s1, EdgeKindSet::copurchase());
  CHECK(cp.K == 2);
  CHECK(cp.X == 1);

  auto segs = category_segments(g, CategoryLevel::kMain);
  REQUIRE(segs.size() == 2);
  CHECK(segs[0].id == "Books");
  CHECK(segs[0].products == std::vector<NodeId>{red, blue, p1});
  MetricsConfig cfg;
  cfg.null.replicates = 100;
  auto t = compute_totals(g, segs, cfg);
  CHECK(t.k_red == 1);
  CHECK(t.k_blue == 1);
  CHECK(t.k_political == 2);
  // Books K: red 1 + blue 1 + p1 4 = 6 ; Music K: p2 2 (HasBrand excluded)
  CHECK(t.m == 8);
  CHECK(t.d == doctest::Approx(2.0 / 2.0));
  cfg.d_override = 302.3;
  CHECK(compute_totals(g, segs, cfg).d == 302.3);
  cfg.d_override.reset();

  // zero political edges: prior-shrunk relevance, prior alignment, degenerate z
  auto music_report = segment_report(g, segs[1], t, cfg);
  CHECK(music_report.counts.X == 0);
  CHECK(music_report.relevance == doctest::Approx((0 + t.d * 2.0 / 8.0) / (2 + t.d)));
  CHECK(music_report.alignment == doctest::Approx(0.5));
  CHECK_FALSE(music_report.polarization.z.has_value());

  CHECK(keyword_segment(g, "guns", std::vector<std::string>{"GUN"}).products ==
        std::vector<NodeId>{red, blue, p1});
  CHECK(keyword_segment(g, "phrase", std::vector<std::string>{"safety handbook"}).products.size() == 3);
  CHECK(keyword_segment(g, "none", std::vector<std::string>{"handbooks"}).products.empty());
  CHECK_THROWS_AS(segment_report(g, Segment{"empty", {}}, t, cfg), Error);
  CHECK_THROWS_AS(product_segment(g, "x", std::vector<std::string>{"nope"}), Error);
  CHECK(product_segment(g, "x", std::vector<std::string>{"p2", "p1", "p2"}).products ==
        std::vector<NodeId>{p1, p2});

  // reproducible output
  std::ostringstream a, b;
  auto ra = category_reports(g, CategoryLevel::kBig, cfg);
  auto rb = category_reports(g, CategoryLevel::kBig, cfg);
  write_reports_csv(a, ra);
  write_reports_csv(b, rb);
  CHECK(a.str() == b.str());
  CHECK(a.str().rfind("segment,products,X,K,X_red,K_p,relevance,alignment,polarization", 0) == 0);
}

TEST_CASE("author politics") {
  HeteroGraph g;
  const NodeId author = g.add_node(NodeKind::kAuthor, "a");
  const NodeId lonely = g.add_node(NodeKind::kAuthor, "lonely");
  for (int i = 0; i < 10; ++i) {
    const NodeId p = g.add_node(NodeKind::kProduct, "p" + std::to_string(i));
    g.add_edge(author, p, EdgeKind::kReviews);
    if (i < 3) label(g, p, PolClass::kConservative);
    if (i == 3) label(g, p, PolClass::kLiberal);
    if (i == 4) label(g, p, PolClass::kNonpolitical);
  }
  GlobalPoliticalTotals t{5.0, 40.0, 400.0, 30.0, 10.0};
  auto ap = author_politics(g, author, t);
  CHECK(ap.counts.K == 10);
  CHECK(ap.counts.X == 4);
  CHECK(ap.counts.X_red == 3);
  CHECK(ap.relevance == doctest::Approx((4 + 5.0 * 0.1) / 15.0));
  CHECK(ap.alignment == doctest::Approx((3 + 5.0 * 0.75) / 9.0));
  CHECK_THROWS_AS(author_politics(g, lonely, t), Error);
  CHECK_THROWS_AS(author_politics(g, *g.find(NodeKind::kProduct, "p0"), t), Error);

  // nonpolitical-only reviewer sits at the prior mean
  HeteroGraph h;
  const NodeId r = h.add_node(NodeKind::kAuthor, "r");
  h.add_edge(r, h.add_node(NodeKind::kProduct, "x"), EdgeKind::kReviews);
  CHECK(author_politics(h, r, t).alignment == doctest::Approx(0.75));
}
