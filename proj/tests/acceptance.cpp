// Acceptance suite: one PASS/FAIL line per criterion. Exit status is the
// number of failing lines.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <iterator>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "polnet/hetgraph.hpp"
#include "polnet/ingest.hpp"
#include "polnet/polmetrics.hpp"
#include "polnet/rgcn.hpp"
#include "polnet/sampler.hpp"
#include "polnet/statlab.hpp"
#include "test_util.hpp"

using namespace polnet;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void criterion(const std::string& name, double budget_seconds, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const bool in_time = secs < budget_seconds;
  const bool ok = o.pass && in_time;
  failures += !ok;
  std::ostringstream line;
  line.precision(3);
  line << (ok ? "PASS " : "FAIL ") << name << ": " << o.detail << " [" << std::fixed << secs << " s";
  if (!in_time) line << " > " << budget_seconds << " s budget";
  line << "]";
  std::cout << line.str() << std::endl;
}

std::string fmt(double x, int digits = 6) {
  std::ostringstream s;
  s.precision(digits);
  s << x;
  return s.str();
}

// ----------------------------------------------------------- oracles

// Every distinct colour arrangement of the pool, equally weighted.
std::pair<double, double> enumerate_overlap(const std::vector<std::uint32_t>& draws, int red, int blue) {
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
  const double mean = s / n;
  return {mean, s2 / n - mean * mean};
}

std::set<std::string> key_set(const HeteroGraph& g) {
  std::set<std::string> keys;
  for (const auto& n : g.nodes()) keys.insert(std::string(to_string(n.kind)) + ":" + n.key);
  return keys;
}

std::set<std::string> peel_oracle(const HeteroGraph& g, std::size_t k) {
  std::vector<bool> alive(g.node_count(), true);
  bool changed = true;
  while (changed) {
    changed = false;
    for (NodeId v = 0; v < g.node_count(); ++v) {
      if (!alive[v]) continue;
      std::size_t d = 0;
      for (EdgeKind kind : kAllEdgeKinds)
        for (NodeId u : g.neighbors(v, kind)) d += alive[u];
      if (d < k) {
        alive[v] = false;
        changed = true;
      }
    }
  }
  std::set<std::string> keys;
  for (NodeId v = 0; v < g.node_count(); ++v)
    if (alive[v]) keys.insert(std::string(to_string(g.node(v).kind)) + ":" + g.node(v).key);
  return keys;
}

std::size_t lev_table(const std::u32string& a, const std::u32string& b) {
  std::vector<std::vector<std::size_t>> d(a.size() + 1, std::vector<std::size_t>(b.size() + 1));
  for (std::size_t i = 0; i <= a.size(); ++i) d[i][0] = i;
  for (std::size_t j = 0; j <= b.size(); ++j) d[0][j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i)
    for (std::size_t j = 1; j <= b.size(); ++j)
      d[i][j] = std::min({d[i - 1][j] + 1, d[i][j - 1] + 1, d[i - 1][j - 1] + (a[i - 1] == b[j - 1] ? 0u : 1u)});
  return d[a.size()][b.size()];
}

int partial_ratio_oracle(const std::string& x, const std::string& y) {
  std::u32string a = utf8_decode(x), b = utf8_decode(y);
  if (a.size() > b.size()) std::swap(a, b);
  if (a.empty() || b.find(a) != std::u32string::npos) return 100;
  double best = 0;
  for (std::size_t s = 0; s + a.size() <= b.size(); ++s)
    best = std::max(best, 100.0 * (1.0 - static_cast<double>(lev_table(a, b.substr(s, a.size()))) /
                                             static_cast<double>(a.size())));
  return std::min(static_cast<int>(std::floor(best + 0.5 + 1e-9)), 99);
}

// --------------------------------------------------------- fixtures

void label(HeteroGraph& g, NodeId v, PolClass cls) {
  PoliticalLabel l;
  l.product = v;
  l.cls = cls;
  g.labels().upsert(l);
}

// 100 category products, each tied to 4 of 20 red and 20 blue products; the
// first half only touch red ones and the second half only blue ones.
HeteroGraph polarized_market(std::uint64_t seed, std::vector<NodeId>& political) {
  HeteroGraph g;
  std::vector<NodeId> red, blue;
  for (int i = 0; i < 20; ++i) {
    red.push_back(g.add_node(NodeKind::kProduct, "red" + std::to_string(i)));
    blue.push_back(g.add_node(NodeKind::kProduct, "blue" + std::to_string(i)));
  }
  for (NodeId v : red) label(g, v, PolClass::kConservative);
  for (NodeId v : blue) label(g, v, PolClass::kLiberal);
  political = red;
  political.insert(political.end(), blue.begin(), blue.end());
  std::mt19937_64 rng(seed);
  const std::size_t n = 100;
  for (std::size_t i = 0; i < n; ++i) {
    NodeAttrs a;
    a.main_category = "Books";
    a.big_category = "Culture";
    const NodeId p = g.add_node(NodeKind::kProduct, "p" + std::to_string(i), a);
    std::vector<NodeId> targets = i < n / 2 ? red : blue;
    std::shuffle(targets.begin(), targets.end(), rng);
    for (int k = 0; k < 4; ++k) g.add_edge(p, targets[static_cast<std::size_t>(k)], EdgeKind::kAlsoBought);
  }
  return g;
}

HeteroGraph ring_graph() {
  HeteroGraph g;
  std::vector<NodeId> ps;
  for (int i = 0; i < 6; ++i) ps.push_back(g.add_node(NodeKind::kProduct, "P" + std::to_string(i)));
  for (std::size_t i = 0; i < 6; ++i) g.add_edge(ps[i], ps[(i + 1) % 6], EdgeKind::kAlsoBought);
  g.add_edge(ps[0], ps[3], EdgeKind::kCoReview);
  for (std::size_t a = 0; a < 4; ++a) {
    NodeId id = g.add_node(NodeKind::kAuthor, "A" + std::to_string(a));
    g.add_edge(id, ps[a % 6], EdgeKind::kReviews, ReviewAttrs{});
    g.add_edge(id, ps[(a + 2) % 6], EdgeKind::kReviews, ReviewAttrs{});
  }
  for (std::size_t i = 0; i < 6; ++i) g.labels().upsert({ps[i], static_cast<PolClass>(i % 2), 1.0, Provenance::kSeed, 0});
  return g;
}

struct Simulated {
  Eigen::MatrixXd X;
  std::vector<double> y;
};

Simulated simulate_beta(std::uint64_t seed, std::size_t n, const Eigen::VectorXd& beta, double phi) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> norm(0, 1);
  Simulated s;
  s.X.resize(static_cast<Eigen::Index>(n), beta.size());
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    s.X(r, 0) = 1;
    for (Eigen::Index k = 1; k < beta.size(); ++k) s.X(r, k) = norm(rng);
    const double mu = 1 / (1 + std::exp(-s.X.row(r).dot(beta)));
    std::gamma_distribution<double> ga(mu * phi, 1), gb((1 - mu) * phi, 1);
    const double a = ga(rng), b = gb(rng);
    s.y.push_back(a / (a + b));
  }
  return s;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(POLNET_CLI) + " " + args + " > /dev/null 2>&1";
  const int st = std::system(cmd.c_str());
  return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

const std::string kFixture = std::string(POLNET_DATA_DIR) + "/fixture/";

// Runs every pipeline stage into `dir`; returns the first failing stage.
std::string run_pipeline(const fs::path& dir) {
  fs::remove_all(dir);
  fs::create_directories(dir);
  const std::string d = dir.string() + "/";
  const std::string F = kFixture;
  const std::string train_flags = " --optimizer adam --learning-rate 0.01";
  const std::vector<std::string> stages = {
      "ingest --reviews " + F + "reviews.json --meta " + F + "meta.json --seeds " + F + "seeds.csv --out " + d +
          "matches.csv --report " + d + "ingest.json",
      "sample --reviews " + F + "reviews.json --meta " + F + "meta.json --matches " + d + "matches.csv --plan " + F +
          "plan.json --moral " + F + "moral.csv --out " + d + "graph.bin --report " + d + "sampling.json",
      "kcore --in " + d + "graph.bin --k 5 --out " + d + "k5.bin",
      "kcore --in " + d + "graph.bin --k 20 --out " + d + "k20.bin",
      "augment --in " + d + "k5.bin --out " + d + "aug.bin --report " + d + "augment.json",
      "train --in " + d + "aug.bin --out " + d + "model.bin --history " + d + "history.csv" + train_flags,
      "search --in " + d + "aug.bin --budget 3 --epochs 40 --out " + d + "search.json" + train_flags,
      "classify --in " + d + "aug.bin --model " + d + "model.bin --out " + d + "labelled.bin --labels " + d +
          "labels.csv --curve " + d + "curve.csv",
      "metrics --in " + d + "labelled.bin --level big --replicates 500 --out " + d + "metrics.csv",
      "lifestyle --in " + d + "labelled.bin --model " + d + "model.bin --out " + d + "lifestyle.csv",
      // At 0.95 the model labels nearly every fixture product, so the feature
      // table is built before classification.
      "features --in " + d + "aug.bin --model " + d + "model.bin --min-reviews 1 --out " + d +
          "features.csv --report " + d + "features.json",
      "fit --features " + d + "features.csv --out " + d + "coefficients.csv --text " + d + "coefficients.txt",
      "export --in " + d + "labelled.bin --edges " + d + "edges.tsv --nodes " + d + "nodes.csv",
      "report --in " + d + "labelled.bin --sampling " + d + "sampling.json --out " + d + "report.txt",
  };
  for (const auto& s : stages)
    if (run_cli(s + " --seed 7") != 0) return s.substr(0, s.find(' '));
  return {};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

int main() {
  criterion("equation plug-in prior means", 1.0, [] {
    const auto g = GlobalPoliticalTotals::paper_20core();
    const SegmentCounts zero;
    const double rel = relevance(zero, g), ali = alignment(zero, g);
    const bool ok = std::abs(rel - 0.013134) <= 1e-6 && std::abs(ali - 0.65023) <= 1e-6;
    return Outcome{ok, "relevance " + fmt(rel, 8) + " (want 0.013134), alignment " + fmt(ali, 8) +
                           " (want 0.65023), tolerance 1e-6"};
  });

  criterion("polarization oracle on the 2x2 fixture", 10.0, [] {
    const std::vector<std::uint32_t> draws{2, 2};
    const auto [mean, var] = enumerate_overlap(draws, 2, 2);
    const OverlapProblem p{draws, 2, 2, 0};
    const auto ex = polarization(p, NullConfig{NullMode::kExact, 0, 0, 1});
    const auto mc = polarization(p, NullConfig{NullMode::kMonteCarlo, 200'000, 1, 0});
    const bool oracle = std::abs(mean - 4.0 / 3) < 1e-12 && std::abs(var - 8.0 / 9) < 1e-12;
    const bool exact = std::abs(ex.expected - 4.0 / 3) < 1e-12 && std::abs(ex.variance - 8.0 / 9) < 1e-12 &&
                       ex.z && std::abs(*ex.z - std::sqrt(2.0)) < 1e-12;
    const bool monte = std::abs(mc.expected - 4.0 / 3) < 0.01 && std::abs(mc.variance - 8.0 / 9) < 0.02;
    return Outcome{oracle && exact && monte,
                   "enumeration E=" + fmt(mean) + " var=" + fmt(var) + "; exact z=" + fmt(ex.z.value_or(NAN)) +
                       "; monte carlo E=" + fmt(mc.expected) + " var=" + fmt(mc.variance)};
  });

  criterion("null calibration over 500 segments", 120.0, [] {
    std::mt19937_64 rng(2024);
    const std::uint64_t R = 150, B = 100;
    std::vector<double> zs;
    for (int trial = 0; trial < 500; ++trial) {
      std::vector<std::uint32_t> draws(40);
      for (auto& d : draws) d = std::uniform_int_distribution<std::uint32_t>(1, 5)(rng);
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
                              NullConfig{NullMode::kMonteCarlo, 1000, static_cast<std::uint64_t>(trial) + 1, 0});
      if (!res.z) return Outcome{false, "degenerate null variance in trial " + std::to_string(trial)};
      zs.push_back(*res.z);
    }
    double mean = 0;
    for (double z : zs) mean += z;
    mean /= static_cast<double>(zs.size());
    const auto inside = std::count_if(zs.begin(), zs.end(), [](double z) { return std::abs(z) < 4; });
    const double frac = static_cast<double>(inside) / static_cast<double>(zs.size());
    return Outcome{mean >= -0.15 && mean <= 0.15 && frac >= 0.99,
                   "mean z " + fmt(mean, 4) + ", |z|<4 in " + fmt(100 * frac, 4) + "%"};
  });

  criterion("planted polarization", 60.0, [] {
    MetricsConfig cfg;
    cfg.null.replicates = 2000;
    cfg.null.seed = 3;
    std::vector<NodeId> political;
    HeteroGraph pure = polarized_market(1, political);
    const auto rp = category_reports(pure, CategoryLevel::kMain, cfg);
    // Same edges, colours of the political products permuted at random.
    HeteroGraph mixed = polarized_market(1, political);
    std::vector<PolClass> colours;
    for (NodeId v : political) colours.push_back(mixed.labels().find(v)->cls);
    std::mt19937_64 rng(11);
    std::shuffle(colours.begin(), colours.end(), rng);
    for (std::size_t i = 0; i < political.size(); ++i) label(mixed, political[i], colours[i]);
    const auto rm = category_reports(mixed, CategoryLevel::kMain, cfg);
    const auto find_books = [](const std::vector<PoliticsReport>& rs) -> const PoliticsReport* {
      for (const auto& r : rs)
        if (r.segment == "Books") return &r;
      return nullptr;
    };
    const auto* a = find_books(rp);
    const auto* b = find_books(rm);
    if (!a || !b || !a->polarization.z || !b->polarization.z) return Outcome{false, "no z for the Books segment"};
    const double zp = *a->polarization.z, zm = *b->polarization.z;
    return Outcome{zp > 10 && std::abs(zm) < 3, "pure z " + fmt(zp, 4) + ", reshuffled z " + fmt(zm, 4)};
  });

  criterion("rgcn gradients and planted benchmark", 120.0, [] {
    const HeteroGraph g = ring_graph();
    const auto view = RelationalView::build(g);
    double worst = 0;
    for (int classes : {2, 3})
      for (bool dropout : {false, true}) {
        RgcnConfig c;
        c.hidden = 4;
        c.classes = classes;
        c.l2 = 1e-2;
        c.seed = 11;
        auto m = init_model(c, g, view);
        std::vector<std::size_t> rows;
        std::vector<int> target(view.size(), -1);
        for (std::size_t i = 0; i < view.size(); ++i)
          if (g.node(view.nodes[i]).kind == NodeKind::kProduct) {
            rows.push_back(i);
            target[i] = static_cast<int>(i % static_cast<std::size_t>(classes));
          }
        std::optional<std::uint64_t> dseed;
        if (dropout) dseed = 99;
        std::vector<Eigen::MatrixXd> grad;
        loss_and_gradient(m, view, rows, target, dseed, &grad);
        auto params = m.parameters();
        const double h = 1e-6;
        for (std::size_t k = 0; k < params.size(); ++k)
          for (Eigen::Index i = 0; i < params[k]->size(); ++i) {
            double& x = params[k]->data()[i];
            const double saved = x;
            x = saved + h;
            const double up = loss_and_gradient(m, view, rows, target, dseed, nullptr);
            x = saved - h;
            const double down = loss_and_gradient(m, view, rows, target, dseed, nullptr);
            x = saved;
            const double numeric = (up - down) / (2 * h);
            const double analytic = grad[k].data()[i];
            worst = std::max(worst, std::abs(numeric - analytic) /
                                        std::max({std::abs(numeric), std::abs(analytic), 1e-6}));
          }
      }
    double lowest = 1;
    for (std::uint64_t seed : {1, 2, 3}) {
      auto market = testing::planted_market(seed);
      const auto mv = RelationalView::build(market.graph);
      RgcnConfig c = RgcnConfig::paper_preset();
      c.seed = seed;
      const auto model = train(market.graph, mv, c);
      const auto scores = predict(model, mv, market.products);
      std::size_t n = 0, hit = 0;
      for (std::size_t i = 0; i < market.products.size(); ++i) {
        if (market.graph.labels().contains(market.products[i])) continue;
        ++n;
        hit += scores[i].argmax == market.truth[i];
      }
      lowest = std::min(lowest, static_cast<double>(hit) / static_cast<double>(n));
    }
    return Outcome{view.size() == 10 && worst < 1e-4 && lowest >= 0.95,
                   "worst relative gradient error " + fmt(worst, 3) + " on " + std::to_string(view.size()) +
                       " nodes; lowest accuracy over 3 planted markets " + fmt(lowest, 4)};
  });

  criterion("lifestyle transform", 1.0, [] {
    const double mid = lifestyle_score(0.5);
    const double p = lifestyle_probability(0.5572);
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> u(0, 1);
    int violations = 0;
    for (int i = 0; i < 10'000; ++i) {
      double a = u(rng), b = u(rng);
      if (a > b) std::swap(a, b);
      if (lifestyle_score(a) > lifestyle_score(b)) ++violations;
    }
    return Outcome{mid == 0.5 && std::abs(p - 0.7567) <= 1e-4 && violations == 0,
                   "score(0.5)=" + fmt(mid, 17) + "; probability(0.5572)=" + fmt(p) +
                       " (want 0.7567, tolerance 1e-4); monotonicity violations " + std::to_string(violations) +
                       "/10000"};
  });

  criterion("k-core", 60.0, [] {
    std::mt19937_64 rng(31);
    int mismatches = 0, not_idempotent = 0;
    std::size_t largest = 0;
    for (int trial = 0; trial < 100; ++trial) {
      const std::size_t products = std::uniform_int_distribution<std::size_t>(10, 500)(rng);
      const std::size_t authors = std::uniform_int_distribution<std::size_t>(5, 490)(rng);
      const double density = std::uniform_real_distribution<double>(0.002, 0.03)(rng);
      const HeteroGraph g = testing::random_graph(rng, products, authors, density);
      largest = std::max<std::size_t>(largest, g.node_count());
      const std::size_t k = std::uniform_int_distribution<std::size_t>(1, 8)(rng);
      const HeteroGraph core = k_core(g, k);
      const auto keys = key_set(core);
      mismatches += keys != peel_oracle(g, k);
      not_idempotent += key_set(k_core(core, k)) != keys;
    }
    const fs::path dir = fs::temp_directory_path() / "polnet_acceptance_kcore";
    fs::remove_all(dir);
    fs::create_directories(dir);
    const std::string d = dir.string() + "/", F = kFixture;
    if (run_cli("ingest --reviews " + F + "reviews.json --meta " + F + "meta.json --seeds " + F +
                "seeds.csv --out " + d + "matches.csv") != 0 ||
        run_cli("sample --reviews " + F + "reviews.json --meta " + F + "meta.json --matches " + d +
                "matches.csv --plan " + F + "plan.json --out " + d + "graph.bin") != 0)
      return Outcome{false, "fixture pipeline failed"};
    const HeteroGraph fixture = load_snapshot(dir / "graph.bin");
    const auto k5 = key_set(k_core(fixture, 5)), k20 = key_set(k_core(fixture, 20));
    const bool nested = std::includes(k5.begin(), k5.end(), k20.begin(), k20.end());
    return Outcome{mismatches == 0 && not_idempotent == 0 && largest <= 1000 && nested && !k20.empty(),
                   std::to_string(mismatches) + " oracle mismatches and " + std::to_string(not_idempotent) +
                       " non-idempotent cores over 100 graphs (largest " + std::to_string(largest) +
                       " nodes); fixture 5-core " + std::to_string(k5.size()) + " nodes, 20-core " +
                       std::to_string(k20.size()) + (nested ? " (nested)" : " (NOT nested)")};
  });

  criterion("fuzzy partial ratio", 30.0, [] {
    std::mt19937_64 rng(41);
    const std::string alphabet = "abcd e";
    auto random_string = [&] {
      std::string s(std::uniform_int_distribution<std::size_t>(0, 40)(rng), ' ');
      for (char& c : s) c = alphabet[std::uniform_int_distribution<std::size_t>(0, alphabet.size() - 1)(rng)];
      return s;
    };
    int mismatches = 0;
    for (int i = 0; i < 1000; ++i) {
      const std::string a = random_string(), b = random_string();
      mismatches += levenshtein_partial_ratio(a, b) != partial_ratio_oracle(a, b);
    }
    const std::size_t lev = levenshtein(U"kitten", U"sitting");
    const int full = static_cast<int>(std::floor(100.0 * (1.0 - static_cast<double>(lev) / 7.0) + 0.5));
    const int pr = levenshtein_partial_ratio("kitten", "sitting");
    const int rp = levenshtein_partial_ratio("sitting", "kitten");
    return Outcome{mismatches == 0 && lev == 3 && full == 57 && pr == 67 && rp == 67,
                   std::to_string(mismatches) + "/1000 oracle mismatches; kitten/sitting distance " +
                       std::to_string(lev) + ", full ratio " + std::to_string(full) + ", partial " +
                       std::to_string(pr) + "/" + std::to_string(rp)};
  });

  criterion("beta regression recovery and gradient", 120.0, [] {
    Eigen::VectorXd truth(2);
    truth << 0.5, -0.3;
    int covered[2] = {0, 0};
    int outside3 = 0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
      const auto sim = simulate_beta(seed, 5000, truth, 30);
      const auto fit = beta_fit(sim.X, sim.y, {"(Intercept)", "x1"});
      for (int k = 0; k < 2; ++k) {
        const double err = std::abs(fit.beta[k] - truth[k]);
        outside3 += err > 3 * fit.se[k];
        covered[k] += err <= 2 * fit.se[k];
      }
    }
    std::mt19937_64 rng(10);
    std::normal_distribution<double> n(0, 1);
    double worst = 0;
    for (int trial = 0; trial < 10; ++trial) {
      Eigen::VectorXd t(3);
      t << 0.5 * n(rng), 0.5 * n(rng), 0.5 * n(rng);
      const auto sim = simulate_beta(100 + static_cast<std::uint64_t>(trial), 300, t, 5 + 40 * std::abs(n(rng)));
      const Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(sim.y.data(), static_cast<Eigen::Index>(sim.y.size()));
      Eigen::VectorXd theta(4);
      theta << n(rng), n(rng), n(rng), std::log(1 + 30 * std::abs(n(rng)));
      Eigen::VectorXd score;
      beta_loglik(sim.X, y, theta.head(3), theta[3], &score, nullptr);
      const double h = 1e-5;
      for (int k = 0; k < 4; ++k) {
        Eigen::VectorXd up = theta, down = theta;
        up[k] += h;
        down[k] -= h;
        const double num = (beta_loglik(sim.X, y, up.head(3), up[3]) - beta_loglik(sim.X, y, down.head(3), down[3])) / (2 * h);
        worst = std::max(worst, std::abs(num - score[k]) / std::max({std::abs(num), std::abs(score[k]), 1e-6}));
      }
    }
    return Outcome{outside3 == 0 && covered[0] >= 17 && covered[1] >= 17 && worst < 1e-5,
                   std::to_string(outside3) + " estimates outside 3 SE; 2 SE coverage " + std::to_string(covered[0]) +
                       "/20 and " + std::to_string(covered[1]) + "/20; worst relative score error " + fmt(worst, 3)};
  });

  criterion("end-to-end determinism on the fixture", 60.0, [] {
    const fs::path base = fs::temp_directory_path() / "polnet_acceptance_e2e";
    const fs::path a = base / "a", b = base / "b";
    if (auto bad = run_pipeline(a); !bad.empty()) return Outcome{false, "stage '" + bad + "' failed in run 1"};
    if (auto bad = run_pipeline(b); !bad.empty()) return Outcome{false, "stage '" + bad + "' failed in run 2"};
    std::size_t files = 0;
    std::vector<std::string> differing;
    for (const auto& e : fs::directory_iterator(a)) {
      ++files;
      const fs::path other = b / e.path().filename();
      if (!fs::exists(other) || slurp(e.path()) != slurp(other)) differing.push_back(e.path().filename().string());
    }
    std::size_t files_b = static_cast<std::size_t>(std::distance(fs::directory_iterator(b), fs::directory_iterator()));
    const HeteroGraph g = load_snapshot(a / "graph.bin");
    std::string detail = std::to_string(files) + " artifacts from two runs, " + std::to_string(g.node_count()) +
                         "-node sample";
    if (!differing.empty()) {
      detail += "; differing:";
      for (const auto& f : differing) detail += " " + f;
    }
    return Outcome{differing.empty() && files == files_b && files > 0, detail};
  });

  criterion("heterogeneous vs bipartite discovery", 30.0, [] {
    // Products hang together through shared reviewers; co-purchase links are
    // rare pairs, so a co-purchase-only walk stays near the seeds.
    Corpus c;
    const int products = 400;
    for (int i = 0; i < products; ++i) {
      ProductMeta m;
      m.asin = "P" + std::to_string(1000 + i);
      m.title = "product " + std::to_string(i);
      m.categories.push_back({"Books"});
      if (i % 40 == 0) m.related.also_bought.push_back("P" + std::to_string(1001 + i));
      c.products.push_back(m);
    }
    std::mt19937_64 rng(51);
    std::uniform_int_distribution<int> pick(0, products - 1);
    for (int r = 0; r < 150; ++r)
      for (int k = 0; k < 4; ++k) {
        ReviewRecord rec;
        rec.reviewer_id = "R" + std::to_string(r);
        rec.asin = "P" + std::to_string(1000 + pick(rng));
        rec.overall = 4;
        rec.unix_time = r * 10 + k;
        c.reviews.push_back(rec);
      }
    const CorpusIndex idx(c);
    SampleWavePlan plan;
    plan.waves = 2;
    plan.seed_asins = {"P1000", "P1040"};
    const auto het = run_plan(idx, plan);
    std::size_t het_products = 0;
    for (const auto& n : het.graph.nodes()) het_products += n.kind == NodeKind::kProduct;
    const auto bip = bipartite_baseline(idx, plan.seed_asins, plan.waves);
    const double ratio = static_cast<double>(het_products) / static_cast<double>(bip.size());
    return Outcome{ratio >= 5, "heterogeneous " + std::to_string(het_products) + " products, bipartite " +
                                   std::to_string(bip.size()) + ", ratio " + fmt(ratio, 4)};
  });

  std::cout << (failures ? std::to_string(failures) + " criteria failing" : std::string("all criteria pass"))
            << std::endl;
  return failures;
}
