#include "polnet/polmetrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <ostream>
#include <random>
#include <thread>

#include "polnet/csv.hpp"
#include "polnet/error.hpp"

namespace polnet {

GlobalPoliticalTotals GlobalPoliticalTotals::paper_20core() {
  return {302.3, 2'796'590.0, 212'929'627.0, 1'818'415.0, 978'175.0};
}

double relevance(const SegmentCounts& c, const GlobalPoliticalTotals& g) {
  if (!(g.d > 0)) throw Error(Errc::kParameter, "prior strength d must be positive");
  if (!(g.m > 0)) throw Error(Errc::kParameter, "m must be positive");
  if (c.X > c.K) throw Error(Errc::kParameter, "X exceeds K");
  return (static_cast<double>(c.X) + g.d * g.k_political / g.m) / (static_cast<double>(c.K) + g.d);
}

double alignment(const SegmentCounts& c, const GlobalPoliticalTotals& g) {
  if (!(g.d > 0)) throw Error(Errc::kParameter, "prior strength d must be positive");
  if (!(g.k_red + g.k_blue > 0)) throw Error(Errc::kParameter, "no political endpoints");
  if (c.X_red > c.K_p) throw Error(Errc::kParameter, "X_red exceeds K_p");
  return (static_cast<double>(c.X_red) + g.d * g.k_red / (g.k_red + g.k_blue)) /
         (static_cast<double>(c.K_p) + g.d);
}

std::string_view to_string(NullMode m) noexcept {
  return m == NullMode::kExact ? "exact" : "montecarlo";
}

std::optional<NullMode> parse_null_mode(std::string_view name) noexcept {
  if (name == "exact") return NullMode::kExact;
  if (name == "montecarlo" || name == "monte_carlo") return NullMode::kMonteCarlo;
  return std::nullopt;
}

std::uint64_t replicate_seed(std::uint64_t master, std::uint64_t replicate) noexcept {
  // splitmix64 of a Weyl-sequence position
  std::uint64_t z = master + 0x9E3779B97F4A7C15ULL * (replicate + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

namespace {

double choose(std::uint64_t n, std::uint64_t k) {
  if (k > n) return 0.0;
  k = std::min(k, n - k);
  double r = 1.0;
  for (std::uint64_t i = 1; i <= k; ++i) r = r * static_cast<double>(n - k + i) / static_cast<double>(i);
  return r;
}

void check_problem(const OverlapProblem& p) {
  if (p.pool_red == 0 || p.pool_blue == 0)
    throw Error(Errc::kParameter, "null model needs at least one red and one blue endpoint");
  std::uint64_t total = 0;
  for (auto n : p.draws) total += n;
  if (total > p.pool_red + p.pool_blue)
    throw Error(Errc::kParameter, "segment draws exceed the endpoint pool");
  if (p.observed > p.draws.size()) throw Error(Errc::kParameter, "observed overlap exceeds products");
}

void finish(PolarizationResult& r) {
  if (r.variance > 0) r.z = (r.expected - static_cast<double>(r.observed)) / std::sqrt(r.variance);
}

PolarizationResult exact(const OverlapProblem& p) {
  const std::uint64_t R = p.pool_red, B = p.pool_blue;
  if (R + B > kExactPoolLimit)
    throw Error(Errc::kMode, "exact mode needs a pool of at most " +
                                 std::to_string(kExactPoolLimit) + " endpoints");
  std::vector<std::uint32_t> draws;
  for (auto n : p.draws)
    if (n > 0) draws.push_back(n);
  const std::size_t N = draws.size();

  // prob[r][k]: r reds used so far, k mixed products so far
  std::vector<std::vector<double>> prob(R + 1, std::vector<double>(N + 1, 0.0));
  prob[0][0] = 1.0;
  std::uint64_t used = 0;
  for (std::size_t i = 0; i < N; ++i) {
    const std::uint64_t n = draws[i];
    std::vector<std::vector<double>> next(R + 1, std::vector<double>(N + 1, 0.0));
    for (std::uint64_t r = 0; r <= R; ++r) {
      if (r > used || used - r > B) continue;
      const std::uint64_t rr = R - r, br = B - (used - r);
      const double denom = choose(rr + br, n);
      for (std::uint64_t j = 0; j <= n && j <= rr; ++j) {
        if (n - j > br) continue;
        const double pj = choose(rr, j) * choose(br, n - j) / denom;
        const bool mixed = j > 0 && j < n;
        for (std::size_t k = 0; k + (mixed ? 1 : 0) <= N; ++k)
          if (prob[r][k] != 0.0) next[r + j][k + (mixed ? 1 : 0)] += prob[r][k] * pj;
      }
    }
    prob = std::move(next);
    used += n;
  }
  double e = 0, e2 = 0;
  for (std::uint64_t r = 0; r <= R; ++r)
    for (std::size_t k = 0; k <= N; ++k) {
      e += prob[r][k] * static_cast<double>(k);
      e2 += prob[r][k] * static_cast<double>(k * k);
    }
  PolarizationResult res;
  res.mode = NullMode::kExact;
  res.expected = e;
  res.variance = std::max(0.0, e2 - e * e);
  if (res.variance < 1e-15) res.variance = 0.0;
  res.observed = p.observed;
  finish(res);
  return res;
}

std::uint32_t one_replicate(const std::vector<std::uint32_t>& draws, std::uint64_t R,
                            std::uint64_t B, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uint32_t mixed = 0;
  for (auto n : draws) {
    bool red = false, blue = false;
    for (std::uint32_t k = 0; k < n; ++k) {
      const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
      if (u * static_cast<double>(R + B) < static_cast<double>(R)) {
        --R;
        red = true;
      } else {
        --B;
        blue = true;
      }
    }
    mixed += red && blue;
  }
  return mixed;
}

PolarizationResult monte_carlo(const OverlapProblem& p, const NullConfig& cfg) {
  if (cfg.replicates < 2) throw Error(Errc::kParameter, "Monte Carlo needs at least 2 replicates");
  std::vector<std::uint32_t> draws;
  for (auto n : p.draws)
    if (n > 0) draws.push_back(n);

  std::vector<std::uint32_t> samples(cfg.replicates);
  unsigned threads = cfg.threads ? cfg.threads : std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, cfg.replicates));
  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t r = begin; r < end; ++r)
      samples[r] = one_replicate(draws, p.pool_red, p.pool_blue, replicate_seed(cfg.seed, r));
  };
  if (threads <= 1) {
    work(0, cfg.replicates);
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (cfg.replicates + threads - 1) / threads;
    for (unsigned t = 0; t < threads; ++t) {
      const std::size_t b = t * chunk, e = std::min(cfg.replicates, b + chunk);
      if (b < e) pool.emplace_back(work, b, e);
    }
    for (auto& th : pool) th.join();
  }

  // Summation in replicate order keeps the result independent of scheduling.
  double mean = 0;
  for (auto s : samples) mean += s;
  mean /= static_cast<double>(samples.size());
  double ss = 0;
  for (auto s : samples) ss += (s - mean) * (s - mean);

  PolarizationResult res;
  res.mode = NullMode::kMonteCarlo;
  res.expected = mean;
  res.variance = ss / static_cast<double>(samples.size() - 1);
  res.observed = p.observed;
  res.replicates = cfg.replicates;
  res.seed = cfg.seed;
  finish(res);
  return res;
}

bool is_red(const LabelSet& labels, NodeId v) {
  const PoliticalLabel* l = labels.find(v);
  return l && l->cls == PolClass::kConservative;
}
bool is_blue(const LabelSet& labels, NodeId v) {
  const PoliticalLabel* l = labels.find(v);
  return l && l->cls == PolClass::kLiberal;
}

std::vector<std::string> words(std::string_view s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    const auto u = static_cast<unsigned char>(c);
    if (std::isalnum(u) || u >= 0x80) {
      cur.push_back(static_cast<char>(std::tolower(u)));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

}  // namespace

PolarizationResult polarization(const OverlapProblem& problem, const NullConfig& config) {
  check_problem(problem);
  return config.mode == NullMode::kExact ? exact(problem) : monte_carlo(problem, config);
}

double expected_overlap(std::span<const std::uint32_t> draws, std::uint64_t pool_red,
                        std::uint64_t pool_blue) {
  const double total = static_cast<double>(pool_red + pool_blue);
  double e = 0;
  for (auto n : draws) {
    if (n == 0) continue;
    // P[all red] = prod_{k<n} (R-k)/(T-k), likewise for blue
    double all_red = 1, all_blue = 1;
    for (std::uint32_t k = 0; k < n; ++k) {
      all_red *= std::max(0.0, static_cast<double>(pool_red) - k) / (total - k);
      all_blue *= std::max(0.0, static_cast<double>(pool_blue) - k) / (total - k);
    }
    e += 1.0 - all_red - all_blue;
  }
  return e;
}

std::vector<Segment> category_segments(const HeteroGraph& g, CategoryLevel level) {
  std::map<std::string, std::vector<NodeId>> groups;
  for (NodeId v = 0; v < g.node_count(); ++v) {
    const Node& n = g.node(v);
    if (n.kind != NodeKind::kProduct) continue;
    const std::string& cat = level == CategoryLevel::kMain ? n.attrs.main_category : n.attrs.big_category;
    if (!cat.empty()) groups[cat].push_back(v);
  }
  std::vector<Segment> out;
  for (auto& [name, ids] : groups) out.push_back({name, std::move(ids)});
  return out;
}

Segment keyword_segment(const HeteroGraph& g, std::string id, std::span<const std::string> keywords) {
  std::vector<std::vector<std::string>> phrases;
  for (const auto& k : keywords)
    if (auto w = words(k); !w.empty()) phrases.push_back(std::move(w));
  Segment s{std::move(id), {}};
  for (NodeId v = 0; v < g.node_count(); ++v) {
    const Node& n = g.node(v);
    if (n.kind != NodeKind::kProduct) continue;
    const auto title = words(n.attrs.name);
    const bool hit = std::any_of(phrases.begin(), phrases.end(), [&](const auto& phrase) {
      return std::search(title.begin(), title.end(), phrase.begin(), phrase.end()) != title.end();
    });
    if (hit) s.products.push_back(v);
  }
  return s;
}

Segment product_segment(const HeteroGraph& g, std::string id, std::span<const std::string> asins) {
  Segment s{std::move(id), {}};
  for (const auto& a : asins) {
    auto v = g.find(NodeKind::kProduct, a);
    if (!v) throw Error(Errc::kUnknownNode, "unknown product " + a);
    s.products.push_back(*v);
  }
  std::sort(s.products.begin(), s.products.end());
  s.products.erase(std::unique(s.products.begin(), s.products.end()), s.products.end());
  return s;
}

SegmentCounts segment_counts(const HeteroGraph& g, const Segment& s, EdgeKindSet kinds) {
  const LabelSet& labels = g.labels();
  SegmentCounts c;
  for (NodeId p : s.products)
    for (EdgeKind kind : kAllEdgeKinds) {
      if (!kinds.contains(kind)) continue;
      for (NodeId v : g.neighbors(p, kind)) {
        ++c.K;
        if (labels.is_political(v)) {
          ++c.X;
          if (is_red(labels, v)) ++c.X_red;
        }
      }
    }
  c.K_p = c.X;
  return c;
}

OverlapProblem overlap_problem(const HeteroGraph& g, const Segment& s, EdgeKindSet kinds) {
  const LabelSet& labels = g.labels();
  OverlapProblem p;
  for (const auto& [v, label] : labels) {
    if (label.cls == PolClass::kNonpolitical) continue;
    const std::size_t deg = g.degree(v, kinds);
    (label.cls == PolClass::kConservative ? p.pool_red : p.pool_blue) += deg;
  }
  for (NodeId prod : s.products) {
    std::uint32_t n = 0;
    bool red = false, blue = false;
    for (EdgeKind kind : kAllEdgeKinds) {
      if (!kinds.contains(kind)) continue;
      for (NodeId v : g.neighbors(prod, kind)) {
        if (is_red(labels, v)) {
          ++n;
          red = true;
        } else if (is_blue(labels, v)) {
          ++n;
          blue = true;
        }
      }
    }
    p.draws.push_back(n);
    p.observed += red && blue;
  }
  return p;
}

GlobalPoliticalTotals compute_totals(const HeteroGraph& g, std::span<const Segment> partition,
                                     const MetricsConfig& config) {
  if (partition.empty()) throw Error(Errc::kEmptySegment, "empty partition");
  GlobalPoliticalTotals t;
  for (const auto& [v, label] : g.labels()) {
    if (label.cls == PolClass::kNonpolitical) continue;
    const auto deg = static_cast<double>(g.degree(v, config.kinds));
    (label.cls == PolClass::kConservative ? t.k_red : t.k_blue) += deg;
  }
  t.k_political = t.k_red + t.k_blue;
  double x_sum = 0;
  for (const auto& s : partition) {
    const SegmentCounts c = segment_counts(g, s, config.kinds);
    t.m += static_cast<double>(c.K);
    x_sum += static_cast<double>(c.X);
  }
  t.d = config.d_override ? *config.d_override : x_sum / static_cast<double>(partition.size());
  return t;
}

PoliticsReport segment_report(const HeteroGraph& g, const Segment& s,
                              const GlobalPoliticalTotals& totals, const MetricsConfig& config) {
  if (s.products.empty()) throw Error(Errc::kEmptySegment, "segment " + s.id + " has no products");
  PoliticsReport r;
  r.segment = s.id;
  r.products = s.products.size();
  r.counts = segment_counts(g, s, config.kinds);
  r.relevance = relevance(r.counts, totals);
  r.alignment = alignment(r.counts, totals);
  r.polarization = polarization(overlap_problem(g, s, config.kinds), config.null);
  return r;
}

std::vector<PoliticsReport> category_reports(const HeteroGraph& g, CategoryLevel level,
                                             const MetricsConfig& config) {
  const auto segments = category_segments(g, level);
  const auto totals = compute_totals(g, segments, config);
  std::vector<PoliticsReport> out;
  for (const auto& s : segments) out.push_back(segment_report(g, s, totals, config));
  return out;
}

AuthorPolitics author_politics(const HeteroGraph& g, NodeId author,
                               const GlobalPoliticalTotals& totals) {
  if (g.node(author).kind != NodeKind::kAuthor)
    throw Error(Errc::kParameter, "author_politics: node is not an author");
  const auto reviewed = g.neighbors(author, EdgeKind::kReviews);
  if (reviewed.empty()) throw Error(Errc::kParameter, "author " + g.node(author).key + " has no reviews");
  AuthorPolitics a;
  a.counts.K = reviewed.size();
  for (NodeId p : reviewed) {
    if (!g.labels().is_political(p)) continue;
    ++a.counts.X;
    if (is_red(g.labels(), p)) ++a.counts.X_red;
  }
  a.counts.K_p = a.counts.X;
  a.relevance = relevance(a.counts, totals);
  a.alignment = alignment(a.counts, totals);
  return a;
}

void write_reports_csv(std::ostream& out, std::span<const PoliticsReport> reports) {
  using csv::format_double;
  csv::write_record(out, {"segment", "products", "X", "K", "X_red", "K_p", "relevance", "alignment",
                          "polarization", "E_O", "var_O", "o", "mode", "replicates", "seed"});
  for (const auto& r : reports) {
    const auto& p = r.polarization;
    csv::write_record(out, {r.segment, std::to_string(r.products), std::to_string(r.counts.X),
                            std::to_string(r.counts.K), std::to_string(r.counts.X_red),
                            std::to_string(r.counts.K_p), format_double(r.relevance),
                            format_double(r.alignment), p.z ? format_double(*p.z) : "NA",
                            format_double(p.expected), format_double(p.variance),
                            std::to_string(p.observed), std::string(to_string(p.mode)),
                            std::to_string(p.replicates), std::to_string(p.seed)});
  }
}

}  // namespace polnet
