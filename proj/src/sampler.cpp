#include "polnet/sampler.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <set>
#include <tuple>

#include "polnet/error.hpp"

namespace polnet {

namespace {

using Ids = std::vector<std::uint32_t>;

void sort_unique(Ids& v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
}

Ids merge(const Ids& a, const Ids& b) {
  Ids out;
  out.reserve(a.size() + b.size());
  std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

std::optional<std::uint32_t> find_sorted(const std::vector<std::string>& keys,
                                         std::string_view key) {
  auto it = std::lower_bound(keys.begin(), keys.end(), key);
  if (it == keys.end() || *it != key) return std::nullopt;
  return static_cast<std::uint32_t>(it - keys.begin());
}

}  // namespace

CorpusIndex::CorpusIndex(const Corpus& corpus) : corpus_(corpus) {
  std::set<std::string> meta_asins;
  for (const auto& m : corpus.products) {
    asins_.push_back(m.asin);
    meta_asins.insert(m.asin);
  }
  for (const auto& r : corpus.reviews) {
    asins_.push_back(r.asin);
    reviewers_.push_back(r.reviewer_id);
  }
  std::sort(asins_.begin(), asins_.end());
  asins_.erase(std::unique(asins_.begin(), asins_.end()), asins_.end());
  std::sort(reviewers_.begin(), reviewers_.end());
  reviewers_.erase(std::unique(reviewers_.begin(), reviewers_.end()), reviewers_.end());

  meta_.assign(asins_.size(), nullptr);
  copurchase_.resize(asins_.size());
  reviewers_of_.resize(asins_.size());
  reviewed_by_.resize(reviewers_.size());

  for (const auto& m : corpus.products) meta_[*find_product(m.asin)] = &m;

  for (const auto& m : corpus.products) {
    const std::uint32_t p = *find_product(m.asin);
    auto add = [&](const std::vector<std::string>& list, EdgeKind kind) {
      for (const auto& other : list) {
        if (!meta_asins.count(other)) {
          ++dangling_;
          continue;
        }
        const std::uint32_t q = *find_product(other);
        if (q == p) continue;
        copurchase_[p].push_back(q);
        copurchase_[q].push_back(p);
        links_.push_back({std::min(p, q), std::max(p, q), kind});
      }
    };
    add(m.related.bought_together, EdgeKind::kBoughtTogether);
    add(m.related.also_bought, EdgeKind::kAlsoBought);
    add(m.related.buy_after_viewing, EdgeKind::kBoughtAfterViewing);
    add(m.related.also_viewed, EdgeKind::kAlsoViewed);
  }
  for (auto& v : copurchase_) sort_unique(v);
  std::sort(links_.begin(), links_.end());
  links_.erase(std::unique(links_.begin(), links_.end()), links_.end());

  for (const auto& r : corpus.reviews) {
    const std::uint32_t p = *find_product(r.asin);
    const std::uint32_t a = *find_reviewer(r.reviewer_id);
    reviewers_of_[p].push_back(a);
    reviewed_by_[a].push_back(p);
    reviews_.push_back({a, p, &r});
  }
  // Collapse repeated pairs independently of input order: latest time, then
  // the larger rating and helpfulness as tie-breakers.
  auto rank = [](const ReviewRecord* r) {
    return std::tuple(r->unix_time, r->overall, r->helpful_total, r->helpful_up, r->review_text);
  };
  std::sort(reviews_.begin(), reviews_.end(), [&](const Review& x, const Review& y) {
    if (x.author != y.author) return x.author < y.author;
    if (x.product != y.product) return x.product < y.product;
    return rank(x.record) > rank(y.record);
  });
  reviews_.erase(std::unique(reviews_.begin(), reviews_.end(),
                             [](const Review& x, const Review& y) {
                               return x.author == y.author && x.product == y.product;
                             }),
                 reviews_.end());
  for (auto& v : reviewers_of_) sort_unique(v);
  for (auto& v : reviewed_by_) sort_unique(v);
}

std::optional<std::uint32_t> CorpusIndex::find_product(std::string_view asin) const {
  return find_sorted(asins_, asin);
}

std::optional<std::uint32_t> CorpusIndex::find_reviewer(std::string_view id) const {
  return find_sorted(reviewers_, id);
}

const ProductMeta* CorpusIndex::meta(std::uint32_t p) const { return meta_.at(p); }

std::string_view to_string(Step2Mode m) noexcept {
  return m == Step2Mode::kReviewedProducts ? "reviewed_products" : "seed_products";
}

std::optional<Step2Mode> parse_step2_mode(std::string_view name) noexcept {
  if (name == "reviewed_products") return Step2Mode::kReviewedProducts;
  if (name == "seed_products") return Step2Mode::kSeedProducts;
  return std::nullopt;
}

WaveResult run_wave(const CorpusIndex& index, std::span<const std::uint32_t> frontier,
                    Step2Mode mode) {
  if (frontier.empty()) throw Error(Errc::kParameter, "run_wave: empty frontier");
  Ids front(frontier.begin(), frontier.end());
  sort_unique(front);

  WaveResult w;
  auto copurchases_of = [&](const Ids& ps) {
    Ids out;
    for (auto p : ps) out.insert(out.end(), index.copurchases(p).begin(), index.copurchases(p).end());
    sort_unique(out);
    return out;
  };
  auto reviewers_of = [&](const Ids& ps) {
    Ids out;
    for (auto p : ps)
      out.insert(out.end(), index.reviewers_of(p).begin(), index.reviewers_of(p).end());
    sort_unique(out);
    return out;
  };

  w.step1_products = copurchases_of(front);
  w.step1_authors = reviewers_of(w.step1_products);

  w.step2_authors = reviewers_of(front);
  Ids reviewed;
  for (auto a : w.step2_authors)
    reviewed.insert(reviewed.end(), index.reviewed_by(a).begin(), index.reviewed_by(a).end());
  sort_unique(reviewed);
  w.step2_products =
      merge(reviewed, mode == Step2Mode::kReviewedProducts ? copurchases_of(reviewed) : w.step1_products);

  w.products = merge(merge(front, w.step1_products), w.step2_products);
  w.authors = merge(w.step1_authors, w.step2_authors);
  return w;
}

SampleWavePlan load_plan(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::kIo, "cannot read " + path.string());
  auto j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw Error(Errc::kFormat, path.string() + ": not a JSON object");
  SampleWavePlan plan;
  try {
    plan.waves = j.value("waves", 2);
    if (j.contains("step2")) {
      auto mode = parse_step2_mode(j.at("step2").get<std::string>());
      if (!mode) throw Error(Errc::kFormat, "step2 must be reviewed_products or seed_products");
      plan.step2 = *mode;
    }
    if (j.contains("seeds")) plan.seed_asins = j.at("seeds").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::kFormat, path.string() + ": " + e.what());
  }
  if (plan.waves < 1) throw Error(Errc::kParameter, "waves must be >= 1");
  return plan;
}

std::string SamplingReport::to_json() const {
  nlohmann::ordered_json j;
  j["products"] = products;
  j["authors"] = authors;
  j["brands"] = brands;
  j["categories"] = categories;
  j["edges"] = edges;
  j["dangling_references"] = dangling_references;
  j["missing_seeds"] = missing_seeds;
  auto& ws = j["waves"] = nlohmann::ordered_json::array();
  for (const auto& w : waves) {
    nlohmann::ordered_json e;
    e["wave"] = w.wave;
    e["frontier"] = w.frontier;
    e["step1_products"] = w.step1_products;
    e["step1_authors"] = w.step1_authors;
    e["step2_authors"] = w.step2_authors;
    e["step2_products"] = w.step2_products;
    e["new_products"] = w.new_products;
    e["new_authors"] = w.new_authors;
    ws.push_back(std::move(e));
  }
  return j.dump(2) + "\n";
}

SampleResult run_plan(const CorpusIndex& index, const SampleWavePlan& plan,
                      const CategoryMap& categories) {
  if (plan.waves < 1) throw Error(Errc::kParameter, "waves must be >= 1");
  SampleResult out;
  SamplingReport& rep = out.report;
  rep.dangling_references = index.dangling_references();

  std::vector<int> product_wave(index.product_count(), -1);
  std::vector<int> author_wave(index.reviewer_count(), -1);
  Ids products;
  for (const auto& s : plan.seed_asins) {
    if (auto p = index.find_product(s)) {
      products.push_back(*p);
      product_wave[*p] = 0;
    } else {
      rep.missing_seeds.push_back(s);
    }
  }
  sort_unique(products);
  Ids authors;

  for (int wave = 1; wave <= plan.waves && !products.empty(); ++wave) {
    WaveResult w = run_wave(index, products, plan.step2);
    WaveCounts c;
    c.wave = wave;
    c.frontier = products.size();
    c.step1_products = w.step1_products.size();
    c.step1_authors = w.step1_authors.size();
    c.step2_authors = w.step2_authors.size();
    c.step2_products = w.step2_products.size();
    for (auto p : w.products)
      if (product_wave[p] < 0) {
        product_wave[p] = wave;
        ++c.new_products;
      }
    for (auto a : w.authors)
      if (author_wave[a] < 0) {
        author_wave[a] = wave;
        ++c.new_authors;
      }
    products = merge(products, w.products);
    authors = merge(authors, w.authors);
    rep.waves.push_back(c);
  }

  HeteroGraph& g = out.graph;
  if (products.empty()) return out;

  std::vector<double> rating_sum(index.product_count(), 0.0);
  std::vector<std::size_t> rating_n(index.product_count(), 0);
  for (const auto& r : index.reviews()) {
    rating_sum[r.product] += r.record->overall;
    ++rating_n[r.product];
  }

  // Ids follow sorted keys within each kind: products, authors, brands, categories.
  std::vector<NodeId> pnode(index.product_count()), anode(index.reviewer_count());
  for (auto p : products) {
    NodeAttrs a;
    a.wave = product_wave[p];
    if (rating_n[p]) a.rating_avg = rating_sum[p] / static_cast<double>(rating_n[p]);
    if (const ProductMeta* m = index.meta(p)) {
      a.name = m->title;
      for (const auto& [cat, rank] : m->sales_rank)
        if (!a.sales_rank || rank < *a.sales_rank) a.sales_rank = rank;
      const CategoryGroup grp = categories.regroup(m->categories);
      a.main_category = grp.main;
      a.big_category = grp.big;
    } else {
      a.main_category = a.big_category = std::string(kOtherCategory);
    }
    pnode[p] = g.add_node(NodeKind::kProduct, index.asin(p), std::move(a));
  }
  for (auto u : authors) {
    NodeAttrs a;
    a.wave = author_wave[u];
    anode[u] = g.add_node(NodeKind::kAuthor, index.reviewer(u), std::move(a));
  }

  std::set<std::string> brands, cats;
  auto path_key = [](const std::vector<std::string>& path) {
    std::string k;
    for (const auto& part : path) {
      if (!k.empty()) k += " > ";
      k += part;
    }
    return k;
  };
  for (auto p : products)
    if (const ProductMeta* m = index.meta(p)) {
      if (m->brand) brands.insert(*m->brand);
      for (const auto& path : m->categories)
        if (!path.empty()) cats.insert(path_key(path));
    }
  for (const auto& b : brands) g.add_node(NodeKind::kBrand, b);
  for (const auto& c : cats) {
    NodeAttrs a;
    a.name = c.substr(0, c.find(" > "));
    const CategoryGroup grp = categories.regroup_root(a.name);
    a.main_category = grp.main;
    a.big_category = grp.big;
    g.add_node(NodeKind::kCategory, c, std::move(a));
  }

  std::vector<bool> in_p(index.product_count(), false), in_a(index.reviewer_count(), false);
  for (auto p : products) in_p[p] = true;
  for (auto a : authors) in_a[a] = true;

  for (const auto& [a, p, r] : index.reviews()) {
    if (!in_p[p] || !in_a[a]) continue;
    g.add_edge(anode[a], pnode[p], EdgeKind::kReviews,
               ReviewAttrs{r->overall, r->helpful_up, r->helpful_total, r->unix_time, std::nullopt});
  }
  for (const auto& l : index.copurchase_links())
    if (in_p[l.a] && in_p[l.b]) g.add_edge(pnode[l.a], pnode[l.b], l.kind);
  for (auto p : products)
    if (const ProductMeta* m = index.meta(p)) {
      if (m->brand) g.add_edge(pnode[p], *g.find(NodeKind::kBrand, *m->brand), EdgeKind::kHasBrand);
      for (const auto& path : m->categories)
        if (!path.empty())
          g.add_edge(pnode[p], *g.find(NodeKind::kCategory, path_key(path)), EdgeKind::kInCategory);
    }

  rep.products = g.node_count(NodeKind::kProduct);
  rep.authors = g.node_count(NodeKind::kAuthor);
  rep.brands = g.node_count(NodeKind::kBrand);
  rep.categories = g.node_count(NodeKind::kCategory);
  rep.edges = g.edge_count();
  return out;
}

std::vector<std::string> bipartite_baseline(const CorpusIndex& index,
                                            std::span<const std::string> seed_asins, int waves) {
  if (waves < 1) throw Error(Errc::kParameter, "waves must be >= 1");
  Ids reached;
  for (const auto& s : seed_asins)
    if (auto p = index.find_product(s)) reached.push_back(*p);
  sort_unique(reached);
  Ids frontier = reached;
  for (int w = 0; w < waves && !frontier.empty(); ++w) {
    Ids next;
    for (auto p : frontier)
      for (auto q : index.copurchases(p))
        if (!std::binary_search(reached.begin(), reached.end(), q)) next.push_back(q);
    sort_unique(next);
    reached = merge(reached, next);
    frontier = std::move(next);
  }
  std::vector<std::string> out;
  for (auto p : reached) out.push_back(index.asin(p));
  return out;
}

std::size_t apply_seed_labels(HeteroGraph& g, std::span<const SeedMatch> matches) {
  std::size_t applied = 0;
  for (const auto& m : matches) {
    auto v = g.find(NodeKind::kProduct, m.asin);
    if (!v) continue;
    PoliticalLabel l;
    l.product = *v;
    l.cls = m.cls;
    l.probability = 1.0;
    l.provenance = Provenance::kSeed;
    l.iteration = 0;
    if (g.labels().upsert(l) != LabelSet::Upsert::kRejected) ++applied;
  }
  return applied;
}

std::size_t attach_moral_vectors(HeteroGraph& g, const MoralScores& scores) {
  std::size_t attached = 0;
  for (const auto& [key, vec] : scores.vectors) {
    auto a = g.find(NodeKind::kAuthor, key.first);
    auto p = g.find(NodeKind::kProduct, key.second);
    if (!a || !p) continue;
    const ReviewAttrs* cur = g.review_attrs(*a, *p);
    if (!cur) continue;
    ReviewAttrs next = *cur;
    next.moral = vec;
    g.set_review_attrs(*a, *p, next);
    ++attached;
  }
  return attached;
}

}  // namespace polnet
