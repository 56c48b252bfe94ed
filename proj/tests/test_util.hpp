#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "polnet/hetgraph.hpp"

namespace polnet::testing {

inline std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("polnet_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

/// Random heterogeneous graph touching every node and edge kind.
inline HeteroGraph random_graph(std::mt19937_64& rng, std::size_t products, std::size_t authors,
                                double density) {
  HeteroGraph g;
  std::vector<NodeId> ps, as, bs, cs;
  for (std::size_t i = 0; i < products; ++i) {
    NodeAttrs a;
    a.name = "product " + std::to_string(i);
    if (i % 3 == 0) a.rating_avg = 1.0 + static_cast<double>(i % 5);
    if (i % 4 == 0) a.sales_rank = static_cast<std::int64_t>(i * 17);
    a.wave = static_cast<int>(i % 3);
    a.main_category = i % 2 ? "Books" : "Music";
    a.big_category = "Culture";
    ps.push_back(g.add_node(NodeKind::kProduct, "P" + std::to_string(i), a));
  }
  for (std::size_t i = 0; i < authors; ++i)
    as.push_back(g.add_node(NodeKind::kAuthor, "A" + std::to_string(i)));
  for (int i = 0; i < 3; ++i) bs.push_back(g.add_node(NodeKind::kBrand, "B" + std::to_string(i)));
  for (int i = 0; i < 3; ++i) cs.push_back(g.add_node(NodeKind::kCategory, "C" + std::to_string(i)));

  std::bernoulli_distribution coin(density);
  std::uniform_int_distribution<int> kind_pick(1, 5);
  for (std::size_t i = 0; i < ps.size(); ++i)
    for (std::size_t j = i + 1; j < ps.size(); ++j)
      if (coin(rng)) g.add_edge(ps[i], ps[j], static_cast<EdgeKind>(kind_pick(rng)));
  for (std::size_t a = 0; a < as.size(); ++a)
    for (std::size_t p = 0; p < ps.size(); ++p)
      if (coin(rng)) {
        ReviewAttrs r;
        r.rating = 1.0 + static_cast<double>((a + p) % 5);
        r.helpful_up = static_cast<std::uint32_t>(p % 3);
        r.helpful_total = r.helpful_up + 2;
        r.unix_time = static_cast<std::int64_t>(1'000'000 + a * 100 + p);
        if ((a + p) % 2) {
          MoralVector mv;
          for (std::size_t k = 0; k < kMoralDims; ++k) mv.p[k] = static_cast<double>(k) / 11.0;
          r.moral = mv;
        }
        g.add_edge(as[a], ps[p], EdgeKind::kReviews, r);
      }
  for (std::size_t p = 0; p < ps.size(); ++p) {
    g.add_edge(ps[p], bs[p % bs.size()], EdgeKind::kHasBrand);
    g.add_edge(ps[p], cs[(p * 7) % cs.size()], EdgeKind::kInCategory);
  }
  for (std::size_t p = 0; p < ps.size(); p += 3) {
    PoliticalLabel l;
    l.product = ps[p];
    l.cls = static_cast<PolClass>(p % 3);
    l.provenance = p % 2 ? Provenance::kModel : Provenance::kSeed;
    l.probability = l.provenance == Provenance::kModel ? 0.97 : 1.0;
    g.labels().upsert(l);
  }
  return g;
}


struct PlantedMarket {
  HeteroGraph graph;
  std::vector<NodeId> products;
  std::vector<PolClass> truth;  // per entry of `products`
};

/// Two communities of products (conservative, liberal) with dense co-purchase
/// and review ties inside each community and sparse ties across. The first
/// `labels_per_class` products of each community get seed labels.
inline PlantedMarket planted_market(std::uint64_t seed, std::size_t per_class = 50,
                                    std::size_t labels_per_class = 10, double p_in = 0.2,
                                    double p_out = 0.01, std::size_t authors_per_class = 15) {
  std::mt19937_64 rng(seed);
  PlantedMarket m;
  HeteroGraph& g = m.graph;
  for (int c = 0; c < 2; ++c)
    for (std::size_t i = 0; i < per_class; ++i) {
      m.products.push_back(
          g.add_node(NodeKind::kProduct, (c ? "L" : "C") + std::to_string(1000 + i)));
      m.truth.push_back(static_cast<PolClass>(c));
    }
  std::bernoulli_distribution in(p_in), out(p_out);
  for (std::size_t i = 0; i < m.products.size(); ++i)
    for (std::size_t j = i + 1; j < m.products.size(); ++j)
      if (m.truth[i] == m.truth[j] ? in(rng) : out(rng))
        g.add_edge(m.products[i], m.products[j], EdgeKind::kAlsoBought);
  std::bernoulli_distribution reviews_in(0.15), reviews_out(0.01);
  for (int c = 0; c < 2; ++c)
    for (std::size_t a = 0; a < authors_per_class; ++a) {
      NodeId author = g.add_node(NodeKind::kAuthor, (c ? "RL" : "RC") + std::to_string(a));
      for (std::size_t i = 0; i < m.products.size(); ++i)
        if (static_cast<int>(m.truth[i]) == c ? reviews_in(rng) : reviews_out(rng))
          g.add_edge(author, m.products[i], EdgeKind::kReviews, ReviewAttrs{});
    }
  for (int c = 0; c < 2; ++c)
    for (std::size_t i = 0; i < labels_per_class; ++i)
      g.labels().upsert({m.products[c * per_class + i], static_cast<PolClass>(c), 1.0,
                         Provenance::kSeed, 0});
  return m;
}

}  // namespace polnet::testing
