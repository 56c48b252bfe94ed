#include "binio.hpp"
#include "polnet/hetgraph.hpp"

namespace polnet {

namespace {

constexpr std::string_view kMagic = "PNGRAPH";

enum Tag : std::uint32_t { kNodes = 1, kEdges = 2, kReviews = 3, kLabels = 4, kState = 5 };

std::string encode_nodes(const HeteroGraph& g) {
  binio::Writer w;
  w.u64(g.node_count());
  for (const Node& n : g.nodes()) {
    w.u8(static_cast<std::uint8_t>(n.kind));
    w.str(n.key);
    w.str(n.attrs.name);
    w.u8(n.attrs.rating_avg.has_value());
    w.f64(n.attrs.rating_avg.value_or(0.0));
    w.u8(n.attrs.sales_rank.has_value());
    w.i64(n.attrs.sales_rank.value_or(0));
    w.i32(n.attrs.wave);
    w.str(n.attrs.main_category);
    w.str(n.attrs.big_category);
  }
  return w.take();
}

std::string encode_edges(const HeteroGraph& g) {
  binio::Writer w;
  for (EdgeKind kind : kAllEdgeKinds) {
    w.u64(g.edge_count(kind));
    g.for_each_edge(kind, [&](NodeId u, NodeId v) {
      w.u32(u);
      w.u32(v);
    });
  }
  return w.take();
}

std::string encode_reviews(const HeteroGraph& g) {
  binio::Writer w;
  const auto entries = g.sorted_review_attrs();
  w.u64(entries.size());
  for (const auto& [key, a] : entries) {
    w.u32(key.first);
    w.u32(key.second);
    w.f64(a.rating);
    w.u32(a.helpful_up);
    w.u32(a.helpful_total);
    w.i64(a.unix_time);
    w.u8(a.moral.has_value());
    if (a.moral) w.f64s(a.moral->p.data(), kMoralDims);
  }
  return w.take();
}

std::string encode_labels(const LabelSet& labels) {
  binio::Writer w;
  w.u64(labels.size());
  for (const auto& [product, l] : labels) {
    w.u32(product);
    w.u8(static_cast<std::uint8_t>(l.cls));
    w.f64(l.probability);
    w.u8(static_cast<std::uint8_t>(l.provenance));
    w.i32(l.iteration);
  }
  return w.take();
}

template <typename E>
E checked_enum(std::uint8_t raw, std::size_t limit, const char* what) {
  if (raw >= limit) throw Error(Errc::kFormat, std::string("bad ") + what + " value");
  return static_cast<E>(raw);
}

}  // namespace

void save_snapshot(const HeteroGraph& g, const std::filesystem::path& path) {
  binio::Writer state;
  state.u8(g.frozen());
  std::vector<binio::Section> sections = {
      {kNodes, encode_nodes(g)},
      {kEdges, encode_edges(g)},
      {kReviews, encode_reviews(g)},
      {kLabels, encode_labels(g.labels())},
      {kState, state.take()},
  };
  binio::write_container(path, kMagic, kSnapshotVersion, sections);
}

HeteroGraph load_snapshot(const std::filesystem::path& path) {
  const auto sections = binio::read_container(path, kMagic, kSnapshotVersion);
  auto payload = [&](Tag tag) -> std::string_view {
    for (const auto& s : sections)
      if (s.tag == tag) return s.payload;
    throw Error(Errc::kFormat, "snapshot section " + std::to_string(tag) + " missing");
  };

  HeteroGraph g;
  {
    binio::Reader r(payload(kNodes));
    const auto n = r.count(8);
    for (std::uint64_t i = 0; i < n; ++i) {
      const auto kind = checked_enum<NodeKind>(r.u8(), kNodeKindCount, "node kind");
      std::string key = r.str();
      NodeAttrs a;
      a.name = r.str();
      const bool has_rating = r.u8() != 0;
      const double rating = r.f64();
      if (has_rating) a.rating_avg = rating;
      const bool has_rank = r.u8() != 0;
      const std::int64_t rank = r.i64();
      if (has_rank) a.sales_rank = rank;
      a.wave = r.i32();
      a.main_category = r.str();
      a.big_category = r.str();
      if (g.add_node(kind, std::move(key), std::move(a)) != i)
        throw Error(Errc::kFormat, "duplicate node key in snapshot");
    }
  }
  {
    binio::Reader r(payload(kEdges));
    for (EdgeKind kind : kAllEdgeKinds) {
      const auto m = r.count(8);
      for (std::uint64_t i = 0; i < m; ++i) {
        const NodeId u = r.u32();
        const NodeId v = r.u32();
        if (g.add_edge(u, v, kind) == HeteroGraph::AddEdge::kDuplicate)
          throw Error(Errc::kFormat, "duplicate edge in snapshot");
      }
    }
  }
  {
    binio::Reader r(payload(kReviews));
    const auto m = r.count(8);
    for (std::uint64_t i = 0; i < m; ++i) {
      const NodeId author = r.u32();
      const NodeId product = r.u32();
      ReviewAttrs a;
      a.rating = r.f64();
      a.helpful_up = r.u32();
      a.helpful_total = r.u32();
      a.unix_time = r.i64();
      if (r.u8() != 0) {
        MoralVector mv;
        r.f64s(mv.p.data(), kMoralDims);
        a.moral = mv;
      }
      g.set_review_attrs(author, product, std::move(a));
    }
  }
  {
    binio::Reader r(payload(kLabels));
    const auto m = r.count(8);
    for (std::uint64_t i = 0; i < m; ++i) {
      PoliticalLabel l;
      l.product = r.u32();
      l.cls = checked_enum<PolClass>(r.u8(), 3, "label class");
      l.probability = r.f64();
      l.provenance = checked_enum<Provenance>(r.u8(), 3, "provenance");
      l.iteration = r.i32();
      if (l.product >= g.node_count()) throw Error(Errc::kFormat, "label on unknown node");
      g.labels().upsert(l);
    }
  }
  binio::Reader state(payload(kState));
  if (state.u8() != 0) g.freeze();
  return g;
}

}  // namespace polnet
