#include "polnet/hetgraph.hpp"

#include <algorithm>
#include <ostream>

#include "polnet/error.hpp"

namespace polnet {

// ---------------------------------------------------------------- LabelSet

LabelSet::Upsert LabelSet::upsert(PoliticalLabel label) {
  if (label.probability < 0.0 || label.probability > 1.0)
    throw Error(Errc::kParameter, "label probability outside [0,1]");
  if (label.provenance != Provenance::kModel && label.probability != 1.0)
    throw Error(Errc::kParameter, "seed and human labels must carry probability 1");

  auto it = labels_.find(label.product);
  if (it == labels_.end()) {
    labels_.emplace(label.product, label);
    return Upsert::kInserted;
  }
  if (precedence(label.provenance) < precedence(it->second.provenance)) return Upsert::kRejected;
  it->second = label;
  return Upsert::kReplaced;
}

bool LabelSet::erase(NodeId product) { return labels_.erase(product) != 0; }

const PoliticalLabel* LabelSet::find(NodeId product) const {
  auto it = labels_.find(product);
  return it == labels_.end() ? nullptr : &it->second;
}

std::size_t LabelSet::count(PolClass cls) const {
  return static_cast<std::size_t>(std::count_if(
      labels_.begin(), labels_.end(), [cls](const auto& kv) { return kv.second.cls == cls; }));
}

bool LabelSet::is_political(NodeId product) const {
  const PoliticalLabel* l = find(product);
  return l != nullptr && l->cls != PolClass::kNonpolitical;
}

// ------------------------------------------------------------- HeteroGraph

namespace {

bool endpoints_legal(EdgeKind kind, NodeKind a, NodeKind b) {
  switch (kind) {
    case EdgeKind::kReviews:
      return (a == NodeKind::kAuthor && b == NodeKind::kProduct) ||
             (a == NodeKind::kProduct && b == NodeKind::kAuthor);
    case EdgeKind::kHasBrand:
      return (a == NodeKind::kProduct && b == NodeKind::kBrand) ||
             (a == NodeKind::kBrand && b == NodeKind::kProduct);
    case EdgeKind::kInCategory:
      return (a == NodeKind::kProduct && b == NodeKind::kCategory) ||
             (a == NodeKind::kCategory && b == NodeKind::kProduct);
    default:
      return a == NodeKind::kProduct && b == NodeKind::kProduct;
  }
}

}  // namespace

void HeteroGraph::check_node(NodeId v) const {
  if (v >= nodes_.size())
    throw Error(Errc::kUnknownNode, "unknown node id " + std::to_string(v));
}

void HeteroGraph::check_mutable() const {
  if (frozen_) throw Error(Errc::kFrozen, "graph is frozen");
}

NodeId HeteroGraph::add_node(NodeKind kind, std::string key, NodeAttrs attrs) {
  check_mutable();
  auto& index = key_index_[static_cast<std::size_t>(kind)];
  if (auto it = index.find(key); it != index.end()) return it->second;
  const auto id = static_cast<NodeId>(nodes_.size());
  index.emplace(key, id);
  nodes_.push_back(Node{kind, std::move(key), std::move(attrs)});
  for (auto& lists : lists_) lists.emplace_back();
  return id;
}

std::optional<NodeId> HeteroGraph::find(NodeKind kind, std::string_view key) const {
  const auto& index = key_index_[static_cast<std::size_t>(kind)];
  auto it = index.find(std::string(key));
  if (it == index.end()) return std::nullopt;
  return it->second;
}

HeteroGraph::AddEdge HeteroGraph::add_edge(NodeId u, NodeId v, EdgeKind kind,
                                           std::optional<ReviewAttrs> attrs) {
  check_mutable();
  check_node(u);
  check_node(v);
  if (!endpoints_legal(kind, nodes_[u].kind, nodes_[v].kind))
    throw Error(Errc::kEndpointMismatch,
                std::string("illegal endpoints for ") + std::string(to_string(kind)) + ": " +
                    std::string(to_string(nodes_[u].kind)) + "-" +
                    std::string(to_string(nodes_[v].kind)));
  if (u == v) throw Error(Errc::kSelfLoop, "self loop on node " + std::to_string(u));

  auto& lists = lists_[index(kind)];
  auto& nu = lists[u];
  auto pos = std::lower_bound(nu.begin(), nu.end(), v);
  if (pos != nu.end() && *pos == v) return AddEdge::kDuplicate;
  nu.insert(pos, v);
  auto& nv = lists[v];
  nv.insert(std::lower_bound(nv.begin(), nv.end(), u), u);
  ++edge_counts_[index(kind)];

  if (kind == EdgeKind::kReviews && attrs) {
    const bool u_is_author = nodes_[u].kind == NodeKind::kAuthor;
    review_attrs_[pair_key(u_is_author ? u : v, u_is_author ? v : u)] = *attrs;
  }
  return AddEdge::kAdded;
}

bool HeteroGraph::has_edge(NodeId u, NodeId v, EdgeKind kind) const {
  auto n = neighbors(u, kind);
  return std::binary_search(n.begin(), n.end(), v);
}

std::span<const NodeId> HeteroGraph::neighbors(NodeId v, EdgeKind kind) const {
  check_node(v);
  if (frozen_) {
    const Csr& c = csr_[index(kind)];
    return {c.targets.data() + c.offsets[v], c.offsets[v + 1] - c.offsets[v]};
  }
  const auto& list = lists_[index(kind)][v];
  return {list.data(), list.size()};
}

std::size_t HeteroGraph::degree(NodeId v, EdgeKindSet kinds) const {
  std::size_t d = 0;
  for (EdgeKind k : kAllEdgeKinds)
    if (kinds.contains(k)) d += degree(v, k);
  return d;
}

std::size_t HeteroGraph::node_count(NodeKind kind) const {
  return key_index_[static_cast<std::size_t>(kind)].size();
}

std::size_t HeteroGraph::edge_count() const {
  std::size_t total = 0;
  for (auto c : edge_counts_) total += c;
  return total;
}

const Node& HeteroGraph::node(NodeId v) const {
  check_node(v);
  return nodes_[v];
}

NodeAttrs& HeteroGraph::mutable_attrs(NodeId v) {
  check_mutable();
  check_node(v);
  return nodes_[v].attrs;
}

const ReviewAttrs* HeteroGraph::review_attrs(NodeId author, NodeId product) const {
  auto it = review_attrs_.find(pair_key(author, product));
  return it == review_attrs_.end() ? nullptr : &it->second;
}

std::vector<std::pair<std::pair<NodeId, NodeId>, ReviewAttrs>> HeteroGraph::sorted_review_attrs()
    const {
  std::vector<std::pair<std::pair<NodeId, NodeId>, ReviewAttrs>> out;
  out.reserve(review_attrs_.size());
  for (const auto& [key, attrs] : review_attrs_)
    out.push_back({{static_cast<NodeId>(key >> 32), static_cast<NodeId>(key & 0xffffffffu)}, attrs});
  std::sort(out.begin(), out.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  return out;
}

void HeteroGraph::set_review_attrs(NodeId author, NodeId product, ReviewAttrs attrs) {
  check_mutable();
  if (!has_edge(author, product, EdgeKind::kReviews) || nodes_[author].kind != NodeKind::kAuthor)
    throw Error(Errc::kEndpointMismatch, "review attributes need an existing author-product edge");
  review_attrs_[pair_key(author, product)] = std::move(attrs);
}

void HeteroGraph::freeze() {
  if (frozen_) return;
  for (std::size_t k = 0; k < kEdgeKindCount; ++k) {
    Csr& c = csr_[k];
    auto& lists = lists_[k];
    c.offsets.assign(nodes_.size() + 1, 0);
    for (std::size_t v = 0; v < lists.size(); ++v) c.offsets[v + 1] = c.offsets[v] + lists[v].size();
    c.targets.reserve(c.offsets.back());
    for (auto& l : lists) c.targets.insert(c.targets.end(), l.begin(), l.end());
    lists.clear();
    lists.shrink_to_fit();
  }
  frozen_ = true;
}

HeteroGraph HeteroGraph::mutable_copy() const {
  HeteroGraph out;
  out.nodes_ = nodes_;
  out.key_index_ = key_index_;
  out.edge_counts_ = edge_counts_;
  out.review_attrs_ = review_attrs_;
  out.labels_ = labels_;
  for (std::size_t k = 0; k < kEdgeKindCount; ++k) {
    auto& lists = out.lists_[k];
    lists.resize(nodes_.size());
    for (NodeId v = 0; v < nodes_.size(); ++v) {
      auto n = neighbors(v, static_cast<EdgeKind>(k));
      lists[v].assign(n.begin(), n.end());
    }
  }
  return out;
}

bool HeteroGraph::operator==(const HeteroGraph& other) const {
  if (nodes_ != other.nodes_ || edge_counts_ != other.edge_counts_ ||
      review_attrs_ != other.review_attrs_ || labels_ != other.labels_)
    return false;
  for (EdgeKind k : kAllEdgeKinds)
    for (NodeId v = 0; v < nodes_.size(); ++v) {
      auto a = neighbors(v, k);
      auto b = other.neighbors(v, k);
      if (!std::equal(a.begin(), a.end(), b.begin(), b.end())) return false;
    }
  return true;
}

// ------------------------------------------------------ derived graphs

HeteroGraph induced_subgraph(const HeteroGraph& g, const std::vector<bool>& keep) {
  constexpr NodeId kDropped = ~NodeId{0};
  std::vector<NodeId> remap(g.node_count(), kDropped);
  HeteroGraph out;
  for (NodeId v = 0; v < g.node_count(); ++v) {
    if (!keep[v]) continue;
    const Node& n = g.node(v);
    remap[v] = out.add_node(n.kind, n.key, n.attrs);
  }
  for (EdgeKind kind : kAllEdgeKinds) {
    g.for_each_edge(kind, [&](NodeId u, NodeId v) {
      if (remap[u] == kDropped || remap[v] == kDropped) return;
      std::optional<ReviewAttrs> attrs;
      if (kind == EdgeKind::kReviews) {
        const bool u_author = g.node(u).kind == NodeKind::kAuthor;
        if (const ReviewAttrs* a = g.review_attrs(u_author ? u : v, u_author ? v : u)) attrs = *a;
      }
      out.add_edge(remap[u], remap[v], kind, attrs);
    });
  }
  for (const auto& [product, label] : g.labels()) {
    if (remap[product] == kDropped) continue;
    PoliticalLabel moved = label;
    moved.product = remap[product];
    out.labels().upsert(moved);
  }
  return out;
}

AugmentResult augment_coreview(const HeteroGraph& g, std::optional<std::size_t> max_reviewer_degree) {
  AugmentResult result{g.mutable_copy(), {}};
  HeteroGraph& out = result.graph;
  AugmentReport& rep = result.report;

  auto copurchase_joined = [&](NodeId a, NodeId b) {
    for (EdgeKind k : kAllEdgeKinds)
      if (is_copurchase(k) && out.has_edge(a, b, k)) return true;
    return false;
  };

  for (NodeId author = 0; author < g.node_count(); ++author) {
    if (g.node(author).kind != NodeKind::kAuthor) continue;
    auto products = g.neighbors(author, EdgeKind::kReviews);
    if (products.size() < 2) continue;
    ++rep.reviewers_scanned;
    if (max_reviewer_degree && products.size() > *max_reviewer_degree) {
      ++rep.reviewers_skipped;
      continue;
    }
    const std::size_t pairs = products.size() * (products.size() - 1) / 2;
    if (pairs > kPairWarnThreshold) ++rep.reviewers_warned;
    for (std::size_t i = 0; i < products.size(); ++i) {
      for (std::size_t j = i + 1; j < products.size(); ++j) {
        ++rep.pairs_considered;
        if (copurchase_joined(products[i], products[j])) {
          ++rep.pairs_suppressed;
          continue;
        }
        if (out.add_edge(products[i], products[j], EdgeKind::kCoReview) ==
            HeteroGraph::AddEdge::kAdded)
          ++rep.added;
      }
    }
  }
  return result;
}

std::map<std::size_t, std::size_t> degree_distribution(const HeteroGraph& g,
                                                       std::optional<EdgeKind> kind) {
  std::map<std::size_t, std::size_t> hist;
  for (NodeId v = 0; v < g.node_count(); ++v) {
    const std::size_t d = kind ? g.degree(v, *kind) : g.total_degree(v);
    ++hist[d];
  }
  return hist;
}

// --------------------------------------------------------------- export

void export_edge_list(const HeteroGraph& g, std::ostream& out) {
  for (EdgeKind kind : kAllEdgeKinds) {
    g.for_each_edge(kind, [&](NodeId u, NodeId v) {
      out << g.node(u).key << '\t' << g.node(v).key << '\t' << to_string(kind) << '\n';
    });
  }
}

namespace {
std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c;
  }
  q += '"';
  return q;
}
}  // namespace

void export_node_table(const HeteroGraph& g, std::ostream& out) {
  out << "key,kind,label,category\n";
  for (NodeId v = 0; v < g.node_count(); ++v) {
    const Node& n = g.node(v);
    const PoliticalLabel* l = g.labels().find(v);
    out << csv_field(n.key) << ',' << to_string(n.kind) << ','
        << (l ? to_string(l->cls) : std::string_view{}) << ',' << csv_field(n.attrs.main_category)
        << '\n';
  }
}

}  // namespace polnet
