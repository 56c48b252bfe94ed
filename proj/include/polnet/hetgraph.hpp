#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "polnet/types.hpp"

namespace polnet {

struct NodeAttrs {
  std::string name;
  std::optional<double> rating_avg;
  std::optional<std::int64_t> sales_rank;
  int wave = -1;  // sampling wave that discovered the node; seeds are 0, -1 = unsampled
  std::string main_category;
  std::string big_category;

  bool operator==(const NodeAttrs&) const = default;
};

struct Node {
  NodeKind kind;
  std::string key;  // ASIN, reviewer id, brand or category name
  NodeAttrs attrs;

  bool operator==(const Node&) const = default;
};

struct ReviewAttrs {
  double rating = 0.0;
  std::uint32_t helpful_up = 0;
  std::uint32_t helpful_total = 0;
  std::int64_t unix_time = 0;
  std::optional<MoralVector> moral;  // absent != all zeros

  bool operator==(const ReviewAttrs&) const = default;
};

struct PoliticalLabel {
  NodeId product = 0;
  PolClass cls = PolClass::kNonpolitical;
  double probability = 1.0;
  Provenance provenance = Provenance::kSeed;
  int iteration = 0;

  bool operator==(const PoliticalLabel&) const = default;
};

/// At most one active label per product, with provenance precedence
/// seed > human > model. Seed and human labels always carry probability 1.
class LabelSet {
 public:
  enum class Upsert { kInserted, kReplaced, kRejected };

  Upsert upsert(PoliticalLabel label);
  bool erase(NodeId product);

  const PoliticalLabel* find(NodeId product) const;
  bool contains(NodeId product) const { return labels_.count(product) != 0; }
  std::size_t size() const { return labels_.size(); }
  bool empty() const { return labels_.empty(); }
  std::size_t count(PolClass cls) const;
  bool is_political(NodeId product) const;

  auto begin() const { return labels_.begin(); }
  auto end() const { return labels_.end(); }

  bool operator==(const LabelSet&) const = default;

 private:
  std::map<NodeId, PoliticalLabel> labels_;
};

/// Typed undirected multi-relational graph. Sorted neighbour lists per edge
/// kind while building; `freeze()` packs them into CSR arrays and forbids
/// further mutation.
class HeteroGraph {
 public:
  enum class AddEdge { kAdded, kDuplicate };

  HeteroGraph() = default;

  /// Returns the existing id when (kind, key) is already present.
  NodeId add_node(NodeKind kind, std::string key, NodeAttrs attrs = {});
  std::optional<NodeId> find(NodeKind kind, std::string_view key) const;

  AddEdge add_edge(NodeId u, NodeId v, EdgeKind kind,
                   std::optional<ReviewAttrs> attrs = std::nullopt);
  bool has_edge(NodeId u, NodeId v, EdgeKind kind) const;

  std::span<const NodeId> neighbors(NodeId v, EdgeKind kind) const;
  std::size_t degree(NodeId v, EdgeKind kind) const { return neighbors(v, kind).size(); }
  std::size_t degree(NodeId v, EdgeKindSet kinds) const;
  std::size_t total_degree(NodeId v) const { return degree(v, EdgeKindSet::all()); }

  std::size_t node_count() const { return nodes_.size(); }
  std::size_t node_count(NodeKind kind) const;
  std::size_t edge_count(EdgeKind kind) const { return edge_counts_[index(kind)]; }
  std::size_t edge_count() const;

  const Node& node(NodeId v) const;
  NodeAttrs& mutable_attrs(NodeId v);
  const std::vector<Node>& nodes() const { return nodes_; }

  /// Attributes of the Reviews edge joining an author and a product.
  const ReviewAttrs* review_attrs(NodeId author, NodeId product) const;
  void set_review_attrs(NodeId author, NodeId product, ReviewAttrs attrs);
  std::size_t review_attr_count() const { return review_attrs_.size(); }
  /// ((author, product), attrs) sorted by author then product.
  std::vector<std::pair<std::pair<NodeId, NodeId>, ReviewAttrs>> sorted_review_attrs() const;

  LabelSet& labels() { return labels_; }
  const LabelSet& labels() const { return labels_; }

  void freeze();
  bool frozen() const { return frozen_; }
  /// Unfrozen deep copy, the starting point for derived graphs.
  HeteroGraph mutable_copy() const;

  /// Visits every edge of `kind` once with u < v.
  template <typename F>
  void for_each_edge(EdgeKind kind, F&& f) const {
    for (NodeId u = 0; u < nodes_.size(); ++u)
      for (NodeId v : neighbors(u, kind))
        if (u < v) f(u, v);
  }

  bool operator==(const HeteroGraph& other) const;

 private:
  static constexpr std::size_t index(EdgeKind k) { return static_cast<std::size_t>(k); }
  static std::uint64_t pair_key(NodeId author, NodeId product) {
    return (static_cast<std::uint64_t>(author) << 32) | product;
  }
  void check_node(NodeId v) const;
  void check_mutable() const;

  struct Csr {
    std::vector<std::uint64_t> offsets;
    std::vector<NodeId> targets;
  };

  std::vector<Node> nodes_;
  std::array<std::unordered_map<std::string, NodeId>, kNodeKindCount> key_index_;
  std::array<std::vector<std::vector<NodeId>>, kEdgeKindCount> lists_;
  std::array<Csr, kEdgeKindCount> csr_;
  std::array<std::size_t, kEdgeKindCount> edge_counts_{};
  std::unordered_map<std::uint64_t, ReviewAttrs> review_attrs_;
  LabelSet labels_;
  bool frozen_ = false;
};

/// Subgraph induced by the nodes with keep[v] set. Ids are renumbered densely
/// in ascending old-id order; labels and review attributes follow their nodes.
HeteroGraph induced_subgraph(const HeteroGraph& g, const std::vector<bool>& keep);

/// Maximal induced subgraph where every node has total degree (all edge kinds
/// together) >= k.
HeteroGraph k_core(const HeteroGraph& g, std::size_t k);
/// Core number of each node under the same total-degree rule.
std::vector<std::size_t> core_numbers(const HeteroGraph& g);

struct AugmentReport {
  std::size_t added = 0;
  std::size_t reviewers_scanned = 0;
  std::size_t reviewers_skipped = 0;   // above the degree cap
  std::size_t reviewers_warned = 0;    // more than kPairWarnThreshold pairs
  std::size_t pairs_considered = 0;
  std::size_t pairs_suppressed = 0;    // a co-purchase edge already joined them
};

inline constexpr std::size_t kPairWarnThreshold = 10'000;

struct AugmentResult {
  HeteroGraph graph;
  AugmentReport report;
};

/// Adds a CoReview edge between every pair of products sharing a reviewer,
/// unless any co-purchase kind already joins the pair.
AugmentResult augment_coreview(const HeteroGraph& g,
                               std::optional<std::size_t> max_reviewer_degree = std::nullopt);

/// degree -> node count; `kind` empty means all kinds together.
std::map<std::size_t, std::size_t> degree_distribution(const HeteroGraph& g,
                                                       std::optional<EdgeKind> kind);

inline constexpr std::uint32_t kSnapshotVersion = 1;

void save_snapshot(const HeteroGraph& g, const std::filesystem::path& path);
HeteroGraph load_snapshot(const std::filesystem::path& path);

/// One line per edge: src_key \t dst_key \t kind.
void export_edge_list(const HeteroGraph& g, std::ostream& out);
/// CSV with header key,kind,label,category.
void export_node_table(const HeteroGraph& g, std::ostream& out);

}  // namespace polnet
