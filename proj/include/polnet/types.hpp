#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace polnet {

using NodeId = std::uint32_t;

enum class NodeKind : std::uint8_t { kAuthor, kProduct, kBrand, kCategory };
inline constexpr std::size_t kNodeKindCount = 4;

/// All relations are undirected. Endpoint kinds are fixed per edge kind:
/// Reviews joins Author-Product, HasBrand Product-Brand, InCategory
/// Product-Category, everything else Product-Product.
enum class EdgeKind : std::uint8_t {
  kReviews,
  kBoughtTogether,
  kAlsoBought,
  kBoughtAfterViewing,
  kAlsoViewed,
  kCoReview,
  kHasBrand,
  kInCategory,
};
inline constexpr std::size_t kEdgeKindCount = 8;
inline constexpr std::array<EdgeKind, kEdgeKindCount> kAllEdgeKinds = {
    EdgeKind::kReviews,   EdgeKind::kBoughtTogether, EdgeKind::kAlsoBought,
    EdgeKind::kBoughtAfterViewing, EdgeKind::kAlsoViewed, EdgeKind::kCoReview,
    EdgeKind::kHasBrand,  EdgeKind::kInCategory};

constexpr bool is_copurchase(EdgeKind kind) noexcept {
  return kind == EdgeKind::kBoughtTogether || kind == EdgeKind::kAlsoBought ||
         kind == EdgeKind::kBoughtAfterViewing || kind == EdgeKind::kAlsoViewed;
}

std::string_view to_string(NodeKind kind) noexcept;
std::string_view to_string(EdgeKind kind) noexcept;
std::optional<NodeKind> parse_node_kind(std::string_view name) noexcept;
std::optional<EdgeKind> parse_edge_kind(std::string_view name) noexcept;

/// Small bitset over edge kinds used to select which relations feed a count.
class EdgeKindSet {
 public:
  constexpr EdgeKindSet() = default;
  constexpr EdgeKindSet(std::initializer_list<EdgeKind> kinds) {
    for (EdgeKind k : kinds) bits_ |= bit(k);
  }

  static constexpr EdgeKindSet all() {
    EdgeKindSet s;
    s.bits_ = (1u << kEdgeKindCount) - 1;
    return s;
  }
  /// Co-purchase kinds, co-review and reviews; the membership relations
  /// (brand, category) are excluded.
  static constexpr EdgeKindSet interaction() {
    return {EdgeKind::kReviews,    EdgeKind::kBoughtTogether, EdgeKind::kAlsoBought,
            EdgeKind::kBoughtAfterViewing, EdgeKind::kAlsoViewed, EdgeKind::kCoReview};
  }
  static constexpr EdgeKindSet copurchase() {
    return {EdgeKind::kBoughtTogether, EdgeKind::kAlsoBought, EdgeKind::kBoughtAfterViewing,
            EdgeKind::kAlsoViewed};
  }

  constexpr bool contains(EdgeKind k) const noexcept { return (bits_ & bit(k)) != 0; }
  constexpr void insert(EdgeKind k) noexcept { bits_ |= bit(k); }
  constexpr bool operator==(const EdgeKindSet&) const = default;

 private:
  static constexpr std::uint32_t bit(EdgeKind k) { return 1u << static_cast<unsigned>(k); }
  std::uint32_t bits_ = 0;
};

enum class PolClass : std::uint8_t { kConservative = 0, kLiberal = 1, kNonpolitical = 2 };

std::string_view to_string(PolClass cls) noexcept;
std::optional<PolClass> parse_pol_class(std::string_view name) noexcept;

enum class Provenance : std::uint8_t { kSeed, kModel, kHuman };

std::string_view to_string(Provenance p) noexcept;
std::optional<Provenance> parse_provenance(std::string_view name) noexcept;

/// seed > human > model
constexpr int precedence(Provenance p) noexcept {
  switch (p) {
    case Provenance::kSeed: return 3;
    case Provenance::kHuman: return 2;
    case Provenance::kModel: return 1;
  }
  return 0;
}

inline constexpr std::size_t kMoralDims = 11;
inline constexpr std::array<std::string_view, kMoralDims> kMoralLabels = {
    "care",   "harm",       "fairness", "cheating",    "loyalty",  "betrayal",
    "authority", "subversion", "purity", "degradation", "non_moral"};

/// Multi-label probabilities; components need not sum to one.
struct MoralVector {
  std::array<double, kMoralDims> p{};
  bool operator==(const MoralVector&) const = default;
};

}  // namespace polnet
