#include "polnet/types.hpp"

#include "polnet/error.hpp"

namespace polnet {

std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::kUnknownNode: return "unknown_node";
    case Errc::kEndpointMismatch: return "endpoint_mismatch";
    case Errc::kSelfLoop: return "self_loop";
    case Errc::kFrozen: return "frozen";
    case Errc::kVersionMismatch: return "version_mismatch";
    case Errc::kTruncated: return "truncated";
    case Errc::kChecksum: return "checksum";
    case Errc::kFormat: return "format";
    case Errc::kIo: return "io";
    case Errc::kParameter: return "parameter";
    case Errc::kSplit: return "split";
    case Errc::kDivergence: return "divergence";
    case Errc::kMode: return "mode";
    case Errc::kEmptySegment: return "empty_segment";
    case Errc::kRankDeficient: return "rank_deficient";
    case Errc::kNonConvergence: return "non_convergence";
    case Errc::kValidation: return "validation";
  }
  return "unknown";
}

namespace {
constexpr std::array<std::string_view, kNodeKindCount> kNodeKindNames = {"author", "product",
                                                                         "brand", "category"};
constexpr std::array<std::string_view, kEdgeKindCount> kEdgeKindNames = {
    "reviews",    "bought_together", "also_bought", "bought_after_viewing",
    "also_viewed", "co_review",      "has_brand",   "in_category"};
constexpr std::array<std::string_view, 3> kClassNames = {"conservative", "liberal",
                                                         "nonpolitical"};
constexpr std::array<std::string_view, 3> kProvenanceNames = {"seed", "model", "human"};

template <typename E, std::size_t N>
std::optional<E> lookup(const std::array<std::string_view, N>& names, std::string_view s) {
  for (std::size_t i = 0; i < N; ++i)
    if (names[i] == s) return static_cast<E>(i);
  return std::nullopt;
}
}  // namespace

std::string_view to_string(NodeKind kind) noexcept {
  return kNodeKindNames[static_cast<std::size_t>(kind)];
}
std::string_view to_string(EdgeKind kind) noexcept {
  return kEdgeKindNames[static_cast<std::size_t>(kind)];
}
std::string_view to_string(PolClass cls) noexcept {
  return kClassNames[static_cast<std::size_t>(cls)];
}
std::string_view to_string(Provenance p) noexcept {
  return kProvenanceNames[static_cast<std::size_t>(p)];
}

std::optional<NodeKind> parse_node_kind(std::string_view name) noexcept {
  return lookup<NodeKind>(kNodeKindNames, name);
}
std::optional<EdgeKind> parse_edge_kind(std::string_view name) noexcept {
  return lookup<EdgeKind>(kEdgeKindNames, name);
}
std::optional<PolClass> parse_pol_class(std::string_view name) noexcept {
  if (name == "non-political" || name == "non_political" || name == "nonpolitical")
    return PolClass::kNonpolitical;
  return lookup<PolClass>(kClassNames, name);
}
std::optional<Provenance> parse_provenance(std::string_view name) noexcept {
  return lookup<Provenance>(kProvenanceNames, name);
}

}  // namespace polnet
