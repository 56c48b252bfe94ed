#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "polnet/hetgraph.hpp"

namespace polnet {

struct SegmentCounts {
  std::uint64_t X = 0;      // edges from segment products to political products
  std::uint64_t K = 0;      // all counted edges attached to segment products
  std::uint64_t X_red = 0;  // ... to conservative products
  std::uint64_t K_p = 0;    // ... to political products (equals X)
};

struct GlobalPoliticalTotals {
  double d = 0.0;  // prior strength
  double k_political = 0.0;
  double m = 0.0;
  double k_red = 0.0;
  double k_blue = 0.0;

  /// Published constants of the full 20-core graph.
  static GlobalPoliticalTotals paper_20core();
};

double relevance(const SegmentCounts& c, const GlobalPoliticalTotals& g);
double alignment(const SegmentCounts& c, const GlobalPoliticalTotals& g);

// ----------------------------------------------------------- polarization

enum class NullMode { kMonteCarlo, kExact };
std::string_view to_string(NullMode m) noexcept;
std::optional<NullMode> parse_null_mode(std::string_view name) noexcept;

inline constexpr std::uint64_t kExactPoolLimit = 20;

/// Segment-level input to the null model: per product, how many of its
/// political edge endpoints there are, and the observed overlap.
struct OverlapProblem {
  std::vector<std::uint32_t> draws;  // political-edge count per segment product
  std::uint64_t pool_red = 0;
  std::uint64_t pool_blue = 0;
  std::uint64_t observed = 0;        // o
};

struct PolarizationResult {
  double expected = 0.0;  // E[O]
  double variance = 0.0;  // var[O]
  std::uint64_t observed = 0;
  std::optional<double> z;  // absent when var[O] = 0
  NullMode mode = NullMode::kMonteCarlo;
  std::size_t replicates = 0;  // 0 in exact mode
  std::uint64_t seed = 0;
};

struct NullConfig {
  NullMode mode = NullMode::kMonteCarlo;
  std::size_t replicates = 1000;
  std::uint64_t seed = 1;
  unsigned threads = 0;  // 0 = hardware concurrency
};

/// Colours of each product's endpoints are drawn without replacement from the
/// pool of pool_red red and pool_blue blue endpoints; O counts products that
/// receive both colours. Exact mode computes the distribution of O by dynamic
/// programming over products (pool <= kExactPoolLimit); Monte Carlo uses an
/// independent stream per replicate seeded from (seed, replicate index), so
/// the result does not depend on the thread count. var[O] is the unbiased
/// sample variance in Monte Carlo mode.
PolarizationResult polarization(const OverlapProblem& problem, const NullConfig& config);

/// Closed form sum_i (1 - P[all red] - P[all blue]) under hypergeometric draws.
double expected_overlap(std::span<const std::uint32_t> draws, std::uint64_t pool_red,
                        std::uint64_t pool_blue);

/// One of the two counter-based streams used by the Monte Carlo null, exposed
/// so callers can draw synthetic data from the same generator family.
std::uint64_t replicate_seed(std::uint64_t master, std::uint64_t replicate) noexcept;

// ------------------------------------------------------- graph segments

struct MetricsConfig {
  EdgeKindSet kinds = EdgeKindSet::interaction();
  NullConfig null;
  std::optional<double> d_override;
};

struct Segment {
  std::string id;
  std::vector<NodeId> products;  // sorted, distinct
};

enum class CategoryLevel { kMain, kBig };

/// One segment per category value on product nodes, in name order. Products
/// with an empty category are left out.
std::vector<Segment> category_segments(const HeteroGraph& g, CategoryLevel level);
/// Products whose title contains any keyword as a whole word, ignoring case.
Segment keyword_segment(const HeteroGraph& g, std::string id, std::span<const std::string> keywords);
/// Products named by key; unknown keys raise kUnknownNode.
Segment product_segment(const HeteroGraph& g, std::string id, std::span<const std::string> asins);

SegmentCounts segment_counts(const HeteroGraph& g, const Segment& s, EdgeKindSet kinds);
OverlapProblem overlap_problem(const HeteroGraph& g, const Segment& s, EdgeKindSet kinds);

/// Totals from the labelled graph. m sums K over the partition's segments and
/// d is the mean X over them (unless overridden).
GlobalPoliticalTotals compute_totals(const HeteroGraph& g, std::span<const Segment> partition,
                                     const MetricsConfig& config);

struct PoliticsReport {
  std::string segment;
  std::size_t products = 0;
  SegmentCounts counts;
  double relevance = 0.0;
  double alignment = 0.0;
  PolarizationResult polarization;
};

PoliticsReport segment_report(const HeteroGraph& g, const Segment& s,
                              const GlobalPoliticalTotals& totals, const MetricsConfig& config);

/// Reports for every category at the given level, with totals computed over
/// that partition.
std::vector<PoliticsReport> category_reports(const HeteroGraph& g, CategoryLevel level,
                                             const MetricsConfig& config);

struct AuthorPolitics {
  SegmentCounts counts;
  double relevance = 0.0;
  double alignment = 0.0;
};

AuthorPolitics author_politics(const HeteroGraph& g, NodeId author,
                               const GlobalPoliticalTotals& totals);

/// segment,products,X,K,X_red,K_p,relevance,alignment,polarization,E_O,var_O,o,mode,replicates,seed
void write_reports_csv(std::ostream& out, std::span<const PoliticsReport> reports);

}  // namespace polnet
