#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "polnet/hetgraph.hpp"
#include "polnet/ingest.hpp"

namespace polnet {

/// Read-only lookup structure over a parsed corpus. Products are the union of
/// metadata and reviewed ASINs, numbered in sorted ASIN order; reviewers are
/// numbered in sorted id order. Co-purchase links are symmetrised; links to
/// ASINs without metadata are counted as dangling and dropped.
class CorpusIndex {
 public:
  explicit CorpusIndex(const Corpus& corpus);

  std::size_t product_count() const { return asins_.size(); }
  std::size_t reviewer_count() const { return reviewers_.size(); }
  const std::string& asin(std::uint32_t p) const { return asins_[p]; }
  const std::string& reviewer(std::uint32_t a) const { return reviewers_[a]; }
  std::optional<std::uint32_t> find_product(std::string_view asin) const;
  std::optional<std::uint32_t> find_reviewer(std::string_view id) const;

  /// Null when the product only appears in reviews.
  const ProductMeta* meta(std::uint32_t p) const;

  const std::vector<std::uint32_t>& copurchases(std::uint32_t p) const { return copurchase_[p]; }
  const std::vector<std::uint32_t>& reviewers_of(std::uint32_t p) const { return reviewers_of_[p]; }
  const std::vector<std::uint32_t>& reviewed_by(std::uint32_t a) const { return reviewed_by_[a]; }

  struct CopurchaseLink {
    std::uint32_t a, b;  // a < b
    EdgeKind kind;
    auto operator<=>(const CopurchaseLink&) const = default;
  };
  const std::vector<CopurchaseLink>& copurchase_links() const { return links_; }

  struct Review {
    std::uint32_t author, product;
    const ReviewRecord* record;
  };
  /// One review per (reviewer, product), the latest by time; sorted by pair.
  const std::vector<Review>& reviews() const { return reviews_; }

  std::size_t dangling_references() const { return dangling_; }
  const Corpus& corpus() const { return corpus_; }

 private:
  const Corpus& corpus_;
  std::vector<std::string> asins_;
  std::vector<std::string> reviewers_;
  std::vector<const ProductMeta*> meta_;
  std::vector<std::vector<std::uint32_t>> copurchase_;
  std::vector<std::vector<std::uint32_t>> reviewers_of_;
  std::vector<std::vector<std::uint32_t>> reviewed_by_;
  std::vector<CopurchaseLink> links_;
  std::vector<Review> reviews_;
  std::size_t dangling_ = 0;
};

/// Which products' co-purchases step 2 follows.
enum class Step2Mode {
  kReviewedProducts,  // products reviewed by the frontier's reviewers
  kSeedProducts,      // the frontier products themselves
};
std::string_view to_string(Step2Mode m) noexcept;
std::optional<Step2Mode> parse_step2_mode(std::string_view name) noexcept;

struct WaveResult {
  // Sorted, distinct product / reviewer indices of the CorpusIndex.
  std::vector<std::uint32_t> step1_products;  // co-purchases of the frontier
  std::vector<std::uint32_t> step1_authors;   // reviewers of step1_products
  std::vector<std::uint32_t> step2_authors;   // reviewers of the frontier
  std::vector<std::uint32_t> step2_products;  // their products and co-purchases
  std::vector<std::uint32_t> products;        // frontier and everything above
  std::vector<std::uint32_t> authors;
};

WaveResult run_wave(const CorpusIndex& index, std::span<const std::uint32_t> frontier,
                    Step2Mode mode = Step2Mode::kReviewedProducts);

struct SampleWavePlan {
  int waves = 2;
  Step2Mode step2 = Step2Mode::kReviewedProducts;
  std::vector<std::string> seed_asins;
};

/// {"waves": 2, "step2": "reviewed_products", "seeds": ["asin", ...]}
SampleWavePlan load_plan(const std::filesystem::path& path);

struct WaveCounts {
  int wave = 0;
  std::size_t frontier = 0;
  std::size_t step1_products = 0;
  std::size_t step1_authors = 0;
  std::size_t step2_authors = 0;
  std::size_t step2_products = 0;
  std::size_t new_products = 0;
  std::size_t new_authors = 0;
};

struct SamplingReport {
  std::vector<WaveCounts> waves;
  std::vector<std::string> missing_seeds;
  std::size_t dangling_references = 0;
  std::size_t products = 0;
  std::size_t authors = 0;
  std::size_t brands = 0;
  std::size_t categories = 0;
  std::size_t edges = 0;

  std::string to_json() const;
};

struct SampleResult {
  HeteroGraph graph;
  SamplingReport report;
};

/// Runs every wave (wave w's frontier is the cumulative product set after wave
/// w-1), then materialises the graph induced on the sampled products and
/// reviewers: Reviews and co-purchase edges, brand and category nodes with
/// their membership edges. Node attributes carry the discovery wave (seeds are
/// wave 0), title, mean rating, best sales rank and regrouped categories.
SampleResult run_plan(const CorpusIndex& index, const SampleWavePlan& plan,
                      const CategoryMap& categories = CategoryMap::builtin());

/// Products reachable from the seeds over co-purchase links within `waves`
/// hops; sorted ASINs.
std::vector<std::string> bipartite_baseline(const CorpusIndex& index,
                                            std::span<const std::string> seed_asins, int waves);

/// Seed labels (probability 1, provenance seed) for matched products present
/// in the graph. Returns how many were applied.
std::size_t apply_seed_labels(HeteroGraph& g, std::span<const SeedMatch> matches);

/// Attaches moral vectors to the Reviews edges whose (reviewer, asin) key
/// matches. Returns how many edges received a vector.
std::size_t attach_moral_vectors(HeteroGraph& g, const MoralScores& scores);

}  // namespace polnet
