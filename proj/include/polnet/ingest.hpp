#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

#include "polnet/types.hpp"

namespace polnet {

// ------------------------------------------------------------------ corpus

struct ReviewRecord {
  std::string reviewer_id;
  std::string asin;
  std::uint32_t helpful_up = 0;
  std::uint32_t helpful_total = 0;
  double overall = 0.0;
  std::string review_text;
  std::string summary;
  std::int64_t unix_time = 0;
};

struct RelatedProducts {
  std::vector<std::string> also_bought;
  std::vector<std::string> also_viewed;
  std::vector<std::string> bought_together;
  std::vector<std::string> buy_after_viewing;
};

struct ProductMeta {
  std::string asin;
  std::string title;
  std::optional<double> price;
  std::optional<std::string> brand;
  std::map<std::string, std::int64_t> sales_rank;
  std::vector<std::vector<std::string>> categories;
  RelatedProducts related;
};

struct ParseReport {
  std::size_t review_lines = 0;
  std::size_t reviews_parsed = 0;
  std::size_t reviews_skipped = 0;
  std::size_t reviews_deduped = 0;
  std::size_t meta_lines = 0;
  std::size_t meta_parsed = 0;
  std::size_t meta_skipped = 0;
  std::size_t meta_deduped = 0;
  std::size_t self_references_removed = 0;
  /// reason code -> count, e.g. "malformed_json", "missing_key", "range".
  std::map<std::string, std::size_t> skip_reasons;
};

struct Corpus {
  std::vector<ReviewRecord> reviews;
  std::vector<ProductMeta> products;
  ParseReport report;
};

/// One JSON object per line. Bad lines are skipped with a reason code;
/// duplicate (reviewer, asin) pairs keep the latest unixReviewTime at the
/// position of their first occurrence; duplicate ASINs in metadata keep the
/// first row.
Corpus parse_corpus(const std::filesystem::path& reviews_path,
                    const std::filesystem::path& meta_path);
void parse_reviews(std::istream& in, Corpus& out);
void parse_meta(std::istream& in, Corpus& out);

// ------------------------------------------------------- fuzzy matching

std::u32string utf8_decode(std::string_view s);
std::string utf8_encode(std::u32string_view s);

std::size_t levenshtein(std::u32string_view a, std::u32string_view b);

/// Best window score of the shorter string against every equal-length window
/// of the longer one: round_half_up(100 * (1 - lev / |shorter|)). Returns 100
/// exactly when the shorter string (or an empty one) is a substring; other
/// scores are capped at 99.
int levenshtein_partial_ratio(std::string_view a, std::string_view b);

struct SeedLabel {
  std::string title;
  PolClass cls = PolClass::kConservative;
};

/// CSV with header `title,class`; class is conservative or liberal.
std::vector<SeedLabel> load_seeds(const std::filesystem::path& path);
std::vector<SeedLabel> read_seeds(std::istream& in);

struct SeedMatch {
  std::string asin;
  PolClass cls = PolClass::kConservative;
  int score = 0;
  bool needs_review = true;
  std::string seed_title;
};

struct SeedMatchResult {
  std::vector<SeedMatch> matches;   // one per asin, in seed order
  std::vector<SeedLabel> unmatched;
  std::size_t duplicates = 0;       // seeds collapsed onto an already-matched asin
  std::size_t class_conflicts = 0;  // ... of which disagreed on the class
};

inline constexpr int kDefaultMatchThreshold = 90;

/// Titles are compared after ASCII lower-casing and whitespace collapsing.
/// Ties: exact match, then shorter title, then smaller asin.
SeedMatchResult match_seeds(std::span<const SeedLabel> seeds,
                            std::span<const ProductMeta> products,
                            int threshold = kDefaultMatchThreshold);

// -------------------------------------------------------- text cleaning

using StopwordList = std::unordered_set<std::string>;

/// Bundled English list (the common NLTK set, lower case).
const StopwordList& default_stopwords();
StopwordList load_stopwords(const std::filesystem::path& path);

struct CleanOptions {
  std::size_t min_tokens = 30;  // reviews; tweets use 5
  std::size_t max_tokens = 512;
  bool keep_hashtag_body = true;
  const StopwordList* stopwords = nullptr;  // null -> default_stopwords()
};

/// Ordered rules: URLs, "RT" tokens, @-mentions and '#' prefixes, emoji,
/// ampersand entities, punctuation/digits/newlines, whitespace collapse,
/// lower-casing, stopwords, truncation. Absent when fewer than min_tokens
/// remain.
std::optional<std::vector<std::string>> clean_text(std::string_view raw,
                                                   const CleanOptions& options = {});

bool is_emoji(char32_t cp) noexcept;

// -------------------------------------------------------- moral scores

using ReviewKey = std::pair<std::string, std::string>;  // (reviewer id, asin)

struct MoralLoadReport {
  std::size_t rows = 0;
  std::size_t loaded = 0;
  std::size_t unmatched = 0;  // keys absent from the supplied review set
  std::map<std::string, std::size_t> skip_reasons;
  /// Reviews with a strictly positive probability per label.
  std::array<std::size_t, kMoralDims> presence{};
  /// Summed probability per label.
  std::array<double, kMoralDims> mass{};
};

struct MoralScores {
  std::map<ReviewKey, MoralVector> vectors;
  MoralLoadReport report;
};

/// CSV with header reviewerID,asin and the eleven label columns (matched by
/// name, any order). Out-of-range rows are skipped with reason "range".
MoralScores load_moral_scores(const std::filesystem::path& path,
                              const std::set<ReviewKey>* known = nullptr);
MoralScores read_moral_scores(std::istream& in, const std::set<ReviewKey>* known = nullptr);

// ------------------------------------------------- category regrouping

struct CategoryGroup {
  std::string main;
  std::string big;
  bool known = true;
};

class CategoryMap {
 public:
  /// The 18 main -> 5 big categories plus the bundled alias table.
  static CategoryMap builtin();
  /// JSON object {"aliases": {...}, "main_to_big": {...}}.
  static CategoryMap load(const std::filesystem::path& path);

  /// Root of the first category path, resolved through aliases.
  CategoryGroup regroup(std::span<const std::vector<std::string>> paths) const;
  CategoryGroup regroup_root(std::string_view root) const;

  const std::map<std::string, std::string>& main_to_big() const { return main_to_big_; }
  const std::map<std::string, std::string>& aliases() const { return aliases_; }
  std::set<std::string> main_categories() const;
  std::set<std::string> big_categories() const;

 private:
  std::map<std::string, std::string> aliases_;
  std::map<std::string, std::string> main_to_big_;
};

inline constexpr std::string_view kOtherCategory = "Other";

}  // namespace polnet
