#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "polnet/error.hpp"
#include "polnet/hetgraph.hpp"

namespace polnet {

enum class Optimizer { kGradientDescent, kAdam };
std::string_view to_string(Optimizer o) noexcept;
std::optional<Optimizer> parse_optimizer(std::string_view name) noexcept;

struct RgcnConfig {
  int layers = 3;
  int hidden = 19;
  double dropout = 0.68;
  double learning_rate = 0.05;
  double clip_norm = 3.358;
  double l2 = 1.66e-7;
  int epochs = 100;
  double leaky_slope = 0.01;
  int classes = 2;
  std::array<double, 3> split{0.8, 0.1, 0.1};
  std::uint64_t seed = 1;
  Optimizer optimizer = Optimizer::kGradientDescent;
  bool include_coreview = true;       // CoReview edges join the related-to relation
  bool train_on_model_labels = false; // by default only seed and human labels are targets

  /// Footnote-9 settings of the final classifier.
  static RgcnConfig paper_preset();
  void validate() const;
  bool operator==(const RgcnConfig&) const = default;
};

/// Author and product nodes with three mean-normalised relations:
/// product <- author (reviews), author <- product (reviewed-by) and
/// product <- product (any co-purchase kind, optionally co-review).
struct RelationalView {
  static constexpr int kRelations = 3;
  using Sparse = Eigen::SparseMatrix<double, Eigen::RowMajor>;

  std::vector<NodeId> nodes;           // graph ids, ascending
  std::vector<std::int64_t> position;  // graph id -> row, -1 when absent
  std::array<Sparse, kRelations> adj;  // row i averages over its neighbours

  static RelationalView build(const HeteroGraph& g, bool include_coreview = true);
  std::size_t size() const { return nodes.size(); }
  std::optional<std::size_t> row(NodeId v) const;
};

struct EpochMetrics {
  int epoch = 0;
  double train_loss = 0, train_accuracy = 0;
  double val_loss = 0, val_accuracy = 0;
};

struct SplitMetrics {
  double loss = 0;
  double accuracy = 0;
  std::size_t size = 0;
};

struct RgcnModel {
  RgcnConfig config;
  std::vector<std::string> node_keys;  // "kind:key" per view row
  Eigen::MatrixXd embedding;           // rows x hidden
  std::vector<std::array<Eigen::MatrixXd, RelationalView::kRelations>> w_rel;
  std::vector<Eigen::MatrixXd> w_self;
  std::vector<EpochMetrics> history;
  int best_epoch = 0;
  SplitMetrics train, val, test;

  std::size_t parameter_count() const;
  /// Flattened in a fixed order: embedding, then per layer W_0, W_1..W_3.
  std::vector<const Eigen::MatrixXd*> parameters() const;
  std::vector<Eigen::MatrixXd*> parameters();
};

/// Fresh model with seeded initialisation (embeddings U[-1/sqrt(h), 1/sqrt(h)],
/// weights Glorot-uniform).
RgcnModel init_model(const RgcnConfig& config, const HeteroGraph& g, const RelationalView& view);

struct ClassScore {
  NodeId node = 0;
  int classes = 2;
  std::array<double, 3> probability{};
  PolClass argmax = PolClass::kConservative;
  double max_probability = 0;
};

/// Class probabilities for every row of the view (dropout off).
std::vector<ClassScore> predict(const RgcnModel& model, const RelationalView& view);
/// Only the given graph nodes; a node outside the view raises kUnknownNode.
std::vector<ClassScore> predict(const RgcnModel& model, const RelationalView& view,
                                std::span<const NodeId> nodes);
Eigen::MatrixXd forward_logits(const RgcnModel& model, const RelationalView& view);

struct LabeledSplit {
  std::vector<std::size_t> train, val, test;  // view rows
  std::vector<int> target;                    // per view row, -1 when unlabeled
};

/// Stratified split of the labelled products used as targets.
LabeledSplit make_split(const HeteroGraph& g, const RelationalView& view, const RgcnConfig& config);

/// Mean cross-entropy over `rows` plus (l2/2)*||theta||^2, with gradients in
/// parameter order. `dropout_seed` empty means dropout off.
double loss_and_gradient(const RgcnModel& model, const RelationalView& view,
                         std::span<const std::size_t> rows, std::span<const int> target,
                         std::optional<std::uint64_t> dropout_seed,
                         std::vector<Eigen::MatrixXd>* gradient);

/// Rescales the gradients in place when their global norm exceeds `clip`.
/// Returns the pre-clip norm.
double clip_gradients(std::vector<Eigen::MatrixXd>& gradient, double clip);

class DivergenceError : public Error {
 public:
  DivergenceError(std::string what, std::shared_ptr<const RgcnModel> last_good)
      : Error(Errc::kDivergence, std::move(what)), last_good_(std::move(last_good)) {}
  const std::shared_ptr<const RgcnModel>& last_good() const { return last_good_; }

 private:
  std::shared_ptr<const RgcnModel> last_good_;
};

/// Full-batch training; keeps the epoch with the best validation accuracy
/// (ties: lower validation loss, then earlier epoch).
RgcnModel train(const HeteroGraph& g, const RelationalView& view, const RgcnConfig& config);

// ------------------------------------------------------------ search

struct Range {
  double lo = 0, hi = 0;
  bool log_scale = false;
};

struct SearchSpace {
  Range epochs{50, 200};
  Range layers{1, 4};
  Range hidden{8, 64};
  Range learning_rate{1e-3, 1e-1, true};
  Range clip_norm{0.5, 5};
  Range l2{1e-8, 1e-3, true};
  Range dropout{0.0, 0.8};

  static SearchSpace around(const RgcnConfig& c);  // degenerate: only c
  void validate() const;
};

struct Trial {
  int index = 0;
  RgcnConfig config;
  double val_accuracy = 0;
  double val_loss = 0;
  double test_accuracy = 0;
};

struct SearchResult {
  RgcnConfig best;
  std::vector<Trial> trials;  // in trial order
  int best_trial = 0;
};

/// Seeded random search. Every trial uses the base config's split seed, so
/// trials are compared on the same validation set.
SearchResult hyperparameter_search(const HeteroGraph& g, const RelationalView& view,
                                   const RgcnConfig& base, const SearchSpace& space, int budget,
                                   std::uint64_t seed);

// --------------------------------------------------- thresholds and labels

struct CurvePoint {
  double threshold = 0;
  double accepted = 0;
};

std::vector<CurvePoint> threshold_curve(std::span<const ClassScore> scores,
                                        std::span<const double> grid);
/// 0.50, 0.51, ..., 1.00
std::vector<double> default_threshold_grid();

inline constexpr double kDefaultAcceptThreshold = 0.95;

/// Model labels for products whose top class is in `classes` with probability
/// >= threshold. Products holding a seed or human label are skipped.
std::vector<PoliticalLabel> accept_labels(const HeteroGraph& g, std::span<const ClassScore> scores,
                                          double threshold, std::span<const PolClass> classes,
                                          int iteration);

/// Logit of the clipped probability mapped from [-10, 10] onto [0, 1].
double lifestyle_score(double p_conservative);
/// Inverse of the scaling step: probability from a [0, 1] lifestyle value.
double lifestyle_probability(double score);
/// P(conservative) on the conservative-vs-liberal axis, renormalised for
/// three-class models.
double conservative_share(const ClassScore& s);

// ------------------------------------------------------------ HITL

struct Verdict {
  std::string asin;
  PolClass cls = PolClass::kNonpolitical;
};

struct VerdictOutcome {
  std::string asin;
  bool accepted = false;
  std::string reason;  // "unknown_node", "seed_precedence", ...
};

struct IterationReport {
  int iteration = 0;
  int classes = 2;
  std::vector<VerdictOutcome> verdicts;
  std::array<std::size_t, 3> label_counts{};      // seed + human labels per class
  std::array<std::size_t, 3> model_label_counts{};
  std::array<double, 3> predicted_share{};        // argmax over unlabeled products
  double test_accuracy = 0;
  double test_loss = 0;
};

struct HitlResult {
  RgcnModel model;
  std::vector<ClassScore> scores;  // products only
  IterationReport report;
};

/// Merges verdicts as human labels, drops previous model labels, retrains
/// (three classes once any non-political label exists; split seed offset by
/// the iteration) and accepts new model labels at `threshold`.
HitlResult hitl_iterate(HeteroGraph& g, const RgcnConfig& base, std::span<const Verdict> verdicts,
                        int iteration, double threshold = kDefaultAcceptThreshold);

enum class Stratum { kConservative, kLiberal, kAmbiguous };
std::string_view to_string(Stratum s) noexcept;

struct Candidate {
  NodeId node = 0;
  Stratum stratum = Stratum::kAmbiguous;
  ClassScore score;
};

/// Top-n by P(conservative), top-n by P(liberal), then the n closest to
/// maximum entropy, among products without a seed or human label.
std::vector<Candidate> candidate_strata(const HeteroGraph& g, std::span<const ClassScore> scores,
                                        std::size_t n);

// ---------------------------------------------------------------- I/O

inline constexpr std::uint32_t kCheckpointVersion = 1;
void save_checkpoint(const RgcnModel& model, const std::filesystem::path& path);
RgcnModel load_checkpoint(const std::filesystem::path& path);

/// asin,class,probability,provenance,iteration
void write_labels_csv(std::ostream& out, const HeteroGraph& g);
/// Upserts labels for known products; returns (applied, skipped).
std::pair<std::size_t, std::size_t> read_labels_csv(std::istream& in, HeteroGraph& g);

void write_curve_csv(std::ostream& out, std::span<const CurvePoint> curve);

}  // namespace polnet
