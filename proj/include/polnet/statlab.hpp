#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "polnet/hetgraph.hpp"
#include "polnet/rgcn.hpp"

namespace polnet {

// ------------------------------------------------------------ transforms

double yeo_johnson(double y, double lambda);
std::vector<double> yeo_johnson(std::span<const double> x, double lambda);

/// Profile log-likelihood of lambda under a normal model for the transformed
/// values (variance profiled out).
double yeo_johnson_loglik(std::span<const double> x, double lambda);

struct YeoJohnsonFit {
  std::vector<double> values;
  double lambda = 1.0;
};

inline constexpr double kLambdaLo = -5.0, kLambdaHi = 5.0, kLambdaTol = 1e-6;

/// With `lambda` empty, lambda maximises the profile log-likelihood by
/// golden-section search on [kLambdaLo, kLambdaHi].
YeoJohnsonFit yeo_johnson_fit(std::span<const double> x, std::optional<double> lambda = std::nullopt);

struct Moments {
  double mean = 0, sd = 0, skewness = 0, excess_kurtosis = 0;
};
/// Sample sd (n-1); skewness and kurtosis are the plain moment ratios.
Moments moments(std::span<const double> x);

struct Standardized {
  std::vector<double> values;
  double mean = 0, sd = 1;
  Moments before, after;
};
/// Zero mean and unit sample sd. `column` names the column in errors.
Standardized standardize(std::span<const double> x, std::string_view column = "x");
/// Onto [0, 1]; a constant column is an error.
std::vector<double> min_max_scale(std::span<const double> x, std::string_view column = "x");

// --------------------------------------------------------- feature table

struct ColumnInfo {
  std::string name;
  std::string transform = "none";  // none | standardize | yeo_johnson+standardize
  std::optional<double> lambda;
  bool indicator = false;
};

struct FeatureTable {
  std::vector<std::string> reviewer, product;  // row keys
  std::vector<double> response;
  std::vector<ColumnInfo> columns;
  std::vector<std::vector<double>> data;  // one vector per column

  std::size_t rows() const { return response.size(); }
  std::optional<std::size_t> column(std::string_view name) const;
  const std::vector<double>& values(std::string_view name) const;
  void add_column(ColumnInfo info, std::vector<double> values);
  void validate() const;
};

struct FeatureOptions {
  std::size_t min_reviews = 5;
  std::vector<std::string> big_categories;  // keep only these; empty keeps all
  EdgeKindSet kinds = EdgeKindSet::interaction();
  std::optional<double> d_override;
};

struct FeatureReport {
  std::size_t reviews_seen = 0;
  std::size_t dropped_labeled_product = 0;
  std::size_t dropped_no_score = 0;
  std::size_t dropped_no_moral = 0;
  std::size_t dropped_category = 0;
  std::size_t dropped_min_reviews = 0;
  std::size_t rows = 0;
};

struct FeatureBuild {
  FeatureTable table;
  FeatureReport report;
};

/// One row per Reviews edge on an unlabelled product that has a model score
/// and a moral vector, after dropping reviewers left with fewer than
/// min_reviews rows. Response is the lifestyle score of the product.
FeatureBuild build_features(const HeteroGraph& g, std::span<const ClassScore> scores,
                            const FeatureOptions& options = {});

/// Yeo-Johnson plus standardisation for every non-indicator column; indicators
/// are left as they are. The manifest in `columns` records what was done.
FeatureTable prepare_covariates(const FeatureTable& raw);

/// CSV preceded by "# manifest" comment lines (column,transform,lambda,indicator).
void write_feature_csv(std::ostream& out, const FeatureTable& t);
FeatureTable read_feature_csv(std::istream& in);

// -------------------------------------------------------------- formulas

/// "response ~ a + b + a:b + c*d"; `*` expands to both main effects and their
/// interaction, "- 1" or "0 +" drops the intercept, "." expands to every
/// column. The left-hand side is ignored (the response is the table's).
struct Formula {
  bool intercept = true;
  std::vector<std::vector<std::string>> terms;  // each term is a product of columns

  static Formula parse(std::string_view text);
  std::vector<std::string> term_names() const;  // "(Intercept)", "a", "a:b"
};

struct Design {
  Eigen::MatrixXd X;
  std::vector<std::string> names;
};

Design design_matrix(const FeatureTable& t, const Formula& f);

/// Default model: every column, plus the product alignment x relevance
/// interaction when both exist.
Formula default_formula(const FeatureTable& t);

// ------------------------------------------------------- beta regression

struct BetaFitOptions {
  int max_iterations = 100;
  int max_halvings = 30;
  double tolerance = 1e-8;  // on the infinity norm of the score
  double nudge = 1e-6;
  unsigned threads = 0;     // 0 = hardware concurrency; results do not depend on it
};

struct IterationTrace {
  int iteration = 0;
  double loglik = 0;
  double grad_norm = 0;
  int halvings = 0;
  bool fisher = false;  // expected information used for the step
};

struct BetaFit {
  std::vector<std::string> names;
  Eigen::VectorXd beta;
  double phi = 0;
  Eigen::VectorXd se;  // observed information
  double se_phi = 0;
  std::optional<Eigen::VectorXd> cluster_se;  // reviewer-clustered sandwich
  double loglik = 0;
  double loglik_null = 0;  // intercept-only (or all-zero) baseline with fitted phi
  int iterations = 0;
  double grad_norm = 0;
  std::size_t n = 0;
  std::size_t nudged = 0;
  std::vector<IterationTrace> trace;
};

/// Log-likelihood of the logit-link beta model at (beta, log phi), with the
/// score (length p+1, last entry for log phi) and the observed Hessian.
double beta_loglik(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Eigen::VectorXd& beta,
                   double log_phi, Eigen::VectorXd* score = nullptr, Eigen::MatrixXd* hessian = nullptr,
                   bool expected = false, unsigned threads = 1);

/// Damped Newton maximum likelihood. `clusters` (one id per row) adds
/// cluster-robust standard errors.
BetaFit beta_fit(const Eigen::MatrixXd& X, std::span<const double> y, std::vector<std::string> names,
                 const BetaFitOptions& options = {},
                 std::span<const std::string> clusters = {});
BetaFit beta_fit(const FeatureTable& t, const Formula& f, const BetaFitOptions& options = {});

struct CoefficientRow {
  std::string name;
  double estimate = 0, se = 0, z = 0, p_value = 0;
  std::optional<double> cluster_se;
  std::optional<double> probability;  // lifestyle reading of the coefficient
};

struct CoefficientReport {
  std::vector<CoefficientRow> rows;
  double phi = 0, se_phi = 0, loglik = 0, loglik_null = 0;
  std::size_t n = 0, nudged = 0;
  int iterations = 0;
};

/// `interpret` lists the coefficients that get the probability reading
/// sigmoid(20c - 10); empty means all non-intercept terms.
CoefficientReport coefficient_report(const BetaFit& fit, std::span<const std::string> interpret = {});
std::string to_text(const CoefficientReport& r);
/// term,estimate,se,z,p,cluster_se,probability
void write_coefficients_csv(std::ostream& out, const CoefficientReport& r);

}  // namespace polnet
