#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "polnet/statlab.hpp"
#include "test_util.hpp"

using namespace polnet;

namespace {

struct Simulated {
  Eigen::MatrixXd X;
  std::vector<double> y;
};

Simulated simulate_beta(std::uint64_t seed, std::size_t n, const Eigen::VectorXd& beta, double phi) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> norm(0, 1);
  Simulated s;
  s.X.resize(static_cast<Eigen::Index>(n), beta.size());
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    s.X(r, 0) = 1;
    for (Eigen::Index k = 1; k < beta.size(); ++k) s.X(r, k) = norm(rng);
    const double mu = 1 / (1 + std::exp(-s.X.row(r).dot(beta)));
    std::gamma_distribution<double> ga(mu * phi, 1), gb((1 - mu) * phi, 1);
    const double a = ga(rng), b = gb(rng);
    s.y.push_back(a / (a + b));
  }
  return s;
}

std::vector<std::string> names_for(Eigen::Index p) {
  std::vector<std::string> out{"(Intercept)"};
  for (Eigen::Index k = 1; k < p; ++k) out.push_back("x" + std::to_string(k));
  return out;
}

}  // namespace

TEST_CASE("Yeo-Johnson branches") {
  for (double y : {-3.0, -0.5, 0.0, 0.7, 12.0}) CHECK(yeo_johnson(y, 1.0) == doctest::Approx(y).epsilon(1e-14));
  CHECK(yeo_johnson(std::exp(1.0) - 1, 0.0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(yeo_johnson(-0.5, 2.0) == doctest::Approx(-std::log(1.5)).epsilon(1e-15));
  CHECK(yeo_johnson(-0.5, 2.0) == doctest::Approx(-0.4055).epsilon(1e-4));
  // general branches against the textbook formulas
  CHECK(yeo_johnson(3.0, 0.5) == doctest::Approx((std::pow(4.0, 0.5) - 1) / 0.5));
  CHECK(yeo_johnson(-3.0, 0.5) == doctest::Approx(-(std::pow(4.0, 1.5) - 1) / 1.5));
  CHECK_THROWS_AS(yeo_johnson(std::nan(""), 1.0), Error);
}

TEST_CASE("Yeo-Johnson is continuous in lambda and monotone in y") {
  for (double y : {-4.0, -0.3, 0.0, 0.4, 9.0})
    for (double l0 : {0.0, 2.0}) {
      const double at = yeo_johnson(y, l0);
      CHECK(std::abs(yeo_johnson(y, l0 + 1e-6) - at) < 1e-5 * (1 + std::abs(at)));
      CHECK(std::abs(yeo_johnson(y, l0 - 1e-6) - at) < 1e-5 * (1 + std::abs(at)));
    }
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> lam(-5, 5);
  for (int t = 0; t < 50; ++t) {
    const double l = lam(rng);
    double prev = -std::numeric_limits<double>::infinity();
    for (double y = -10; y <= 10; y += 0.05) {
      const double v = yeo_johnson(y, l);
      CHECK(v > prev);
      prev = v;
    }
  }
}

TEST_CASE("Yeo-Johnson lambda search finds the profile maximum") {
  std::mt19937_64 rng(4);
  std::lognormal_distribution<double> ln(0, 0.8);
  std::vector<double> x;
  for (int i = 0; i < 400; ++i) x.push_back(ln(rng) - 0.5);
  auto fit = yeo_johnson_fit(x);
  CHECK(fit.lambda > kLambdaLo);
  CHECK(fit.lambda < kLambdaHi);
  const double best = yeo_johnson_loglik(x, fit.lambda);
  double grid_best = -1e300;
  for (double l = -5; l <= 5; l += 0.01) grid_best = std::max(grid_best, yeo_johnson_loglik(x, l));
  CHECK(best >= grid_best - 1e-6);
  CHECK(std::abs(moments(fit.values).skewness) < std::abs(moments(x).skewness));
  auto fixed = yeo_johnson_fit(x, 1.0);
  CHECK(fixed.lambda == 1.0);
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(fixed.values[i] == doctest::Approx(x[i]).epsilon(1e-14));
  std::vector<double> constant(5, 2.0);
  CHECK_THROWS_AS(yeo_johnson_fit(constant), Error);
}

TEST_CASE("standardize and min-max scaling") {
  std::vector<double> x{1, 2, 3};
  auto s = standardize(x, "x");
  CHECK(s.values[0] == doctest::Approx(-1).epsilon(1e-15));
  CHECK(std::abs(s.values[1]) < 1e-15);
  CHECK(s.values[2] == doctest::Approx(1).epsilon(1e-15));

  std::mt19937_64 rng(2);
  std::exponential_distribution<double> ex(1);
  std::vector<double> y;
  for (int i = 0; i < 1000; ++i) y.push_back(ex(rng));
  auto once = standardize(y, "y");
  CHECK(std::abs(once.after.mean) < 1e-12);
  CHECK(std::abs(once.after.sd - 1) < 1e-12);
  CHECK(once.before.skewness > 1);
  auto twice = standardize(once.values, "y");
  for (std::size_t i = 0; i < y.size(); ++i) CHECK(std::abs(twice.values[i] - once.values[i]) < 1e-12);

  std::vector<double> c{4, 4, 4};
  try {
    standardize(c, "helpfulness");
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("helpfulness") != std::string::npos);
  }
  auto mm = min_max_scale(std::vector<double>{-2, 0, 6});
  CHECK(mm == std::vector<double>{0, 0.25, 1});
  CHECK_THROWS_AS(min_max_scale(c), Error);
}

TEST_CASE("formula parsing") {
  auto f = Formula::parse("y ~ a*b + c + b:a - 1");
  CHECK_FALSE(f.intercept);
  CHECK(f.term_names() == std::vector<std::string>{"a", "b", "a:b", "c"});
  auto g = Formula::parse("0 + x");
  CHECK_FALSE(g.intercept);
  CHECK(g.term_names() == std::vector<std::string>{"x"});
  auto h = Formula::parse("~ x + 1");
  CHECK(h.term_names() == std::vector<std::string>{"(Intercept)", "x"});
  auto three = Formula::parse("a*b*c");
  CHECK(three.terms.size() == 7);
  CHECK_THROWS_AS(Formula::parse("a + + b"), Error);
  CHECK_THROWS_AS(Formula::parse("a - b"), Error);

  FeatureTable t;
  t.response = {0.2, 0.4, 0.6};
  t.reviewer = t.product = {"r", "r", "r"};
  t.add_column({"a"}, {1, 2, 3});
  t.add_column({"b"}, {2, 0, 1});
  auto d = design_matrix(t, Formula::parse("a*b"));
  CHECK(d.names == std::vector<std::string>{"(Intercept)", "a", "b", "a:b"});
  CHECK(d.X(0, 3) == 2);
  CHECK(d.X(2, 3) == 3);
  auto all = design_matrix(t, Formula::parse("."));
  CHECK(all.names == std::vector<std::string>{"(Intercept)", "a", "b"});
  CHECK_THROWS_AS(design_matrix(t, Formula::parse("zz")), Error);
}

TEST_CASE("beta likelihood score and Hessian match finite differences") {
  std::mt19937_64 rng(10);
  std::normal_distribution<double> n(0, 1);
  for (int trial = 0; trial < 10; ++trial) {
    Eigen::VectorXd truth(3);
    truth << n(rng) * 0.5, n(rng) * 0.5, n(rng) * 0.5;
    auto sim = simulate_beta(100 + trial, 300, truth, 5 + 40 * std::abs(n(rng)));
    Eigen::VectorXd y = Eigen::Map<Eigen::VectorXd>(sim.y.data(), static_cast<Eigen::Index>(sim.y.size()));
    Eigen::VectorXd beta(3);
    beta << n(rng), n(rng), n(rng);
    const double lp = std::log(1 + 30 * std::abs(n(rng)));
    Eigen::VectorXd score;
    Eigen::MatrixXd hess;
    beta_loglik(sim.X, y, beta, lp, &score, &hess);
    auto at = [&](Eigen::VectorXd th) {
      return beta_loglik(sim.X, y, th.head(3), th[3], nullptr, nullptr);
    };
    auto grad_at = [&](Eigen::VectorXd th) {
      Eigen::VectorXd s;
      beta_loglik(sim.X, y, th.head(3), th[3], &s, nullptr);
      return s;
    };
    Eigen::VectorXd theta(4);
    theta << beta, lp;
    const double h = 1e-5;
    double worst = 0, worst_h = 0;
    for (int k = 0; k < 4; ++k) {
      Eigen::VectorXd up = theta, down = theta;
      up[k] += h;
      down[k] -= h;
      const double num = (at(up) - at(down)) / (2 * h);
      worst = std::max(worst, std::abs(num - score[k]) / std::max({std::abs(num), std::abs(score[k]), 1e-6}));
      Eigen::VectorXd col = (grad_at(up) - grad_at(down)) / (2 * h);
      for (int j = 0; j < 4; ++j)
        worst_h = std::max(worst_h, std::abs(col[j] - hess(j, k)) /
                                        std::max({std::abs(col[j]), std::abs(hess(j, k)), 1e-6}));
    }
    CHECK(worst < 1e-5);
    CHECK(worst_h < 1e-5);
  }
}

TEST_CASE("simulation recovery of planted coefficients") {
  Eigen::VectorXd truth(2);
  truth << 0.5, -0.3;
  int covered[2] = {0, 0};
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    CAPTURE(seed);
    auto sim = simulate_beta(seed, 5000, truth, 30);
    auto fit = beta_fit(sim.X, sim.y, names_for(2));
    CHECK(fit.grad_norm < 1e-8);
    CHECK(fit.phi > 0);
    for (int k = 0; k < 2; ++k) {
      const double err = std::abs(fit.beta[k] - truth[k]);
      CHECK(fit.se[k] > 0);
      CHECK(err <= 3 * fit.se[k]);
      CHECK(err < 0.05);
      covered[k] += err <= 2 * fit.se[k];
    }
    CHECK(std::abs(fit.phi - 30) < 3 * fit.se_phi);
    CHECK(fit.loglik >= fit.loglik_null);
  }
  MESSAGE("coverage of +-2 SE: " << covered[0] << "/20 and " << covered[1] << "/20");
  CHECK(covered[0] >= 17);
  CHECK(covered[1] >= 17);
}

TEST_CASE("intercept-only fit on symmetric responses") {
  std::vector<double> y;
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.05, 0.45);
  for (int i = 0; i < 500; ++i) {
    const double v = u(rng);
    y.push_back(v);
    y.push_back(1 - v);
  }
  Eigen::MatrixXd X = Eigen::MatrixXd::Ones(static_cast<Eigen::Index>(y.size()), 1);
  auto fit = beta_fit(X, y, {"(Intercept)"});
  CHECK(std::abs(fit.beta[0]) <= fit.se[0]);
  CHECK(std::abs(fit.beta[0]) < 1e-8);
}

TEST_CASE("beta fit diagnostics and errors") {
  Eigen::VectorXd truth(3);
  truth << 0.2, 0.4, -0.1;
  auto sim = simulate_beta(77, 3000, truth, 15);

  SUBCASE("rank deficiency names the collinear column") {
    Eigen::MatrixXd X(sim.X.rows(), 4);
    X << sim.X, sim.X.col(1) * 2.0;
    try {
      beta_fit(X, sim.y, {"(Intercept)", "x1", "x2", "x1_twice"});
      FAIL("expected rank error");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::kRankDeficient);
      const std::string what = e.what();
      CHECK((what.find("x1_twice") != std::string::npos || what.find("x1") != std::string::npos));
    }
  }
  SUBCASE("non-convergence reports the trajectory") {
    BetaFitOptions o;
    o.max_iterations = 1;
    try {
      beta_fit(sim.X, sim.y, names_for(3), o);
      FAIL("expected non-convergence");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::kNonConvergence);
      CHECK(std::string(e.what()).find("iter 0") != std::string::npos);
    }
  }
  SUBCASE("thread count does not change the result") {
    BetaFitOptions one, many;
    one.threads = 1;
    many.threads = 7;
    auto a = beta_fit(sim.X, sim.y, names_for(3), one);
    auto b = beta_fit(sim.X, sim.y, names_for(3), many);
    CHECK(a.beta == b.beta);
    CHECK(a.phi == b.phi);
    CHECK(a.loglik == b.loglik);
  }
  SUBCASE("responses at the boundary are nudged") {
    auto y = sim.y;
    y[0] = 0.0;
    y[1] = 1.0;
    auto fit = beta_fit(sim.X, y, names_for(3));
    CHECK(fit.nudged == 2);
    CHECK(std::isfinite(fit.loglik));
  }
  SUBCASE("clustered standard errors") {
    std::vector<std::string> clusters;
    for (std::size_t i = 0; i < sim.y.size(); ++i) clusters.push_back("r" + std::to_string(i % 300));
    auto fit = beta_fit(sim.X, sim.y, names_for(3), {}, clusters);
    REQUIRE(fit.cluster_se);
    for (Eigen::Index k = 0; k < 3; ++k) {
      CHECK((*fit.cluster_se)[k] > 0);
      // independent rows: the sandwich agrees with the model-based SE
      CHECK((*fit.cluster_se)[k] == doctest::Approx(fit.se[k]).epsilon(0.3));
    }
  }
}

TEST_CASE("coefficient report and lifestyle reading") {
  BetaFit fit;
  fit.names = {"(Intercept)", "product_alignment", "zero", "paper"};
  fit.beta.resize(4);
  fit.beta << 0.1, 0.5, 0.0, 0.5572;
  fit.se = Eigen::VectorXd::Constant(4, 0.1);
  fit.phi = 12;
  fit.n = 100;
  auto r = coefficient_report(fit);
  CHECK_FALSE(r.rows[0].probability);
  CHECK(*r.rows[1].probability == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(*r.rows[2].probability == doctest::Approx(1 / (1 + std::exp(10.0))).epsilon(1e-12));
  CHECK(*r.rows[2].probability == doctest::Approx(0.0000454).epsilon(1e-2));
  CHECK(*r.rows[3].probability == doctest::Approx(0.758413).epsilon(1e-6));
  CHECK(r.rows[1].z == doctest::Approx(5.0));
  CHECK(r.rows[1].p_value == doctest::Approx(std::erfc(5 / std::sqrt(2.0))));
  std::vector<std::string> only{"paper"};
  auto r2 = coefficient_report(fit, only);
  CHECK_FALSE(r2.rows[1].probability);
  CHECK(r2.rows[3].probability);
  std::ostringstream csv_out;
  write_coefficients_csv(csv_out, r);
  CHECK(csv_out.str().rfind("term,estimate,se,z,p,cluster_se,probability\n(Intercept),0.1,0.1,", 0) == 0);
  CHECK(to_text(r).find("product_alignment") != std::string::npos);
}

TEST_CASE("feature table from a scored graph") {
  auto market = testing::planted_market(12);
  HeteroGraph& g = market.graph;
  for (std::size_t i = 0; i < market.products.size(); ++i) {
    auto& a = g.mutable_attrs(market.products[i]);
    a.main_category = i % 3 == 0 ? "Books" : (i % 3 == 1 ? "Movies & TV" : "Sports & Outdoors");
    a.big_category = i % 3 == 2 ? "Lifestyle" : "Culture";
  }
  // moral vectors on every review except those of the first author
  NodeId first_author = *g.find(NodeKind::kAuthor, "RC0");
  for (NodeId a = 0; a < g.node_count(); ++a) {
    if (g.node(a).kind != NodeKind::kAuthor || a == first_author) continue;
    for (NodeId p : g.neighbors(a, EdgeKind::kReviews)) {
      ReviewAttrs r;
      r.rating = 1 + (a + p) % 5;
      r.helpful_up = p % 4;
      r.helpful_total = 4;
      MoralVector mv;
      for (std::size_t k = 0; k < kMoralDims; ++k) mv.p[k] = ((a * 7 + p * 3 + k) % 10) / 10.0;
      r.moral = mv;
      g.set_review_attrs(a, p, r);
    }
  }
  std::vector<ClassScore> scores;
  for (std::size_t i = 0; i < market.products.size(); ++i) {
    ClassScore s;
    s.node = market.products[i];
    const double pc = (market.truth[i] == PolClass::kConservative ? 0.8 : 0.3) + 0.01 * static_cast<double>((i * 37) % 11) - 0.05;
    s.probability = {pc, 1 - pc, 0};
    s.max_probability = std::max(pc, 1 - pc);
    scores.push_back(s);
  }
  FeatureOptions o;
  o.min_reviews = 3;
  auto build = build_features(g, scores, o);
  const auto& rep = build.report;
  CHECK(rep.dropped_labeled_product > 0);
  CHECK(rep.dropped_no_moral > 0);
  CHECK(rep.rows == build.table.rows());
  CHECK(rep.reviews_seen == rep.rows + rep.dropped_labeled_product + rep.dropped_no_score + rep.dropped_no_moral +
                                rep.dropped_category + rep.dropped_min_reviews);
  const auto& t = build.table;
  REQUIRE(t.rows() > 0);
  CHECK_NOTHROW(t.validate());
  std::map<std::string, int> per_reviewer;
  for (std::size_t i = 0; i < t.rows(); ++i) {
    per_reviewer[t.reviewer[i]]++;
    CHECK_FALSE(g.labels().contains(*g.find(NodeKind::kProduct, t.product[i])));
    CHECK(t.reviewer[i] != "RC0");
    const NodeId pid = *g.find(NodeKind::kProduct, t.product[i]);
    const auto it = std::find_if(scores.begin(), scores.end(), [&](const ClassScore& s) { return s.node == pid; });
    CHECK(t.response[i] == lifestyle_score(it->probability[0]));
  }
  for (const auto& [r, c] : per_reviewer) CHECK(c >= 3);
  CHECK(t.column("care"));
  CHECK(t.column("degradation"));
  CHECK_FALSE(t.column("non_moral"));
  CHECK(t.column("cat_movies___tv"));
  CHECK(t.column("cat_sports___outdoors"));
  CHECK_FALSE(t.column("cat_books"));

  FeatureOptions culture = o;
  culture.big_categories = {"Culture"};
  auto narrowed = build_features(g, scores, culture);
  CHECK(narrowed.report.dropped_category > 0);
  CHECK_FALSE(narrowed.table.column("cat_sports___outdoors"));

  auto prepared = prepare_covariates(t);
  for (std::size_t c = 0; c < prepared.columns.size(); ++c) {
    const auto& info = prepared.columns[c];
    if (info.indicator) {
      CHECK(info.transform == "none");
      CHECK(prepared.data[c] == t.data[c]);
    } else {
      CHECK(info.transform == "yeo_johnson+standardize");
      REQUIRE(info.lambda);
      CHECK(std::abs(moments(prepared.data[c]).mean) < 1e-12);
    }
  }

  std::ostringstream out;
  write_feature_csv(out, prepared);
  std::istringstream in(out.str());
  auto back = read_feature_csv(in);
  CHECK(back.reviewer == prepared.reviewer);
  CHECK(back.response == prepared.response);
  CHECK(back.data == prepared.data);
  REQUIRE(back.columns.size() == prepared.columns.size());
  for (std::size_t c = 0; c < back.columns.size(); ++c) {
    CHECK(back.columns[c].name == prepared.columns[c].name);
    CHECK(back.columns[c].transform == prepared.columns[c].transform);
    CHECK(back.columns[c].lambda == prepared.columns[c].lambda);
    CHECK(back.columns[c].indicator == prepared.columns[c].indicator);
  }

  auto f = Formula::parse("product_alignment*author_alignment + care + rating");
  auto fit = beta_fit(prepared, f);
  CHECK(fit.cluster_se);
  CHECK(fit.names.size() == 6);
  CHECK(fit.grad_norm < 1e-8);
}
