#include "polnet/statlab.hpp"

#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/trigamma.hpp>

#include <algorithm>
#include <bit>
#include <cctype>
#include <cstdio>
#include <charconv>
#include <cmath>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>
#include <thread>

#include "polnet/csv.hpp"
#include "polnet/polmetrics.hpp"

namespace polnet {

namespace {

void require_finite(std::span<const double> x) {
  for (double v : x)
    if (!std::isfinite(v)) throw Error(Errc::kParameter, "non-finite input value");
}

}  // namespace

// ------------------------------------------------------------ transforms

double yeo_johnson(double y, double lambda) {
  if (!std::isfinite(y) || !std::isfinite(lambda)) throw Error(Errc::kParameter, "non-finite input value");
  constexpr double eps = 1e-12;
  if (y >= 0) {
    if (std::abs(lambda) < eps) return std::log1p(y);
    return std::expm1(lambda * std::log1p(y)) / lambda;
  }
  if (std::abs(lambda - 2) < eps) return -std::log1p(-y);
  return -std::expm1((2 - lambda) * std::log1p(-y)) / (2 - lambda);
}

std::vector<double> yeo_johnson(std::span<const double> x, double lambda) {
  std::vector<double> out;
  out.reserve(x.size());
  for (double v : x) out.push_back(yeo_johnson(v, lambda));
  return out;
}

double yeo_johnson_loglik(std::span<const double> x, double lambda) {
  const auto n = static_cast<double>(x.size());
  double mean = 0;
  std::vector<double> t = yeo_johnson(x, lambda);
  for (double v : t) mean += v;
  mean /= n;
  double var = 0, jac = 0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    var += (t[i] - mean) * (t[i] - mean);
    jac += std::copysign(std::log1p(std::abs(x[i])), x[i]);
  }
  var /= n;
  return -0.5 * n * std::log(var) + (lambda - 1) * jac;
}

YeoJohnsonFit yeo_johnson_fit(std::span<const double> x, std::optional<double> lambda) {
  require_finite(x);
  if (lambda) return {yeo_johnson(x, *lambda), *lambda};
  if (x.size() < 2) throw Error(Errc::kParameter, "Yeo-Johnson fit needs at least two values");
  if (std::all_of(x.begin(), x.end(), [&](double v) { return v == x[0]; }))
    throw Error(Errc::kParameter, "Yeo-Johnson fit on a constant column");

  const double invphi = (std::sqrt(5.0) - 1) / 2;
  double a = kLambdaLo, b = kLambdaHi;
  double c = b - invphi * (b - a), d = a + invphi * (b - a);
  auto f = [&](double l) {
    const double v = yeo_johnson_loglik(x, l);
    return std::isfinite(v) ? v : -std::numeric_limits<double>::infinity();
  };
  double fc = f(c), fd = f(d);
  while (b - a > kLambdaTol) {
    if (fc >= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - invphi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + invphi * (b - a);
      fd = f(d);
    }
  }
  const double best = (a + b) / 2;
  return {yeo_johnson(x, best), best};
}

Moments moments(std::span<const double> x) {
  Moments m;
  const auto n = static_cast<double>(x.size());
  if (x.empty()) return m;
  m.mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
  double m2 = 0, m3 = 0, m4 = 0;
  for (double v : x) {
    const double d = v - m.mean;
    m2 += d * d;
    m3 += d * d * d;
    m4 += d * d * d * d;
  }
  if (x.size() > 1) m.sd = std::sqrt(m2 / (n - 1));
  m2 /= n;
  m3 /= n;
  m4 /= n;
  if (m2 > 0) {
    m.skewness = m3 / std::pow(m2, 1.5);
    m.excess_kurtosis = m4 / (m2 * m2) - 3;
  }
  return m;
}

Standardized standardize(std::span<const double> x, std::string_view column) {
  require_finite(x);
  if (x.size() < 2 || std::all_of(x.begin(), x.end(), [&](double v) { return v == x[0]; }))
    throw Error(Errc::kParameter, "column '" + std::string(column) + "' is constant and cannot be standardized");
  Standardized s;
  s.before = moments(x);
  s.mean = s.before.mean;
  s.sd = s.before.sd;
  for (double v : x) s.values.push_back((v - s.mean) / s.sd);
  s.after = moments(s.values);
  return s;
}

std::vector<double> min_max_scale(std::span<const double> x, std::string_view column) {
  require_finite(x);
  if (x.empty()) return {};
  const auto [lo, hi] = std::minmax_element(x.begin(), x.end());
  if (*lo == *hi) throw Error(Errc::kParameter, "column '" + std::string(column) + "' is constant and cannot be scaled");
  std::vector<double> out;
  for (double v : x) out.push_back((v - *lo) / (*hi - *lo));
  return out;
}

// --------------------------------------------------------- feature table

std::optional<std::size_t> FeatureTable::column(std::string_view name) const {
  for (std::size_t i = 0; i < columns.size(); ++i)
    if (columns[i].name == name) return i;
  return std::nullopt;
}

const std::vector<double>& FeatureTable::values(std::string_view name) const {
  auto c = column(name);
  if (!c) throw Error(Errc::kParameter, "unknown column '" + std::string(name) + "'");
  return data[*c];
}

void FeatureTable::add_column(ColumnInfo info, std::vector<double> values) {
  if (column(info.name)) throw Error(Errc::kParameter, "duplicate column '" + info.name + "'");
  if (values.size() != rows()) throw Error(Errc::kParameter, "column '" + info.name + "' has the wrong length");
  columns.push_back(std::move(info));
  data.push_back(std::move(values));
}

void FeatureTable::validate() const {
  if (reviewer.size() != rows() || product.size() != rows() || data.size() != columns.size())
    throw Error(Errc::kValidation, "feature table shape is inconsistent");
  for (double y : response)
    if (!(y > 0 && y < 1)) throw Error(Errc::kValidation, "response outside (0,1)");
  for (std::size_t c = 0; c < data.size(); ++c) {
    if (data[c].size() != rows()) throw Error(Errc::kValidation, "column '" + columns[c].name + "' has the wrong length");
    for (double v : data[c])
      if (!std::isfinite(v)) throw Error(Errc::kValidation, "column '" + columns[c].name + "' has a non-finite value");
  }
}

namespace {

ColumnInfo named(std::string name, bool indicator = false) {
  ColumnInfo c;
  c.name = std::move(name);
  c.indicator = indicator;
  return c;
}

std::string indicator_name(const std::string& category) {
  std::string out = "cat_";
  for (char ch : category) {
    const auto u = static_cast<unsigned char>(ch);
    out += std::isalnum(u) ? static_cast<char>(std::tolower(u)) : '_';
  }
  return out;
}

}  // namespace

FeatureBuild build_features(const HeteroGraph& g, std::span<const ClassScore> scores,
                            const FeatureOptions& options) {
  FeatureBuild out;
  FeatureReport& rep = out.report;

  std::vector<const ClassScore*> score_of(g.node_count(), nullptr);
  for (const auto& s : scores)
    if (s.node < g.node_count()) score_of[s.node] = &s;

  MetricsConfig mc;
  mc.kinds = options.kinds;
  mc.d_override = options.d_override;
  const auto partition = category_segments(g, CategoryLevel::kMain);
  const GlobalPoliticalTotals totals = compute_totals(g, partition, mc);

  struct Row {
    NodeId author, product;
    const ReviewAttrs* review;
  };
  std::vector<Row> rows;
  for (NodeId a = 0; a < g.node_count(); ++a) {
    if (g.node(a).kind != NodeKind::kAuthor) continue;
    for (NodeId p : g.neighbors(a, EdgeKind::kReviews)) {
      ++rep.reviews_seen;
      if (g.labels().contains(p)) {
        ++rep.dropped_labeled_product;
        continue;
      }
      if (!score_of[p]) {
        ++rep.dropped_no_score;
        continue;
      }
      const ReviewAttrs* r = g.review_attrs(a, p);
      if (!r || !r->moral) {
        ++rep.dropped_no_moral;
        continue;
      }
      if (!options.big_categories.empty() &&
          std::find(options.big_categories.begin(), options.big_categories.end(),
                    g.node(p).attrs.big_category) == options.big_categories.end()) {
        ++rep.dropped_category;
        continue;
      }
      rows.push_back({a, p, r});
    }
  }
  std::map<NodeId, std::size_t> per_author;
  for (const Row& r : rows) per_author[r.author]++;
  std::erase_if(rows, [&](const Row& r) {
    if (per_author[r.author] >= options.min_reviews) return false;
    ++rep.dropped_min_reviews;
    return true;
  });
  rep.rows = rows.size();

  FeatureTable& t = out.table;
  std::map<NodeId, std::pair<double, double>> product_politics;
  std::map<NodeId, std::pair<double, double>> author_cache;
  std::vector<double> pa, pr, aa, ar, help, rating;
  std::array<std::vector<double>, kMoralDims - 1> moral;
  std::vector<std::string> cats;
  for (const Row& r : rows) {
    t.reviewer.push_back(g.node(r.author).key);
    t.product.push_back(g.node(r.product).key);
    t.response.push_back(lifestyle_score(conservative_share(*score_of[r.product])));

    auto [pit, pnew] = product_politics.try_emplace(r.product);
    if (pnew) {
      const Segment seg{g.node(r.product).key, {r.product}};
      const SegmentCounts c = segment_counts(g, seg, options.kinds);
      pit->second = {alignment(c, totals), relevance(c, totals)};
    }
    pa.push_back(pit->second.first);
    pr.push_back(pit->second.second);
    auto [ait, anew] = author_cache.try_emplace(r.author);
    if (anew) {
      const AuthorPolitics ap = author_politics(g, r.author, totals);
      ait->second = {ap.alignment, ap.relevance};
    }
    aa.push_back(ait->second.first);
    ar.push_back(ait->second.second);
    for (std::size_t k = 0; k + 1 < kMoralDims; ++k) moral[k].push_back(r.review->moral->p[k]);
    help.push_back(r.review->helpful_total > 0
                       ? static_cast<double>(r.review->helpful_up) / r.review->helpful_total
                       : 0.0);
    rating.push_back(r.review->rating);
    cats.push_back(g.node(r.product).attrs.main_category);
  }
  t.add_column(named("product_alignment"), std::move(pa));
  t.add_column(named("product_relevance"), std::move(pr));
  t.add_column(named("author_alignment"), std::move(aa));
  t.add_column(named("author_relevance"), std::move(ar));
  for (std::size_t k = 0; k + 1 < kMoralDims; ++k)
    t.add_column(named(std::string(kMoralLabels[k])), std::move(moral[k]));
  t.add_column(named("helpfulness"), std::move(help));
  t.add_column(named("rating"), std::move(rating));

  // Indicators for every main category but the first, which is the reference.
  std::vector<std::string> levels(cats.begin(), cats.end());
  std::sort(levels.begin(), levels.end());
  levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
  for (std::size_t l = 1; l < levels.size(); ++l) {
    std::vector<double> ind;
    for (const auto& c : cats) ind.push_back(c == levels[l] ? 1.0 : 0.0);
    t.add_column(named(indicator_name(levels[l]), true), std::move(ind));
  }
  return out;
}

FeatureTable prepare_covariates(const FeatureTable& raw) {
  FeatureTable t = raw;
  for (std::size_t c = 0; c < t.columns.size(); ++c) {
    ColumnInfo& info = t.columns[c];
    if (info.indicator || info.transform != "none") continue;
    auto yj = yeo_johnson_fit(t.data[c]);
    auto st = standardize(yj.values, info.name);
    t.data[c] = std::move(st.values);
    info.transform = "yeo_johnson+standardize";
    info.lambda = yj.lambda;
  }
  return t;
}

void write_feature_csv(std::ostream& out, const FeatureTable& t) {
  out << "# manifest column,transform,lambda,indicator\n";
  for (const auto& c : t.columns)
    out << "# " << c.name << ',' << c.transform << ',' << (c.lambda ? csv::format_double(*c.lambda) : "NA")
        << ',' << (c.indicator ? 1 : 0) << '\n';
  std::vector<std::string> header{"reviewer", "product", "response"};
  for (const auto& c : t.columns) header.push_back(c.name);
  csv::write_record(out, header);
  for (std::size_t i = 0; i < t.rows(); ++i) {
    std::vector<std::string> rec{t.reviewer[i], t.product[i], csv::format_double(t.response[i])};
    for (const auto& col : t.data) rec.push_back(csv::format_double(col[i]));
    csv::write_record(out, rec);
  }
}

namespace {

double parse_double(const std::string& s) {
  double v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size()) throw Error(Errc::kFormat, "bad number '" + s + "'");
  return v;
}

}  // namespace

FeatureTable read_feature_csv(std::istream& in) {
  FeatureTable t;
  std::map<std::string, ColumnInfo> manifest;
  std::string line;
  while (in.peek() == '#') {
    std::getline(in, line);
    if (line.rfind("# manifest", 0) == 0) continue;
    std::istringstream ls(line.substr(2));
    auto rec = csv::read_record(ls);
    if (!rec || rec->size() != 4) throw Error(Errc::kFormat, "bad manifest line: " + line);
    ColumnInfo info = named((*rec)[0]);
    info.transform = (*rec)[1];
    if ((*rec)[2] != "NA") info.lambda = parse_double((*rec)[2]);
    info.indicator = (*rec)[3] == "1";
    manifest[info.name] = info;
  }
  auto header = csv::read_record(in);
  if (!header || header->size() < 3 || (*header)[0] != "reviewer" || (*header)[1] != "product" ||
      (*header)[2] != "response")
    throw Error(Errc::kFormat, "feature CSV must start with reviewer,product,response");
  for (std::size_t c = 3; c < header->size(); ++c) {
    auto it = manifest.find((*header)[c]);
    t.columns.push_back(it != manifest.end() ? it->second : named((*header)[c]));
    t.data.emplace_back();
  }
  while (auto rec = csv::read_record(in)) {
    if (rec->size() == 1 && (*rec)[0].empty()) continue;
    if (rec->size() != header->size()) throw Error(Errc::kFormat, "feature CSV row has the wrong field count");
    t.reviewer.push_back((*rec)[0]);
    t.product.push_back((*rec)[1]);
    t.response.push_back(parse_double((*rec)[2]));
    for (std::size_t c = 3; c < rec->size(); ++c) t.data[c - 3].push_back(parse_double((*rec)[c]));
  }
  return t;
}

// -------------------------------------------------------------- formulas

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_on(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= s.size(); ++i)
    if (i == s.size() || s[i] == sep) {
      out.push_back(trim(s.substr(start, i - start)));
      start = i + 1;
    }
  return out;
}

}  // namespace

Formula Formula::parse(std::string_view text) {
  Formula f;
  if (auto tilde = text.find('~'); tilde != std::string_view::npos) text = text.substr(tilde + 1);
  std::string rhs;
  // "- 1" removes the intercept; any other subtraction is unsupported.
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] == '-') {
      std::size_t j = i + 1;
      while (j < text.size() && text[j] == ' ') ++j;
      if (j < text.size() && text[j] == '1' && (j + 1 == text.size() || text[j + 1] == ' ' || text[j + 1] == '+')) {
        f.intercept = false;
        i = j;
        continue;
      }
      throw Error(Errc::kParameter, "formula: only '- 1' may be subtracted");
    }
    rhs += text[i];
  }
  auto add = [&](std::vector<std::string> term) {
    std::sort(term.begin(), term.end());
    term.erase(std::unique(term.begin(), term.end()), term.end());
    if (std::find(f.terms.begin(), f.terms.end(), term) == f.terms.end()) f.terms.push_back(std::move(term));
  };
  for (const std::string& piece : split_on(rhs, '+')) {
    if (piece.empty()) {
      if (split_on(rhs, '+').size() == 1 && !f.intercept) continue;
      throw Error(Errc::kParameter, "formula: empty term");
    }
    if (piece == "1") continue;
    if (piece == "0") {
      f.intercept = false;
      continue;
    }
    if (piece.find('*') != std::string::npos) {
      auto factors = split_on(piece, '*');
      // all non-empty subsets, in order of size
      const std::size_t k = factors.size();
      for (std::size_t size = 1; size <= k; ++size)
        for (std::uint32_t mask = 1; mask < (1u << k); ++mask) {
          if (static_cast<std::size_t>(std::popcount(mask)) != size) continue;
          std::vector<std::string> term;
          for (std::size_t b = 0; b < k; ++b)
            if (mask & (1u << b)) term.push_back(factors[b]);
          add(term);
        }
      continue;
    }
    add(split_on(piece, ':'));
  }
  for (const auto& term : f.terms)
    for (const auto& name : term)
      if (name.empty()) throw Error(Errc::kParameter, "formula: empty factor");
  return f;
}

std::vector<std::string> Formula::term_names() const {
  std::vector<std::string> out;
  if (intercept) out.push_back("(Intercept)");
  for (const auto& term : terms) {
    std::string name;
    for (const auto& f : term) name += (name.empty() ? "" : ":") + f;
    out.push_back(name);
  }
  return out;
}

Design design_matrix(const FeatureTable& t, const Formula& f) {
  Formula expanded = f;
  expanded.terms.clear();
  for (const auto& term : f.terms) {
    if (term.size() == 1 && term[0] == ".") {
      for (const auto& c : t.columns) expanded.terms.push_back({c.name});
    } else {
      expanded.terms.push_back(term);
    }
  }
  Design d;
  d.names = expanded.term_names();
  const auto n = static_cast<Eigen::Index>(t.rows());
  d.X.resize(n, static_cast<Eigen::Index>(d.names.size()));
  Eigen::Index col = 0;
  if (expanded.intercept) d.X.col(col++).setOnes();
  for (const auto& term : expanded.terms) {
    d.X.col(col).setOnes();
    for (const auto& name : term) {
      const auto& v = t.values(name);
      for (Eigen::Index i = 0; i < n; ++i) d.X(i, col) *= v[static_cast<std::size_t>(i)];
    }
    ++col;
  }
  return d;
}

Formula default_formula(const FeatureTable& t) {
  Formula f;
  for (const auto& c : t.columns) f.terms.push_back({c.name});
  if (t.column("product_alignment") && t.column("product_relevance"))
    f.terms.push_back({"product_alignment", "product_relevance"});
  return f;
}

// ------------------------------------------------------- beta regression

namespace {

using boost::math::digamma;
using boost::math::trigamma;

constexpr Eigen::Index kBlock = 2048;

struct Partial {
  double loglik = 0;
  Eigen::VectorXd score;
  Eigen::MatrixXd hessian;
};

// Rows [lo, hi). Score and Hessian are with respect to (beta, log phi).
Partial block_terms(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Eigen::VectorXd& beta,
                    double log_phi, Eigen::Index lo, Eigen::Index hi, bool want_score, bool want_hessian,
                    bool expected) {
  const Eigen::Index p = X.cols();
  const double phi = std::exp(log_phi);
  Partial out;
  if (want_score) out.score = Eigen::VectorXd::Zero(p + 1);
  if (want_hessian) out.hessian = Eigen::MatrixXd::Zero(p + 1, p + 1);
  const double lg_phi = std::lgamma(phi);
  const double dg_phi = want_score || want_hessian ? digamma(phi) : 0;
  const double tg_phi = want_hessian ? trigamma(phi) : 0;

  for (Eigen::Index i = lo; i < hi; ++i) {
    const double eta = X.row(i).dot(beta);
    const double mu = 1.0 / (1.0 + std::exp(-eta));
    const double a = mu * phi, b = (1 - mu) * phi;
    const double ly = std::log(y[i]), l1y = std::log1p(-y[i]);
    out.loglik += lg_phi - std::lgamma(a) - std::lgamma(b) + (a - 1) * ly + (b - 1) * l1y;
    if (!want_score && !want_hessian) continue;

    const double da = digamma(a), db = digamma(b);
    const double ystar = ly - l1y, mustar = da - db;
    const double g = mu * (1 - mu);
    const double r = ystar - mustar;
    const double dl_dphi = dg_phi + mu * r + l1y - db;
    if (want_score) {
      out.score.head(p).noalias() += (phi * r * g) * X.row(i).transpose();
      out.score[p] += phi * dl_dphi;
    }
    if (want_hessian) {
      const double ta = trigamma(a), tb = trigamma(b);
      const double r_used = expected ? 0.0 : r;
      const double w_bb = -phi * phi * (ta + tb) * g * g + phi * r_used * g * (1 - 2 * mu);
      const double w_bphi = g * (r_used - phi * (mu * ta - (1 - mu) * tb));
      const double d2_phi = tg_phi - mu * mu * ta - (1 - mu) * (1 - mu) * tb;
      // log-phi chain rule; the first-order term vanishes in expectation
      const double w_pp = phi * phi * d2_phi + (expected ? 0.0 : phi * dl_dphi);
      out.hessian.topLeftCorner(p, p).noalias() += w_bb * X.row(i).transpose() * X.row(i);
      out.hessian.col(p).head(p).noalias() += (phi * w_bphi) * X.row(i).transpose();
      out.hessian(p, p) += w_pp;
    }
  }
  if (want_hessian) out.hessian.row(p).head(p) = out.hessian.col(p).head(p).transpose();
  return out;
}

unsigned resolve_threads(unsigned t) {
  if (t == 0) t = std::max(1u, std::thread::hardware_concurrency());
  return t;
}

}  // namespace

double beta_loglik(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Eigen::VectorXd& beta,
                   double log_phi, Eigen::VectorXd* score, Eigen::MatrixXd* hessian, bool expected,
                   unsigned threads) {
  const Eigen::Index n = X.rows();
  const Eigen::Index blocks = (n + kBlock - 1) / kBlock;
  std::vector<Partial> parts(static_cast<std::size_t>(blocks));
  auto run = [&](Eigen::Index first, Eigen::Index step) {
    for (Eigen::Index b = first; b < blocks; b += step)
      parts[static_cast<std::size_t>(b)] = block_terms(X, y, beta, log_phi, b * kBlock,
                                                       std::min(n, (b + 1) * kBlock), score != nullptr,
                                                       hessian != nullptr, expected);
  };
  const auto workers = static_cast<Eigen::Index>(std::min<std::size_t>(resolve_threads(threads), static_cast<std::size_t>(std::max<Eigen::Index>(blocks, 1))));
  if (workers <= 1) {
    run(0, 1);
  } else {
    std::vector<std::jthread> pool;
    for (Eigen::Index w = 0; w < workers; ++w) pool.emplace_back(run, w, workers);
  }
  // Blocks are summed in order so the result does not depend on the thread count.
  const Eigen::Index p = X.cols();
  double ll = 0;
  if (score) *score = Eigen::VectorXd::Zero(p + 1);
  if (hessian) *hessian = Eigen::MatrixXd::Zero(p + 1, p + 1);
  for (const Partial& part : parts) {
    ll += part.loglik;
    if (score) *score += part.score;
    if (hessian) *hessian += part.hessian;
  }
  return ll;
}

BetaFit beta_fit(const Eigen::MatrixXd& X, std::span<const double> y_in, std::vector<std::string> names,
                 const BetaFitOptions& options, std::span<const std::string> clusters) {
  const Eigen::Index n = X.rows(), p = X.cols();
  if (static_cast<std::size_t>(n) != y_in.size()) throw Error(Errc::kParameter, "response length does not match the design");
  if (names.size() != static_cast<std::size_t>(p)) throw Error(Errc::kParameter, "one name per design column is required");
  if (!clusters.empty() && clusters.size() != y_in.size()) throw Error(Errc::kParameter, "one cluster id per row is required");
  if (n <= p) throw Error(Errc::kParameter, "beta regression needs more rows than coefficients");
  if (!X.allFinite()) throw Error(Errc::kParameter, "design matrix has non-finite entries");

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  if (qr.rank() < p) {
    std::string cols;
    const auto& perm = qr.colsPermutation().indices();
    for (Eigen::Index k = qr.rank(); k < p; ++k) cols += (cols.empty() ? "" : ", ") + names[static_cast<std::size_t>(perm[k])];
    throw Error(Errc::kRankDeficient, "design matrix is rank deficient; collinear columns: " + cols);
  }

  BetaFit fit;
  fit.names = std::move(names);
  fit.n = static_cast<std::size_t>(n);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double v = y_in[static_cast<std::size_t>(i)];
    if (!std::isfinite(v) || v < 0 || v > 1) throw Error(Errc::kParameter, "response outside [0,1]");
    const double c = std::clamp(v, options.nudge, 1 - options.nudge);
    if (c != v) ++fit.nudged;
    y[i] = c;
  }

  // Start from least squares on the logit scale and a moment estimate of phi.
  Eigen::VectorXd z = y.unaryExpr([](double v) { return std::log(v / (1 - v)); });
  Eigen::VectorXd beta = qr.solve(z);
  {
    const double ybar = y.mean();
    const double var = (y.array() - ybar).square().sum() / static_cast<double>(n - 1);
    double phi0 = var > 0 ? ybar * (1 - ybar) / var - 1 : 10;
    if (!(phi0 > 0.1)) phi0 = 1;
    fit.phi = phi0;
  }
  double log_phi = std::log(fit.phi);

  Eigen::VectorXd score;
  Eigen::MatrixXd hess;
  double ll = beta_loglik(X, y, beta, log_phi, &score, &hess, false, options.threads);
  int it = 0;
  std::ostringstream trajectory;
  for (;; ++it) {
    const double gnorm = score.lpNorm<Eigen::Infinity>();
    if (gnorm < options.tolerance) break;
    if (it >= options.max_iterations) {
      fit.trace.push_back({it, ll, gnorm, 0, false});
      for (const auto& t : fit.trace)
        trajectory << "\n  iter " << t.iteration << " loglik " << csv::format_double(t.loglik) << " |grad| "
                   << csv::format_double(t.grad_norm) << (t.fisher ? " fisher" : "");
      throw Error(Errc::kNonConvergence, "beta regression did not converge in " +
                                             std::to_string(options.max_iterations) + " iterations" +
                                             trajectory.str());
    }
    IterationTrace trace{it, ll, gnorm, 0, false};
    // Newton direction when -H is positive definite, Fisher scoring otherwise.
    Eigen::LDLT<Eigen::MatrixXd> ldlt(-hess);
    Eigen::VectorXd step;
    if (ldlt.info() == Eigen::Success && ldlt.isPositive() && (ldlt.vectorD().array() > 0).all()) {
      step = ldlt.solve(score);
    } else {
      Eigen::MatrixXd fisher;
      beta_loglik(X, y, beta, log_phi, nullptr, &fisher, true, options.threads);
      step = (-fisher).ldlt().solve(score);
      trace.fisher = true;
    }
    double t = 1.0;
    Eigen::VectorXd nb;
    double nlp = 0, nll = -std::numeric_limits<double>::infinity();
    for (;;) {
      nb = beta + t * step.head(p);
      nlp = log_phi + t * step[p];
      nll = beta_loglik(X, y, nb, nlp, nullptr, nullptr, false, options.threads);
      if (std::isfinite(nll) && nll >= ll - 1e-12 * std::abs(ll)) break;
      if (trace.halvings == options.max_halvings) break;
      ++trace.halvings;
      t *= 0.5;
    }
    fit.trace.push_back(trace);
    if (!std::isfinite(nll) || nll < ll - 1e-12 * std::abs(ll)) {
      for (const auto& tr : fit.trace)
        trajectory << "\n  iter " << tr.iteration << " loglik " << csv::format_double(tr.loglik) << " |grad| "
                   << csv::format_double(tr.grad_norm) << " halvings " << tr.halvings;
      throw Error(Errc::kNonConvergence, "beta regression line search failed" + trajectory.str());
    }
    beta = nb;
    log_phi = nlp;
    ll = beta_loglik(X, y, beta, log_phi, &score, &hess, false, options.threads);
  }

  fit.beta = beta;
  fit.phi = std::exp(log_phi);
  fit.loglik = ll;
  fit.iterations = it;
  fit.grad_norm = score.lpNorm<Eigen::Infinity>();

  const Eigen::MatrixXd cov = (-hess).inverse();
  fit.se = cov.diagonal().head(p).cwiseSqrt();
  fit.se_phi = fit.phi * std::sqrt(cov(p, p));

  if (!clusters.empty()) {
    // Sum per-row scores within each cluster, in cluster-id order.
    std::map<std::string_view, Eigen::VectorXd> per_cluster;
    for (Eigen::Index i = 0; i < n; ++i) {
      Eigen::VectorXd s;
      block_terms(X, y, beta, log_phi, i, i + 1, true, false, false).score.swap(s);
      auto [itc, fresh] = per_cluster.try_emplace(clusters[static_cast<std::size_t>(i)], s);
      if (!fresh) itc->second += s;
    }
    Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(p + 1, p + 1);
    for (const auto& [id, s] : per_cluster) meat.noalias() += s * s.transpose();
    const auto G = static_cast<double>(per_cluster.size());
    if (G > 1) meat *= G / (G - 1);
    const Eigen::MatrixXd sandwich = cov * meat * cov;
    fit.cluster_se = sandwich.diagonal().head(p).cwiseSqrt();
  }

  // Baseline: intercept-only mean when an intercept exists, else beta = 0.
  Eigen::VectorXd base = Eigen::VectorXd::Zero(p);
  for (Eigen::Index k = 0; k < p; ++k)
    if (fit.names[static_cast<std::size_t>(k)] == "(Intercept)") {
      const double ybar = y.mean();
      base[k] = std::log(ybar / (1 - ybar));
    }
  fit.loglik_null = beta_loglik(X, y, base, log_phi, nullptr, nullptr, false, options.threads);
  return fit;
}

BetaFit beta_fit(const FeatureTable& t, const Formula& f, const BetaFitOptions& options) {
  t.validate();
  Design d = design_matrix(t, f);
  return beta_fit(d.X, t.response, d.names, options, t.reviewer);
}

CoefficientReport coefficient_report(const BetaFit& fit, std::span<const std::string> interpret) {
  CoefficientReport r;
  r.phi = fit.phi;
  r.se_phi = fit.se_phi;
  r.loglik = fit.loglik;
  r.loglik_null = fit.loglik_null;
  r.n = fit.n;
  r.nudged = fit.nudged;
  r.iterations = fit.iterations;
  for (std::size_t k = 0; k < fit.names.size(); ++k) {
    CoefficientRow row;
    const auto i = static_cast<Eigen::Index>(k);
    row.name = fit.names[k];
    row.estimate = fit.beta[i];
    row.se = fit.se[i];
    row.z = row.estimate / row.se;
    row.p_value = std::erfc(std::abs(row.z) / std::sqrt(2.0));
    if (fit.cluster_se) row.cluster_se = (*fit.cluster_se)[i];
    const bool wanted = interpret.empty()
                            ? row.name != "(Intercept)"
                            : std::find(interpret.begin(), interpret.end(), row.name) != interpret.end();
    if (wanted) row.probability = lifestyle_probability(row.estimate);
    r.rows.push_back(row);
  }
  return r;
}

std::string to_text(const CoefficientReport& r) {
  std::ostringstream out;
  out << "beta regression, logit link\n";
  out << "n = " << r.n << " (nudged " << r.nudged << "), iterations = " << r.iterations << "\n";
  out << "loglik = " << csv::format_double(r.loglik) << ", baseline loglik = " << csv::format_double(r.loglik_null)
      << "\n";
  out << "phi = " << csv::format_double(r.phi) << " (se " << csv::format_double(r.se_phi) << ")\n\n";
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-32s %12s %10s %9s %10s %10s %9s\n", "term", "estimate", "se", "z", "p",
                "clust.se", "prob");
  out << buf;
  for (const auto& row : r.rows) {
    char cse[32] = "", prob[32] = "";
    if (row.cluster_se) std::snprintf(cse, sizeof cse, "%.6f", *row.cluster_se);
    if (row.probability) std::snprintf(prob, sizeof prob, "%.4f", *row.probability);
    std::snprintf(buf, sizeof buf, "%-32s %12.6f %10.6f %9.3f %10.3g %10s %9s\n", row.name.c_str(), row.estimate,
                  row.se, row.z, row.p_value, cse, prob);
    out << buf;
  }
  return out.str();
}

void write_coefficients_csv(std::ostream& out, const CoefficientReport& r) {
  csv::write_record(out, {"term", "estimate", "se", "z", "p", "cluster_se", "probability"});
  for (const auto& row : r.rows)
    csv::write_record(out, {row.name, csv::format_double(row.estimate), csv::format_double(row.se),
                            csv::format_double(row.z), csv::format_double(row.p_value),
                            row.cluster_se ? csv::format_double(*row.cluster_se) : "NA",
                            row.probability ? csv::format_double(*row.probability) : "NA"});
  csv::write_record(out, {"phi", csv::format_double(r.phi), csv::format_double(r.se_phi), "NA", "NA", "NA", "NA"});
}

}  // namespace polnet
