#include "polnet/rgcn.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>

#include "binio.hpp"
#include "polnet/csv.hpp"
#include "polnet/polmetrics.hpp"

namespace polnet {

namespace {

using Mat = Eigen::MatrixXd;

// Independent streams derived from the config seed.
enum Stream : std::uint64_t { kSplitStream = 1, kInitStream = 2, kSearchStream = 3, kDropoutBase = 1000 };

double unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

double uniform(std::mt19937_64& rng, double lo, double hi) { return lo + (hi - lo) * unit(rng); }

void fill_uniform(Mat& m, std::mt19937_64& rng, double bound) {
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = uniform(rng, -bound, bound);
}

int out_dim(const RgcnConfig& c, int layer) { return layer + 1 == c.layers ? c.classes : c.hidden; }

double leaky(double x, double slope) { return x > 0 ? x : slope * x; }

void softmax_row(const Mat& logits, Eigen::Index i, double* out) {
  const Eigen::Index c = logits.cols();
  double mx = logits.row(i).maxCoeff();
  double sum = 0;
  for (Eigen::Index k = 0; k < c; ++k) {
    out[k] = std::exp(logits(i, k) - mx);
    sum += out[k];
  }
  for (Eigen::Index k = 0; k < c; ++k) out[k] /= sum;
}

std::string node_key(const Node& n) { return std::string(to_string(n.kind)) + ":" + n.key; }

void check_view(const RgcnModel& model, const RelationalView& view) {
  if (static_cast<std::size_t>(model.embedding.rows()) != view.size())
    throw Error(Errc::kParameter, "model was trained on a different graph view");
}

struct ForwardCache {
  std::vector<Mat> input;                                    // H^(l), post dropout
  std::vector<std::array<Mat, RelationalView::kRelations>> agg;  // A_r H^(l)
  std::vector<Mat> pre;                                      // Z^(l)
  std::vector<Mat> mask;                                     // scaled keep mask per hidden layer
};

Mat run_forward(const RgcnModel& m, const RelationalView& view,
                std::optional<std::uint64_t> dropout_seed, ForwardCache* cache) {
  const RgcnConfig& c = m.config;
  Mat h = m.embedding;
  std::optional<std::mt19937_64> rng;
  if (dropout_seed && c.dropout > 0) rng.emplace(*dropout_seed);
  const double keep = 1.0 - c.dropout;

  for (int l = 0; l < c.layers; ++l) {
    std::array<Mat, RelationalView::kRelations> agg;
    Mat z = h * m.w_self[l];
    for (int r = 0; r < RelationalView::kRelations; ++r) {
      agg[r] = view.adj[r] * h;
      z.noalias() += agg[r] * m.w_rel[l][r];
    }
    if (cache) {
      cache->input.push_back(h);
      cache->agg.push_back(std::move(agg));
      cache->pre.push_back(z);
    }
    if (l + 1 == c.layers) return z;

    h = z.unaryExpr([&](double x) { return leaky(x, c.leaky_slope); });
    if (rng) {
      Mat mask(h.rows(), h.cols());
      for (Eigen::Index j = 0; j < mask.cols(); ++j)
        for (Eigen::Index i = 0; i < mask.rows(); ++i) mask(i, j) = unit(*rng) < keep ? 1.0 / keep : 0.0;
      h = h.cwiseProduct(mask);
      if (cache) cache->mask.push_back(std::move(mask));
    } else if (cache) {
      cache->mask.push_back(Mat::Ones(h.rows(), h.cols()));
    }
  }
  return {};
}

// Mean cross-entropy and accuracy over `rows` (no regularisation).
SplitMetrics evaluate(const Mat& logits, std::span<const std::size_t> rows, std::span<const int> target) {
  SplitMetrics s;
  s.size = rows.size();
  if (rows.empty()) return s;
  std::array<double, 3> p{};
  std::size_t correct = 0;
  for (std::size_t i : rows) {
    const auto row = static_cast<Eigen::Index>(i);
    softmax_row(logits, row, p.data());
    s.loss -= std::log(std::max(p[target[i]], std::numeric_limits<double>::min()));
    Eigen::Index best;
    logits.row(row).maxCoeff(&best);
    if (best == target[i]) ++correct;
  }
  s.loss /= static_cast<double>(rows.size());
  s.accuracy = static_cast<double>(correct) / static_cast<double>(rows.size());
  return s;
}

bool better(const SplitMetrics& a, const SplitMetrics& b) {
  if (a.accuracy != b.accuracy) return a.accuracy > b.accuracy;
  return a.loss < b.loss;
}

bool has_priority_label(const HeteroGraph& g, NodeId v) {
  const PoliticalLabel* l = g.labels().find(v);
  return l && l->provenance != Provenance::kModel;
}

}  // namespace

std::string_view to_string(Optimizer o) noexcept {
  return o == Optimizer::kAdam ? "adam" : "gd";
}

std::optional<Optimizer> parse_optimizer(std::string_view name) noexcept {
  if (name == "gd") return Optimizer::kGradientDescent;
  if (name == "adam") return Optimizer::kAdam;
  return std::nullopt;
}

RgcnConfig RgcnConfig::paper_preset() { return RgcnConfig{}; }

void RgcnConfig::validate() const {
  auto fail = [](const std::string& what) { throw Error(Errc::kParameter, "rgcn config: " + what); };
  if (layers < 1) fail("layers must be >= 1");
  if (hidden < 1) fail("hidden must be >= 1");
  if (!(dropout >= 0 && dropout < 1)) fail("dropout must be in [0,1)");
  if (!(learning_rate > 0)) fail("learning rate must be > 0");
  if (!(clip_norm > 0)) fail("clip norm must be > 0");
  if (!(l2 >= 0)) fail("l2 must be >= 0");
  if (epochs < 1) fail("epochs must be >= 1");
  if (!(leaky_slope >= 0 && leaky_slope < 1)) fail("leaky slope must be in [0,1)");
  if (classes != 2 && classes != 3) fail("classes must be 2 or 3");
  for (double f : split)
    if (!(f >= 0)) fail("split fractions must be >= 0");
  if (std::abs(split[0] + split[1] + split[2] - 1.0) > 1e-9) fail("split fractions must sum to 1");
  if (!(split[0] > 0)) fail("training fraction must be > 0");
}

// ------------------------------------------------------------------ view

RelationalView RelationalView::build(const HeteroGraph& g, bool include_coreview) {
  RelationalView v;
  v.position.assign(g.node_count(), -1);
  for (NodeId id = 0; id < g.node_count(); ++id) {
    const NodeKind k = g.node(id).kind;
    if (k == NodeKind::kAuthor || k == NodeKind::kProduct) {
      v.position[id] = static_cast<std::int64_t>(v.nodes.size());
      v.nodes.push_back(id);
    }
  }
  const auto n = static_cast<Eigen::Index>(v.nodes.size());
  std::array<std::vector<Eigen::Triplet<double>>, kRelations> trip;
  std::vector<NodeId> nb;
  for (std::size_t i = 0; i < v.nodes.size(); ++i) {
    const NodeId id = v.nodes[i];
    const bool product = g.node(id).kind == NodeKind::kProduct;
    // product <- author is relation 0, author <- product relation 1
    const int review_rel = product ? 0 : 1;
    auto rev = g.neighbors(id, EdgeKind::kReviews);
    for (NodeId j : rev)
      trip[review_rel].emplace_back(static_cast<Eigen::Index>(i), v.position[j], 1.0 / rev.size());
    if (!product) continue;
    nb.clear();
    for (EdgeKind k : kAllEdgeKinds)
      if (is_copurchase(k) || (include_coreview && k == EdgeKind::kCoReview))
        for (NodeId j : g.neighbors(id, k)) nb.push_back(j);
    std::sort(nb.begin(), nb.end());
    nb.erase(std::unique(nb.begin(), nb.end()), nb.end());
    for (NodeId j : nb)
      trip[2].emplace_back(static_cast<Eigen::Index>(i), v.position[j], 1.0 / nb.size());
  }
  for (int r = 0; r < kRelations; ++r) {
    v.adj[r].resize(n, n);
    v.adj[r].setFromTriplets(trip[r].begin(), trip[r].end());
  }
  return v;
}

std::optional<std::size_t> RelationalView::row(NodeId v) const {
  if (v >= position.size() || position[v] < 0) return std::nullopt;
  return static_cast<std::size_t>(position[v]);
}

// ----------------------------------------------------------------- model

std::size_t RgcnModel::parameter_count() const {
  std::size_t n = 0;
  for (const Mat* p : parameters()) n += static_cast<std::size_t>(p->size());
  return n;
}

std::vector<const Mat*> RgcnModel::parameters() const {
  std::vector<const Mat*> out{&embedding};
  for (std::size_t l = 0; l < w_self.size(); ++l) {
    out.push_back(&w_self[l]);
    for (const Mat& w : w_rel[l]) out.push_back(&w);
  }
  return out;
}

std::vector<Mat*> RgcnModel::parameters() {
  std::vector<Mat*> out{&embedding};
  for (std::size_t l = 0; l < w_self.size(); ++l) {
    out.push_back(&w_self[l]);
    for (Mat& w : w_rel[l]) out.push_back(&w);
  }
  return out;
}

RgcnModel init_model(const RgcnConfig& config, const HeteroGraph& g, const RelationalView& view) {
  config.validate();
  RgcnModel m;
  m.config = config;
  for (NodeId id : view.nodes) m.node_keys.push_back(node_key(g.node(id)));
  std::mt19937_64 rng(replicate_seed(config.seed, kInitStream));
  const auto h = static_cast<Eigen::Index>(config.hidden);
  m.embedding.resize(static_cast<Eigen::Index>(view.size()), h);
  fill_uniform(m.embedding, rng, 1.0 / std::sqrt(static_cast<double>(config.hidden)));
  for (int l = 0; l < config.layers; ++l) {
    const Eigen::Index out = out_dim(config, l);
    const double bound = std::sqrt(6.0 / static_cast<double>(h + out));
    Mat w(h, out);
    fill_uniform(w, rng, bound);
    m.w_self.push_back(w);
    std::array<Mat, RelationalView::kRelations> rel;
    for (Mat& r : rel) {
      r.resize(h, out);
      fill_uniform(r, rng, bound);
    }
    m.w_rel.push_back(std::move(rel));
  }
  return m;
}

Mat forward_logits(const RgcnModel& model, const RelationalView& view) {
  check_view(model, view);
  return run_forward(model, view, std::nullopt, nullptr);
}

std::vector<ClassScore> predict(const RgcnModel& model, const RelationalView& view) {
  const Mat logits = forward_logits(model, view);
  std::vector<ClassScore> out(view.size());
  for (std::size_t i = 0; i < view.size(); ++i) {
    ClassScore& s = out[i];
    s.node = view.nodes[i];
    s.classes = model.config.classes;
    softmax_row(logits, static_cast<Eigen::Index>(i), s.probability.data());
    int best = 0;
    for (int k = 1; k < s.classes; ++k)
      if (s.probability[k] > s.probability[best]) best = k;
    s.argmax = static_cast<PolClass>(best);
    s.max_probability = s.probability[best];
  }
  return out;
}

std::vector<ClassScore> predict(const RgcnModel& model, const RelationalView& view,
                                std::span<const NodeId> nodes) {
  std::vector<std::size_t> rows;
  for (NodeId v : nodes) {
    auto r = view.row(v);
    if (!r) throw Error(Errc::kUnknownNode, "node " + std::to_string(v) + " is not in the graph view");
    rows.push_back(*r);
  }
  auto all = predict(model, view);
  std::vector<ClassScore> out;
  for (std::size_t r : rows) out.push_back(all[r]);
  return out;
}

// ------------------------------------------------------------- training

LabeledSplit make_split(const HeteroGraph& g, const RelationalView& view, const RgcnConfig& config) {
  config.validate();
  LabeledSplit s;
  s.target.assign(view.size(), -1);
  std::array<std::vector<std::size_t>, 3> by_class;
  for (const auto& [id, label] : g.labels()) {
    if (label.provenance == Provenance::kModel && !config.train_on_model_labels) continue;
    const int cls = static_cast<int>(label.cls);
    if (cls >= config.classes) continue;
    auto row = view.row(id);
    if (!row) continue;
    s.target[*row] = cls;
    by_class[cls].push_back(*row);
  }
  std::mt19937_64 rng(replicate_seed(config.seed, kSplitStream));
  for (int c = 0; c < config.classes; ++c) {
    auto& rows = by_class[c];
    // Fisher-Yates with the portable unit draw, so the split is the same on
    // every standard library.
    for (std::size_t i = rows.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(unit(rng) * static_cast<double>(i));
      std::swap(rows[i - 1], rows[std::min(j, i - 1)]);
    }
    const double n = static_cast<double>(rows.size());
    auto n_train = static_cast<std::size_t>(std::llround(config.split[0] * n));
    auto n_val = static_cast<std::size_t>(std::llround(config.split[1] * n));
    if (!rows.empty()) n_train = std::max<std::size_t>(n_train, 1);
    n_train = std::min(n_train, rows.size());
    n_val = std::min(n_val, rows.size() - n_train);
    if (n_train == 0)
      throw Error(Errc::kSplit, "class " + std::string(to_string(static_cast<PolClass>(c))) +
                                    " has no labelled training nodes");
    s.train.insert(s.train.end(), rows.begin(), rows.begin() + n_train);
    s.val.insert(s.val.end(), rows.begin() + n_train, rows.begin() + n_train + n_val);
    s.test.insert(s.test.end(), rows.begin() + n_train + n_val, rows.end());
  }
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.val.begin(), s.val.end());
  std::sort(s.test.begin(), s.test.end());
  return s;
}

double loss_and_gradient(const RgcnModel& model, const RelationalView& view,
                         std::span<const std::size_t> rows, std::span<const int> target,
                         std::optional<std::uint64_t> dropout_seed, std::vector<Mat>* gradient) {
  check_view(model, view);
  if (rows.empty()) throw Error(Errc::kParameter, "loss over an empty row set");
  const RgcnConfig& c = model.config;
  ForwardCache cache;
  const Mat logits = run_forward(model, view, dropout_seed, gradient ? &cache : nullptr);

  const double inv_n = 1.0 / static_cast<double>(rows.size());
  Mat dz = Mat::Zero(logits.rows(), logits.cols());
  double loss = 0;
  std::array<double, 3> p{};
  for (std::size_t i : rows) {
    const auto row = static_cast<Eigen::Index>(i);
    softmax_row(logits, row, p.data());
    loss -= std::log(p[target[i]]) * inv_n;
    for (Eigen::Index k = 0; k < logits.cols(); ++k) dz(row, k) = p[k] * inv_n;
    dz(row, target[i]) -= inv_n;
  }
  double sq = 0;
  for (const Mat* w : model.parameters()) sq += w->squaredNorm();
  loss += 0.5 * c.l2 * sq;
  if (!gradient) return loss;

  const auto params = model.parameters();
  gradient->assign(params.size(), Mat());
  // parameter index of W_0 at layer l is 1 + 4l, W_r follows it
  for (int l = c.layers - 1; l >= 0; --l) {
    const std::size_t base = 1 + 4 * static_cast<std::size_t>(l);
    (*gradient)[base] = cache.input[l].transpose() * dz;
    Mat dh = dz * model.w_self[l].transpose();
    for (int r = 0; r < RelationalView::kRelations; ++r) {
      (*gradient)[base + 1 + r] = cache.agg[l][r].transpose() * dz;
      dh.noalias() += view.adj[r].transpose() * (dz * model.w_rel[l][r].transpose());
    }
    if (l == 0) {
      (*gradient)[0] = std::move(dh);
    } else {
      const Mat& z = cache.pre[l - 1];
      const Mat& mask = cache.mask[l - 1];
      dz = dh.cwiseProduct(mask).cwiseProduct(
          z.unaryExpr([&](double x) { return x > 0 ? 1.0 : c.leaky_slope; }));
    }
  }
  for (std::size_t i = 0; i < params.size(); ++i) (*gradient)[i] += c.l2 * *params[i];
  return loss;
}

double clip_gradients(std::vector<Mat>& gradient, double clip) {
  double sq = 0;
  for (const Mat& g : gradient) sq += g.squaredNorm();
  const double norm = std::sqrt(sq);
  if (norm > clip && norm > 0) {
    const double scale = clip / norm;
    for (Mat& g : gradient) g *= scale;
  }
  return norm;
}

namespace {

RgcnModel train_with_split(const RgcnModel& init, const RelationalView& view, const LabeledSplit& split) {
  const RgcnConfig& c = init.config;
  RgcnModel model = init;
  model.history.clear();

  std::vector<Mat> grad;
  std::vector<Mat> adam_m, adam_v;
  if (c.optimizer == Optimizer::kAdam)
    for (const Mat* p : model.parameters()) {
      adam_m.push_back(Mat::Zero(p->rows(), p->cols()));
      adam_v.push_back(Mat::Zero(p->rows(), p->cols()));
    }
  constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;

  auto snapshot_metrics = [&](RgcnModel& m, int epoch) {
    const Mat logits = run_forward(m, view, std::nullopt, nullptr);
    EpochMetrics e;
    e.epoch = epoch;
    const auto tr = evaluate(logits, split.train, split.target);
    const auto va = evaluate(logits, split.val, split.target);
    e.train_loss = tr.loss;
    e.train_accuracy = tr.accuracy;
    e.val_loss = va.loss;
    e.val_accuracy = va.accuracy;
    return std::tuple{e, tr, va, evaluate(logits, split.test, split.target)};
  };

  // Epoch 0 is the initial model, so an early divergence still has a
  // well-defined best snapshot.
  auto [e0, tr0, va0, te0] = snapshot_metrics(model, 0);
  model.history.push_back(e0);
  RgcnModel best = model;
  best.best_epoch = 0;
  best.train = tr0;
  best.val = va0;
  best.test = te0;

  for (int epoch = 1; epoch <= c.epochs; ++epoch) {
    const double loss = loss_and_gradient(model, view, split.train, split.target,
                                          replicate_seed(c.seed, kDropoutBase + epoch), &grad);
    bool finite = std::isfinite(loss);
    for (const Mat& g : grad) finite = finite && g.allFinite();
    if (!finite) {
      auto last_good = std::make_shared<RgcnModel>(model);
      throw DivergenceError("non-finite loss at epoch " + std::to_string(epoch), std::move(last_good));
    }
    clip_gradients(grad, c.clip_norm);
    auto params = model.parameters();
    if (c.optimizer == Optimizer::kAdam) {
      const double b1t = 1 - std::pow(kBeta1, epoch), b2t = 1 - std::pow(kBeta2, epoch);
      for (std::size_t i = 0; i < params.size(); ++i) {
        adam_m[i] = kBeta1 * adam_m[i] + (1 - kBeta1) * grad[i];
        adam_v[i] = kBeta2 * adam_v[i] + (1 - kBeta2) * grad[i].cwiseAbs2();
        *params[i] -= (c.learning_rate * (adam_m[i] / b1t).array() /
                       ((adam_v[i] / b2t).array().sqrt() + kEps))
                          .matrix();
      }
    } else {
      for (std::size_t i = 0; i < params.size(); ++i) *params[i] -= c.learning_rate * grad[i];
    }

    auto [e, tr, va, te] = snapshot_metrics(model, epoch);
    if (!std::isfinite(e.train_loss)) {
      auto last_good = std::make_shared<RgcnModel>(best);
      throw DivergenceError("non-finite loss after epoch " + std::to_string(epoch), std::move(last_good));
    }
    model.history.push_back(e);
    if (better(va, best.val)) {
      best = model;
      best.best_epoch = epoch;
      best.train = tr;
      best.val = va;
      best.test = te;
    }
  }
  best.history = model.history;
  return best;
}

}  // namespace

RgcnModel train(const HeteroGraph& g, const RelationalView& view, const RgcnConfig& config) {
  const LabeledSplit split = make_split(g, view, config);
  return train_with_split(init_model(config, g, view), view, split);
}

// ---------------------------------------------------------------- search

SearchSpace SearchSpace::around(const RgcnConfig& c) {
  SearchSpace s;
  s.epochs = {double(c.epochs), double(c.epochs)};
  s.layers = {double(c.layers), double(c.layers)};
  s.hidden = {double(c.hidden), double(c.hidden)};
  s.learning_rate = {c.learning_rate, c.learning_rate};
  s.clip_norm = {c.clip_norm, c.clip_norm};
  s.l2 = {c.l2, c.l2};
  s.dropout = {c.dropout, c.dropout};
  return s;
}

void SearchSpace::validate() const {
  auto check = [](const Range& r, const char* name, double min, double max) {
    if (!(r.lo <= r.hi) || r.lo < min || r.hi > max || (r.log_scale && r.lo <= 0))
      throw Error(Errc::kParameter, std::string("empty or invalid search range for ") + name);
  };
  constexpr double inf = std::numeric_limits<double>::infinity();
  check(epochs, "epochs", 1, inf);
  check(layers, "layers", 1, inf);
  check(hidden, "hidden", 1, inf);
  check(learning_rate, "learning_rate", std::numeric_limits<double>::min(), inf);
  check(clip_norm, "clip_norm", std::numeric_limits<double>::min(), inf);
  check(l2, "l2", 0, inf);
  check(dropout, "dropout", 0, 0.999);
  for (const Range* r : {&epochs, &layers, &hidden})
    if (std::floor(r->hi) < std::ceil(r->lo))
      throw Error(Errc::kParameter, "integer search range contains no integer");
}

namespace {

bool in_range(double v, const Range& r) { return v >= r.lo && v <= r.hi; }

bool contains(const SearchSpace& s, const RgcnConfig& c) {
  return in_range(c.epochs, s.epochs) && in_range(c.layers, s.layers) && in_range(c.hidden, s.hidden) &&
         in_range(c.learning_rate, s.learning_rate) && in_range(c.clip_norm, s.clip_norm) &&
         in_range(c.l2, s.l2) && in_range(c.dropout, s.dropout);
}

double sample_real(std::mt19937_64& rng, const Range& r) {
  if (r.lo == r.hi) return r.lo;
  if (r.log_scale) return std::exp(uniform(rng, std::log(r.lo), std::log(r.hi)));
  return uniform(rng, r.lo, r.hi);
}

int sample_int(std::mt19937_64& rng, const Range& r) {
  const auto lo = static_cast<long long>(std::ceil(r.lo));
  const auto hi = static_cast<long long>(std::floor(r.hi));
  const auto span = static_cast<double>(hi - lo + 1);
  return static_cast<int>(lo + std::min<long long>(static_cast<long long>(unit(rng) * span), hi - lo));
}

}  // namespace

SearchResult hyperparameter_search(const HeteroGraph& g, const RelationalView& view,
                                   const RgcnConfig& base, const SearchSpace& space, int budget,
                                   std::uint64_t seed) {
  if (budget < 1) throw Error(Errc::kParameter, "search budget must be >= 1");
  space.validate();
  base.validate();
  const LabeledSplit split = make_split(g, view, base);
  std::mt19937_64 rng(replicate_seed(seed, kSearchStream));

  SearchResult result;
  for (int t = 0; t < budget; ++t) {
    RgcnConfig c = base;
    // The base config is the first trial whenever the space admits it.
    if (t > 0 || !contains(space, base)) {
      c.epochs = sample_int(rng, space.epochs);
      c.layers = sample_int(rng, space.layers);
      c.hidden = sample_int(rng, space.hidden);
      c.learning_rate = sample_real(rng, space.learning_rate);
      c.clip_norm = sample_real(rng, space.clip_norm);
      c.l2 = sample_real(rng, space.l2);
      c.dropout = sample_real(rng, space.dropout);
    }
    Trial trial{t, c, 0, 0, 0};
    try {
      RgcnModel m = train_with_split(init_model(c, g, view), view, split);
      trial.val_accuracy = m.val.accuracy;
      trial.val_loss = m.val.loss;
      trial.test_accuracy = m.test.accuracy;
    } catch (const DivergenceError&) {
      trial.val_accuracy = 0;
      trial.val_loss = std::numeric_limits<double>::infinity();
    }
    result.trials.push_back(trial);
    const Trial& best = result.trials[result.best_trial];
    if (trial.val_accuracy > best.val_accuracy ||
        (trial.val_accuracy == best.val_accuracy && trial.val_loss < best.val_loss))
      result.best_trial = t;
  }
  result.best = result.trials[result.best_trial].config;
  return result;
}

// ------------------------------------------------- thresholds and labels

std::vector<CurvePoint> threshold_curve(std::span<const ClassScore> scores, std::span<const double> grid) {
  if (scores.empty()) throw Error(Errc::kParameter, "threshold curve over an empty score set");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!(grid[i] > 0 && grid[i] <= 1)) throw Error(Errc::kParameter, "thresholds must lie in (0,1]");
    if (i > 0 && grid[i] < grid[i - 1]) throw Error(Errc::kParameter, "threshold grid must be sorted");
  }
  std::vector<double> maxp;
  for (const auto& s : scores) maxp.push_back(s.max_probability);
  std::sort(maxp.begin(), maxp.end());
  std::vector<CurvePoint> out;
  for (double t : grid) {
    const auto below = std::lower_bound(maxp.begin(), maxp.end(), t) - maxp.begin();
    out.push_back({t, static_cast<double>(maxp.size() - static_cast<std::size_t>(below)) /
                          static_cast<double>(maxp.size())});
  }
  return out;
}

std::vector<double> default_threshold_grid() {
  std::vector<double> grid;
  for (int i = 50; i <= 100; ++i) grid.push_back(i / 100.0);
  return grid;
}

std::vector<PoliticalLabel> accept_labels(const HeteroGraph& g, std::span<const ClassScore> scores,
                                          double threshold, std::span<const PolClass> classes,
                                          int iteration) {
  if (!(threshold > 0 && threshold <= 1)) throw Error(Errc::kParameter, "threshold must lie in (0,1]");
  std::vector<PoliticalLabel> out;
  for (const auto& s : scores) {
    if (s.node >= g.node_count() || g.node(s.node).kind != NodeKind::kProduct) continue;
    if (s.max_probability < threshold) continue;
    if (std::find(classes.begin(), classes.end(), s.argmax) == classes.end()) continue;
    if (has_priority_label(g, s.node)) continue;
    out.push_back({s.node, s.argmax, s.max_probability, Provenance::kModel, iteration});
  }
  return out;
}

namespace {
constexpr double kClipLo = 1e-4, kClipHi = 1 - 1e-4, kLogitBound = 10.0;
}

double lifestyle_score(double p_conservative) {
  const double p = std::clamp(p_conservative, kClipLo, kClipHi);
  return (std::log(p / (1 - p)) + kLogitBound) / (2 * kLogitBound);
}

double lifestyle_probability(double score) {
  const double logit = score * 2 * kLogitBound - kLogitBound;
  return 1.0 / (1.0 + std::exp(-logit));
}

double conservative_share(const ClassScore& s) {
  const double c = s.probability[0], l = s.probability[1];
  return c + l > 0 ? c / (c + l) : 0.5;
}

// ------------------------------------------------------------------ HITL

HitlResult hitl_iterate(HeteroGraph& g, const RgcnConfig& base, std::span<const Verdict> verdicts,
                        int iteration, double threshold) {
  base.validate();
  IterationReport rep;
  rep.iteration = iteration;

  for (const Verdict& v : verdicts) {
    VerdictOutcome o{v.asin, false, ""};
    auto id = g.find(NodeKind::kProduct, v.asin);
    if (!id) {
      o.reason = "unknown_node";
    } else if (const PoliticalLabel* cur = g.labels().find(*id); cur && cur->provenance == Provenance::kSeed) {
      if (cur->cls == v.cls) {
        o.accepted = true;
        o.reason = "matches_seed";
      } else {
        o.reason = "seed_precedence";
      }
    } else {
      g.labels().upsert({*id, v.cls, 1.0, Provenance::kHuman, iteration});
      o.accepted = true;
      o.reason = "merged";
    }
    rep.verdicts.push_back(std::move(o));
  }

  // Model labels from the previous iteration are replaced by this one's.
  std::vector<NodeId> stale;
  for (const auto& [id, l] : g.labels())
    if (l.provenance == Provenance::kModel) stale.push_back(id);
  for (NodeId id : stale) g.labels().erase(id);

  RgcnConfig cfg = base;
  cfg.seed = base.seed + static_cast<std::uint64_t>(iteration);
  for (const auto& [id, l] : g.labels()) {
    rep.label_counts[static_cast<std::size_t>(l.cls)]++;
    if (l.cls == PolClass::kNonpolitical) cfg.classes = 3;
  }
  rep.classes = cfg.classes;

  const RelationalView view = RelationalView::build(g, cfg.include_coreview);
  HitlResult result{train(g, view, cfg), {}, {}};
  rep.test_accuracy = result.model.test.accuracy;
  rep.test_loss = result.model.test.loss;

  for (const auto& s : predict(result.model, view))
    if (g.node(s.node).kind == NodeKind::kProduct) result.scores.push_back(s);

  std::vector<PolClass> classes;
  for (int k = 0; k < cfg.classes; ++k) classes.push_back(static_cast<PolClass>(k));
  for (const auto& l : accept_labels(g, result.scores, threshold, classes, iteration)) {
    g.labels().upsert(l);
    rep.model_label_counts[static_cast<std::size_t>(l.cls)]++;
  }

  std::size_t unlabeled = 0;
  for (const auto& s : result.scores) {
    if (has_priority_label(g, s.node)) continue;
    ++unlabeled;
    rep.predicted_share[static_cast<std::size_t>(s.argmax)] += 1;
  }
  if (unlabeled > 0)
    for (double& x : rep.predicted_share) x /= static_cast<double>(unlabeled);
  result.report = std::move(rep);
  return result;
}

std::string_view to_string(Stratum s) noexcept {
  switch (s) {
    case Stratum::kConservative: return "conservative";
    case Stratum::kLiberal: return "liberal";
    case Stratum::kAmbiguous: return "ambiguous";
  }
  return "?";
}

std::vector<Candidate> candidate_strata(const HeteroGraph& g, std::span<const ClassScore> scores,
                                        std::size_t n) {
  std::vector<const ClassScore*> pool;
  for (const auto& s : scores)
    if (s.node < g.node_count() && g.node(s.node).kind == NodeKind::kProduct && !has_priority_label(g, s.node))
      pool.push_back(&s);

  std::vector<Candidate> out;
  std::vector<bool> taken(pool.size(), false);
  auto pick = [&](Stratum stratum, auto key) {
    std::vector<std::size_t> order(pool.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      const double ka = key(*pool[a]), kb = key(*pool[b]);
      if (ka != kb) return ka > kb;
      return pool[a]->node < pool[b]->node;
    });
    std::size_t added = 0;
    for (std::size_t i : order) {
      if (added == n) break;
      if (taken[i]) continue;
      taken[i] = true;
      out.push_back({pool[i]->node, stratum, *pool[i]});
      ++added;
    }
  };
  pick(Stratum::kConservative, [](const ClassScore& s) { return s.probability[0]; });
  pick(Stratum::kLiberal, [](const ClassScore& s) { return s.probability[1]; });
  pick(Stratum::kAmbiguous, [](const ClassScore& s) {
    double h = 0;
    for (int k = 0; k < s.classes; ++k)
      if (s.probability[k] > 0) h -= s.probability[k] * std::log(s.probability[k]);
    return h;
  });
  return out;
}

// ------------------------------------------------------------------- I/O

namespace {

constexpr std::string_view kCheckpointMagic = "PNRGCN";
enum : std::uint32_t { kTagConfig = 1, kTagNodes = 2, kTagTensors = 3, kTagMetrics = 4 };

void put_matrix(binio::Writer& w, const Mat& m) {
  w.u64(static_cast<std::uint64_t>(m.rows()));
  w.u64(static_cast<std::uint64_t>(m.cols()));
  w.f64s(m.data(), static_cast<std::size_t>(m.size()));
}

Mat get_matrix(binio::Reader& r, Eigen::Index rows, Eigen::Index cols) {
  const auto nr = static_cast<Eigen::Index>(r.u64());
  const auto nc = static_cast<Eigen::Index>(r.u64());
  if (nr != rows || nc != cols) throw Error(Errc::kFormat, "checkpoint tensor shape does not match config");
  if (static_cast<std::uint64_t>(nr) * static_cast<std::uint64_t>(nc) > r.remaining() / 8)
    throw Error(Errc::kTruncated, "checkpoint tensor exceeds remaining bytes");
  Mat m(nr, nc);
  r.f64s(m.data(), static_cast<std::size_t>(m.size()));
  return m;
}

void put_split(binio::Writer& w, const SplitMetrics& s) {
  w.f64(s.loss);
  w.f64(s.accuracy);
  w.u64(s.size);
}

SplitMetrics get_split(binio::Reader& r) {
  SplitMetrics s;
  s.loss = r.f64();
  s.accuracy = r.f64();
  s.size = r.u64();
  return s;
}

}  // namespace

void save_checkpoint(const RgcnModel& m, const std::filesystem::path& path) {
  const RgcnConfig& c = m.config;
  binio::Writer cw;
  cw.i32(c.layers);
  cw.i32(c.hidden);
  cw.f64(c.dropout);
  cw.f64(c.learning_rate);
  cw.f64(c.clip_norm);
  cw.f64(c.l2);
  cw.i32(c.epochs);
  cw.f64(c.leaky_slope);
  cw.i32(c.classes);
  for (double f : c.split) cw.f64(f);
  cw.u64(c.seed);
  cw.u8(static_cast<std::uint8_t>(c.optimizer));
  cw.u8(c.include_coreview);
  cw.u8(c.train_on_model_labels);

  binio::Writer nw;
  nw.u64(m.node_keys.size());
  for (const auto& k : m.node_keys) nw.str(k);

  binio::Writer tw;
  for (const Mat* p : m.parameters()) put_matrix(tw, *p);

  binio::Writer mw;
  mw.i32(m.best_epoch);
  put_split(mw, m.train);
  put_split(mw, m.val);
  put_split(mw, m.test);
  mw.u64(m.history.size());
  for (const auto& e : m.history) {
    mw.i32(e.epoch);
    mw.f64(e.train_loss);
    mw.f64(e.train_accuracy);
    mw.f64(e.val_loss);
    mw.f64(e.val_accuracy);
  }

  binio::write_container(path, kCheckpointMagic, kCheckpointVersion,
                         {{kTagConfig, cw.take()}, {kTagNodes, nw.take()},
                          {kTagTensors, tw.take()}, {kTagMetrics, mw.take()}});
}

RgcnModel load_checkpoint(const std::filesystem::path& path) {
  const auto sections = binio::read_container(path, kCheckpointMagic, kCheckpointVersion);
  auto find = [&](std::uint32_t tag) -> const std::string& {
    for (const auto& s : sections)
      if (s.tag == tag) return s.payload;
    throw Error(Errc::kFormat, "checkpoint is missing section " + std::to_string(tag));
  };

  RgcnModel m;
  RgcnConfig& c = m.config;
  {
    binio::Reader r(find(kTagConfig));
    c.layers = r.i32();
    c.hidden = r.i32();
    c.dropout = r.f64();
    c.learning_rate = r.f64();
    c.clip_norm = r.f64();
    c.l2 = r.f64();
    c.epochs = r.i32();
    c.leaky_slope = r.f64();
    c.classes = r.i32();
    for (double& f : c.split) f = r.f64();
    c.seed = r.u64();
    const std::uint8_t opt = r.u8();
    if (opt > 1) throw Error(Errc::kFormat, "unknown optimizer in checkpoint");
    c.optimizer = static_cast<Optimizer>(opt);
    c.include_coreview = r.u8() != 0;
    c.train_on_model_labels = r.u8() != 0;
    try {
      c.validate();
    } catch (const Error& e) {
      throw Error(Errc::kFormat, std::string("checkpoint config: ") + e.what());
    }
  }
  {
    binio::Reader r(find(kTagNodes));
    const auto n = r.count(8);
    m.node_keys.reserve(n);
    for (std::uint64_t i = 0; i < n; ++i) m.node_keys.push_back(r.str());
  }
  {
    binio::Reader r(find(kTagTensors));
    const auto h = static_cast<Eigen::Index>(c.hidden);
    m.embedding = get_matrix(r, static_cast<Eigen::Index>(m.node_keys.size()), h);
    for (int l = 0; l < c.layers; ++l) {
      const Eigen::Index out = out_dim(c, l);
      m.w_self.push_back(get_matrix(r, h, out));
      std::array<Mat, RelationalView::kRelations> rel;
      for (Mat& w : rel) w = get_matrix(r, h, out);
      m.w_rel.push_back(std::move(rel));
    }
  }
  {
    binio::Reader r(find(kTagMetrics));
    m.best_epoch = r.i32();
    m.train = get_split(r);
    m.val = get_split(r);
    m.test = get_split(r);
    const auto n = r.count(36);
    for (std::uint64_t i = 0; i < n; ++i) {
      EpochMetrics e;
      e.epoch = r.i32();
      e.train_loss = r.f64();
      e.train_accuracy = r.f64();
      e.val_loss = r.f64();
      e.val_accuracy = r.f64();
      m.history.push_back(e);
    }
  }
  return m;
}

void write_labels_csv(std::ostream& out, const HeteroGraph& g) {
  csv::write_record(out, {"asin", "class", "probability", "provenance", "iteration"});
  std::vector<const PoliticalLabel*> rows;
  for (const auto& [id, l] : g.labels()) rows.push_back(&l);
  std::sort(rows.begin(), rows.end(), [&](auto* a, auto* b) {
    return g.node(a->product).key < g.node(b->product).key;
  });
  for (const PoliticalLabel* l : rows)
    csv::write_record(out, {g.node(l->product).key, std::string(to_string(l->cls)),
                            csv::format_double(l->probability), std::string(to_string(l->provenance)),
                            std::to_string(l->iteration)});
}

std::pair<std::size_t, std::size_t> read_labels_csv(std::istream& in, HeteroGraph& g) {
  auto header = csv::read_record(in);
  const std::vector<std::string> expected{"asin", "class", "probability", "provenance", "iteration"};
  if (!header || *header != expected) throw Error(Errc::kFormat, "label CSV header must be asin,class,probability,provenance,iteration");
  std::size_t applied = 0, skipped = 0;
  while (auto rec = csv::read_record(in)) {
    if (rec->size() == 1 && (*rec)[0].empty()) continue;
    if (rec->size() != 5) {
      ++skipped;
      continue;
    }
    auto id = g.find(NodeKind::kProduct, (*rec)[0]);
    auto cls = parse_pol_class((*rec)[1]);
    auto prov = parse_provenance((*rec)[3]);
    if (!id || !cls || !prov) {
      ++skipped;
      continue;
    }
    double p = 0;
    int it = 0;
    const std::string& ps = (*rec)[2];
    const std::string& is = (*rec)[4];
    if (std::from_chars(ps.data(), ps.data() + ps.size(), p).ec != std::errc{} ||
        std::from_chars(is.data(), is.data() + is.size(), it).ec != std::errc{}) {
      ++skipped;
      continue;
    }
    try {
      if (g.labels().upsert({*id, *cls, p, *prov, it}) == LabelSet::Upsert::kRejected)
        ++skipped;
      else
        ++applied;
    } catch (const Error&) {
      ++skipped;
    }
  }
  return {applied, skipped};
}

void write_curve_csv(std::ostream& out, std::span<const CurvePoint> curve) {
  csv::write_record(out, {"threshold", "accepted"});
  for (const auto& p : curve)
    csv::write_record(out, {csv::format_double(p.threshold), csv::format_double(p.accepted)});
}

}  // namespace polnet
