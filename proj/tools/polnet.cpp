#include <cstdio>
#include <cstring>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "polnet/csv.hpp"
#include "polnet/hetgraph.hpp"
#include "polnet/ingest.hpp"
#include "polnet/polmetrics.hpp"
#include "polnet/rgcn.hpp"
#include "polnet/sampler.hpp"
#include "polnet/statlab.hpp"
#include "polnet/workbench.hpp"

using namespace polnet;
namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

void require_file(const fs::path& p, const std::string& what) {
  if (p.empty()) throw Error(Errc::kValidation, what + " is required");
  if (!fs::exists(p)) throw Error(Errc::kValidation, what + ": no such file " + p.string());
}

void write_file(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out || !(out << content) || !out.flush()) throw Error(Errc::kIo, "cannot write " + path.string());
}

template <typename F>
void write_with(const fs::path& path, F&& f) {
  std::ostringstream ss;
  f(ss);
  write_file(path, ss.str());
}

void save_graph(const HeteroGraph& g, const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  save_snapshot(g, path);
}

HeteroGraph load_graph(const fs::path& path) {
  require_file(path, "--in");
  return load_snapshot(path);
}

std::string fmt(double v, int digits = 4) {
  std::ostringstream ss;
  ss << std::fixed << std::setprecision(digits) << v;
  return ss.str();
}

bool priority_label(const HeteroGraph& g, NodeId v) {
  const PoliticalLabel* l = g.labels().find(v);
  return l && l->provenance != Provenance::kModel;
}

std::vector<ClassScore> product_scores(const HeteroGraph& g, const RgcnModel& model) {
  const RelationalView view = RelationalView::build(g, model.config.include_coreview);
  std::vector<ClassScore> out;
  for (const auto& s : predict(model, view))
    if (g.node(s.node).kind == NodeKind::kProduct) out.push_back(s);
  return out;
}

// matches.csv: asin,class,score,needs_review,seed_title
void write_matches(std::ostream& out, const SeedMatchResult& r) {
  csv::write_record(out, {"asin", "class", "score", "needs_review", "seed_title"});
  for (const auto& m : r.matches)
    csv::write_record(out, {m.asin, std::string(to_string(m.cls)), std::to_string(m.score),
                            m.needs_review ? "1" : "0", m.seed_title});
}

std::vector<SeedMatch> read_matches(const fs::path& path) {
  require_file(path, "--matches");
  std::ifstream in(path);
  auto header = csv::read_record(in);
  const std::vector<std::string> want{"asin", "class", "score", "needs_review", "seed_title"};
  if (!header || *header != want) throw Error(Errc::kFormat, path.string() + ": unexpected header");
  std::vector<SeedMatch> out;
  while (auto rec = csv::read_record(in)) {
    if (rec->size() != want.size()) throw Error(Errc::kFormat, path.string() + ": wrong field count");
    auto cls = parse_pol_class((*rec)[1]);
    if (!cls) throw Error(Errc::kFormat, path.string() + ": bad class '" + (*rec)[1] + "'");
    out.push_back({(*rec)[0], *cls, std::stoi((*rec)[2]), (*rec)[3] == "1", (*rec)[4]});
  }
  return out;
}

CategoryLevel parse_level(const std::string& s) {
  if (s == "main") return CategoryLevel::kMain;
  if (s == "big") return CategoryLevel::kBig;
  throw Error(Errc::kValidation, "--level must be main or big");
}

void add_rgcn_flags(CLI::App* sub, PipelineConfig& cfg) {
  sub->add_option("--layers", cfg.rgcn.layers, "RGCN layers");
  sub->add_option("--hidden", cfg.rgcn.hidden, "Hidden width");
  sub->add_option("--dropout", cfg.rgcn.dropout, "Dropout rate on hidden activations");
  sub->add_option("--learning-rate", cfg.rgcn.learning_rate, "Learning rate");
  sub->add_option("--clip-norm", cfg.rgcn.clip_norm, "Global gradient norm clip");
  sub->add_option("--l2", cfg.rgcn.l2, "L2 penalty");
  sub->add_option("--epochs", cfg.rgcn.epochs, "Training epochs");
  sub->add_option_function<std::string>(
      "--optimizer",
      [&cfg](const std::string& v) {
        auto o = parse_optimizer(v);
        if (!o) throw CLI::ValidationError("--optimizer", "must be gd or adam");
        cfg.rgcn.optimizer = *o;
      },
      "gd or adam");
  sub->add_option("--include-coreview", cfg.rgcn.include_coreview, "CoReview edges join the product relation");
}

void add_metric_flags(CLI::App* sub, PipelineConfig& cfg) {
  sub->add_option("--kinds", cfg.kinds, "Edge kinds counted: interaction, copurchase or all");
  sub->add_option("--replicates", cfg.replicates, "Monte Carlo replicates");
  sub->add_option("--null-mode", cfg.null_mode, "monte_carlo or exact");
}

std::string report_text(const HeteroGraph& g, const std::optional<json>& sampling,
                        const std::vector<PoliticsReport>& reports) {
  std::ostringstream out;
  if (sampling) {
    const json& s = *sampling;
    out << "Sampling\n";
    out << "  products " << s.at("products") << ", reviewers " << s.at("authors") << ", brands "
        << s.at("brands") << ", categories " << s.at("categories") << ", edges " << s.at("edges") << "\n";
    out << "  wave  frontier  step1_products  step1_authors  step2_authors  step2_products  new_products  new_authors\n";
    for (const auto& w : s.at("waves")) {
      out << "  " << std::setw(4) << w.at("wave").get<int>();
      for (const char* k : {"frontier", "step1_products", "step1_authors", "step2_authors", "step2_products",
                            "new_products", "new_authors"})
        out << "  " << std::setw(static_cast<int>(std::strlen(k))) << w.at(k).get<std::size_t>();
      out << "\n";
    }
    if (!s.at("missing_seeds").empty()) out << "  missing seeds " << s.at("missing_seeds").size() << "\n";
    out << "\n";
  }
  out << "Graph\n";
  for (NodeKind k : {NodeKind::kProduct, NodeKind::kAuthor, NodeKind::kBrand, NodeKind::kCategory})
    out << "  " << std::left << std::setw(10) << to_string(k) << std::right << " " << g.node_count(k) << "\n";
  for (EdgeKind k : kAllEdgeKinds)
    if (g.edge_count(k)) out << "  " << std::left << std::setw(22) << to_string(k) << std::right << " " << g.edge_count(k) << "\n";
  std::map<std::pair<std::string, std::string>, std::size_t> labels;
  for (const auto& [id, l] : g.labels()) labels[{std::string(to_string(l.cls)), std::string(to_string(l.provenance))}]++;
  for (const auto& [key, n] : labels) out << "  label " << key.first << " (" << key.second << ") " << n << "\n";
  out << "\n";

  out << "Metrics\n";
  out << "  " << std::left << std::setw(28) << "segment" << std::right << std::setw(9) << "products" << std::setw(11)
      << "relevance" << std::setw(11) << "alignment" << std::setw(14) << "polarization" << "\n";
  for (const auto& r : reports) {
    out << "  " << std::left << std::setw(28) << r.segment << std::right << std::setw(9) << r.products
        << std::setw(11) << fmt(r.relevance) << std::setw(11) << fmt(r.alignment) << std::setw(14)
        << (r.polarization.z ? fmt(*r.polarization.z, 2) : std::string("NA")) << "\n";
  }
  return out.str();
}

}  // namespace

int main(int argc, char** argv) {
  PipelineConfig cfg;
  std::string config_path;
  if (const char* env = std::getenv("POLNET_CONFIG")) config_path = env;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--config" && i + 1 < argc) config_path = argv[i + 1];
    else if (a.rfind("--config=", 0) == 0) config_path = a.substr(9);
  }
  try {
    if (!config_path.empty()) cfg.load_file(config_path);
    cfg.apply_env();
  } catch (const Error& e) {
    std::cerr << "error[" << errc_name(e.code()) << "]: " << e.what() << "\n";
    return exit_code(e.code());
  }

  CLI::App app{"polnet: political market network pipeline"};
  app.require_subcommand(1);
  app.fallthrough();
  app.add_option("--config", config_path,
                 "key = value config file ('#' comments); POLNET_<KEY> environment variables override it, "
                 "command-line flags override both");
  app.add_option("--seed", cfg.seed, "Master seed");

  std::map<CLI::App*, std::function<void()>> run;

  // ---------------------------------------------------------------- ingest
  {
    auto* sub = app.add_subcommand("ingest", "Parse the corpus and match seed titles to ASINs");
    static fs::path out, report;
    static int threshold = kDefaultMatchThreshold;
    sub->add_option("--reviews", cfg.reviews, "Reviews JSON lines");
    sub->add_option("--meta", cfg.meta, "Metadata JSON lines");
    sub->add_option("--seeds", cfg.seeds, "Seed titles CSV (title,class)");
    sub->add_option("--match-threshold", threshold, "Partial-ratio threshold")->check(CLI::Range(0, 100));
    sub->add_option("--out", out, "Matches CSV")->required();
    sub->add_option("--report", report, "Ingest report JSON");
    run[sub] = [&] {
      require_file(cfg.reviews, "--reviews");
      require_file(cfg.meta, "--meta");
      require_file(cfg.seeds, "--seeds");
      const Corpus corpus = parse_corpus(cfg.reviews, cfg.meta);
      const auto seeds = load_seeds(cfg.seeds);
      const SeedMatchResult m = match_seeds(seeds, corpus.products, threshold);
      write_with(out, [&](std::ostream& o) { write_matches(o, m); });
      if (!report.empty()) {
        const ParseReport& r = corpus.report;
        json j;
        j["review_lines"] = r.review_lines;
        j["reviews_parsed"] = r.reviews_parsed;
        j["reviews_skipped"] = r.reviews_skipped;
        j["reviews_deduped"] = r.reviews_deduped;
        j["meta_lines"] = r.meta_lines;
        j["meta_parsed"] = r.meta_parsed;
        j["meta_skipped"] = r.meta_skipped;
        j["meta_deduped"] = r.meta_deduped;
        j["self_references_removed"] = r.self_references_removed;
        j["skip_reasons"] = r.skip_reasons;
        j["seeds"] = seeds.size();
        j["matched"] = m.matches.size();
        j["unmatched"] = m.unmatched.size();
        j["duplicates"] = m.duplicates;
        j["class_conflicts"] = m.class_conflicts;
        write_file(report, j.dump(2) + "\n");
      }
      std::cout << "matched " << m.matches.size() << " of " << seeds.size() << " seeds\n";
    };
  }

  // ---------------------------------------------------------------- sample
  {
    auto* sub = app.add_subcommand("sample", "Wave sampling from matched seeds into a graph snapshot");
    static fs::path matches, categories, out, report;
    sub->add_option("--reviews", cfg.reviews, "Reviews JSON lines");
    sub->add_option("--meta", cfg.meta, "Metadata JSON lines");
    sub->add_option("--matches", matches, "Matches CSV from ingest")->required();
    sub->add_option("--plan", cfg.plan, "Plan JSON {waves, step2, seeds}");
    sub->add_option("--waves", cfg.waves, "Waves when no plan file is given");
    sub->add_option("--step2", cfg.step2, "reviewed_products or seed_products");
    sub->add_option("--moral", cfg.moral, "Moral scores CSV");
    sub->add_option("--categories", categories, "Category regrouping JSON");
    sub->add_option("--out", out, "Graph snapshot")->required();
    sub->add_option("--report", report, "Sampling report JSON");
    run[sub] = [&] {
      require_file(cfg.reviews, "--reviews");
      require_file(cfg.meta, "--meta");
      cfg.validate();
      const auto seeds = read_matches(matches);
      SampleWavePlan plan;
      if (!cfg.plan.empty()) {
        plan = load_plan(cfg.plan);
      } else {
        plan.waves = cfg.waves;
        plan.step2 = *parse_step2_mode(cfg.step2);
      }
      if (plan.seed_asins.empty())
        for (const auto& m : seeds) plan.seed_asins.push_back(m.asin);
      const Corpus corpus = parse_corpus(cfg.reviews, cfg.meta);
      const CorpusIndex index(corpus);
      const CategoryMap cats = categories.empty() ? CategoryMap::builtin() : CategoryMap::load(categories);
      SampleResult res = run_plan(index, plan, cats);
      HeteroGraph g = res.graph.frozen() ? res.graph.mutable_copy() : std::move(res.graph);
      const std::size_t labelled = apply_seed_labels(g, seeds);
      std::size_t moral = 0;
      if (!cfg.moral.empty()) {
        std::set<ReviewKey> known;
        for (const auto& r : corpus.reviews) known.insert({r.reviewer_id, r.asin});
        moral = attach_moral_vectors(g, load_moral_scores(cfg.moral, &known));
      }
      g.freeze();
      save_graph(g, out);
      if (!report.empty()) {
        json j = json::parse(res.report.to_json());
        j["seed_labels"] = labelled;
        j["moral_vectors"] = moral;
        write_file(report, j.dump(2) + "\n");
      }
      std::cout << "sampled " << g.node_count(NodeKind::kProduct) << " products, "
                << g.node_count(NodeKind::kAuthor) << " reviewers, " << labelled << " seed labels\n";
    };
  }

  // ----------------------------------------------------------------- kcore
  {
    auto* sub = app.add_subcommand("kcore", "k-core of a snapshot");
    static fs::path in, out;
    static std::size_t k = 0;
    sub->add_option("--in", in, "Graph snapshot")->required();
    sub->add_option("--k", k, "Core order (default: first configured kcore value)");
    sub->add_option("--out", out, "Output snapshot")->required();
    run[sub] = [&] {
      if (k == 0) {
        if (cfg.kcore.empty()) throw Error(Errc::kValidation, "--k is required");
        k = cfg.kcore.front();
      }
      const HeteroGraph g = load_graph(in);
      HeteroGraph core = k_core(g, k);
      if (!core.frozen()) core.freeze();
      save_graph(core, out);
      std::cout << k << "-core: " << core.node_count() << " of " << g.node_count() << " nodes\n";
    };
  }

  // --------------------------------------------------------------- augment
  {
    auto* sub = app.add_subcommand("augment", "Add co-review edges");
    static fs::path in, out, report;
    static std::optional<std::size_t> cap;
    sub->add_option("--in", in, "Graph snapshot")->required();
    sub->add_option("--out", out, "Output snapshot")->required();
    sub->add_option("--max-reviewer-degree", cap, "Skip reviewers with more reviews than this");
    sub->add_option("--report", report, "Augment report JSON");
    run[sub] = [&] {
      const HeteroGraph g = load_graph(in);
      AugmentResult res = augment_coreview(g, cap);
      if (!res.graph.frozen()) res.graph.freeze();
      save_graph(res.graph, out);
      const AugmentReport& r = res.report;
      if (!report.empty()) {
        json j;
        j["added"] = r.added;
        j["reviewers_scanned"] = r.reviewers_scanned;
        j["reviewers_skipped"] = r.reviewers_skipped;
        j["reviewers_warned"] = r.reviewers_warned;
        j["pairs_considered"] = r.pairs_considered;
        j["pairs_suppressed"] = r.pairs_suppressed;
        write_file(report, j.dump(2) + "\n");
      }
      std::cout << "added " << r.added << " co-review edges\n";
    };
  }

  // --------------------------------------------------------------- metrics
  {
    auto* sub = app.add_subcommand("metrics", "Relevance, alignment and polarization per category");
    static fs::path in, out;
    static std::string level = "main";
    static std::vector<std::string> keywords;
    sub->add_option("--in", in, "Labelled graph snapshot")->required();
    sub->add_option("--level", level, "main or big");
    sub->add_option("--keywords", keywords, "Extra keyword segment (title words)")->delimiter(',');
    add_metric_flags(sub, cfg);
    sub->add_option("--out", out, "Reports CSV")->required();
    run[sub] = [&] {
      cfg.validate();
      const MetricsConfig mc = cfg.metrics_config();
      const HeteroGraph g = load_graph(in);
      const CategoryLevel lv = parse_level(level);
      std::vector<PoliticsReport> reports = category_reports(g, lv, mc);
      if (!keywords.empty()) {
        const auto partition = category_segments(g, lv);
        const auto totals = compute_totals(g, partition, mc);
        reports.push_back(segment_report(g, keyword_segment(g, "keywords", keywords), totals, mc));
      }
      write_with(out, [&](std::ostream& o) { write_reports_csv(o, reports); });
      std::cout << reports.size() << " segments\n";
    };
  }

  // ----------------------------------------------------------------- train
  {
    auto* sub = app.add_subcommand("train", "Train the RGCN on seed and human labels");
    static fs::path in, out, history;
    sub->add_option("--in", in, "Labelled graph snapshot")->required();
    add_rgcn_flags(sub, cfg);
    sub->add_option("--out", out, "Model checkpoint")->required();
    sub->add_option("--history", history, "Per-epoch metrics CSV");
    run[sub] = [&] {
      cfg.validate();
      const HeteroGraph g = load_graph(in);
      const RelationalView view = RelationalView::build(g, cfg.rgcn.include_coreview);
      const RgcnModel m = train(g, view, cfg.rgcn);
      if (out.has_parent_path()) fs::create_directories(out.parent_path());
      save_checkpoint(m, out);
      if (!history.empty()) {
        write_with(history, [&](std::ostream& o) {
          csv::write_record(o, {"epoch", "train_loss", "train_accuracy", "val_loss", "val_accuracy"});
          for (const auto& e : m.history)
            csv::write_record(o, {std::to_string(e.epoch), csv::format_double(e.train_loss),
                                  csv::format_double(e.train_accuracy), csv::format_double(e.val_loss),
                                  csv::format_double(e.val_accuracy)});
        });
      }
      std::cout << "best epoch " << m.best_epoch << ", validation accuracy " << fmt(m.val.accuracy)
                << ", test accuracy " << fmt(m.test.accuracy) << "\n";
    };
  }

  // ---------------------------------------------------------------- search
  {
    auto* sub = app.add_subcommand("search", "Random hyperparameter search");
    static fs::path in, out;
    static int budget = 20;
    sub->add_option("--in", in, "Labelled graph snapshot")->required();
    add_rgcn_flags(sub, cfg);
    sub->add_option("--budget", budget, "Trials")->check(CLI::PositiveNumber);
    sub->add_option("--out", out, "Search result JSON")->required();
    run[sub] = [&] {
      cfg.validate();
      const HeteroGraph g = load_graph(in);
      const RelationalView view = RelationalView::build(g, cfg.rgcn.include_coreview);
      const SearchResult r = hyperparameter_search(g, view, cfg.rgcn, SearchSpace{}, budget,
                                                   replicate_seed(cfg.seed, 3));
      auto config_json = [](const RgcnConfig& c) {
        json j;
        j["layers"] = c.layers;
        j["hidden"] = c.hidden;
        j["dropout"] = c.dropout;
        j["learning_rate"] = c.learning_rate;
        j["clip_norm"] = c.clip_norm;
        j["l2"] = c.l2;
        j["epochs"] = c.epochs;
        j["optimizer"] = to_string(c.optimizer);
        return j;
      };
      json j;
      j["best_trial"] = r.best_trial;
      j["best"] = config_json(r.best);
      j["trials"] = json::array();
      for (const auto& t : r.trials) {
        json e;
        e["index"] = t.index;
        e["config"] = config_json(t.config);
        e["val_accuracy"] = t.val_accuracy;
        e["val_loss"] = std::isfinite(t.val_loss) ? json(t.val_loss) : json(nullptr);
        e["test_accuracy"] = t.test_accuracy;
        j["trials"].push_back(std::move(e));
      }
      write_file(out, j.dump(2) + "\n");
      std::cout << "best trial " << r.best_trial << " of " << r.trials.size() << "\n";
    };
  }

  // -------------------------------------------------------------- classify
  {
    auto* sub = app.add_subcommand("classify", "Score products and accept confident model labels");
    static fs::path in, model, out, labels, curve;
    static int iteration = 1;
    sub->add_option("--in", in, "Graph snapshot")->required();
    sub->add_option("--model", model, "Model checkpoint")->required();
    sub->add_option("--threshold", cfg.threshold, "Acceptance threshold on the top-class probability");
    sub->add_option("--iteration", iteration, "Iteration recorded on the new labels");
    sub->add_option("--out", out, "Labelled graph snapshot")->required();
    sub->add_option("--labels", labels, "Labels CSV");
    sub->add_option("--curve", curve, "Threshold curve CSV");
    run[sub] = [&] {
      cfg.validate();
      require_file(model, "--model");
      const HeteroGraph g0 = load_graph(in);
      const RgcnModel m = load_checkpoint(model);
      const auto scores = product_scores(g0, m);
      HeteroGraph g = g0.mutable_copy();
      std::vector<PolClass> classes;
      for (int k = 0; k < m.config.classes; ++k) classes.push_back(static_cast<PolClass>(k));
      const auto accepted = accept_labels(g, scores, cfg.threshold, classes, iteration);
      for (const auto& l : accepted) g.labels().upsert(l);
      g.freeze();
      save_graph(g, out);
      if (!labels.empty()) write_with(labels, [&](std::ostream& o) { write_labels_csv(o, g); });
      if (!curve.empty()) {
        std::vector<ClassScore> open;
        for (const auto& s : scores)
          if (!priority_label(g, s.node)) open.push_back(s);
        const auto grid = default_threshold_grid();
        write_with(curve, [&](std::ostream& o) { write_curve_csv(o, threshold_curve(open, grid)); });
      }
      std::cout << "accepted " << accepted.size() << " model labels\n";
    };
  }

  // ------------------------------------------------------------- lifestyle
  {
    auto* sub = app.add_subcommand("lifestyle", "Lifestyle scores of products without seed or human labels");
    static fs::path in, model, out;
    sub->add_option("--in", in, "Graph snapshot")->required();
    sub->add_option("--model", model, "Model checkpoint")->required();
    sub->add_option("--out", out, "Lifestyle CSV")->required();
    run[sub] = [&] {
      require_file(model, "--model");
      const HeteroGraph g = load_graph(in);
      const auto scores = product_scores(g, load_checkpoint(model));
      std::vector<std::pair<std::string, const ClassScore*>> rows;
      for (const auto& s : scores)
        if (!priority_label(g, s.node)) rows.emplace_back(g.node(s.node).key, &s);
      std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
      write_with(out, [&](std::ostream& o) {
        csv::write_record(o, {"asin", "title", "main_category", "p_conservative", "lifestyle"});
        for (const auto& [asin, s] : rows) {
          const double p = conservative_share(*s);
          const Node& n = g.node(s->node);
          csv::write_record(o, {asin, n.attrs.name, n.attrs.main_category, csv::format_double(p),
                                csv::format_double(lifestyle_score(p))});
        }
      });
      std::cout << rows.size() << " products scored\n";
    };
  }

  // -------------------------------------------------------------- features
  {
    auto* sub = app.add_subcommand("features", "Reviewer-product feature table for the regression");
    static fs::path in, model, out, report;
    static std::size_t min_reviews = 5;
    static std::vector<std::string> big;
    static bool raw = false;
    sub->add_option("--in", in, "Graph snapshot with moral vectors")->required();
    sub->add_option("--model", model, "Model checkpoint")->required();
    sub->add_option("--min-reviews", min_reviews, "Minimum rows per reviewer");
    sub->add_option("--big", big, "Keep only these big categories")->delimiter(',');
    add_metric_flags(sub, cfg);
    sub->add_flag("--raw", raw, "Skip the Yeo-Johnson and standardisation step");
    sub->add_option("--out", out, "Feature CSV")->required();
    sub->add_option("--report", report, "Row accounting JSON");
    run[sub] = [&] {
      cfg.validate();
      require_file(model, "--model");
      const HeteroGraph g = load_graph(in);
      const auto scores = product_scores(g, load_checkpoint(model));
      FeatureOptions fo;
      fo.min_reviews = min_reviews;
      fo.big_categories = big;
      fo.kinds = parse_kind_preset(cfg.kinds);
      FeatureBuild fb = build_features(g, scores, fo);
      const FeatureTable t = raw ? fb.table : prepare_covariates(fb.table);
      write_with(out, [&](std::ostream& o) { write_feature_csv(o, t); });
      const FeatureReport& r = fb.report;
      if (!report.empty()) {
        json j;
        j["reviews_seen"] = r.reviews_seen;
        j["dropped_labeled_product"] = r.dropped_labeled_product;
        j["dropped_no_score"] = r.dropped_no_score;
        j["dropped_no_moral"] = r.dropped_no_moral;
        j["dropped_category"] = r.dropped_category;
        j["dropped_min_reviews"] = r.dropped_min_reviews;
        j["rows"] = r.rows;
        write_file(report, j.dump(2) + "\n");
      }
      std::cout << r.rows << " rows\n";
    };
  }

  // ------------------------------------------------------------------- fit
  {
    auto* sub = app.add_subcommand("fit", "Beta regression of lifestyle scores");
    static fs::path features, out, text;
    static std::string formula;
    static unsigned threads = 0;
    sub->add_option("--features", features, "Feature CSV")->required();
    sub->add_option("--formula", formula, "R-style formula; default: all columns plus alignment:relevance");
    sub->add_option("--threads", threads, "Worker threads (results do not depend on it)");
    sub->add_option("--out", out, "Coefficient CSV")->required();
    sub->add_option("--text", text, "Coefficient table as text");
    run[sub] = [&] {
      require_file(features, "--features");
      std::ifstream in(features);
      const FeatureTable t = read_feature_csv(in);
      const Formula f = formula.empty() ? default_formula(t) : Formula::parse(formula);
      BetaFitOptions bo;
      bo.threads = threads;
      const BetaFit fit = beta_fit(t, f, bo);
      const CoefficientReport rep = coefficient_report(fit);
      write_with(out, [&](std::ostream& o) { write_coefficients_csv(o, rep); });
      if (!text.empty()) write_file(text, to_text(rep));
      std::cout << "converged in " << fit.iterations << " iterations, n = " << fit.n << "\n";
    };
  }

  // ----------------------------------------------------------------- serve
  {
    auto* sub = app.add_subcommand("serve", "HTTP labeling service");
    static fs::path in, state_dir;
    sub->add_option("--in", in, "Labelled graph snapshot")->required();
    sub->add_option("--state-dir", state_dir, "Session state (verdict log, labels, checkpoint)")->required();
    sub->add_option("--host", cfg.host, "Bind address");
    sub->add_option("--port", cfg.port, "Port");
    sub->add_option("--token", cfg.token, "Require 'Authorization: Bearer <token>'");
    sub->add_option("--agreement", cfg.agreement, "Distinct operators that must agree");
    sub->add_option("--batch", cfg.batch, "Candidates per stratum");
    sub->add_option("--threshold", cfg.threshold, "Acceptance threshold");
    add_rgcn_flags(sub, cfg);
    add_metric_flags(sub, cfg);
    run[sub] = [&] {
      cfg.validate();
      ServiceOptions so;
      so.state_dir = state_dir;
      so.rgcn = cfg.rgcn;
      so.threshold = cfg.threshold;
      so.batch = cfg.batch;
      so.agreement = cfg.agreement;
      so.token = cfg.token;
      so.metrics = cfg.metrics_config();
      LabelService service(load_graph(in), so);
      HttpServer server(service);
      std::cout << "serving on " << cfg.host << ":" << cfg.port << std::endl;
      server.run(cfg.host, cfg.port);
    };
  }

  // ---------------------------------------------------------------- export
  {
    auto* sub = app.add_subcommand("export", "Edge list, node table and labels");
    static fs::path in, edges, nodes, labels;
    sub->add_option("--in", in, "Graph snapshot")->required();
    sub->add_option("--edges", edges, "Edge list TSV");
    sub->add_option("--nodes", nodes, "Node table CSV");
    sub->add_option("--labels", labels, "Labels CSV");
    run[sub] = [&] {
      if (edges.empty() && nodes.empty() && labels.empty())
        throw Error(Errc::kValidation, "nothing to export: give --edges, --nodes or --labels");
      const HeteroGraph g = load_graph(in);
      if (!edges.empty()) write_with(edges, [&](std::ostream& o) { export_edge_list(g, o); });
      if (!nodes.empty()) write_with(nodes, [&](std::ostream& o) { export_node_table(g, o); });
      if (!labels.empty()) write_with(labels, [&](std::ostream& o) { write_labels_csv(o, g); });
    };
  }

  // ---------------------------------------------------------------- report
  {
    auto* sub = app.add_subcommand("report", "Sampling counts and the category metrics table");
    static fs::path in, sampling, out;
    static std::string level = "big";
    sub->add_option("--in", in, "Labelled graph snapshot")->required();
    sub->add_option("--sampling", sampling, "Sampling report JSON from sample");
    sub->add_option("--level", level, "main or big");
    add_metric_flags(sub, cfg);
    sub->add_option("--out", out, "Report text (stdout when absent)");
    run[sub] = [&] {
      cfg.validate();
      const HeteroGraph g = load_graph(in);
      std::optional<json> s;
      if (!sampling.empty()) {
        require_file(sampling, "--sampling");
        std::ifstream f(sampling);
        s = json::parse(f, nullptr, false);
        if (s->is_discarded()) throw Error(Errc::kFormat, sampling.string() + ": not JSON");
      }
      const auto reports = category_reports(g, parse_level(level), cfg.metrics_config());
      const std::string text = report_text(g, s, reports);
      if (out.empty()) std::cout << text;
      else write_file(out, text);
    };
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  cfg.rgcn.seed = cfg.seed;
  try {
    for (auto& [sub, fn] : run)
      if (sub->parsed()) fn();
  } catch (const Error& e) {
    std::cerr << "error[" << errc_name(e.code()) << "]: " << e.what() << "\n";
    return exit_code(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error[internal]: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
