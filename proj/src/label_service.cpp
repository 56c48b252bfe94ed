// Eigen (via the polnet headers) must come before httplib, which pulls in
// <resolv.h> and its `_res` macro.
#include "polnet/workbench.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <array>
#include <charconv>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <sstream>

#include <httplib.h>
#include <json.hpp>

namespace polnet {

using json = nlohmann::ordered_json;

namespace {

ApiResponse reply(int status, const json& j) { return {status, j.dump()}; }

ApiResponse fail(int status, std::string_view error, std::string detail = {}) {
  json j;
  j["error"] = error;
  if (!detail.empty()) j["detail"] = detail;
  return reply(status, j);
}

bool priority_label(const HeteroGraph& g, NodeId v) {
  const PoliticalLabel* l = g.labels().find(v);
  return l && l->provenance != Provenance::kModel;
}

json class_counts(const std::array<std::size_t, 3>& c) {
  json j;
  for (int k = 0; k < 3; ++k) j[std::string(to_string(static_cast<PolClass>(k)))] = c[static_cast<std::size_t>(k)];
  return j;
}

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// Write to a sibling temp file, then rename over the target.
void atomic_write(const std::filesystem::path& path, const std::string& content) {
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::kIo, "cannot write " + tmp);
    out << content;
    if (!out.flush()) throw Error(Errc::kIo, "cannot write " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

// ---------------------------------------------------------------- service

LabelService::LabelService(HeteroGraph graph, ServiceOptions options)
    : graph_(std::move(graph)), options_(std::move(options)) {
  options_.rgcn.validate();
  if (options_.batch == 0) throw Error(Errc::kValidation, "batch must be positive");
  if (options_.agreement < 1) throw Error(Errc::kValidation, "agreement must be >= 1");
  if (!options_.state_dir.empty()) std::filesystem::create_directories(options_.state_dir);

  if (!restore()) {
    HitlResult first = hitl_iterate(graph_, options_.rgcn, {}, 0, options_.threshold);
    model_version_ = 1;
    install(std::move(first));
    persist_locked();
  }
  replay_wal();
}

LabelService::~LabelService() {
  std::lock_guard lock(worker_mu_);
  if (worker_.joinable()) worker_.join();
}

bool LabelService::restore() {
  if (options_.state_dir.empty()) return false;
  const auto state_path = options_.state_dir / "state.json";
  if (!std::filesystem::exists(state_path)) return false;

  const json st = json::parse(read_file(state_path), nullptr, false);
  if (st.is_discarded()) throw Error(Errc::kFormat, state_path.string() + ": not JSON");
  if (st.value("session_id", std::string()) != options_.session_id)
    throw Error(Errc::kValidation, "state directory belongs to session '" +
                                       st.value("session_id", std::string()) + "'");
  iteration_ = st.at("iteration").get<int>();
  model_version_ = st.at("model_version").get<int>();
  classes_ = st.at("classes").get<int>();
  for (const auto& y : st.at("yield"))
    yields_.push_back({y.at("iteration").get<int>(), y.at("candidates_shown").get<std::size_t>(),
                       y.at("verdicts_applied").get<std::size_t>(), y.at("model_labels").get<std::size_t>()});
  for (const auto& c : st.at("curves")) {
    std::vector<CurvePoint> pts;
    for (const auto& p : c.at("points")) pts.push_back({p.at("threshold").get<double>(), p.at("accepted").get<double>()});
    curves_.emplace_back(c.at("iteration").get<int>(), std::move(pts));
  }

  // The snapshot's labels are replaced by the session's; seeds come back from the file too.
  std::vector<NodeId> drop;
  for (const auto& [id, l] : graph_.labels()) drop.push_back(id);
  for (NodeId id : drop) graph_.labels().erase(id);
  std::ifstream labels(options_.state_dir / "labels.csv");
  if (!labels) throw Error(Errc::kIo, "state directory has no labels.csv");
  read_labels_csv(labels, graph_);

  std::ifstream audit(options_.state_dir / "audit.jsonl");
  std::string line;
  while (std::getline(audit, line)) {
    if (line.empty()) continue;
    const json a = json::parse(line);
    audit_.push_back({a.at("verdict_id"), a.at("node"), a.at("operator"), a.at("outcome"), a.at("time"),
                      *parse_pol_class(a.at("class").get<std::string>()), a.at("iteration").get<int>()});
    seen_verdicts_.insert(a.at("node").get<std::string>() + '\n' + a.at("verdict_id").get<std::string>());
  }

  model_ = load_checkpoint(options_.state_dir / "model.bin");
  const RelationalView view = RelationalView::build(graph_, model_.config.include_coreview);
  for (const auto& s : predict(model_, view))
    if (graph_.node(s.node).kind == NodeKind::kProduct) scores_.push_back(s);
  candidates_ = candidate_strata(graph_, scores_, options_.batch);
  return true;
}

void LabelService::replay_wal() {
  if (options_.state_dir.empty()) return;
  std::ifstream in(options_.state_dir / "verdicts.wal");
  std::string line;
  while (std::getline(in, line)) {
    const json w = json::parse(line, nullptr, false);
    // A torn final line is a verdict that was never acknowledged.
    if (w.is_discarded()) break;
    if (w.at("model_version").get<int>() != model_version_) continue;
    PendingVerdict v{w.at("verdict_id"), w.at("node"), w.at("operator"),
                     *parse_pol_class(w.at("class").get<std::string>())};
    const std::string key = v.asin + '\n' + v.verdict_id;
    if (!seen_verdicts_.insert(key).second) continue;
    pending_.push_back(std::move(v));
  }
}

void LabelService::append_wal(const PendingVerdict& v) {
  if (options_.state_dir.empty()) return;
  json w;
  w["session"] = options_.session_id;
  w["verdict_id"] = v.verdict_id;
  w["node"] = v.asin;
  w["class"] = to_string(v.cls);
  w["operator"] = v.op;
  w["model_version"] = model_version_;
  const std::string line = w.dump() + "\n";
  const auto path = (options_.state_dir / "verdicts.wal").string();
  const int fd = ::open(path.c_str(), O_WRONLY | O_CREAT | O_APPEND, 0644);
  if (fd < 0) throw Error(Errc::kIo, "cannot open " + path);
  const bool ok = ::write(fd, line.data(), line.size()) == static_cast<ssize_t>(line.size()) && ::fsync(fd) == 0;
  ::close(fd);
  if (!ok) throw Error(Errc::kIo, "cannot append to " + path);
}

void LabelService::install(HitlResult result) {
  model_ = std::move(result.model);
  scores_ = std::move(result.scores);
  classes_ = result.report.classes;
  candidates_ = candidate_strata(graph_, scores_, options_.batch);

  std::vector<ClassScore> open;
  for (const auto& s : scores_)
    if (!priority_label(graph_, s.node)) open.push_back(s);
  if (!open.empty()) curves_.emplace_back(iteration_, threshold_curve(open, default_threshold_grid()));
}

void LabelService::persist_locked() {
  if (options_.state_dir.empty()) return;
  const auto& dir = options_.state_dir;
  save_checkpoint(model_, dir / "model.bin.tmp");
  std::filesystem::rename(dir / "model.bin.tmp", dir / "model.bin");

  std::ostringstream labels;
  write_labels_csv(labels, graph_);
  atomic_write(dir / "labels.csv", labels.str());

  std::string audit;
  for (const auto& a : audit_) {
    json j;
    j["verdict_id"] = a.verdict_id;
    j["node"] = a.asin;
    j["class"] = to_string(a.cls);
    j["operator"] = a.op;
    j["outcome"] = a.outcome;
    j["iteration"] = a.iteration;
    j["time"] = a.time;
    audit += j.dump() + "\n";
  }
  atomic_write(dir / "audit.jsonl", audit);

  // state.json is the commit point: WAL entries older than its model version
  // are ignored on replay, so truncating the log afterwards is only tidying.
  json st;
  st["session_id"] = options_.session_id;
  st["iteration"] = iteration_;
  st["model_version"] = model_version_;
  st["classes"] = classes_;
  st["yield"] = json::array();
  for (const auto& y : yields_)
    st["yield"].push_back({{"iteration", y.iteration},
                           {"candidates_shown", y.candidates_shown},
                           {"verdicts_applied", y.verdicts_applied},
                           {"model_labels", y.model_labels}});
  st["curves"] = json::array();
  for (const auto& [it, pts] : curves_) {
    json c;
    c["iteration"] = it;
    c["points"] = json::array();
    for (const auto& p : pts) c["points"].push_back({{"threshold", p.threshold}, {"accepted", p.accepted}});
    st["curves"].push_back(std::move(c));
  }
  atomic_write(dir / "state.json", st.dump(1));
  std::ofstream(dir / "verdicts.wal", std::ios::trunc).flush();
}

ApiResponse LabelService::session() const {
  std::lock_guard lock(mu_);
  json j;
  j["session_id"] = options_.session_id;
  j["iteration"] = iteration_;
  j["model_version"] = model_version_;
  j["classes"] = classes_;
  j["batch"] = options_.batch;
  j["agreement"] = options_.agreement;
  j["threshold"] = options_.threshold;
  j["state"] = state_ == ServiceState::kIdle ? "idle" : "retraining";
  return reply(200, j);
}

ApiResponse LabelService::candidates(std::string_view stratum, std::optional<std::size_t> limit) const {
  std::optional<Stratum> want;
  if (!stratum.empty()) {
    for (Stratum s : {Stratum::kConservative, Stratum::kLiberal, Stratum::kAmbiguous})
      if (to_string(s) == stratum) want = s;
    if (!want) return fail(400, "bad_request", "stratum must be conservative, liberal or ambiguous");
  }
  const std::size_t cap = limit.value_or(options_.batch);

  std::lock_guard lock(mu_);
  json items = json::array();
  std::array<std::size_t, 3> taken{};
  for (const Candidate& c : candidates_) {
    if (want && c.stratum != *want) continue;
    // Verdicts already pending leave the queue.
    const std::string& asin = graph_.node(c.node).key;
    if (std::any_of(pending_.begin(), pending_.end(), [&](const PendingVerdict& p) { return p.asin == asin; }))
      continue;
    if (taken[static_cast<std::size_t>(c.stratum)]++ >= cap) continue;
    const Node& n = graph_.node(c.node);
    json it;
    it["node"] = n.key;
    it["title"] = n.attrs.name;
    it["category"] = {n.attrs.main_category, n.attrs.big_category};
    json probs;
    for (int k = 0; k < c.score.classes; ++k)
      probs[std::string(to_string(static_cast<PolClass>(k)))] = c.score.probability[static_cast<std::size_t>(k)];
    it["probabilities"] = probs;
    it["stratum"] = to_string(c.stratum);
    const PoliticalLabel* l = graph_.labels().find(c.node);
    it["provenance"] = l ? std::string(to_string(l->provenance)) : "none";
    items.push_back(std::move(it));
  }
  json j;
  j["model_version"] = model_version_;
  j["iteration"] = iteration_;
  j["items"] = std::move(items);
  return reply(200, j);
}

ApiResponse LabelService::post_verdict(std::string_view body) {
  const json in = json::parse(body, nullptr, false);
  if (in.is_discarded() || !in.is_object()) return fail(400, "bad_request", "body must be a JSON object");
  auto str = [&](const char* k) -> std::optional<std::string> {
    if (!in.contains(k) || !in[k].is_string()) return std::nullopt;
    return in[k].get<std::string>();
  };
  const auto verdict_id = str("verdict_id");
  const auto node = str("node");
  const auto cls_name = str("class");
  if (!verdict_id || !node || !cls_name || verdict_id->empty())
    return fail(400, "bad_request", "verdict_id, node and class are required strings");
  const auto cls = parse_pol_class(*cls_name);
  if (!cls) return fail(400, "bad_request", "class must be conservative, liberal or nonpolitical");
  std::string op = str("operator").value_or("");
  if (op.empty()) {
    if (options_.agreement > 1) return fail(400, "bad_request", "operator is required when agreement > 1");
    op = "default";
  }

  std::lock_guard lock(mu_);
  const std::string key = *node + '\n' + *verdict_id;
  if (seen_verdicts_.count(key)) return reply(200, {{"status", "already-applied"}, {"verdict_id", *verdict_id}});
  if (state_ == ServiceState::kRetraining) return fail(409, "busy", "retraining in progress; session is read-only");
  if (in.contains("model_version")) {
    if (!in["model_version"].is_number_integer()) return fail(400, "bad_request", "model_version must be an integer");
    if (in["model_version"].get<int>() != model_version_)
      return reply(409, {{"error", "stale_model"},
                         {"model_version", model_version_},
                         {"action", "refresh_queue"}});
  }
  const auto id = graph_.find(NodeKind::kProduct, *node);
  if (!id) return fail(404, "unknown_node", *node);
  if (const PoliticalLabel* l = graph_.labels().find(*id);
      l && l->provenance == Provenance::kSeed && l->cls != *cls)
    return reply(409, {{"error", "seed_precedence"}, {"node", *node}, {"seed_class", to_string(l->cls)}});

  PendingVerdict v{*verdict_id, *node, op, *cls};
  append_wal(v);
  seen_verdicts_.insert(key);
  pending_.push_back(std::move(v));

  json j;
  j["status"] = "accepted";
  j["verdict_id"] = *verdict_id;
  j["pending"] = pending_.size();
  if (options_.agreement > 1) {
    std::set<std::string> ops;
    for (const auto& p : pending_)
      if (p.asin == *node && p.cls == *cls) ops.insert(p.op);
    j["votes"] = ops.size();
    j["required"] = options_.agreement;
  }
  return reply(200, j);
}

std::vector<Verdict> LabelService::agreed_locked(std::vector<PendingVerdict>* used) const {
  // Latest verdict per (node, operator) counts; a node applies once enough
  // distinct operators agree on one class.
  std::map<std::string, std::map<std::string, const PendingVerdict*>> latest;
  for (const auto& p : pending_) latest[p.asin][p.op] = &p;
  std::vector<Verdict> out;
  for (const auto& [asin, by_op] : latest) {
    std::array<int, 3> votes{};
    for (const auto& [op, p] : by_op) votes[static_cast<std::size_t>(p->cls)]++;
    for (int k = 0; k < 3; ++k) {
      if (votes[static_cast<std::size_t>(k)] < options_.agreement) continue;
      out.push_back({asin, static_cast<PolClass>(k)});
      for (const auto& [op, p] : by_op)
        if (p->cls == static_cast<PolClass>(k)) used->push_back(*p);
      break;
    }
  }
  return out;
}

ApiResponse LabelService::retrain(bool wait) {
  {
    std::lock_guard lock(mu_);
    if (state_ == ServiceState::kRetraining) return fail(409, "busy", "a retrain is already running");
    state_ = ServiceState::kRetraining;
    last_error_.clear();
  }
  {
    std::lock_guard lock(worker_mu_);
    if (worker_.joinable()) worker_.join();
    worker_ = std::jthread([this] { run_retrain(); });
  }
  if (wait) wait_idle();
  std::lock_guard lock(mu_);
  json j;
  j["status"] = state_ == ServiceState::kIdle ? "done" : "retraining";
  j["iteration"] = iteration_;
  j["model_version"] = model_version_;
  if (!last_error_.empty()) j["error"] = last_error_;
  return reply(202, j);
}

void LabelService::run_retrain() {
  std::vector<Verdict> verdicts;
  std::vector<PendingVerdict> used;
  HeteroGraph work;
  int next = 0;
  std::size_t shown = 0;
  {
    std::lock_guard lock(mu_);
    verdicts = agreed_locked(&used);
    work = graph_.mutable_copy();
    next = iteration_ + 1;
    shown = candidates_.size();
  }
  try {
    work.freeze();
    HitlResult result = hitl_iterate(work, options_.rgcn, verdicts, next, options_.threshold);

    std::lock_guard lock(mu_);
    const std::string now = utc_now();
    std::map<std::string, const VerdictOutcome*> outcome;
    for (const auto& o : result.report.verdicts) outcome[o.asin] = &o;
    std::size_t applied = 0;
    std::set<std::string> used_keys;
    for (const auto& p : used) {
      const VerdictOutcome* o = outcome.at(p.asin);
      audit_.push_back({p.verdict_id, p.asin, p.op, o->reason, now, p.cls, next});
      used_keys.insert(p.asin + '\n' + p.verdict_id);
    }
    for (const auto& o : result.report.verdicts)
      if (o.accepted) ++applied;
    // Superseded and unagreed verdicts were made against this model version
    // and expire with it.
    for (const auto& p : pending_)
      if (!used_keys.count(p.asin + '\n' + p.verdict_id))
        audit_.push_back({p.verdict_id, p.asin, p.op, "expired", now, p.cls, next});
    pending_.clear();

    std::size_t model_labels = 0;
    for (std::size_t c : result.report.model_label_counts) model_labels += c;
    yields_.push_back({next, shown, applied, model_labels});

    graph_ = std::move(work);
    iteration_ = next;
    ++model_version_;
    install(std::move(result));
    persist_locked();
    state_ = ServiceState::kIdle;
  } catch (const std::exception& e) {
    std::lock_guard lock(mu_);
    last_error_ = e.what();
    state_ = ServiceState::kIdle;
  }
  idle_cv_.notify_all();
}

void LabelService::wait_idle() {
  std::unique_lock lock(mu_);
  idle_cv_.wait(lock, [&] { return state_ == ServiceState::kIdle; });
}

ApiResponse LabelService::status() const {
  std::lock_guard lock(mu_);
  std::array<std::size_t, 3> labels{}, model{};
  for (const auto& [id, l] : graph_.labels())
    (l.provenance == Provenance::kModel ? model : labels)[static_cast<std::size_t>(l.cls)]++;
  json j;
  j["state"] = state_ == ServiceState::kIdle ? "idle" : "retraining";
  j["session_id"] = options_.session_id;
  j["iteration"] = iteration_;
  j["model_version"] = model_version_;
  j["classes"] = classes_;
  j["label_counts"] = class_counts(labels);
  j["model_label_counts"] = class_counts(model);
  j["pending_verdicts"] = pending_.size();
  j["audit_entries"] = audit_.size();
  j["test_accuracy"] = model_.test.accuracy;
  j["yield"] = json::array();
  for (const auto& y : yields_) {
    json e;
    e["iteration"] = y.iteration;
    e["candidates_shown"] = y.candidates_shown;
    e["verdicts_applied"] = y.verdicts_applied;
    e["model_labels"] = y.model_labels;
    e["rate"] = y.candidates_shown ? static_cast<double>(y.verdicts_applied) / static_cast<double>(y.candidates_shown) : 0.0;
    j["yield"].push_back(std::move(e));
  }
  if (!last_error_.empty()) j["last_error"] = last_error_;
  return reply(200, j);
}

ApiResponse LabelService::curves() const {
  std::lock_guard lock(mu_);
  json j;
  j["iterations"] = json::array();
  for (const auto& [it, pts] : curves_) {
    json c;
    c["iteration"] = it;
    c["points"] = json::array();
    for (const auto& p : pts) c["points"].push_back({{"threshold", p.threshold}, {"accepted", p.accepted}});
    j["iterations"].push_back(std::move(c));
  }
  return reply(200, j);
}

ApiResponse LabelService::metrics(std::string_view segment) const {
  std::lock_guard lock(mu_);
  for (CategoryLevel level : {CategoryLevel::kMain, CategoryLevel::kBig}) {
    const auto partition = category_segments(graph_, level);
    auto it = std::find_if(partition.begin(), partition.end(), [&](const Segment& s) { return s.id == segment; });
    if (it == partition.end()) continue;
    try {
      const auto totals = compute_totals(graph_, partition, options_.metrics);
      const PoliticsReport r = segment_report(graph_, *it, totals, options_.metrics);
      json j;
      j["segment"] = r.segment;
      j["level"] = level == CategoryLevel::kMain ? "main" : "big";
      j["products"] = r.products;
      j["X"] = r.counts.X;
      j["K"] = r.counts.K;
      j["X_red"] = r.counts.X_red;
      j["relevance"] = r.relevance;
      j["alignment"] = r.alignment;
      if (r.polarization.z) j["polarization"] = *r.polarization.z;
      else j["polarization"] = nullptr;
      j["expected_overlap"] = r.polarization.expected;
      j["variance_overlap"] = r.polarization.variance;
      j["observed_overlap"] = r.polarization.observed;
      j["mode"] = to_string(r.polarization.mode);
      return reply(200, j);
    } catch (const Error& e) {
      return fail(422, errc_name(e.code()), e.what());
    }
  }
  return fail(404, "unknown_segment", std::string(segment));
}

bool LabelService::authorized(std::string_view header_value) const {
  if (options_.token.empty()) return true;
  return header_value == "Bearer " + options_.token;
}

int LabelService::iteration() const {
  std::lock_guard lock(mu_);
  return iteration_;
}

int LabelService::model_version() const {
  std::lock_guard lock(mu_);
  return model_version_;
}

HeteroGraph LabelService::graph_copy() const {
  std::lock_guard lock(mu_);
  return graph_.mutable_copy();
}

// ------------------------------------------------------------------- HTTP

struct HttpServer::Impl {
  LabelService& service;
  httplib::Server server;
  std::thread thread;

  explicit Impl(LabelService& s) : service(s) {
    auto send = [](httplib::Response& res, const ApiResponse& r) {
      res.status = r.status;
      res.set_content(r.body, "application/json");
    };
    server.set_pre_routing_handler([this, send](const httplib::Request& req, httplib::Response& res) {
      if (req.path.rfind("/api/", 0) == 0 && !service.authorized(req.get_header_value("Authorization"))) {
        send(res, {401, R"({"error":"unauthorized"})"});
        return httplib::Server::HandlerResponse::Handled;
      }
      return httplib::Server::HandlerResponse::Unhandled;
    });
    server.Get("/api/session", [this, send](const httplib::Request&, httplib::Response& res) {
      send(res, service.session());
    });
    server.Get("/api/candidates", [this, send](const httplib::Request& req, httplib::Response& res) {
      std::optional<std::size_t> limit;
      if (req.has_param("limit")) {
        const std::string v = req.get_param_value("limit");
        std::size_t n = 0;
        auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), n);
        if (ec != std::errc() || p != v.data() + v.size()) {
          send(res, {400, R"({"error":"bad_request","detail":"limit must be a non-negative integer"})"});
          return;
        }
        limit = n;
      }
      send(res, service.candidates(req.get_param_value("stratum"), limit));
    });
    server.Post("/api/verdicts", [this, send](const httplib::Request& req, httplib::Response& res) {
      send(res, service.post_verdict(req.body));
    });
    server.Post("/api/retrain", [this, send](const httplib::Request&, httplib::Response& res) {
      send(res, service.retrain(false));
    });
    server.Get("/api/status", [this, send](const httplib::Request&, httplib::Response& res) {
      send(res, service.status());
    });
    server.Get("/api/curves", [this, send](const httplib::Request&, httplib::Response& res) {
      send(res, service.curves());
    });
    server.Get(R"(/api/metrics/(.+))", [this, send](const httplib::Request& req, httplib::Response& res) {
      send(res, service.metrics(httplib::detail::decode_url(req.matches[1], false)));
    });
    server.set_exception_handler([send](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
      try {
        std::rethrow_exception(ep);
      } catch (const Error& e) {
        json j{{"error", errc_name(e.code())}, {"detail", e.what()}};
        send(res, {500, j.dump()});
      } catch (const std::exception& e) {
        json j{{"error", "internal"}, {"detail", e.what()}};
        send(res, {500, j.dump()});
      }
    });
  }
};

HttpServer::HttpServer(LabelService& service) : impl_(std::make_unique<Impl>(service)) {}

HttpServer::~HttpServer() { stop(); }

int HttpServer::start(const std::string& host, int port) {
  int bound = port;
  if (port == 0) {
    bound = impl_->server.bind_to_any_port(host);
  } else if (!impl_->server.bind_to_port(host, port)) {
    bound = -1;
  }
  if (bound < 0) throw Error(Errc::kIo, "cannot bind " + host + ":" + std::to_string(port));
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return bound;
}

void HttpServer::run(const std::string& host, int port) {
  if (!impl_->server.listen(host, port)) throw Error(Errc::kIo, "cannot bind " + host + ":" + std::to_string(port));
}

void HttpServer::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace polnet
