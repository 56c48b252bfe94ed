#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "polnet/error.hpp"
#include "polnet/hetgraph.hpp"
#include "polnet/polmetrics.hpp"
#include "polnet/rgcn.hpp"

namespace polnet {

// ------------------------------------------------------------ config

struct PipelineConfig {
  std::filesystem::path reviews, meta, seeds, moral;
  std::filesystem::path snapshot_dir = "snapshots";
  int waves = 2;
  std::string step2 = "reviewed_products";
  std::filesystem::path plan;
  std::vector<std::size_t> kcore{5, 20};
  RgcnConfig rgcn = RgcnConfig::paper_preset();
  std::size_t replicates = 1000;
  std::uint64_t seed = 1;
  std::string kinds = "interaction";  // interaction | copurchase | all
  std::string null_mode = "monte_carlo";
  std::string host = "127.0.0.1";
  int port = 8080;
  double threshold = kDefaultAcceptThreshold;
  std::size_t batch = 50;
  int agreement = 1;
  std::string token;

  /// Sets one key from the config file vocabulary (the field names above, the
  /// RgcnConfig fields, "kcore" as a comma list). Unknown keys and unparsable
  /// values raise kValidation.
  void set(std::string_view key, std::string_view value);
  /// "key = value" lines; '#' starts a comment.
  void load_file(const std::filesystem::path& path);
  /// POLNET_<KEY> for every known key, e.g. POLNET_SEED, POLNET_LEARNING_RATE.
  void apply_env();
  static const std::vector<std::string>& keys();

  MetricsConfig metrics_config() const;

  /// Referenced input paths must exist; thresholds and counts in range.
  /// Throws kValidation naming the offending key.
  void validate() const;
};

EdgeKindSet parse_kind_preset(std::string_view name);

/// Process exit status for an error class: 3 for validation and parameter
/// errors, 4 for I/O, 5 for corrupt or mismatched files, 1 otherwise. Usage
/// errors (exit 2) are raised by the argument parser before any work starts.
int exit_code(Errc code) noexcept;

// ------------------------------------------------------ label service

enum class ServiceState { kIdle, kRetraining };

struct ServiceOptions {
  std::filesystem::path state_dir;  // WAL, labels, checkpoint; empty = in memory only
  RgcnConfig rgcn = RgcnConfig::paper_preset();
  double threshold = kDefaultAcceptThreshold;
  std::size_t batch = 50;
  int agreement = 1;     // distinct operators that must agree before a verdict applies
  std::string token;     // empty = no auth
  MetricsConfig metrics;
  std::string session_id = "default";
};

struct ApiResponse {
  int status = 200;
  std::string body;  // JSON
};

/// Human-in-the-loop session over one graph. Every method is safe to call
/// from concurrent request handlers; label mutations are serialised under one
/// lock and retraining runs on a background worker with the session read-only.
class LabelService {
 public:
  /// Restores state from `options.state_dir` when present (checkpoint, labels
  /// and the verdict log), otherwise trains the first model.
  LabelService(HeteroGraph graph, ServiceOptions options);
  ~LabelService();
  LabelService(const LabelService&) = delete;
  LabelService& operator=(const LabelService&) = delete;

  ApiResponse session() const;
  ApiResponse candidates(std::string_view stratum, std::optional<std::size_t> limit) const;
  /// {"verdict_id", "node", "class", "model_version", "operator"?}
  ApiResponse post_verdict(std::string_view body);
  /// Starts retraining; 409 busy while one is in flight. `wait` blocks until done.
  ApiResponse retrain(bool wait = false);
  ApiResponse status() const;
  ApiResponse curves() const;
  ApiResponse metrics(std::string_view segment) const;

  void wait_idle();
  bool authorized(std::string_view header_value) const;

  int iteration() const;
  int model_version() const;
  HeteroGraph graph_copy() const;

 private:
  struct PendingVerdict {
    std::string verdict_id, asin, op;
    PolClass cls;
  };
  struct AuditEntry {
    std::string verdict_id, asin, op, outcome, time;
    PolClass cls;
    int iteration;
  };
  struct IterationYield {
    int iteration;
    std::size_t candidates_shown, verdicts_applied, model_labels;
  };

  bool restore();
  void install(HitlResult result);
  void persist_locked();
  void append_wal(const PendingVerdict& v);
  void replay_wal();
  std::vector<Verdict> agreed_locked(std::vector<PendingVerdict>* used) const;
  void run_retrain();

  HeteroGraph graph_;
  ServiceOptions options_;
  mutable std::mutex mu_;
  std::condition_variable idle_cv_;
  ServiceState state_ = ServiceState::kIdle;
  int iteration_ = 0;
  int model_version_ = 0;
  int classes_ = 2;
  RgcnModel model_;
  std::vector<ClassScore> scores_;
  std::vector<Candidate> candidates_;
  std::vector<PendingVerdict> pending_;
  std::set<std::string> seen_verdicts_;
  std::vector<AuditEntry> audit_;
  std::vector<IterationYield> yields_;
  std::vector<std::pair<int, std::vector<CurvePoint>>> curves_;
  std::string last_error_;
  std::mutex worker_mu_;
  std::jthread worker_;
};

class HttpServer {
 public:
  explicit HttpServer(LabelService& service);
  ~HttpServer();
  /// Binds (port 0 picks a free port) and serves on a background thread.
  int start(const std::string& host, int port);
  /// Binds and serves on the calling thread until stop().
  void run(const std::string& host, int port);
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace polnet
