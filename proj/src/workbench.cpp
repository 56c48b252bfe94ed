#include "polnet/workbench.hpp"

#include "polnet/sampler.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>

namespace polnet {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value) {
  throw Error(Errc::kValidation, "config key '" + std::string(key) + "': cannot parse '" +
                                     std::string(value) + "'");
}

template <typename T>
T parse_number(std::string_view key, std::string_view value) {
  T out{};
  const char* end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end) bad_value(key, value);
  return out;
}

bool parse_bool(std::string_view key, std::string_view value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  bad_value(key, value);
}

using Setter = std::function<void(PipelineConfig&, std::string_view, std::string_view)>;

const std::map<std::string, Setter, std::less<>>& setters() {
  static const std::map<std::string, Setter, std::less<>> table = [] {
    std::map<std::string, Setter, std::less<>> t;
    auto path = [](std::filesystem::path PipelineConfig::*f) {
      return [f](PipelineConfig& c, std::string_view, std::string_view v) { c.*f = std::string(v); };
    };
    t["reviews"] = path(&PipelineConfig::reviews);
    t["meta"] = path(&PipelineConfig::meta);
    t["seeds"] = path(&PipelineConfig::seeds);
    t["moral"] = path(&PipelineConfig::moral);
    t["snapshot_dir"] = path(&PipelineConfig::snapshot_dir);
    t["plan"] = path(&PipelineConfig::plan);
    t["waves"] = [](PipelineConfig& c, std::string_view k, std::string_view v) { c.waves = parse_number<int>(k, v); };
    t["step2"] = [](PipelineConfig& c, std::string_view, std::string_view v) { c.step2 = v; };
    t["kcore"] = [](PipelineConfig& c, std::string_view k, std::string_view v) {
      c.kcore.clear();
      std::size_t start = 0;
      while (start <= v.size()) {
        const auto comma = v.find(',', start);
        const std::string item = trim(v.substr(start, comma == std::string_view::npos ? v.npos : comma - start));
        if (!item.empty()) c.kcore.push_back(parse_number<std::size_t>(k, item));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
      }
    };
    t["layers"] = [](PipelineConfig& c, std::string_view k, std::string_view v) { c.rgcn.layers = parse_number<int>(k, v); };
    t["hidden"] = [](PipelineConfig& c, std::string_view k, std::string_view v) { c.rgcn.hidden = parse_number<int>(k, v); };
    t["dropout"] = [](PipelineConfig& c, std::string_view k, std::string_view v) { c.rgcn.dropout = parse_number<double>(k, v); };
    t["learning_rate"] = [](PipelineConfig& c, std::string_view k, std::string_view v) {
      c.rgcn.learning_rate = parse_number<double>(k, v);
    };
    t["clip_norm"] = [](PipelineConfig& c, std::string_view k, std::string_view v) { c.rgcn.clip_norm = parse_number<double>(k, v); };
    t["l2"] = [](PipelineConfig& c, std::string_view k, std::string_view v) { c.rgcn.l2 = parse_number<double>(k, v); };
    t["epochs"] = [](PipelineConfig& c, std::string_view k, std::string_view v) { c.rgcn.epochs = parse_number<int>(k, v); };
    t["leaky_slope"] = [](PipelineConfig& c, std::string_view k, std::string_view v) {
      c.rgcn.leaky_slope = parse_number<double>(k, v);
    };
    t["optimizer"] = [](PipelineConfig& c, std::string_view k, std::string_view v) {
      auto o = parse_optimizer(v);
      if (!o) bad_value(k, v);
      c.rgcn.optimizer = *o;
    };
    t["include_coreview"] = [](PipelineConfig& c, std::string_view k, std::string_view v) {
      c.rgcn.include_coreview = parse_bool(k, v);
    };
    t["replicates"] = [](PipelineConfig& c, std::string_view k, std::string_view v) {
      c.replicates = parse_number<std::size_t>(k, v);
    };
    t["seed"] = [](PipelineConfig& c, std::string_view k, std::string_view v) {
      c.seed = parse_number<std::uint64_t>(k, v);
      c.rgcn.seed = c.seed;
    };
    t["kinds"] = [](PipelineConfig& c, std::string_view, std::string_view v) { c.kinds = v; };
    t["null_mode"] = [](PipelineConfig& c, std::string_view, std::string_view v) { c.null_mode = v; };
    t["host"] = [](PipelineConfig& c, std::string_view, std::string_view v) { c.host = v; };
    t["port"] = [](PipelineConfig& c, std::string_view k, std::string_view v) { c.port = parse_number<int>(k, v); };
    t["threshold"] = [](PipelineConfig& c, std::string_view k, std::string_view v) { c.threshold = parse_number<double>(k, v); };
    t["batch"] = [](PipelineConfig& c, std::string_view k, std::string_view v) { c.batch = parse_number<std::size_t>(k, v); };
    t["agreement"] = [](PipelineConfig& c, std::string_view k, std::string_view v) { c.agreement = parse_number<int>(k, v); };
    t["token"] = [](PipelineConfig& c, std::string_view, std::string_view v) { c.token = v; };
    return t;
  }();
  return table;
}

}  // namespace

void PipelineConfig::set(std::string_view key, std::string_view value) {
  auto it = setters().find(key);
  if (it == setters().end()) throw Error(Errc::kValidation, "unknown config key '" + std::string(key) + "'");
  it->second(*this, key, trim(value));
}

const std::vector<std::string>& PipelineConfig::keys() {
  static const std::vector<std::string> k = [] {
    std::vector<std::string> out;
    for (const auto& [name, fn] : setters()) out.push_back(name);
    return out;
  }();
  return k;
}

void PipelineConfig::load_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::kValidation, "cannot read config file " + path.string());
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw Error(Errc::kValidation, path.string() + ":" + std::to_string(lineno) + ": expected key = value");
    set(trim(std::string_view(t).substr(0, eq)), std::string_view(t).substr(eq + 1));
  }
}

void PipelineConfig::apply_env() {
  for (const std::string& key : keys()) {
    std::string name = "POLNET_";
    for (char ch : key) name += static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
    if (const char* v = std::getenv(name.c_str())) set(key, v);
  }
}

EdgeKindSet parse_kind_preset(std::string_view name) {
  if (name == "interaction") return EdgeKindSet::interaction();
  if (name == "copurchase") return EdgeKindSet::copurchase();
  if (name == "all") return EdgeKindSet::all();
  throw Error(Errc::kValidation, "kinds must be interaction, copurchase or all, got '" + std::string(name) + "'");
}

MetricsConfig PipelineConfig::metrics_config() const {
  MetricsConfig m;
  m.kinds = parse_kind_preset(kinds);
  auto mode = parse_null_mode(null_mode);
  if (!mode) throw Error(Errc::kValidation, "null_mode must be monte_carlo or exact, got '" + null_mode + "'");
  m.null.mode = *mode;
  m.null.replicates = replicates;
  m.null.seed = seed;
  return m;
}

void PipelineConfig::validate() const {
  auto need = [](const std::filesystem::path& p, const char* key) {
    if (!p.empty() && !std::filesystem::exists(p))
      throw Error(Errc::kValidation, std::string(key) + ": no such file " + p.string());
  };
  need(reviews, "reviews");
  need(meta, "meta");
  need(seeds, "seeds");
  need(moral, "moral");
  need(plan, "plan");
  if (waves < 1) throw Error(Errc::kValidation, "waves must be >= 1");
  if (!parse_step2_mode(step2)) throw Error(Errc::kValidation, "step2 must be reviewed_products or seed_products");
  for (std::size_t k : kcore)
    if (k == 0) throw Error(Errc::kValidation, "kcore values must be positive");
  if (!(threshold > 0 && threshold <= 1)) throw Error(Errc::kValidation, "threshold must lie in (0, 1]");
  if (replicates == 0) throw Error(Errc::kValidation, "replicates must be positive");
  if (batch == 0) throw Error(Errc::kValidation, "batch must be positive");
  if (agreement < 1) throw Error(Errc::kValidation, "agreement must be >= 1");
  if (port < 0 || port > 65535) throw Error(Errc::kValidation, "port out of range");
  metrics_config();
  try {
    rgcn.validate();
  } catch (const Error& e) {
    throw Error(Errc::kValidation, e.what());
  }
}

int exit_code(Errc code) noexcept {
  switch (code) {
    case Errc::kValidation:
    case Errc::kParameter:
    case Errc::kMode:
      return 3;
    case Errc::kIo:
      return 4;
    case Errc::kVersionMismatch:
    case Errc::kTruncated:
    case Errc::kChecksum:
    case Errc::kFormat:
      return 5;
    default:
      return 1;
  }
}

}  // namespace polnet
