// Batch runner: one JSON run config in, one CSV or JSON result file out.

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <variant>

#include <unistd.h>

#include "CLI11.hpp"
#include "fraclap/analysis.hpp"
#include "json.hpp"

#ifndef FRACLAP_VERSION
#define FRACLAP_VERSION "unknown"
#endif

using namespace fraclap;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// Human-readable progress; moved to stderr when the data itself goes to stdout.
FILE* g_summary = stdout;

// A run that completed but whose hard assertions failed.
struct AssertionFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------- output

using Cell = std::variant<std::string, double, long long, bool, std::nullptr_t>;

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<Cell>> rows;
};

std::string fmt_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string cell_text(const Cell& c) {
  return std::visit(
      [](const auto& v) -> std::string {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, std::string>) return v;
        if constexpr (std::is_same_v<T, double>) return fmt_double(v);
        if constexpr (std::is_same_v<T, long long>) return std::to_string(v);
        if constexpr (std::is_same_v<T, bool>) return v ? "true" : "false";
        if constexpr (std::is_same_v<T, std::nullptr_t>) return "";
      },
      c);
}

json cell_json(const Cell& c) {
  return std::visit([](const auto& v) -> json { return v; }, c);
}

// RFC 4180: CRLF line ends, quoting only where needed.
std::string render_csv(const Table& t) {
  std::string out;
  for (std::size_t i = 0; i < t.header.size(); ++i) out += (i ? "," : "") + csv_field(t.header[i]);
  out += "\r\n";
  for (const auto& row : t.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out += (i ? "," : "") + csv_field(cell_text(row[i]));
    out += "\r\n";
  }
  return out;
}

std::string render_json(const std::string& command, const Table& t, const json& details) {
  json rows = json::array();
  for (const auto& row : t.rows) {
    json r = json::object();
    for (std::size_t i = 0; i < row.size(); ++i) r[t.header[i]] = cell_json(row[i]);
    rows.push_back(r);
  }
  return json{{"command", command}, {"rows", rows}, {"details", details}}.dump(2) + "\n";
}

void write_atomic(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write " + tmp.string());
    f << content;
    if (!f.flush()) throw std::runtime_error("cannot write " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::string utc_now() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// ---------------------------------------------------------------- cache

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

// One file per energy: the full key on the first line, then value, error, nodes and the
// convergence flag, floats in hexadecimal so replay is bit-exact.
class FileCache : public EnergyMemo {
 public:
  explicit FileCache(fs::path dir) : dir_(std::move(dir)) { fs::create_directories(dir_); }

  std::optional<EnergyEstimate> lookup(const std::string& key) override {
    std::lock_guard lock(mu_);
    const fs::path p = path_for(key);
    std::ifstream f(p);
    if (!f) return std::nullopt;
    std::string stored, vals;
    std::getline(f, stored);
    std::getline(f, vals);
    EnergyEstimate e;
    unsigned long long nodes = 0;
    int conv = 0;
    char a[64] = {}, b[64] = {};
    const bool ok = stored == key && std::sscanf(vals.c_str(), "%63s %63s %llu %d", a, b, &nodes, &conv) == 4;
    if (ok) {
      char* end1 = nullptr;
      char* end2 = nullptr;
      e.value = std::strtod(a, &end1);
      e.err_est = std::strtod(b, &end2);
      if (*end1 == '\0' && *end2 == '\0') {
        e.nodes = nodes;
        e.converged = conv != 0;
        try {
          e.spec = QuadratureSpec::from_json(json::parse(key).at("spec"));
          ++hits_;
          return e;
        } catch (const std::exception&) {
        }
      }
    }
    // corrupt or colliding entry: evict, never trust
    f.close();
    std::error_code ec;
    fs::remove(p, ec);
    ++evicted_;
    return std::nullopt;
  }

  void store(const std::string& key, const EnergyEstimate& e) override {
    std::lock_guard lock(mu_);
    char buf[128];
    std::snprintf(buf, sizeof buf, "%a %a %llu %d", e.value, e.err_est, static_cast<unsigned long long>(e.nodes),
                  e.converged ? 1 : 0);
    write_atomic(path_for(key), key + "\n" + buf + "\n");
  }

  int hits() const { return hits_; }
  int evicted() const { return evicted_; }

 private:
  fs::path path_for(const std::string& key) const {
    char name[32];
    std::snprintf(name, sizeof name, "%016llx.energy", static_cast<unsigned long long>(fnv1a(key)));
    return dir_ / name;
  }

  fs::path dir_;
  std::mutex mu_;
  int hits_ = 0;
  int evicted_ = 0;
};

// ---------------------------------------------------------------- config

const std::vector<std::string> kCommands{"constants", "energy", "extend", "rayleigh", "minimize",
                                         "identities", "gaps", "limits", "hardy"};

struct RunConfig {
  std::string command;
  int n = 1;
  std::vector<double> s_values;  // more than one: a sweep
  std::optional<double> sigma;
  json spec_json;
  OptimizerConfig opt;
  std::optional<json> trial;
  json raw;  // echoed into the manifest
  std::string out;
  std::string format = "csv";
  std::string cache_dir;
};

template <class T>
T get_or(const json& j, const char* key, T fallback) {
  return j.contains(key) && !j.at(key).is_null() ? j.at(key).get<T>() : fallback;
}

RunConfig parse_config(json j) {
  if (!j.is_object()) throw PreconditionError("run config must be a JSON object");
  RunConfig c;
  c.raw = j;
  c.command = get_or<std::string>(j, "command", "");
  if (std::find(kCommands.begin(), kCommands.end(), c.command) == kCommands.end()) {
    throw PreconditionError("unknown or missing command '" + c.command + "'");
  }
  const json params = get_or<json>(j, "params", json::object());
  c.n = get_or<int>(params, "n", 1);
  if (params.contains("s")) {
    const json& s = params.at("s");
    if (s.is_array()) {
      for (const auto& v : s) c.s_values.push_back(v.get<double>());
      if (c.s_values.empty()) throw PreconditionError("params.s sweep is empty");
    } else {
      c.s_values.push_back(s.get<double>());
    }
  }
  if (params.contains("sigma") && !params.at("sigma").is_null()) c.sigma = params.at("sigma").get<double>();
  c.spec_json = get_or<json>(j, "spec", json::object());
  if (j.contains("optimizer")) c.opt = OptimizerConfig::from_json(j.at("optimizer"));
  if (j.contains("trial")) c.trial = j.at("trial");
  const json output = get_or<json>(j, "output", json::object());
  c.out = get_or<std::string>(output, "path", "");
  c.format = get_or<std::string>(output, "format", "csv");
  c.cache_dir = get_or<std::string>(j, "cacheDir", "");
  return c;
}

FracParams params_for(const RunConfig& c, double s) { return FracParams::make(c.n, s, c.sigma); }

QuadratureSpec spec_for(const RunConfig& c) {
  return QuadratureSpec::from_json(c.spec_json, QuadratureSpec::defaults_for(c.n));
}

TrialFunction trial_for(const RunConfig& c) {
  if (!c.trial) throw PreconditionError("command '" + c.command + "' needs a trial");
  return TrialFunction::from_json(*c.trial);
}

// Validates everything the command will touch before any computation starts.
void validate(const RunConfig& c) {
  if (c.format != "csv" && c.format != "json") throw PreconditionError("format must be csv or json");
  if (c.n < 1 || c.n > 3) throw PreconditionError("dimension n must be 1, 2 or 3");
  spec_for(c);
  c.opt.validate();
  if (c.command == "limits") {
    for (double s : get_or<std::vector<double>>(c.raw, "sGrid", {0.02, 0.98})) {
      if (!(s > 0.0 && s < 1.0)) throw PreconditionError("every sGrid entry must lie in (0,1)");
    }
  } else {
    if (c.s_values.empty()) throw PreconditionError("params.s is required");
    for (double s : c.s_values) params_for(c, s);
  }
  if (c.trial) trial_for(c);
  if (c.raw.contains("region")) region_from_string(c.raw.at("region").get<std::string>());
  for (const auto& r : get_or<std::vector<std::string>>(c.raw, "regions", {})) region_from_string(r);
  if (c.raw.contains("operator")) operator_from_string(c.raw.at("operator").get<std::string>());
}

// ---------------------------------------------------------------- commands

struct Outcome {
  Table table;
  json details = json::array();
  int failed = 0;
  int unresolved = 0;
};

void add_checks(Outcome& o, int n, double s, const std::vector<CheckRecord>& checks) {
  for (const auto& ch : checks) {
    const std::string pass = ch.skipped ? "skipped" : (ch.pass ? "true" : "false");
    o.table.rows.push_back({(long long)n, s, ch.name, ch.lhs, ch.rhs, ch.tol, pass});
    if (!ch.pass) ++o.failed;
    if (ch.detail.find("unresolved") != std::string::npos) ++o.unresolved;
    std::fprintf(g_summary, "%-8s %-40s lhs=%s rhs=%s%s%s\n", ch.skipped ? "SKIP" : (ch.pass ? "PASS" : "FAIL"),
                ch.name.c_str(), fmt_double(ch.lhs).c_str(), fmt_double(ch.rhs).c_str(),
                ch.detail.empty() ? "" : "  ", ch.detail.c_str());
    std::fflush(g_summary);
  }
}

const std::vector<std::string> kCheckHeader{"n", "s", "name", "lhs", "rhs", "tol", "pass"};

void run_one(const RunConfig& c, double s, Outcome& o) {
  const QuadratureSpec spec = spec_for(c);
  const int n = c.n;
  const std::string& cmd = c.command;
  if (cmd == "constants") {
    o.table.header = {"n", "s", "name", "beta", "value"};
    const FracParams p = params_for(c, s);
    auto row = [&](ConstantName name, const std::function<ConstantValue()>& f) {
      try {
        const auto v = f();
        o.table.rows.push_back({(long long)n, s, std::string(to_string(name)),
                                v.beta ? Cell(*v.beta) : Cell(nullptr), v.value});
        std::fprintf(g_summary, "%s = %s\n", std::string(to_string(name)).c_str(), fmt_double(v.value).c_str());
      } catch (const PreconditionError& e) {
        std::fprintf(stderr, "note: %s not defined here: %s\n", std::string(to_string(name)).c_str(), e.what());
      }
    };
    row(ConstantName::C_ns, [&] { return specfun::c_frac(p); });
    row(ConstantName::gamma_s, [&] { return specfun::gamma_half(s); });
    row(ConstantName::S_s, [&] { return specfun::sobolev_const(p); });
    row(ConstantName::S_sp_neumann, [&] { return specfun::spectral_neumann_const(p); });
    if (c.raw.contains("beta")) row(ConstantName::B_s, [&] { return specfun::b_beta(s, c.raw.at("beta").get<double>()); });
  } else if (cmd == "energy") {
    o.table.header = {"n", "s", "region", "value", "err_est", "nodes", "converged"};
    const FracParams p = params_for(c, s);
    const TrialFunction u = trial_for(c);
    std::vector<std::string> regions = get_or<std::vector<std::string>>(c.raw, "regions", {});
    if (regions.empty()) regions.push_back(get_or<std::string>(c.raw, "region", "FullSpace"));
    for (const auto& r : regions) {
      const auto e = quadrature::energy(u, region_from_string(r), p, spec);
      o.table.rows.push_back({(long long)n, s, r, e.value, e.err_est, (long long)e.nodes, e.converged});
      std::fprintf(g_summary, "energy[%s] = %s +- %s\n", r.c_str(), fmt_double(e.value).c_str(), fmt_double(e.err_est).c_str());
    }
  } else if (cmd == "extend") {
    o.table.header = {"n", "s", "x1", "x2", "x3", "value", "err_est", "slow_tail"};
    const FracParams p = params_for(c, s);
    const TrialFunction u = trial_for(c);
    const auto pts = get_or<std::vector<std::vector<double>>>(c.raw, "points", {});
    if (pts.empty()) throw PreconditionError("extend needs a non-empty 'points' list");
    for (const auto& v : pts) {
      Point x{};
      for (std::size_t i = 0; i < std::min<std::size_t>(v.size(), 3); ++i) x[i] = v[i];
      const auto r = extension::apply_Ps_checked(u, x, p, spec);
      o.table.rows.push_back({(long long)n, s, x[0], x[1], x[2], r.value, r.error, r.slow_tail});
      std::fprintf(g_summary, "P_s u(%s, %s, %s) = %s\n", fmt_double(x[0]).c_str(), fmt_double(x[1]).c_str(),
                  fmt_double(x[2]).c_str(), fmt_double(r.value).c_str());
    }
  } else if (cmd == "rayleigh") {
    o.table.header = {"n",         "s",           "operator",        "weight_sigma", "numerator",
                      "numerator_err", "denominator", "denominator_err", "quotient",     "quotient_err"};
    const FracParams p = params_for(c, s);
    const TrialFunction u = trial_for(c);
    std::vector<std::string> ops = get_or<std::vector<std::string>>(c.raw, "operators", {});
    if (ops.empty()) ops.push_back(get_or<std::string>(c.raw, "operator", "Dirichlet"));
    std::optional<double> ws;
    if (c.raw.contains("weightSigma")) ws = c.raw.at("weightSigma").get<double>();
    for (const auto& name : ops) {
      const auto r = analysis::rayleigh(u, {operator_from_string(name), ws}, p, spec);
      o.table.rows.push_back({(long long)n, s, name, ws ? Cell(*ws) : Cell(nullptr), r.numerator.value,
                              r.numerator.err_est, r.denominator.value, r.denominator.err_est, r.quotient,
                              r.err_est()});
      o.details.push_back(r.to_json());
      std::fprintf(g_summary, "quotient[%s] = %s +- %s\n", name.c_str(), fmt_double(r.quotient).c_str(),
                  fmt_double(r.err_est()).c_str());
    }
  } else if (cmd == "minimize") {
    o.table.header = {"n",          "s",           "operator",   "quotient",      "quotient_err", "tau",
                      "log_lambda", "corrections", "evaluations", "restart_spread", "converged"};
    const FracParams p = params_for(c, s);
    const std::string name = get_or<std::string>(c.raw, "operator", "Restricted");
    const auto m = analysis::minimize_quotient({operator_from_string(name), std::nullopt}, p, c.opt, spec);
    const auto [lo, hi] = std::minmax_element(m.restart_values.begin(), m.restart_values.end());
    const double spread = (*hi - *lo) / std::abs(*lo);
    std::string corr;
    for (std::size_t k = 2; k < m.best_params.size(); ++k) corr += (k > 2 ? ";" : "") + fmt_double(m.best_params[k]);
    o.table.rows.push_back({(long long)n, s, name, m.best.quotient, m.best.err_est(), m.best_params[0],
                            m.best_params[1], corr, (long long)m.evaluations, spread, m.converged});
    o.details.push_back(m.to_json());
    std::fprintf(g_summary, "min quotient[%s] = %s (tau %s, restart spread %s)%s\n", name.c_str(),
                fmt_double(m.best.quotient).c_str(), fmt_double(m.best_params[0]).c_str(),
                fmt_double(spread).c_str(), m.converged ? "" : "  warning: not converged");
  } else if (cmd == "identities") {
    o.table.header = kCheckHeader;
    const FracParams p = params_for(c, s);
    const double tol =
        get_or<double>(c.raw, "tol", spec.method == Method::TensorGauss && n == 1 ? 1e-6 : 1e-2);
    const auto checks = analysis::identity_suite(p, spec, tol);
    add_checks(o, n, s, checks);
    for (const auto& ch : checks) o.details.push_back(ch.to_json());
  } else if (cmd == "gaps") {
    o.table.header = kCheckHeader;
    const auto g = analysis::theorem_gap_report(params_for(c, s), c.opt, spec);
    add_checks(o, n, s, g.checks);
    for (const auto& r : g.sr_to_dirichlet) {
      o.table.rows.push_back({(long long)n, s, "e:sr_to_dirichlet[s=" + fmt_double(r.s) + "]", r.semirestricted,
                              r.half_dirichlet, 0.0, std::string("info")});
    }
    o.details.push_back(g.to_json());
  } else if (cmd == "limits") {
    o.table.header = kCheckHeader;
    const TrialFunction u = c.trial ? trial_for(c) : trial::make_gaussian({0.3, 0.0, 0.0});
    const auto grid = get_or<std::vector<double>>(c.raw, "sGrid", {0.02, 0.98});
    const auto rows = analysis::limit_sweep(u, grid, n, spec);
    const auto checks = analysis::limit_checks(rows);
    // one s per four checks, in grid order
    for (std::size_t i = 0; i < checks.size(); ++i) add_checks(o, n, rows[i / 4].s, {checks[i]});
    for (const auto& r : rows) o.details.push_back(r.to_json());
  } else if (cmd == "hardy") {
    o.table.header = kCheckHeader;
    const auto h = analysis::hardy_sobolev_report(params_for(c, s), c.opt, spec);
    add_checks(o, n, s, h.checks);
    o.details.push_back(h.to_json());
  }
}

int run(RunConfig c) {
  validate(c);
  std::unique_ptr<FileCache> cache;
  std::optional<ScopedEnergyMemo> guard;
  if (!c.cache_dir.empty()) {
    cache = std::make_unique<FileCache>(c.cache_dir);
    guard.emplace(cache.get());
  }
  if (c.out.empty()) g_summary = stderr;
  Outcome o;
  const std::vector<double> sweep = c.command == "limits" ? std::vector<double>{0.0} : c.s_values;
  for (double s : sweep) run_one(c, s, o);

  const std::string body = c.format == "csv" ? render_csv(o.table) : render_json(c.command, o.table, o.details);
  if (c.out.empty()) {
    std::fwrite(body.data(), 1, body.size(), stdout);
  } else {
    write_atomic(c.out, body);
    json manifest{{"config", c.raw},
                  {"version", FRACLAP_VERSION},
                  {"timestamp", utc_now()},
                  {"output", c.out},
                  {"format", c.format},
                  {"threads", worker_count()}};
    write_atomic(c.out + ".manifest.json", manifest.dump(2) + "\n");
  }
  if (cache && (cache->hits() || cache->evicted())) {
    std::fprintf(stderr, "cache: %d hits, %d evicted\n", cache->hits(), cache->evicted());
  }
  if (o.unresolved) std::fprintf(stderr, "warning: %d strict inequalities unresolved within error bars\n", o.unresolved);
  if (o.failed) throw AssertionFailure(std::to_string(o.failed) + " checks failed");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  extension::register_descriptor();
  CLI::App app{"fraclap: sharp Sobolev-type constants of fractional Laplacians on a half space"};
  std::string config_path, command, out, format, cache;
  std::optional<std::uint64_t> seed, budget;
  std::optional<int> n;
  std::optional<double> s, sigma;
  app.add_option("--config", config_path, "run config (JSON)");
  app.add_option("--command", command, "command, overrides the config")->check(CLI::IsMember(kCommands));
  app.add_option("--n", n, "dimension, overrides the config");
  app.add_option("--s", s, "order s, overrides the config");
  app.add_option("--sigma", sigma, "Hardy-Sobolev sigma, overrides the config");
  app.add_option("--seed", seed, "quadrature and optimizer seed, overrides the config");
  app.add_option("--budget", budget, "quadrature budget, overrides the config");
  app.add_option("--out", out, "output file");
  app.add_option("--format", format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
  app.add_option("--cache", cache, "energy cache directory");
  bool no_cache = false;
  app.add_flag("--no-cache", no_cache, "ignore any cache directory in the config");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  try {
    json j = json::object();
    if (!config_path.empty()) {
      std::ifstream f(config_path);
      if (!f) throw PreconditionError("cannot read config " + config_path);
      j = json::parse(f);
    }
    if (!command.empty()) j["command"] = command;
    if (n) j["params"]["n"] = *n;
    if (s) j["params"]["s"] = *s;
    if (sigma) j["params"]["sigma"] = *sigma;
    if (seed) {
      j["spec"]["seed"] = *seed;
      if (j.contains("optimizer")) j["optimizer"]["seed"] = *seed;
    }
    if (budget) j["spec"]["budget"] = *budget;
    if (!out.empty()) j["output"]["path"] = out;
    if (!format.empty()) j["output"]["format"] = format;
    if (!cache.empty()) j["cacheDir"] = cache;
    if (no_cache) j.erase("cacheDir");
    RunConfig c = parse_config(j);
    if (seed) c.opt.seed = *seed;
    return run(std::move(c));
  } catch (const json::exception& e) {
    std::fprintf(stderr, "error: config: %s\n", e.what());
    return 2;
  } catch (const PreconditionError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const AssertionFailure& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const NumericalError& e) {
    std::fprintf(stderr, "error: numerical: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
