#include <sys/wait.h>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "json.hpp"

namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string out, err;
  double seconds = 0.0;
};

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

const fs::path& scratch() {
  static const fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / ("fraclap_cli_test_" + std::to_string(::getpid()));
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

Run cli(const std::string& args) {
  const fs::path o = scratch() / "stdout", e = scratch() / "stderr";
  const std::string cmd = std::string(FRACLAP_CLI) + " " + args + " >" + o.string() + " 2>" + e.string();
  const auto t0 = std::chrono::steady_clock::now();
  const int status = std::system(cmd.c_str());
  Run r;
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(o);
  r.err = slurp(e);
  return r;
}

fs::path write_config(const std::string& name, const nlohmann::json& j) {
  const fs::path p = scratch() / name;
  std::ofstream(p) << j.dump();
  return p;
}

int count_files(const fs::path& dir) {
  if (!fs::exists(dir)) return 0;
  int k = 0;
  for ([[maybe_unused]] const auto& e : fs::directory_iterator(dir)) ++k;
  return k;
}

}  // namespace

TEST_CASE("constants table") {
  const Run r = cli("--command constants --n 2 --s 0.5");
  REQUIRE(r.code == 0);
  CHECK(r.out.rfind("n,s,name,beta,value\r\n", 0) == 0);
  CHECK(r.out.find("2,0.5,gamma_s,,0.318309886\r\n") != std::string::npos);
  CHECK(r.out.find("2,0.5,C_ns,,0.159154943\r\n") != std::string::npos);
  CHECK(r.out.find("2,0.5,S_s,,1.77245385\r\n") != std::string::npos);
  // summaries go to stderr when the table goes to stdout
  CHECK(r.err.find("S_s = 1.77245385") != std::string::npos);
}

TEST_CASE("precondition and parse errors exit with 2") {
  const Run r = cli("--command constants --n 1 --s 1.5");
  CHECK(r.code == 2);
  CHECK(r.err.find("n > 2s") != std::string::npos);

  const fs::path bad = scratch() / "bad.json";
  std::ofstream(bad) << "{\"command\": \"constants\", ";
  CHECK(cli("--config " + bad.string()).code == 2);
  CHECK(cli("--config " + write_config("unknown.json", {{"command", "plot"}}).string()).code == 2);
  CHECK(cli("--command energy --n 1 --s 0.25").code == 2);  // no trial
  CHECK(cli("--command constants --n 1 --s 0.25 --format xml").code == 2);
  CHECK(cli("--command identities --n 1 --s 0.25 --budget 0").code == 2);
}

TEST_CASE("outputs are atomic, reproducible and cached transparently") {
  const fs::path out = scratch() / "res" / "limits.csv";
  const fs::path cache = scratch() / "cache";
  const nlohmann::json cfg{{"command", "limits"},
                           {"params", {{"n", 1}}},
                           {"trial", {{"kind", "gaussian"}, {"center", {0.3, 0.0, 0.0}}}},
                           {"sGrid", {0.02, 0.98}},
                           {"output", {{"path", out.string()}, {"format", "csv"}}},
                           {"cacheDir", cache.string()}};
  const fs::path config = write_config("limits.json", cfg);

  const Run first = cli("--config " + config.string());
  REQUIRE(first.code == 0);
  const std::string csv = slurp(out);
  CHECK(csv.rfind("n,s,name,lhs,rhs,tol,pass\r\n", 0) == 0);
  CHECK(first.out.find("PASS") != std::string::npos);
  CHECK(count_files(out.parent_path()) == 2);  // result and manifest, no temp files left

  const auto manifest = nlohmann::json::parse(slurp(out.string() + ".manifest.json"));
  CHECK(manifest.at("config") == cfg);
  CHECK_FALSE(manifest.at("version").get<std::string>().empty());
  CHECK(manifest.at("timestamp").get<std::string>().back() == 'Z');

  const int entries = count_files(cache);
  CHECK(entries > 0);

  const Run second = cli("--config " + config.string());
  REQUIRE(second.code == 0);
  CHECK(slurp(out) == csv);
  CHECK(second.err.find("cache: " + std::to_string(entries) + " hits") != std::string::npos);
  CHECK(second.seconds * 10 <= first.seconds);

  // cache off: same bytes
  REQUIRE(cli("--config " + config.string() + " --no-cache").code == 0);
  CHECK(slurp(out) == csv);

  // a corrupt entry is evicted and recomputed to the same value
  const fs::path victim = fs::directory_iterator(cache)->path();
  std::ofstream(victim, std::ios::trunc) << "garbage\n";
  const Run third = cli("--config " + config.string());
  REQUIRE(third.code == 0);
  CHECK(third.err.find("1 evicted") != std::string::npos);
  CHECK(slurp(out) == csv);

  // the seed is part of the key
  REQUIRE(cli("--config " + config.string() + " --seed 7").code == 0);
  CHECK(count_files(cache) == 2 * entries);
}

TEST_CASE("json output and sweeps") {
  const nlohmann::json cfg{{"command", "rayleigh"},
                           {"params", {{"n", 1}, {"s", {0.25, 0.4}}}},
                           {"trial", {{"kind", "gaussian"}, {"center", {0.3, 0.0, 0.0}}}},
                           {"operators", {"Dirichlet", "Restricted"}}};
  const fs::path config = write_config("rayleigh.json", cfg);
  const Run a = cli("--config " + config.string() + " --format json");
  REQUIRE(a.code == 0);
  const auto j = nlohmann::json::parse(a.out);
  CHECK(j.at("command") == "rayleigh");
  REQUIRE(j.at("rows").size() == 4);
  CHECK(j.at("rows")[0].at("weight_sigma").is_null());
  CHECK(j.at("rows")[3].at("s") == 0.4);
  CHECK(j.at("rows")[3].at("operator") == "Restricted");
  CHECK(j.at("rows")[1].at("quotient").get<double>() < j.at("rows")[0].at("quotient").get<double>());
  CHECK(cli("--config " + config.string() + " --format json").out == a.out);
}
