#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <array>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"

#include "discore/config.hpp"
#include "discore/errors.hpp"
#include "discore/state_space.hpp"
#include "discore/trainer.hpp"

using namespace discore;
namespace fs = std::filesystem;

namespace {

struct CmdResult {
  int code = -1;
  std::string output;
};

CmdResult run_cmd(const std::string& cmd) {
  CmdResult res;
  FILE* pipe = popen((cmd + " 2>&1").c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::array<char, 4096> buf;
  while (fgets(buf.data(), static_cast<int>(buf.size()), pipe) != nullptr) {
    res.output += buf.data();
  }
  const int status = pclose(pipe);
  res.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return res;
}

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

std::string binary_path() {
  const char* bin = std::getenv("DISCORE_BIN");
  REQUIRE_MESSAGE(bin != nullptr,
                  "DISCORE_BIN must point at the CLI binary (ctest sets it)");
  return bin;
}

fs::path fresh_dir(const std::string& leaf) {
  const fs::path dir = fs::temp_directory_path() /
                       ("discore_cli_test_" + std::to_string(::getpid())) / leaf;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string file_bytes(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  REQUIRE_MESSAGE(f.good(), ("missing file: " + p.string()).c_str());
  return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

std::string tiny_cfg_text() {
  return "S = 2\nd = 1\nT = 1.0\nh = 0.5\nK = 2\nepochs = 2\nn_k = 64\n"
         "batch = 32\nwidth = 8\ndepth = 2\neta = 0.05\np0 = product:0.7,0.3\n"
         "n_samples = 200\nseed_dataset = 1\nseed_train = 2\nseed_sample = 3\n";
}

}  // namespace

TEST_CASE("config keys cover every runtime knob exactly once") {
  const std::vector<std::string>& keys = config_keys();
  CHECK(keys.size() == 27);
  for (const std::string& key : keys) {
    CHECK(std::count(keys.begin(), keys.end(), key) == 1);
  }
}

TEST_CASE("assignments parse scalars, lists, and reject unknowns") {
  RunConfig cfg;
  apply_assignment("S=3", cfg);
  CHECK(cfg.S == 3);
  apply_assignment("eta = 0.125", cfg);
  CHECK(cfg.eta == 0.125);
  apply_assignment("sweep_n=10,100,1000", cfg);
  CHECK(cfg.sweep_n == std::vector<int64_t>{10, 100, 1000});
  apply_assignment("sweep_seeds=7,8", cfg);
  CHECK(cfg.sweep_seeds == std::vector<uint64_t>{7, 8});
  apply_assignment("hardness_eps=0.001,0.002", cfg);
  CHECK(cfg.hardness_eps == std::vector<double>{0.001, 0.002});
  apply_assignment("suites=state_process,cli", cfg);
  CHECK(cfg.suites == "state_process,cli");
  apply_assignment("p0=delta:1", cfg);
  CHECK(cfg.p0 == "delta:1");
  apply_assignment("jump_trace=1", cfg);
  CHECK(cfg.jump_trace);
  apply_assignment("jump_trace=0", cfg);
  CHECK_FALSE(cfg.jump_trace);

  CHECK_THROWS_AS(apply_assignment("bogus=1", cfg), ConfigError);
  CHECK_THROWS_AS(apply_assignment("S=three", cfg), ConfigError);
  CHECK_THROWS_AS(apply_assignment("S=", cfg), ConfigError);
  CHECK_THROWS_AS(apply_assignment("no_equals", cfg), ConfigError);
  try {
    apply_assignment("bogus=1", cfg);
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("valid keys") != std::string::npos);
  }
}

TEST_CASE("config files accept comments and whitespace, report bad lines") {
  const fs::path dir = fresh_dir("cfgfile");
  const fs::path good = dir / "good.cfg";
  {
    std::ofstream f(good);
    f << "# leading comment\n\n  S = 3   \nd=2\neta = 0.25  # trailing comment\n";
  }
  RunConfig cfg;
  load_config_file(good.string(), cfg);
  CHECK(cfg.S == 3);
  CHECK(cfg.d == 2);
  CHECK(cfg.eta == 0.25);

  const fs::path bad = dir / "bad.cfg";
  {
    std::ofstream f(bad);
    f << "S = 2\nwhatever = 1\n";
  }
  CHECK_THROWS_AS(load_config_file(bad.string(), cfg), ConfigError);
  try {
    load_config_file(bad.string(), cfg);
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
  CHECK_THROWS_AS(load_config_file((dir / "absent.cfg").string(), cfg), ConfigError);
}

TEST_CASE("data-law specifications cover all four forms") {
  const StateSpace sp(3, 2);
  const DistTable uni = parse_p0("uniform", sp);
  for (double v : uni.p) CHECK(v == doctest::Approx(1.0 / 9.0).epsilon(1e-15));

  const DistTable point = parse_p0("delta:2,1", sp);
  CHECK(point.p[index_of(sp, {2, 1})] == 1.0);

  // One group broadcasts to every coordinate.
  const DistTable prod = parse_p0("product:0.5,0.3,0.2", sp);
  CHECK(prod.p[index_of(sp, {0, 0})] == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(prod.p[index_of(sp, {1, 2})] == doctest::Approx(0.06).epsilon(1e-12));

  const DistTable two = parse_p0("product:0.5,0.3,0.2;0.2,0.2,0.6", sp);
  CHECK(two.p[index_of(sp, {0, 2})] == doctest::Approx(0.30).epsilon(1e-12));

  const fs::path dir = fresh_dir("p0table");
  const fs::path table = dir / "p.txt";
  {
    std::ofstream f(table);
    for (int i = 0; i < 9; ++i) f << (i + 1) << "\n";
  }
  const DistTable fromfile = parse_p0("table:" + table.string(), sp);
  CHECK(fromfile.p[8] == doctest::Approx(9.0 / 45.0).epsilon(1e-12));

  CHECK_THROWS_AS(parse_p0("delta:5,0", sp), ConfigError);       // symbol range
  CHECK_THROWS_AS(parse_p0("delta:1", sp), ConfigError);         // wrong arity
  CHECK_THROWS_AS(parse_p0("product:0.5,0.5", sp), ConfigError); // S mismatch
  CHECK_THROWS_AS(parse_p0("product:1,1,1;1,1", sp), ConfigError);
  CHECK_THROWS_AS(parse_p0("product:-1,1,1", sp), ConfigError);  // negative weight
  CHECK_THROWS_AS(parse_p0("gibberish", sp), ConfigError);
  CHECK_THROWS_AS(parse_p0("table:/nonexistent/table.txt", sp), ConfigError);
}

TEST_CASE("command line: help and argument errors") {
  const std::string bin = binary_path();
  CHECK(run_cmd(bin + " --help").code == 0);
  CHECK(run_cmd(bin + " train --help").code == 0);
  CHECK(run_cmd(bin + " no_such_command").code == 2);
  CHECK(run_cmd(bin).code == 2);  // a subcommand is required

  const CmdResult bogus = run_cmd(bin + " train --set bogus=1 --out " +
                                  q(fresh_dir("bogus")));
  CHECK(bogus.code == 2);
  CHECK(bogus.output.find("error:") != std::string::npos);

  const CmdResult missing_ds =
      run_cmd(bin + " train --set dataset=/nonexistent/rows.txt --out " +
              q(fresh_dir("missing_ds")));
  CHECK(missing_ds.code == 2);
}

TEST_CASE("train, sample, evaluate round-trip deterministically") {
  const std::string bin = binary_path();
  const fs::path dir1 = fresh_dir("run1");
  const fs::path dir2 = fresh_dir("run2");
  const fs::path cfg = fresh_dir("cfg") / "tiny.cfg";
  {
    std::ofstream f(cfg);
    f << tiny_cfg_text();
  }

  for (const fs::path& dir : {dir1, dir2}) {
    const CmdResult r = run_cmd(bin + " train --config " + q(cfg) + " --out " + q(dir));
    CHECK_MESSAGE(r.code == 0, r.output.c_str());
  }
  for (const char* name : {"dataset.txt", "net_000.ckpt", "net_001.ckpt", "train_log.csv"}) {
    CHECK_MESSAGE(file_bytes(dir1 / name) == file_bytes(dir2 / name), name);
  }

  for (const fs::path& dir : {dir1, dir2}) {
    const CmdResult r = run_cmd(bin + " sample --config " + q(cfg) + " --out " + q(dir));
    CHECK_MESSAGE(r.code == 0, r.output.c_str());
  }
  const std::string samples = file_bytes(dir1 / "samples.txt");
  CHECK(samples == file_bytes(dir2 / "samples.txt"));
  CHECK(std::count(samples.begin(), samples.end(), '\n') == 200);

  // n_samples = 0 still succeeds and writes an empty file.
  const CmdResult zero = run_cmd(bin + " sample --config " + q(cfg) +
                                 " --set n_samples=0 --out " + q(dir1));
  CHECK(zero.code == 0);
  CHECK(file_bytes(dir1 / "samples.txt").empty());

  const CmdResult ev = run_cmd(bin + " evaluate --config " + q(cfg) + " --out " + q(dir2));
  CHECK_MESSAGE(ev.code == 0, ev.output.c_str());
  const nlohmann::json metrics = nlohmann::json::parse(file_bytes(dir2 / "metrics.json"));
  CHECK(metrics.at("S").get<int>() == 2);
  CHECK(metrics.at("K").get<int>() == 2);
  CHECK(metrics.at("error_terms").size() == 2);
  CHECK(metrics.at("kl").get<double>() >= 0.0);
  CHECK(fs::exists(dir2 / "error_terms.csv"));

  // evaluate without checkpoints or the oracle flag is a checkpoint error.
  const CmdResult nockpt = run_cmd(bin + " evaluate --config " + q(cfg) + " --out " +
                                   q(fresh_dir("empty")));
  CHECK(nockpt.code == 4);
}

TEST_CASE("oracle-backed evaluate recovers uniform data essentially exactly") {
  const std::string bin = binary_path();
  const fs::path dir = fresh_dir("oracle_eval");
  const CmdResult r = run_cmd(
      bin +
      " evaluate --set S=2 --set d=1 --set T=6.0 --set h=0.5 --set K=12"
      " --set p0=uniform --set oracle_scores=1 --out " +
      q(dir));
  CHECK_MESSAGE(r.code == 0, r.output.c_str());
  const nlohmann::json metrics = nlohmann::json::parse(file_bytes(dir / "metrics.json"));
  CHECK(metrics.at("oracle_scores").get<bool>());
  CHECK(metrics.at("kl").get<double>() < 1e-3);
  CHECK(metrics.at("truncation").at("kl").get<double>() < 1e-12);
  CHECK(metrics.at("mean_score_err").get<double>() < 1e-8);
}

TEST_CASE("hardness grid subcommand writes the table and respects the window") {
  const std::string bin = binary_path();
  const fs::path dir = fresh_dir("hardness");
  const CmdResult ok = run_cmd(bin + " hardness --set hardness_eps=0.001,0.01,0.039 --out " +
                               q(dir));
  CHECK_MESSAGE(ok.code == 0, ok.output.c_str());
  const std::string csv = file_bytes(dir / "hardness.csv");
  CHECK(csv.rfind("eps,kl,h2,lower,pass", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);

  const CmdResult bad = run_cmd(bin + " hardness --set hardness_eps=0.05 --out " +
                                q(fresh_dir("hardness_bad")));
  CHECK(bad.code == 2);
}
