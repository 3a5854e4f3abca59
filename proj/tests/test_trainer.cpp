#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"

#include "discore/checkpoint.hpp"
#include "discore/errors.hpp"
#include "discore/rng.hpp"
#include "discore/state_space.hpp"
#include "discore/trainer.hpp"

using namespace discore;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir() {
  const fs::path dir = fs::temp_directory_path() / "discore_trainer_test";
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("dataset drawing: determinism, frequencies, guards") {
  const StateSpace sp(3, 2);
  std::vector<double> raw(sp.table_size());
  Rng mk(88);
  for (double& v : raw) v = mk.uniform(0.2, 1.0);
  DistTable p0(sp, std::move(raw));
  p0.renormalize();

  Rng r1(1234), r2(1234);
  const Dataset a = draw_dataset(p0, 5000, r1);
  const Dataset b = draw_dataset(p0, 5000, r2);
  REQUIRE(a.rows.size() == 5000);
  CHECK(a.rows == b.rows);

  DistTable emp(sp, std::vector<double>(sp.table_size(), 0.0));
  for (const auto& row : a.rows) emp.p[index_of(sp, row)] += 1.0 / 5000.0;
  CHECK(tv_distance(emp, p0) < 0.03);  // mean TV noise at n=5000 over 9 states is ~0.016

  Rng r3(1);
  CHECK_THROWS_AS(draw_dataset(p0, 0, r3), ConfigError);
  CHECK_THROWS_AS(draw_dataset(p0, -5, r3), ConfigError);

  DistTable point = DistTable::delta(sp, {2, 1});
  Rng r4(9);
  const Dataset d = draw_dataset(point, 64, r4);
  for (const auto& row : d.rows) CHECK(row == StateVector{2, 1});
}

TEST_CASE("dataset file round-trip is bitwise stable and rejects malformed rows") {
  const fs::path dir = scratch_dir();
  const StateSpace sp(3, 2);
  DistTable p0 = DistTable::uniform(sp);
  Rng rng(555);
  const Dataset ds = draw_dataset(p0, 257, rng);

  const std::string path1 = (dir / "ds1.txt").string();
  const std::string path2 = (dir / "ds2.txt").string();
  write_dataset(ds, path1);
  const Dataset back = read_dataset(path1, sp);
  CHECK(back.rows == ds.rows);
  write_dataset(back, path2);
  std::ifstream f1(path1, std::ios::binary), f2(path2, std::ios::binary);
  const std::string c1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
  const std::string c2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
  CHECK(c1 == c2);

  const std::string bad = (dir / "bad.txt").string();
  {
    std::ofstream out(bad);
    out << "0 1\n2 7\n";  // symbol 7 out of range for S=3
  }
  CHECK_THROWS_AS(read_dataset(bad, sp), ConfigError);
  try {
    read_dataset(bad, sp);
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("2") != std::string::npos);  // line number
  }
  {
    std::ofstream out(bad);
    out << "0 1 2\n";  // too many columns for d=2
  }
  CHECK_THROWS_AS(read_dataset(bad, sp), ConfigError);
  CHECK_THROWS_AS(read_dataset((dir / "missing.txt").string(), sp), ConfigError);
}

TEST_CASE("bound resolution prefers the analytic law and falls back to smoothed counts") {
  const StateSpace sp(2, 1);
  const DistTable p0(sp, {0.8, 0.2});
  const ScoreBoundReport analytic = resolve_bound(&p0, nullptr);
  CHECK(analytic.B == doctest::Approx(4.0).epsilon(1e-12));
  CHECK(analytic.C == doctest::Approx(6.0).epsilon(1e-12));

  // Counts 3,1 gain the floor alpha/S^d = 0.5 each: law (3.5, 1.5)/5.
  Dataset ds{sp, {{0}, {0}, {0}, {1}}};
  const ScoreBoundReport emp = resolve_bound(nullptr, &ds);
  CHECK(emp.B == doctest::Approx(7.0 / 3.0).epsilon(1e-12));
  CHECK(emp.C == doctest::Approx(3.5).epsilon(1e-12));

  const ScoreBoundReport both = resolve_bound(&p0, &ds);
  CHECK(both.B == doctest::Approx(4.0).epsilon(1e-12));  // analytic wins

  CHECK_THROWS_AS(resolve_bound(nullptr, nullptr), ConfigError);
}

TEST_CASE("training log has one row per update with times inside each interval") {
  RunConfig cfg;
  cfg.S = 2;
  cfg.d = 1;
  cfg.T = 1.0;
  cfg.h = 0.25;
  cfg.K = 4;
  cfg.epochs = 3;
  cfg.n_k = 100;
  cfg.batch = 32;
  cfg.width = 8;
  cfg.depth = 2;
  cfg.eta = 0.05;
  cfg.seed_dataset = 11;
  cfg.seed_train = 12;
  cfg.validate();

  const StateSpace sp(cfg.S, cfg.d);
  const DistTable p0(sp, {0.75, 0.25});
  Rng drng(cfg.seed_dataset);
  const Dataset ds = draw_dataset(p0, cfg.n_k, drng);
  const TrainResult res = train(ds, cfg, 4.5);

  const int updates_per_k = 4;  // ceil(100/32)
  REQUIRE(static_cast<int>(res.log.size()) == cfg.epochs * cfg.K * updates_per_k);
  REQUIRE(static_cast<int>(res.nets.size()) == cfg.K);
  for (size_t i = 0; i < res.log.size(); ++i) {
    const LogRow& row = res.log[i];
    const int expect_epoch = static_cast<int>(i) / (cfg.K * updates_per_k);
    const int expect_k = (static_cast<int>(i) % (cfg.K * updates_per_k)) / updates_per_k;
    CHECK(row.epoch == expect_epoch);
    CHECK(row.k == expect_k);
    CHECK(row.t_drawn > cfg.h * row.k);
    CHECK(row.t_drawn <= cfg.h * (row.k + 1) + 1e-15);
    CHECK(std::isfinite(row.loss));
  }
  for (int k = 0; k < cfg.K; ++k) {
    CHECK(res.nets[k].query_time ==
          doctest::Approx(cfg.h * (k + 1) + cfg.delta).epsilon(1e-15));
    CHECK(res.nets[k].clip_bound == 4.5);
  }

  // Bitwise determinism under identical seeds.
  const TrainResult res2 = train(ds, cfg, 4.5);
  REQUIRE(res2.nets.size() == res.nets.size());
  for (size_t k = 0; k < res.nets.size(); ++k) {
    CHECK(res.nets[k].w == res2.nets[k].w);
    CHECK(res.nets[k].b == res2.nets[k].b);
  }
  REQUIRE(res2.log.size() == res.log.size());
  for (size_t i = 0; i < res.log.size(); ++i) {
    CHECK(res.log[i].t_drawn == res2.log[i].t_drawn);
    CHECK(res.log[i].loss == res2.log[i].loss);
  }

  // Zero epochs keeps the freshly initialized networks and an empty log.
  RunConfig zero = cfg;
  zero.epochs = 0;
  const TrainResult init_only = train(ds, zero, 4.5);
  CHECK(init_only.log.empty());
  REQUIRE(static_cast<int>(init_only.nets.size()) == cfg.K);
  for (int k = 0; k < cfg.K; ++k) {
    const ScoreNet fresh = net_init(cfg.S, cfg.d, cfg.width, cfg.depth, 4.5,
                                    cfg.h * (k + 1) + cfg.delta,
                                    derive_seed(cfg.seed_train, 2 * k));
    CHECK(init_only.nets[k].w == fresh.w);
    CHECK(init_only.nets[k].b == fresh.b);
  }
}

TEST_CASE("a divergent learning rate aborts with a numeric error") {
  RunConfig cfg;
  cfg.S = 2;
  cfg.d = 1;
  cfg.T = 0.5;
  cfg.h = 0.5;
  cfg.K = 1;
  cfg.epochs = 5;
  cfg.n_k = 64;
  cfg.batch = 32;
  cfg.width = 8;
  cfg.eta = 1e8;
  cfg.validate();
  const StateSpace sp(2, 1);
  DistTable p0 = DistTable::uniform(sp);
  Rng rng(3);
  const Dataset ds = draw_dataset(p0, cfg.n_k, rng);
  CHECK_THROWS_AS(train(ds, cfg, 3.0), NumericError);
}

TEST_CASE("checkpoint round-trip preserves everything; tampering is rejected") {
  const fs::path dir = scratch_dir();
  const ScoreNet net = net_init(3, 2, 8, 3, 2.5, 1.2, 777);
  const std::string path = (dir / checkpoint_name(2)).string();
  CHECK(checkpoint_name(2) == "net_002.ckpt");
  save_checkpoint(net, 6, 2, path);

  int K = 0, k = -1;
  const ScoreNet back = load_checkpoint(path, &K, &k);
  CHECK(K == 6);
  CHECK(k == 2);
  CHECK(back.S == net.S);
  CHECK(back.d == net.d);
  CHECK(back.width == net.width);
  CHECK(back.depth == net.depth);
  CHECK(back.clip_bound == net.clip_bound);
  CHECK(back.query_time == net.query_time);
  CHECK(back.init_seed == net.init_seed);
  CHECK(back.w == net.w);
  CHECK(back.b == net.b);

  // Save-load-save is bitwise stable.
  const std::string path2 = (dir / "again.ckpt").string();
  save_checkpoint(back, K, k, path2);
  std::ifstream f1(path, std::ios::binary), f2(path2, std::ios::binary);
  const std::string c1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
  const std::string c2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
  CHECK(c1 == c2);

  const auto write_bytes = [&](const std::string& dst, const std::string& bytes) {
    std::ofstream out(dst, std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  };
  const std::string tampered = (dir / "tampered.ckpt").string();

  std::string bad_magic = c1;
  bad_magic[0] = 'X';
  write_bytes(tampered, bad_magic);
  CHECK_THROWS_AS(load_checkpoint(tampered), CheckpointError);

  std::string bad_version = c1;
  bad_version[8] = 9;  // version field follows the 8-byte magic
  write_bytes(tampered, bad_version);
  CHECK_THROWS_AS(load_checkpoint(tampered), CheckpointError);

  write_bytes(tampered, c1.substr(0, 16));
  CHECK_THROWS_AS(load_checkpoint(tampered), CheckpointError);

  write_bytes(tampered, c1.substr(0, c1.size() - 8));
  CHECK_THROWS_AS(load_checkpoint(tampered), CheckpointError);

  write_bytes(tampered, c1 + std::string(4, '\0'));
  CHECK_THROWS_AS(load_checkpoint(tampered), CheckpointError);

  CHECK_THROWS_AS(load_checkpoint((dir / "nope.ckpt").string()), CheckpointError);
}

TEST_CASE("training log file round-trip is bitwise stable") {
  const fs::path dir = scratch_dir();
  std::vector<LogRow> rows = {
      {0, 0, 0.12345678901234567, 1.5},
      {0, 1, 0.9999999999999999, 0.75},
      {1, 0, 0.25, 0.6000000000000001},
  };
  const std::string path1 = (dir / "log1.csv").string();
  const std::string path2 = (dir / "log2.csv").string();
  write_train_log(rows, path1);
  const std::vector<LogRow> back = read_train_log(path1);
  REQUIRE(back.size() == rows.size());
  for (size_t i = 0; i < rows.size(); ++i) {
    CHECK(back[i].epoch == rows[i].epoch);
    CHECK(back[i].k == rows[i].k);
    CHECK(back[i].t_drawn == rows[i].t_drawn);
    CHECK(back[i].loss == rows[i].loss);
  }
  write_train_log(back, path2);
  std::ifstream f1(path1, std::ios::binary), f2(path2, std::ios::binary);
  const std::string c1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
  const std::string c2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
  CHECK(c1 == c2);
  CHECK_THROWS_AS(read_train_log((dir / "absent.csv").string()), ConfigError);
}

TEST_CASE("config validation rejects inconsistent geometry and bad knobs") {
  RunConfig cfg;
  CHECK_NOTHROW(cfg.validate());  // defaults are consistent

  RunConfig bad = cfg;
  bad.T = 2.0;  // K*h + delta = 2.5
  CHECK_THROWS_AS(bad.validate(), ConfigError);

  bad = cfg;
  bad.clip = 1.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad.clip = 1.5;
  CHECK_NOTHROW(bad.validate());

  bad = cfg;
  bad.batch = 2000;  // exceeds n_k
  CHECK_THROWS_AS(bad.validate(), ConfigError);

  bad = cfg;
  bad.S = 1;
  CHECK_THROWS_AS(bad.validate(), ConfigError);

  bad = cfg;
  bad.delta = -0.1;
  CHECK_THROWS_AS(bad.validate(), ConfigError);

  bad = cfg;
  bad.h = 0.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}
