// Command-line entry point: train / sample / evaluate / verify / sweep /
// hardness subcommands over the discore library.
//
// Exit codes (stable contract): 0 success, 1 verify or invariant failure,
// 2 config error, 3 numeric abort, 4 checkpoint mismatch, 5 enumeration cap.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "discore/bregman.hpp"
#include "discore/checkpoint.hpp"
#include "discore/config.hpp"
#include "discore/diagnostics.hpp"
#include "discore/errors.hpp"
#include "discore/forward.hpp"
#include "discore/rng.hpp"
#include "discore/sampler.hpp"
#include "discore/score.hpp"
#include "discore/score_net.hpp"
#include "discore/state_space.hpp"
#include "discore/trainer.hpp"
#include "discore/verify.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace discore;

namespace {

struct Options {
  std::string config_path;
  std::vector<std::string> sets;
  std::string out_dir;
  uint64_t seed = 0;
  bool seed_given = false;
  int jobs = 0;
};

RunConfig build_config(const Options& opt) {
  RunConfig cfg;
  if (!opt.config_path.empty()) load_config_file(opt.config_path, cfg);
  if (opt.seed_given) {
    // One root seed fans out into the three named streams; explicit --set
    // overrides still win since they are applied afterwards.
    cfg.seed_dataset = derive_seed(opt.seed, 1);
    cfg.seed_train = derive_seed(opt.seed, 2);
    cfg.seed_sample = derive_seed(opt.seed, 3);
  }
  for (const std::string& s : opt.sets) apply_assignment(s, cfg);
  return cfg;
}

fs::path ensure_out_dir(const Options& opt) {
  if (opt.out_dir.empty()) throw ConfigError("an output directory is required (--out <dir>)");
  fs::path dir(opt.out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec && !fs::is_directory(dir)) {
    throw ConfigError("cannot create output directory " + dir.string());
  }
  return dir;
}

std::string self_executable(const char* argv0) {
  std::error_code ec;
  const fs::path link = fs::read_symlink("/proc/self/exe", ec);
  if (!ec) return link.string();
  return argv0 ? argv0 : "";
}

void write_plot(const fs::path& path, const std::string& comment,
                const std::vector<std::pair<double, double>>& rows) {
  std::ofstream f(path);
  if (!f) throw ConfigError("cannot open " + path.string());
  f << "# " << comment << "\n";
  char buf[80];
  for (const auto& [x, y] : rows) {
    std::snprintf(buf, sizeof buf, "%.17g %.17g\n", x, y);
    f << buf;
  }
}

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// --- train -------------------------------------------------------------------

int cmd_train(const Options& opt) {
  RunConfig cfg = build_config(opt);
  const fs::path out = ensure_out_dir(opt);

  const StateSpace sp(cfg.S, cfg.d);
  Dataset ds{sp, {}};
  DistTable p0;
  bool analytic = false;
  if (!cfg.dataset.empty()) {
    ds = read_dataset(cfg.dataset, sp);
    cfg.n_k = static_cast<int64_t>(ds.rows.size());
  } else {
    cfg.validate();
    p0 = parse_p0(cfg.p0, sp);
    analytic = true;
    Rng rng(cfg.seed_dataset);
    ds = draw_dataset(p0, cfg.n_k, rng);
  }
  cfg.validate();

  const ScoreBoundReport bound = resolve_bound(analytic ? &p0 : nullptr, &ds);
  const double C = cfg.clip > 0.0 ? cfg.clip : bound.C;
  std::printf("train: %zu samples, S=%d d=%d K=%d h=%g delta=%g\n", ds.rows.size(), cfg.S,
              cfg.d, cfg.K, cfg.h, cfg.delta);
  std::printf("train: score bound B=%.6g (%s), clip C=%.6g (%s)\n", bound.B,
              analytic ? "analytic data law" : "smoothed empirical law", C,
              cfg.clip > 0.0 ? "explicit" : "1.5*B policy");

  const TrainResult res = train(ds, cfg, C);

  if (analytic) write_dataset(ds, (out / "dataset.txt").string());
  for (int k = 0; k < cfg.K; ++k) {
    save_checkpoint(res.nets[k], cfg.K, k, (out / checkpoint_name(k)).string());
  }
  write_train_log(res.log, (out / "train_log.csv").string());

  const int64_t updates = (cfg.n_k + cfg.batch - 1) / cfg.batch;
  for (int k = 0; k < cfg.K; ++k) {
    double first = 0.0, last = 0.0;
    int nf = 0, nl = 0;
    for (const LogRow& row : res.log) {
      if (row.k != k) continue;
      if (row.epoch == 0) first += row.loss, ++nf;
      if (row.epoch == cfg.epochs - 1) last += row.loss, ++nl;
    }
    std::printf("train: interval %d (t'=%.6g): mean loss %.6f -> %.6f over %d epochs\n", k,
                (k + 1) * cfg.h + cfg.delta, nf ? first / nf : 0.0, nl ? last / nl : 0.0,
                cfg.epochs);
  }
  std::printf("train: wrote %d checkpoints and %zu log rows (%lld updates per interval)\n",
              cfg.K, res.log.size(), static_cast<long long>(updates * cfg.epochs));
  return 0;
}

// --- sample ------------------------------------------------------------------

std::vector<ScoreNet> load_checkpoint_set(const RunConfig& cfg, const fs::path& dir) {
  std::vector<ScoreNet> nets;
  nets.reserve(cfg.K);
  double clip0 = 0.0;
  for (int k = 0; k < cfg.K; ++k) {
    const fs::path path = dir / checkpoint_name(k);
    int K_stored = 0, k_stored = 0;
    ScoreNet net = load_checkpoint(path.string(), &K_stored, &k_stored);
    if (K_stored != cfg.K || k_stored != k) {
      throw CheckpointError(path.string() + ": stored interval (K=" +
                            std::to_string(K_stored) + ", k=" + std::to_string(k_stored) +
                            ") does not match the run (K=" + std::to_string(cfg.K) +
                            ", k=" + std::to_string(k) + ")");
    }
    if (net.S != cfg.S || net.d != cfg.d) {
      throw CheckpointError(path.string() + ": state space (S=" + std::to_string(net.S) +
                            ", d=" + std::to_string(net.d) + ") does not match the config");
    }
    const double t_prime = (k + 1) * cfg.h + cfg.delta;
    if (std::fabs(net.query_time - t_prime) > 1e-9) {
      throw CheckpointError(path.string() + ": frozen query time " +
                            std::to_string(net.query_time) + " does not match (k+1)h+delta = " +
                            std::to_string(t_prime));
    }
    if (k == 0) {
      clip0 = net.clip_bound;
    } else if (net.clip_bound != clip0) {
      throw CheckpointError(path.string() + ": clip bound differs across the checkpoint set");
    }
    nets.push_back(std::move(net));
  }
  return nets;
}

int cmd_sample(const Options& opt) {
  const RunConfig cfg = build_config(opt);
  cfg.validate();
  const fs::path out = ensure_out_dir(opt);

  const std::vector<ScoreNet> nets = load_checkpoint_set(cfg, out);
  const std::vector<IntervalModel> models = build_reverse_models(nets);
  SamplerConfig scfg;
  scfg.K = cfg.K;
  scfg.h = cfg.h;
  scfg.delta = cfg.delta;
  scfg.poisson_guard = cfg.poisson_guard;
  scfg.tail_cutoff = cfg.tail_cutoff;

  for (int k = 0; k < cfg.K; ++k) {
    std::printf("sample: interval %d: lambda_raw=%.6g (%s), effective rate %.6g\n", k,
                models[k].lambda_raw, models[k].lambda_exact ? "exact max" : "C*d*(S-1) bound",
                models[k].lambda_raw / cfg.S);
  }

  Rng rng(cfg.seed_sample);
  Dataset samples{StateSpace(cfg.S, cfg.d), {}};
  samples.rows.reserve(static_cast<size_t>(cfg.n_samples));
  std::vector<JumpRecord> trace;
  for (int64_t i = 0; i < cfg.n_samples; ++i) {
    samples.rows.push_back(sample_reverse(models, scfg, rng, cfg.jump_trace ? &trace : nullptr));
  }
  write_dataset(samples, (out / "samples.txt").string());
  if (cfg.jump_trace) write_jump_trace(trace, (out / "jump_trace.csv").string());
  std::printf("sample: wrote %lld states to samples.txt%s\n",
              static_cast<long long>(cfg.n_samples),
              cfg.jump_trace ? " and the per-interval jump trace" : "");
  return 0;
}

// --- evaluate ----------------------------------------------------------------

int cmd_evaluate(const Options& opt) {
  const RunConfig cfg = build_config(opt);
  cfg.validate();
  const fs::path out = ensure_out_dir(opt);

  const StateSpace sp(cfg.S, cfg.d);
  try {
    sp.table_size();
  } catch (const CapError& e) {
    throw CapError(std::string(e.what()) +
                   "; exact evaluation needs dense enumeration -- use the sample "
                   "subcommand and compare histograms instead");
  }
  const DistTable p0 = parse_p0(cfg.p0, sp);
  const double B = score_bound(p0).B;

  std::vector<ScoreNet> nets;
  if (cfg.oracle_scores) {
    const double C = cfg.clip > 0.0 ? cfg.clip : 1.5 * B;
    for (int k = 0; k < cfg.K; ++k) {
      const double t_prime = (k + 1) * cfg.h + cfg.delta;
      nets.push_back(oracle_net(true_score(p0, t_prime), t_prime, C,
                                derive_seed(cfg.seed_train, 1000 + static_cast<uint64_t>(k))));
    }
  } else {
    nets = load_checkpoint_set(cfg, out);
  }
  const double C = nets[0].clip_bound;

  std::vector<ErrorTerms> terms;
  terms.reserve(cfg.K);
  double mean_a = 0.0;
  for (int k = 0; k < cfg.K; ++k) {
    terms.push_back(error_terms(p0, nets[k], k, cfg.h, cfg.delta));
    mean_a += terms.back().a / cfg.K;
  }
  const TruncationReport trunc = truncation_error(p0, cfg.T);
  const DiscretizationReport disc = discretization_gap(p0, nets, cfg.K, cfg.h, cfg.delta);

  const std::vector<IntervalModel> models = build_reverse_models(nets);
  SamplerConfig scfg;
  scfg.K = cfg.K;
  scfg.h = cfg.h;
  scfg.delta = cfg.delta;
  scfg.poisson_guard = cfg.poisson_guard;
  scfg.tail_cutoff = cfg.tail_cutoff;
  const DistTable out_law = exact_reverse_marginal(models, scfg);
  const double kl = kl_divergence(p0, out_law);

  {
    std::ofstream f(out / "error_terms.csv");
    if (!f) throw ConfigError("cannot open " + (out / "error_terms.csv").string());
    f << "k,A_k,B_k,C_k\n";
    char buf[160];
    for (int k = 0; k < cfg.K; ++k) {
      std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g\n", k, terms[k].a, terms[k].b,
                    terms[k].c);
      f << buf;
    }
  }
  {
    std::vector<std::pair<double, double>> rows;
    for (int k = 0; k < cfg.K; ++k) rows.push_back({(k + 1) * cfg.h + cfg.delta, terms[k].a});
    write_plot(out / "plot_error_terms.dat", "frozen query time t'_k vs A_k", rows);
  }

  json metrics;
  metrics["S"] = cfg.S;
  metrics["d"] = cfg.d;
  metrics["K"] = cfg.K;
  metrics["h"] = cfg.h;
  metrics["delta"] = cfg.delta;
  metrics["T"] = cfg.T;
  metrics["B"] = B;
  metrics["C"] = C;
  metrics["oracle_scores"] = cfg.oracle_scores;
  metrics["kl"] = kl;
  metrics["truncation"] = {{"kl", trunc.kl}, {"bound", trunc.bound}};
  metrics["discretization"] = {
      {"ct", disc.ct}, {"dt", disc.dt}, {"gap", disc.gap}, {"bound", disc.bound}};
  json term_rows = json::array();
  for (int k = 0; k < cfg.K; ++k) {
    term_rows.push_back({{"k", k},
                         {"t_prime", (k + 1) * cfg.h + cfg.delta},
                         {"A_k", terms[k].a},
                         {"B_k", terms[k].b},
                         {"C_k", terms[k].c}});
  }
  metrics["error_terms"] = term_rows;
  metrics["mean_score_err"] = mean_a;
  {
    std::ofstream f(out / "metrics.json");
    if (!f) throw ConfigError("cannot open " + (out / "metrics.json").string());
    f << metrics.dump(2) << "\n";
  }

  std::printf("evaluate: KL(p_data || output law) = %.8g\n", kl);
  std::printf("evaluate: truncation kl %.8g (ceiling %.8g)\n", trunc.kl, trunc.bound);
  std::printf("evaluate: discretization ct %.8g dt %.8g gap %.3g (ceiling %.3g)\n", disc.ct,
              disc.dt, disc.gap, disc.bound);
  std::printf("evaluate: mean A_k %.8g over %d intervals; wrote metrics.json, "
              "error_terms.csv, plot_error_terms.dat\n",
              mean_a, cfg.K);

  // Exit-time audit of the error-terms invariants (a <= 4b needs the truth
  // inside the clip range, guaranteed under the 1.5*B policy).
  for (int k = 0; k < cfg.K; ++k) {
    const ErrorTerms& e = terms[k];
    const bool truth_in_range = C >= B;
    if (e.c > e.b + 1e-9 || e.a > 2 * e.b + 2 * e.c + 1e-9 ||
        (truth_in_range && e.a > 4 * e.b + 1e-9)) {
      std::fprintf(stderr,
                   "error: interval %d violates the error-terms invariants "
                   "(A=%.6g B=%.6g C=%.6g)\n",
                   k, e.a, e.b, e.c);
      return 1;
    }
  }
  return 0;
}

// --- verify ------------------------------------------------------------------

int cmd_verify(const Options& opt, const std::string& self_path) {
  // No validate() here: verify runs on fixed internal fixtures and reads the
  // config only for its injection points (clip, suites).
  const RunConfig cfg = build_config(opt);
  std::vector<std::string> which;
  if (!cfg.suites.empty()) {
    std::string cur;
    for (char c : cfg.suites + ",") {
      if (c == ',') {
        if (!cur.empty()) which.push_back(cur);
        cur.clear();
      } else if (!std::isspace(static_cast<unsigned char>(c))) {
        cur += c;
      }
    }
  }
  const std::vector<SuiteResult> results = run_verify(cfg, which, self_path);
  print_verify_report(results, std::cout);
  int suites_pass = 0;
  for (const SuiteResult& s : results) suites_pass += s.pass() ? 1 : 0;
  std::printf("verify: %d of %zu suites pass\n", suites_pass, results.size());
  return verify_all_pass(results) ? 0 : 1;
}

// --- sweep -------------------------------------------------------------------

int cmd_sweep(const Options& opt) {
  const RunConfig cfg = build_config(opt);
  cfg.validate();
  const fs::path out = ensure_out_dir(opt);
  const DistTable p0 = parse_p0(cfg.p0, StateSpace(cfg.S, cfg.d));

  int jobs = opt.jobs;
  if (jobs <= 0) jobs = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  std::printf("sweep: %zu n_k values x %zu seeds on %d worker threads\n", cfg.sweep_n.size(),
              cfg.sweep_seeds.size(), jobs);

  const SweepResult res = run_sweep(cfg, p0, jobs);
  write_sweep_csv(res.rows, (out / "sweep.csv").string());

  std::vector<std::pair<double, double>> err_pts, kl_pts, fit_pts;
  for (size_t i = 0; i < cfg.sweep_n.size(); ++i) {
    std::vector<double> errs;
    for (size_t j = 0; j < cfg.sweep_seeds.size(); ++j) {
      errs.push_back(res.rows[i * cfg.sweep_seeds.size() + j].mean_score_err);
    }
    const double n = static_cast<double>(cfg.sweep_n[i]);
    err_pts.push_back({n, median_of(errs)});
    kl_pts.push_back({n, res.median_kl[i]});
    fit_pts.push_back({n, std::exp(res.fit.intercept + res.fit.slope * std::log(n))});
  }
  write_plot(out / "plot_score_err.dat", "n_k vs median mean score error", err_pts);
  write_plot(out / "plot_kl.dat", "n_k vs median KL(p_data || output law)", kl_pts);
  write_plot(out / "plot_fit.dat", "n_k vs fitted power law for the score error", fit_pts);

  std::printf("sweep: score-error slope %.4f +/- %.4f (2 standard errors) over log n_k\n",
              res.fit.slope, 2.0 * res.fit.stderr_slope);
  std::printf("sweep: median KL per n_k:");
  for (size_t i = 0; i < res.median_kl.size(); ++i) {
    std::printf(" %lld:%.4g", static_cast<long long>(cfg.sweep_n[i]), res.median_kl[i]);
  }
  std::printf("\nsweep: Spearman rho of median KL vs n_k = %.3f\n", res.spearman);
  std::printf("sweep: wrote sweep.csv, plot_score_err.dat, plot_kl.dat, plot_fit.dat\n");
  return 0;
}

// --- hardness ----------------------------------------------------------------

int cmd_hardness(const Options& opt) {
  const RunConfig cfg = build_config(opt);
  const fs::path out = ensure_out_dir(opt);

  std::vector<double> grid = cfg.hardness_eps;
  if (grid.empty()) {
    const double lo = 1.2e-4, hi = 0.039;
    for (int i = 0; i < 30; ++i) {
      grid.push_back(std::exp(std::log(lo) + i * (std::log(hi) - std::log(lo)) / 29.0));
    }
  }

  std::vector<HardnessPoint> pts;
  pts.reserve(grid.size());
  for (double eps : grid) pts.push_back(hardness_pair(eps));

  {
    std::ofstream f(out / "hardness.csv");
    if (!f) throw ConfigError("cannot open " + (out / "hardness.csv").string());
    f << "eps,kl,h2,lower,pass\n";
    char buf[200];
    for (const HardnessPoint& p : pts) {
      std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%d\n", p.eps, p.kl, p.h2,
                    p.lower, p.pass ? 1 : 0);
      f << buf;
    }
  }
  std::vector<std::pair<double, double>> h2_pts;
  for (const HardnessPoint& p : pts) h2_pts.push_back({p.eps, p.h2});
  write_plot(out / "plot_hardness.dat", "eps vs squared Hellinger distance", h2_pts);

  int passing = 0;
  double tightest = 1e300;
  for (const HardnessPoint& p : pts) {
    passing += p.pass ? 1 : 0;
    tightest = std::min(tightest, p.h2 - p.lower);
  }
  std::printf("hardness: %d of %zu grid points clear the 7.5*eps floor "
              "(tightest margin %.3g); wrote hardness.csv, plot_hardness.dat\n",
              passing, pts.size(), tightest);
  return passing == static_cast<int>(pts.size()) ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"discrete-state score-based diffusion: exactly verifiable "
               "training, sampling, and diagnostics"};
  app.require_subcommand(1);
  Options opt;

  auto add_shared = [&](CLI::App* sub, bool with_out) {
    sub->add_option("--config", opt.config_path, "configuration file (key = value lines)");
    sub->add_option("--set", opt.sets, "override one config key (key=value; repeatable)")
        ->take_all();
    sub->add_option("--seed", opt.seed, "root seed expanded into dataset/train/sample streams")
        ->each([&](const std::string&) { opt.seed_given = true; });
    if (with_out) sub->add_option("--out", opt.out_dir, "output directory");
  };

  CLI::App* train_cmd =
      app.add_subcommand("train", "draw or load a dataset and train the interval networks");
  add_shared(train_cmd, true);
  CLI::App* sample_cmd =
      app.add_subcommand("sample", "run the reverse sampler from a checkpoint directory");
  add_shared(sample_cmd, true);
  CLI::App* evaluate_cmd = app.add_subcommand(
      "evaluate", "exact divergence diagnostics for a checkpoint directory or oracle fixture");
  add_shared(evaluate_cmd, true);
  CLI::App* verify_cmd =
      app.add_subcommand("verify", "run the per-module property suites and report pass/fail");
  add_shared(verify_cmd, false);
  CLI::App* sweep_cmd =
      app.add_subcommand("sweep", "sample-complexity sweep over n_k and seeds");
  add_shared(sweep_cmd, true);
  sweep_cmd->add_option("--jobs", opt.jobs, "worker threads (default: logical cores)");
  CLI::App* hardness_cmd =
      app.add_subcommand("hardness", "two-point hardness table over an epsilon grid");
  add_shared(hardness_cmd, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (train_cmd->parsed()) return cmd_train(opt);
    if (sample_cmd->parsed()) return cmd_sample(opt);
    if (evaluate_cmd->parsed()) return cmd_evaluate(opt);
    if (verify_cmd->parsed()) return cmd_verify(opt, self_executable(argv[0]));
    if (sweep_cmd->parsed()) return cmd_sweep(opt);
    if (hardness_cmd->parsed()) return cmd_hardness(opt);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const CheckpointError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const CapError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 5;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
