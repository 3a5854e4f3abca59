#include "discore/config.hpp"

#include <cerrno>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace discore {

namespace {

std::string trim(const std::string& s) {
  const size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

double parse_double(const std::string& key, const std::string& v) {
  errno = 0;
  char* end = nullptr;
  const double x = std::strtod(v.c_str(), &end);
  if (end == v.c_str() || *end != '\0' || errno == ERANGE) {
    throw ConfigError("config key '" + key + "': not a number: '" + v + "'");
  }
  return x;
}

int64_t parse_i64(const std::string& key, const std::string& v) {
  errno = 0;
  char* end = nullptr;
  const long long x = std::strtoll(v.c_str(), &end, 10);
  if (end == v.c_str() || *end != '\0' || errno == ERANGE) {
    throw ConfigError("config key '" + key + "': not an integer: '" + v + "'");
  }
  return x;
}

int parse_int(const std::string& key, const std::string& v) {
  const int64_t x = parse_i64(key, v);
  if (x < INT32_MIN || x > INT32_MAX) {
    throw ConfigError("config key '" + key + "': out of int range: '" + v + "'");
  }
  return static_cast<int>(x);
}

uint64_t parse_u64(const std::string& key, const std::string& v) {
  errno = 0;
  char* end = nullptr;
  const unsigned long long x = std::strtoull(v.c_str(), &end, 10);
  if (end == v.c_str() || *end != '\0' || errno == ERANGE || v.find('-') != std::string::npos) {
    throw ConfigError("config key '" + key + "': not an unsigned integer: '" + v + "'");
  }
  return x;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true") return true;
  if (v == "0" || v == "false") return false;
  throw ConfigError("config key '" + key + "': expected 0/1/true/false, got '" + v + "'");
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  size_t start = 0;
  for (;;) {
    const size_t pos = s.find(sep, start);
    if (pos == std::string::npos) {
      parts.push_back(trim(s.substr(start)));
      return parts;
    }
    parts.push_back(trim(s.substr(start, pos - start)));
    start = pos + 1;
  }
}

}  // namespace

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = {
      "S",           "d",           "T",           "h",
      "delta",       "K",           "eta",         "batch",
      "epochs",      "n_k",         "width",       "depth",
      "clip",        "seed_dataset", "seed_train",  "seed_sample",
      "p0",          "dataset",     "n_samples",   "jump_trace",
      "oracle_scores", "poisson_guard", "tail_cutoff", "sweep_n",
      "sweep_seeds", "hardness_eps", "suites",
  };
  return keys;
}

void apply_assignment(const std::string& assignment, RunConfig& cfg) {
  const size_t eq = assignment.find('=');
  if (eq == std::string::npos) {
    throw ConfigError("config: expected key=value, got '" + assignment + "'");
  }
  const std::string key = trim(assignment.substr(0, eq));
  const std::string value = trim(assignment.substr(eq + 1));

  if (key == "S") cfg.S = parse_int(key, value);
  else if (key == "d") cfg.d = parse_int(key, value);
  else if (key == "T") cfg.T = parse_double(key, value);
  else if (key == "h") cfg.h = parse_double(key, value);
  else if (key == "delta") cfg.delta = parse_double(key, value);
  else if (key == "K") cfg.K = parse_int(key, value);
  else if (key == "eta") cfg.eta = parse_double(key, value);
  else if (key == "batch") cfg.batch = parse_int(key, value);
  else if (key == "epochs") cfg.epochs = parse_int(key, value);
  else if (key == "n_k") cfg.n_k = parse_i64(key, value);
  else if (key == "width") cfg.width = parse_int(key, value);
  else if (key == "depth") cfg.depth = parse_int(key, value);
  else if (key == "clip") cfg.clip = parse_double(key, value);
  else if (key == "seed_dataset") cfg.seed_dataset = parse_u64(key, value);
  else if (key == "seed_train") cfg.seed_train = parse_u64(key, value);
  else if (key == "seed_sample") cfg.seed_sample = parse_u64(key, value);
  else if (key == "p0") cfg.p0 = value;
  else if (key == "dataset") cfg.dataset = value;
  else if (key == "n_samples") cfg.n_samples = parse_i64(key, value);
  else if (key == "jump_trace") cfg.jump_trace = parse_bool(key, value);
  else if (key == "oracle_scores") cfg.oracle_scores = parse_bool(key, value);
  else if (key == "poisson_guard") cfg.poisson_guard = parse_double(key, value);
  else if (key == "tail_cutoff") cfg.tail_cutoff = parse_double(key, value);
  else if (key == "sweep_n") {
    cfg.sweep_n.clear();
    for (const std::string& part : split(value, ',')) {
      cfg.sweep_n.push_back(parse_i64(key, part));
    }
  } else if (key == "sweep_seeds") {
    cfg.sweep_seeds.clear();
    for (const std::string& part : split(value, ',')) {
      cfg.sweep_seeds.push_back(parse_u64(key, part));
    }
  } else if (key == "hardness_eps") {
    cfg.hardness_eps.clear();
    for (const std::string& part : split(value, ',')) {
      cfg.hardness_eps.push_back(parse_double(key, part));
    }
  } else if (key == "suites") {
    cfg.suites = value;
  } else {
    std::string msg = "config: unknown key '" + key + "'; valid keys are:";
    for (const std::string& k : config_keys()) msg += " " + k;
    throw ConfigError(msg);
  }
}

void load_config_file(const std::string& path, RunConfig& cfg) {
  std::ifstream f(path);
  if (!f) throw ConfigError("config: cannot open " + path);
  std::string line;
  int64_t lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    try {
      apply_assignment(line, cfg);
    } catch (const ConfigError& e) {
      throw ConfigError(path + " line " + std::to_string(lineno) + ": " + e.what());
    }
  }
}

DistTable parse_p0(const std::string& spec, StateSpace sp) {
  if (spec == "uniform") return DistTable::uniform(sp);

  if (spec.rfind("delta:", 0) == 0) {
    const std::vector<std::string> parts = split(spec.substr(6), ',');
    if (static_cast<int>(parts.size()) != sp.d) {
      throw ConfigError("p0 delta: expected " + std::to_string(sp.d) +
                        " comma-separated symbols, got " + std::to_string(parts.size()));
    }
    StateVector x(sp.d);
    for (int i = 0; i < sp.d; ++i) {
      x[i] = parse_int("p0", parts[i]);
      if (x[i] < 0 || x[i] >= sp.S) {
        throw ConfigError("p0 delta: symbol " + parts[i] + " out of range for S=" +
                          std::to_string(sp.S));
      }
    }
    return DistTable::delta(sp, x);
  }

  if (spec.rfind("product:", 0) == 0) {
    std::vector<std::string> groups = split(spec.substr(8), ';');
    if (static_cast<int>(groups.size()) == 1 && sp.d > 1) {
      groups.assign(sp.d, groups[0]);  // broadcast one marginal to all coordinates
    }
    if (static_cast<int>(groups.size()) != sp.d) {
      throw ConfigError("p0 product: expected 1 or " + std::to_string(sp.d) +
                        " ';'-separated groups, got " + std::to_string(groups.size()));
    }
    std::vector<std::vector<double>> marg(sp.d);
    for (int i = 0; i < sp.d; ++i) {
      const std::vector<std::string> parts = split(groups[i], ',');
      if (static_cast<int>(parts.size()) != sp.S) {
        throw ConfigError("p0 product: coordinate " + std::to_string(i) + " needs " +
                          std::to_string(sp.S) + " weights, got " +
                          std::to_string(parts.size()));
      }
      double total = 0.0;
      for (const std::string& part : parts) {
        const double wgt = parse_double("p0", part);
        if (!(wgt >= 0.0)) throw ConfigError("p0 product: negative weight '" + part + "'");
        marg[i].push_back(wgt);
        total += wgt;
      }
      if (!(total > 0.0)) {
        throw ConfigError("p0 product: coordinate " + std::to_string(i) + " has zero mass");
      }
      for (double& wgt : marg[i]) wgt /= total;
    }
    const int64_t n = sp.table_size();
    std::vector<double> p(n);
    StateVector x(sp.d, 0);
    for (int64_t idx = 0; idx < n; ++idx) {
      double prob = 1.0;
      for (int i = 0; i < sp.d; ++i) prob *= marg[i][x[i]];
      p[idx] = prob;
      for (int i = sp.d - 1; i >= 0; --i) {
        if (++x[i] < sp.S) break;
        x[i] = 0;
      }
    }
    DistTable table(sp, std::move(p));
    table.renormalize();
    return table;
  }

  if (spec.rfind("table:", 0) == 0) {
    const std::string path = trim(spec.substr(6));
    std::ifstream f(path);
    if (!f) throw ConfigError("p0 table: cannot open " + path);
    const int64_t n = sp.table_size();
    std::vector<double> p;
    p.reserve(n);
    double v;
    while (f >> v) {
      if (!(v >= 0.0)) throw ConfigError("p0 table: negative weight in " + path);
      p.push_back(v);
    }
    if (!f.eof()) throw ConfigError("p0 table: malformed number in " + path);
    if (static_cast<int64_t>(p.size()) != n) {
      throw ConfigError("p0 table: " + path + " holds " + std::to_string(p.size()) +
                        " weights, expected S^d = " + std::to_string(n));
    }
    DistTable table(sp, std::move(p));
    table.renormalize();
    return table;
  }

  throw ConfigError(
      "p0: unrecognized spec '" + spec +
      "' (expected uniform, delta:<symbols>, product:<weights>, or table:<path>)");
}

}  // namespace discore
