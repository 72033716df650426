#pragma once

// Experiment configuration documents (YAML).
//
//   network:
//     num_bs: 8                 # N
//     num_users: 15             # K
//     antennas: 2               # L
//     p_max_w: 1.0              # scalar, or list of N
//     eta: 0.25                 # scalar, or list of N
//     p_compute_w: 0.45         # scalar, or N lists of K
//     noise_power: 1.0          # scalar, or list of K; defaults to 1 (normalized) or reference_noise_w (path_loss)
//     region_half_width_km: 0.5
//     channel_mode: normalized  # or path_loss
//     reference_noise_w: 1e-13
//   algorithm:
//     p: 100
//     beta: 0.1
//     iter_max: 25
//     eps: 1e-5
//     zero_tol: 1e-6
//     solver_tol: 1e-8
//     stage2_search: linear     # or bisection
//   experiment:
//     sinr_db: [0, 2, 4, 6, 8]
//     trials: 20
//     base_seed: 0
//     methods: [logsum, mixed_l12, cb]   # oracle also allowed when N*K <= 12
//     output_dir: results
//     workers: 1
//     resample_topology: true   # false: every trial reuses the topology of base_seed
//
// Every key is optional; unknown keys are rejected.

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <yaml-cpp/yaml.h>

#include "gsbf/netmodel.hpp"
#include "gsbf/oracle.hpp"
#include "gsbf/pipeline.hpp"

namespace gsbf::harness {

inline const std::vector<std::string>& known_methods() {
  static const std::vector<std::string> m{"logsum", "mixed_l12", "cb", "oracle"};
  return m;
}

/// Position of a method in the canonical reporting order.
inline int method_rank(const std::string& m) {
  const auto& all = known_methods();
  return static_cast<int>(std::find(all.begin(), all.end(), m) - all.begin());
}

struct ExperimentConfig {
  NetworkConfig network = NetworkConfig::default_setup();
  AlgorithmParams algorithm;
  std::vector<double> sinr_sweep_db{0.0, 2.0, 4.0, 6.0, 8.0};
  int trials = 20;
  std::uint64_t base_seed = 0;
  std::vector<std::string> methods{"logsum", "mixed_l12", "cb"};
  std::string output_dir = "results";
  int workers = 1;
  bool resample_topology = true;

  /// Network with every user's target set to `db`.
  NetworkConfig network_at(double db) const {
    NetworkConfig c = network;
    c.set_sinr_db(db);
    return c;
  }

  void validate() const {
    auto fail = [](const std::string& m) { throw std::invalid_argument("config: " + m); };
    network.validate();
    algorithm.validate();
    if (sinr_sweep_db.empty()) fail("experiment.sinr_db must not be empty");
    for (double db : sinr_sweep_db)
      if (!std::isfinite(db)) fail("experiment.sinr_db entries must be finite");
    if (trials < 1) fail("experiment.trials must be positive");
    if (workers < 1) fail("experiment.workers must be positive");
    if (methods.empty()) fail("experiment.methods must not be empty");
    std::set<std::string> seen;
    for (const std::string& m : methods) {
      if (method_rank(m) == static_cast<int>(known_methods().size())) fail("unknown method '" + m + "'");
      if (!seen.insert(m).second) fail("method '" + m + "' listed twice");
    }
    if (seen.count("oracle") && network.num_tasks() > kOracleMaxTasks)
      fail("method 'oracle' needs num_bs * num_users <= " + std::to_string(kOracleMaxTasks));
  }
};

inline bool operator==(const NetworkConfig& a, const NetworkConfig& b) {
  return a.num_bs == b.num_bs && a.num_users == b.num_users && a.antennas == b.antennas && a.p_max == b.p_max &&
         a.eta == b.eta && a.p_compute == b.p_compute && a.gamma == b.gamma && a.noise_power == b.noise_power &&
         a.region_half_width_km == b.region_half_width_km && a.channel_mode == b.channel_mode &&
         a.reference_noise_w == b.reference_noise_w;
}

inline bool operator==(const ExperimentConfig& a, const ExperimentConfig& b) {
  return a.network == b.network && a.algorithm == b.algorithm && a.sinr_sweep_db == b.sinr_sweep_db &&
         a.trials == b.trials && a.base_seed == b.base_seed && a.methods == b.methods &&
         a.output_dir == b.output_dir && a.workers == b.workers && a.resample_topology == b.resample_topology;
}

/// Parse error carrying the document name and line.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

namespace detail {

class Reader {
 public:
  explicit Reader(std::string source) : source_(std::move(source)) {}

  [[noreturn]] void fail(const YAML::Node& at, const std::string& msg) const {
    std::ostringstream os;
    os << source_;
    if (at.IsDefined() && at.Mark().line >= 0) os << ":" << at.Mark().line + 1 << ":" << at.Mark().column + 1;
    os << ": " << msg;
    throw ConfigError(os.str());
  }

  void require_map(const YAML::Node& n, const std::string& path, const std::set<std::string>& keys) const {
    if (!n.IsMap()) fail(n, "'" + path + "' must be a mapping");
    for (const auto& kv : n) {
      const std::string key = kv.first.as<std::string>();
      if (!keys.count(key)) fail(kv.first, "unknown key '" + (path.empty() ? key : path + "." + key) + "'");
    }
  }

  template <class T>
  T scalar(const YAML::Node& n, const std::string& path) const {
    if (!n.IsScalar()) fail(n, "'" + path + "' must be a scalar");
    try {
      return n.as<T>();
    } catch (const YAML::Exception&) {
      fail(n, "'" + path + "' has an invalid value '" + n.Scalar() + "'");
    }
  }

  template <class T>
  void get(const YAML::Node& map, const std::string& key, const std::string& path, T& out) const {
    if (const YAML::Node n = map[key]) out = scalar<T>(n, path + "." + key);
  }

  /// Scalar broadcast to `size`, or a list of exactly `size` entries.
  RVector vec(const YAML::Node& n, const std::string& path, int size) const {
    if (n.IsScalar()) return RVector::Constant(size, scalar<double>(n, path));
    if (!n.IsSequence()) fail(n, "'" + path + "' must be a number or a list");
    if (static_cast<int>(n.size()) != size)
      fail(n, "'" + path + "' must have " + std::to_string(size) + " entries, got " + std::to_string(n.size()));
    RVector v(size);
    for (int i = 0; i < size; ++i) v[i] = scalar<double>(n[static_cast<std::size_t>(i)], path);
    return v;
  }

  RMatrix mat(const YAML::Node& n, const std::string& path, int rows, int cols) const {
    if (n.IsScalar()) return RMatrix::Constant(rows, cols, scalar<double>(n, path));
    if (!n.IsSequence() || static_cast<int>(n.size()) != rows)
      fail(n, "'" + path + "' must be a number or " + std::to_string(rows) + " lists");
    RMatrix m(rows, cols);
    for (int r = 0; r < rows; ++r) m.row(r) = vec(n[static_cast<std::size_t>(r)], path, cols).transpose();
    return m;
  }

 private:
  std::string source_;
};

inline ChannelMode parse_mode(const Reader& rd, const YAML::Node& n) {
  const std::string s = rd.scalar<std::string>(n, "network.channel_mode");
  if (s == "normalized") return ChannelMode::normalized;
  if (s == "path_loss") return ChannelMode::path_loss;
  rd.fail(n, "network.channel_mode must be 'normalized' or 'path_loss'");
}

inline Stage2Search parse_search(const Reader& rd, const YAML::Node& n) {
  const std::string s = rd.scalar<std::string>(n, "algorithm.stage2_search");
  if (s == "linear") return Stage2Search::linear;
  if (s == "bisection") return Stage2Search::bisection;
  rd.fail(n, "algorithm.stage2_search must be 'linear' or 'bisection'");
}

}  // namespace detail

/// Parses a configuration document; `source` names it in diagnostics.
inline ExperimentConfig parse_config(const std::string& text, const std::string& source = "<config>") {
  const detail::Reader rd(source);
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ConfigError(source + ":" + std::to_string(e.mark.line + 1) + ":" + std::to_string(e.mark.column + 1) +
                      ": " + e.msg);
  }
  ExperimentConfig cfg;
  if (root.IsNull()) {
    cfg.network.set_sinr_db(cfg.sinr_sweep_db.front());
    return cfg;
  }
  rd.require_map(root, "", {"network", "algorithm", "experiment"});

  NetworkConfig& net = cfg.network;
  if (const YAML::Node n = root["network"]) {
    rd.require_map(n, "network",
                   {"num_bs", "num_users", "antennas", "p_max_w", "eta", "p_compute_w", "noise_power",
                    "region_half_width_km", "channel_mode", "reference_noise_w"});
    rd.get(n, "num_bs", "network", net.num_bs);
    rd.get(n, "num_users", "network", net.num_users);
    rd.get(n, "antennas", "network", net.antennas);
    if (net.num_bs < 1 || net.num_users < 1 || net.antennas < 1)
      rd.fail(n, "network.num_bs, num_users and antennas must be positive");
    rd.get(n, "region_half_width_km", "network", net.region_half_width_km);
    rd.get(n, "reference_noise_w", "network", net.reference_noise_w);
    if (n["channel_mode"]) net.channel_mode = detail::parse_mode(rd, n["channel_mode"]);
    const int N = net.num_bs;
    const int K = net.num_users;
    net.p_max = n["p_max_w"] ? rd.vec(n["p_max_w"], "network.p_max_w", N) : RVector::Constant(N, 1.0);
    net.eta = n["eta"] ? rd.vec(n["eta"], "network.eta", N) : RVector::Constant(N, 0.25);
    net.p_compute = n["p_compute_w"] ? rd.mat(n["p_compute_w"], "network.p_compute_w", N, K)
                                     : RMatrix::Constant(N, K, 0.45);
    const double default_noise = net.channel_mode == ChannelMode::normalized ? 1.0 : net.reference_noise_w;
    net.noise_power =
        n["noise_power"] ? rd.vec(n["noise_power"], "network.noise_power", K) : RVector::Constant(K, default_noise);
  }

  if (const YAML::Node a = root["algorithm"]) {
    rd.require_map(a, "algorithm", {"p", "beta", "iter_max", "eps", "zero_tol", "solver_tol", "stage2_search"});
    AlgorithmParams& ap = cfg.algorithm;
    rd.get(a, "p", "algorithm", ap.p);
    rd.get(a, "beta", "algorithm", ap.beta);
    rd.get(a, "iter_max", "algorithm", ap.iter_max);
    rd.get(a, "eps", "algorithm", ap.eps);
    rd.get(a, "zero_tol", "algorithm", ap.zero_tol);
    rd.get(a, "solver_tol", "algorithm", ap.solver_tol);
    if (a["stage2_search"]) ap.stage2_search = detail::parse_search(rd, a["stage2_search"]);
  }

  if (const YAML::Node e = root["experiment"]) {
    rd.require_map(e, "experiment",
                   {"sinr_db", "trials", "base_seed", "methods", "output_dir", "workers", "resample_topology"});
    if (const YAML::Node s = e["sinr_db"]) {
      cfg.sinr_sweep_db.clear();
      if (s.IsScalar())
        cfg.sinr_sweep_db.push_back(rd.scalar<double>(s, "experiment.sinr_db"));
      else if (s.IsSequence())
        for (const auto& x : s) cfg.sinr_sweep_db.push_back(rd.scalar<double>(x, "experiment.sinr_db"));
      else
        rd.fail(s, "'experiment.sinr_db' must be a number or a list");
    }
    rd.get(e, "trials", "experiment", cfg.trials);
    rd.get(e, "base_seed", "experiment", cfg.base_seed);
    rd.get(e, "output_dir", "experiment", cfg.output_dir);
    rd.get(e, "workers", "experiment", cfg.workers);
    rd.get(e, "resample_topology", "experiment", cfg.resample_topology);
    if (const YAML::Node m = e["methods"]) {
      cfg.methods.clear();
      if (!m.IsSequence()) rd.fail(m, "'experiment.methods' must be a list");
      for (const auto& x : m) cfg.methods.push_back(rd.scalar<std::string>(x, "experiment.methods"));
    }
  }

  if (cfg.sinr_sweep_db.empty()) rd.fail(root, "experiment.sinr_db must not be empty");
  net.set_sinr_db(cfg.sinr_sweep_db.front());
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(source + ": " + e.what());
  }
  return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path);
}

namespace detail {

inline void emit_vec(YAML::Emitter& out, const RVector& v) {
  if (v.size() > 0 && (v.array() == v[0]).all()) {
    out << v[0];
    return;
  }
  out << YAML::Flow << YAML::BeginSeq;
  for (double x : v) out << x;
  out << YAML::EndSeq;
}

}  // namespace detail

/// Full document with every key spelled out; parse_config(to_yaml(c)) == c.
inline std::string to_yaml(const ExperimentConfig& c) {
  YAML::Emitter out;
  out.SetDoublePrecision(17);
  const NetworkConfig& n = c.network;
  out << YAML::BeginMap;
  out << YAML::Key << "network" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "num_bs" << YAML::Value << n.num_bs;
  out << YAML::Key << "num_users" << YAML::Value << n.num_users;
  out << YAML::Key << "antennas" << YAML::Value << n.antennas;
  out << YAML::Key << "p_max_w" << YAML::Value;
  detail::emit_vec(out, n.p_max);
  out << YAML::Key << "eta" << YAML::Value;
  detail::emit_vec(out, n.eta);
  out << YAML::Key << "p_compute_w" << YAML::Value;
  if (n.p_compute.size() > 0 && (n.p_compute.array() == n.p_compute(0, 0)).all()) {
    out << n.p_compute(0, 0);
  } else {
    out << YAML::BeginSeq;
    for (int r = 0; r < n.p_compute.rows(); ++r) detail::emit_vec(out, n.p_compute.row(r).transpose());
    out << YAML::EndSeq;
  }
  out << YAML::Key << "noise_power" << YAML::Value;
  detail::emit_vec(out, n.noise_power);
  out << YAML::Key << "region_half_width_km" << YAML::Value << n.region_half_width_km;
  out << YAML::Key << "channel_mode" << YAML::Value << to_string(n.channel_mode);
  out << YAML::Key << "reference_noise_w" << YAML::Value << n.reference_noise_w;
  out << YAML::EndMap;

  const AlgorithmParams& a = c.algorithm;
  out << YAML::Key << "algorithm" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "p" << YAML::Value << a.p;
  out << YAML::Key << "beta" << YAML::Value << a.beta;
  out << YAML::Key << "iter_max" << YAML::Value << a.iter_max;
  out << YAML::Key << "eps" << YAML::Value << a.eps;
  out << YAML::Key << "zero_tol" << YAML::Value << a.zero_tol;
  out << YAML::Key << "solver_tol" << YAML::Value << a.solver_tol;
  out << YAML::Key << "stage2_search" << YAML::Value << to_string(a.stage2_search);
  out << YAML::EndMap;

  out << YAML::Key << "experiment" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "sinr_db" << YAML::Value << YAML::Flow << c.sinr_sweep_db;
  out << YAML::Key << "trials" << YAML::Value << c.trials;
  out << YAML::Key << "base_seed" << YAML::Value << c.base_seed;
  out << YAML::Key << "methods" << YAML::Value << YAML::Flow << c.methods;
  out << YAML::Key << "output_dir" << YAML::Value << c.output_dir;
  out << YAML::Key << "workers" << YAML::Value << c.workers;
  out << YAML::Key << "resample_topology" << YAML::Value << c.resample_topology;
  out << YAML::EndMap;
  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

/// GSBF_WORKERS, when set to a positive integer, overrides the configured worker count.
inline int effective_workers(const ExperimentConfig& cfg) {
  if (const char* env = std::getenv("GSBF_WORKERS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<int>(v);
  }
  return cfg.workers;
}

}  // namespace gsbf::harness
