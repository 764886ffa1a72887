// Declarative experiment configuration, read from a single JSON document.
// Unknown keys anywhere in the document are an error so typos cannot silently
// fall back to defaults.
#pragma once

#include <fstream>
#include <optional>
#include <set>

#include <json.hpp>

#include "spark/spark.hpp"

namespace spark {

struct GrappaOptions {
  int ky_taps = 4;
  int kx_taps = 5;
  double lambda = 1e-4;
  bool optimize = false;  // grid-search geometry and lambda per case
};

struct SparkOptions {
  int epochs = 200;
  double lr = 1e-3;
  double lr_final = -1;
  int trunk_width = 16;
  std::array<int, 2> head_widths{8, 4};
  std::optional<std::uint64_t> seed;  // default: the experiment seed
  bool substitute = true;
};

struct RakiOptions {
  int epochs = 300;
  double lr = 1e-3;
  double lr_final = -1;
  int hidden1 = 32;
  int hidden2 = 8;
};

struct ExperimentConfig {
  std::uint64_t seed = 1;
  int n = 128;
  int n_c = 8;
  double sigma = 5e-4;
  std::vector<int> r_list;
  std::vector<int> acs_list;
  std::vector<std::string> methods;
  GrappaOptions grappa;
  SparkOptions spark;
  RakiOptions raki;
  std::string out_dir = "out";

  void validate() const;
};

inline const std::vector<std::string>& known_methods() {
  static const std::vector<std::string> m = {"grappa",       "vc-grappa",       "svc-grappa",     "raki",
                                             "spark:grappa", "spark:vc-grappa", "spark:svc-grappa"};
  return m;
}

inline void ExperimentConfig::validate() const {
  if (n < 16) { throw std::invalid_argument("config: n must be >= 16"); }
  if (n_c < 2) { throw std::invalid_argument("config: n_c must be >= 2"); }
  if (sigma < 0) { throw std::invalid_argument("config: sigma must be >= 0"); }
  if (methods.empty()) { throw std::invalid_argument("config: methods must be non-empty"); }
  if (r_list.empty()) { throw std::invalid_argument("config: r_list must be non-empty"); }
  if (acs_list.empty()) { throw std::invalid_argument("config: acs_list must be non-empty"); }
  for (int r : r_list) {
    if (r < 1) { throw std::invalid_argument("config: r_list entries must be >= 1"); }
    if (n % r != 0) { throw std::invalid_argument("config: grid not divisible by R (n=" + std::to_string(n) + ", r=" + std::to_string(r) + ")"); }
  }
  for (int a : acs_list) {
    if (a < 0 || a > n) { throw std::invalid_argument("config: acs_list entries must be in [0, n]"); }
  }
  const auto& known = known_methods();
  for (const auto& m : methods) {
    if (std::find(known.begin(), known.end(), m) == known.end()) {
      throw std::invalid_argument("config: unknown method \"" + m + "\"");
    }
  }
  if (spark.epochs < 1 || raki.epochs < 1) { throw std::invalid_argument("config: epochs must be >= 1"); }
  if (grappa.lambda < 0) { throw std::invalid_argument("config: grappa.lambda must be >= 0"); }
}

namespace detail {

inline void reject_unknown_keys(const nlohmann::json& obj, const std::set<std::string>& allowed, const std::string& where) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (!allowed.count(it.key())) { throw std::invalid_argument("config: unknown key \"" + where + it.key() + "\""); }
  }
}

}  // namespace detail

inline ExperimentConfig parse_config(const nlohmann::json& j) {
  if (!j.is_object()) { throw std::invalid_argument("config: top level must be an object"); }
  detail::reject_unknown_keys(
      j, {"seed", "n", "n_c", "sigma", "r_list", "acs_list", "methods", "grappa", "spark", "raki", "out_dir"}, "");
  ExperimentConfig cfg;
  cfg.seed = j.value("seed", cfg.seed);
  cfg.n = j.value("n", cfg.n);
  cfg.n_c = j.value("n_c", cfg.n_c);
  cfg.sigma = j.value("sigma", cfg.sigma);
  if (j.contains("r_list")) { cfg.r_list = j.at("r_list").get<std::vector<int>>(); }
  if (j.contains("acs_list")) { cfg.acs_list = j.at("acs_list").get<std::vector<int>>(); }
  if (j.contains("methods")) { cfg.methods = j.at("methods").get<std::vector<std::string>>(); }
  cfg.out_dir = j.value("out_dir", cfg.out_dir);
  if (j.contains("grappa")) {
    const auto& g = j.at("grappa");
    detail::reject_unknown_keys(g, {"ky_taps", "kx_taps", "lambda", "optimize"}, "grappa.");
    cfg.grappa.ky_taps = g.value("ky_taps", cfg.grappa.ky_taps);
    cfg.grappa.kx_taps = g.value("kx_taps", cfg.grappa.kx_taps);
    cfg.grappa.lambda = g.value("lambda", cfg.grappa.lambda);
    cfg.grappa.optimize = g.value("optimize", cfg.grappa.optimize);
  }
  if (j.contains("spark")) {
    const auto& s = j.at("spark");
    detail::reject_unknown_keys(
        s, {"epochs", "lr", "lr_final", "trunk_width", "head_widths", "seed", "substitute"}, "spark.");
    cfg.spark.epochs = s.value("epochs", cfg.spark.epochs);
    cfg.spark.lr = s.value("lr", cfg.spark.lr);
    cfg.spark.lr_final = s.value("lr_final", cfg.spark.lr_final);
    cfg.spark.trunk_width = s.value("trunk_width", cfg.spark.trunk_width);
    if (s.contains("head_widths")) {
      const auto hw = s.at("head_widths").get<std::vector<int>>();
      if (hw.size() != 2) { throw std::invalid_argument("config: spark.head_widths must have 2 entries"); }
      cfg.spark.head_widths = {hw[0], hw[1]};
    }
    if (s.contains("seed")) { cfg.spark.seed = s.at("seed").get<std::uint64_t>(); }
    cfg.spark.substitute = s.value("substitute", cfg.spark.substitute);
  }
  if (j.contains("raki")) {
    const auto& r = j.at("raki");
    detail::reject_unknown_keys(r, {"epochs", "lr", "lr_final", "hidden1", "hidden2"}, "raki.");
    cfg.raki.epochs = r.value("epochs", cfg.raki.epochs);
    cfg.raki.lr = r.value("lr", cfg.raki.lr);
    cfg.raki.lr_final = r.value("lr_final", cfg.raki.lr_final);
    cfg.raki.hidden1 = r.value("hidden1", cfg.raki.hidden1);
    cfg.raki.hidden2 = r.value("hidden2", cfg.raki.hidden2);
  }
  cfg.validate();
  return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) { throw std::invalid_argument("config: cannot open " + path); }
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("config: JSON parse error: ") + e.what());
  }
  return parse_config(j);
}

inline SparkConfig make_spark_config(const ExperimentConfig& cfg, InitialMethod initial, KernelGeometry geom) {
  SparkConfig sc;
  sc.epochs = cfg.spark.epochs;
  sc.lr = cfg.spark.lr;
  sc.lr_final = cfg.spark.lr_final;
  sc.trunk_width = cfg.spark.trunk_width;
  sc.head_widths = cfg.spark.head_widths;
  sc.seed = cfg.spark.seed.value_or(cfg.seed);
  sc.initial = initial;
  sc.substitute = cfg.spark.substitute;
  sc.geometry = geom;
  sc.lambda = cfg.grappa.lambda;
  return sc;
}

}  // namespace spark
