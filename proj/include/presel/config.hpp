#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "presel/error.hpp"
#include "presel/util.hpp"

namespace presel {

enum class Strategy { PreSel, Random, Uniform, SizeBalanced, TaskImportance };

inline std::string strategy_name(Strategy s) {
  switch (s) {
    case Strategy::PreSel: return "presel";
    case Strategy::Random: return "random";
    case Strategy::Uniform: return "uniform";
    case Strategy::SizeBalanced: return "size_balanced";
    case Strategy::TaskImportance: return "task_importance";
  }
  return "presel";
}

inline Strategy parse_strategy(const std::string& s) {
  if (s == "presel") return Strategy::PreSel;
  if (s == "random") return Strategy::Random;
  if (s == "uniform") return Strategy::Uniform;
  if (s == "size_balanced") return Strategy::SizeBalanced;
  if (s == "task_importance") return Strategy::TaskImportance;
  throw Error(ErrorKind::InvalidConfig, "unknown strategy '" + s + "'");
}

struct SelectionConfig {
  double ratio = 0.15;
  double ref_ratio = 0.05;
  std::uint64_t seed = 0;
  std::size_t k = 5;
  std::optional<double> tau;  // unset: 1/sqrt(M)
  double clusters_per_100 = 1.0;
  std::size_t max_iter = 100;
  double tol = 1e-4;
  bool normalize = false;  // L2-normalize features before k-means
  Strategy strategy = Strategy::PreSel;
  std::size_t threads = 0;  // 0: PRESEL_THREADS or hardware; never echoed

  void validate() const {
    auto bad = [](const std::string& why) { return Error(ErrorKind::InvalidConfig, why); };
    if (!(ratio > 0.0 && ratio <= 1.0)) throw bad("ratio must be in (0, 1]");
    if (!(ref_ratio >= 0.0 && ref_ratio < ratio)) throw bad("ref_ratio must be in [0, ratio)");
    if (k == 0) throw bad("k must be positive");
    if (tau && !(*tau > 0.0 && std::isfinite(*tau))) throw bad("tau must be positive");
    if (!(clusters_per_100 > 0.0 && std::isfinite(clusters_per_100))) throw bad("clusters_per_100 must be positive");
    if (max_iter == 0) throw bad("max_iter must be positive");
    if (!(tol >= 0.0)) throw bad("tol must be non-negative");
  }

  /// Resolved configuration as echoed into output manifests and reports.
  [[nodiscard]] nlohmann::ordered_json echo(std::optional<double> resolved_tau = {}) const {
    nlohmann::ordered_json j;
    j["strategy"] = strategy_name(strategy);
    j["ratio"] = ratio;
    j["ref_ratio"] = ref_ratio;
    j["seed"] = seed;
    j["k"] = k;
    j["tau_mode"] = tau ? "explicit" : "auto";
    if (resolved_tau)
      j["tau"] = *resolved_tau;
    else if (tau)
      j["tau"] = *tau;
    else
      j["tau"] = nullptr;
    j["clusters_per_100"] = clusters_per_100;
    j["max_iter"] = max_iter;
    j["tol"] = tol;
    j["normalize"] = normalize;
    return j;
  }
};

/// Parses "key=value" lines ('#' starts a comment) into a key/value map.
inline std::map<std::string, std::string> parse_key_values(const std::vector<std::string>& lines) {
  std::map<std::string, std::string> kv;
  auto trim = [](std::string s) {
    auto b = s.find_first_not_of(" \t");
    auto e = s.find_last_not_of(" \t");
    return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
  };
  for (std::size_t i = 0; i < lines.size(); ++i) {
    std::string line = lines[i];
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw Error(ErrorKind::InvalidConfig, "config line " + std::to_string(i + 1) + " is not key=value");
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return kv;
}

inline void apply_config_value(SelectionConfig& cfg, const std::string& key, const std::string& value) {
  auto num = [&](const std::string& v) {
    std::size_t pos = 0;
    double d = 0.0;
    try {
      d = std::stod(v, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos != v.size() || v.empty()) throw Error(ErrorKind::InvalidConfig, "bad number for " + key + ": '" + v + "'");
    return d;
  };
  auto integer = [&](const std::string& v) {
    std::size_t pos = 0;
    unsigned long long u = 0;
    try {
      u = std::stoull(v, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos != v.size() || v.empty() || v[0] == '-')
      throw Error(ErrorKind::InvalidConfig, "bad integer for " + key + ": '" + v + "'");
    return static_cast<std::uint64_t>(u);
  };
  if (key == "ratio") cfg.ratio = num(value);
  else if (key == "ref_ratio") cfg.ref_ratio = num(value);
  else if (key == "seed") cfg.seed = integer(value);
  else if (key == "k") cfg.k = integer(value);
  else if (key == "tau") cfg.tau = value == "auto" ? std::nullopt : std::optional<double>(num(value));
  else if (key == "clusters_per_100") cfg.clusters_per_100 = num(value);
  else if (key == "max_iter") cfg.max_iter = integer(value);
  else if (key == "tol") cfg.tol = num(value);
  else if (key == "normalize") {
    if (value == "true" || value == "1") cfg.normalize = true;
    else if (value == "false" || value == "0") cfg.normalize = false;
    else throw Error(ErrorKind::InvalidConfig, "bad boolean for normalize: '" + value + "'");
  } else if (key == "strategy") cfg.strategy = parse_strategy(value);
  else if (key == "threads") cfg.threads = integer(value);
  else throw Error(ErrorKind::InvalidConfig, "unknown config key '" + key + "'");
}

inline SelectionConfig load_config(const std::string& path, SelectionConfig base = {}) {
  for (const auto& [k, v] : parse_key_values(read_lines(path))) apply_config_value(base, k, v);
  return base;
}

}  // namespace presel
