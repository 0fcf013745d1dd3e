#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace csaim {

// Every tunable of the engine, the memory subsystem and the experiment
// harness. Defaults are the reference experimental setting.
struct ExperimentConfig {
  int G_max = 100;             // generations
  std::size_t m = 150;         // initial population size
  std::size_t n = 100;         // elite pool count
  std::size_t Q = 50;          // clone multiplier
  double E_sim = 0.05;         // response margin around the threshold
  int t = 10;                  // diversification period (generations)
  double beta = 0.1;           // fraction of worst pools replaced, c = round(beta*n)
  double alpha = 1.0;          // acceptance temperature for elite replacement
  double a_fraction = 0.5;     // a = a_fraction * D(); 0.5 gives HM:RE = 1:1
  double gamma_w = 1.0;        // hypermutation weight delta bound
  double gamma_theta = 1.0;    // hypermutation threshold delta bound
  int tau = 10;                // stall generations before memory training
  double eta = 0.1;            // memory training rate, in [0.1, 1.0]
  double mu_theta = 0.3;       // memory response radius (scaled feature space)
  int T_IM = 50;               // memory training pass cap
  double E_min = 0.001;        // memory training error floor
  std::size_t c_max_memory = 50;  // memory store capacity (n/2 for default n)
  std::uint64_t seed = 1;

  // Fidelity switches, both off by default.
  bool literal_theta_bound = false;  // threshold delta drawn from (-1, gamma_theta)
  bool mu_theta_sum_mode = false;    // response radius = sum of scaled input elements

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

// Returns one message per violated constraint; empty means the config is valid.
inline std::vector<std::string> validate_config(const ExperimentConfig& cfg) {
  std::vector<std::string> errors;
  auto fail = [&errors](const std::string& msg) { errors.push_back(msg); };

  if (cfg.G_max < 1) fail("G_max must be at least 1");
  if (cfg.m < 1) fail("m must be positive");
  if (cfg.n < 1) fail("n must be positive");
  if (cfg.n > cfg.m) fail("n must not exceed m");
  if (cfg.Q < 1) fail("Q must be at least 1");
  if (cfg.E_sim < 0.0) fail("E_sim must be nonnegative");
  if (cfg.t < 1) fail("t must be at least 1");
  if (!(cfg.beta > 0.0 && cfg.beta < 1.0)) fail("beta must be in (0, 1)");
  if (cfg.n >= 1 && cfg.beta > 0.0 &&
      std::llround(cfg.beta * static_cast<double>(cfg.n)) >=
          static_cast<long long>(cfg.n))
    fail("round(beta*n) must be smaller than n");
  if (cfg.alpha <= 0.0) fail("alpha must be positive");
  if (!(cfg.a_fraction > 0.0 && cfg.a_fraction <= 1.0)) fail("a_fraction must be in (0, 1]");
  if (cfg.gamma_w <= 0.0) fail("gamma_w must be positive");
  if (cfg.gamma_theta <= 0.0) fail("gamma_theta must be positive");
  if (cfg.tau < 1) fail("tau must be at least 1");
  if (!(cfg.eta >= 0.1 && cfg.eta <= 1.0)) fail("eta outside [0.1, 1.0]");
  if (cfg.mu_theta <= 0.0) fail("mu_theta must be positive");
  if (cfg.T_IM < 1) fail("T_IM must be at least 1");
  if (cfg.E_min <= 0.0) fail("E_min must be positive");
  if (cfg.c_max_memory < 1) fail("c_max_memory must be at least 1");
  return errors;
}

namespace detail {

inline std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return {};
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

inline double parse_double(const std::string& key, const std::string& value) {
  std::size_t pos = 0;
  double out = 0.0;
  try {
    out = std::stod(value, &pos);
  } catch (const std::exception&) {
    throw std::invalid_argument("config key '" + key + "': not a number: '" + value + "'");
  }
  if (pos != value.size())
    throw std::invalid_argument("config key '" + key + "': trailing characters in '" + value + "'");
  return out;
}

inline long long parse_integer(const std::string& key, const std::string& value) {
  std::size_t pos = 0;
  long long out = 0;
  try {
    out = std::stoll(value, &pos);
  } catch (const std::exception&) {
    throw std::invalid_argument("config key '" + key + "': not an integer: '" + value + "'");
  }
  if (pos != value.size())
    throw std::invalid_argument("config key '" + key + "': trailing characters in '" + value + "'");
  return out;
}

inline bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "1" || value == "true") return true;
  if (value == "0" || value == "false") return false;
  throw std::invalid_argument("config key '" + key + "': expected 0/1/true/false, got '" + value + "'");
}

}  // namespace detail

// Applies one key=value override. Unknown keys and malformed values throw.
inline void apply_config_override(ExperimentConfig& cfg, const std::string& key,
                                  const std::string& value) {
  using detail::parse_bool;
  using detail::parse_double;
  using detail::parse_integer;

  if (key == "G_max") cfg.G_max = static_cast<int>(parse_integer(key, value));
  else if (key == "m") cfg.m = static_cast<std::size_t>(parse_integer(key, value));
  else if (key == "n") cfg.n = static_cast<std::size_t>(parse_integer(key, value));
  else if (key == "Q") cfg.Q = static_cast<std::size_t>(parse_integer(key, value));
  else if (key == "E_sim") cfg.E_sim = parse_double(key, value);
  else if (key == "t") cfg.t = static_cast<int>(parse_integer(key, value));
  else if (key == "beta") cfg.beta = parse_double(key, value);
  else if (key == "alpha") cfg.alpha = parse_double(key, value);
  else if (key == "a_fraction") cfg.a_fraction = parse_double(key, value);
  else if (key == "gamma_w") cfg.gamma_w = parse_double(key, value);
  else if (key == "gamma_theta") cfg.gamma_theta = parse_double(key, value);
  else if (key == "tau") cfg.tau = static_cast<int>(parse_integer(key, value));
  else if (key == "eta") cfg.eta = parse_double(key, value);
  else if (key == "mu_theta") cfg.mu_theta = parse_double(key, value);
  else if (key == "T_IM") cfg.T_IM = static_cast<int>(parse_integer(key, value));
  else if (key == "E_min") cfg.E_min = parse_double(key, value);
  else if (key == "c_max_memory") cfg.c_max_memory = static_cast<std::size_t>(parse_integer(key, value));
  else if (key == "seed") cfg.seed = static_cast<std::uint64_t>(parse_integer(key, value));
  else if (key == "literal_theta_bound") cfg.literal_theta_bound = parse_bool(key, value);
  else if (key == "mu_theta_sum_mode") cfg.mu_theta_sum_mode = parse_bool(key, value);
  else throw std::invalid_argument("unknown config key '" + key + "'");
}

// Parses flat key=value text. '#' starts a comment, blank lines are skipped.
inline std::map<std::string, std::string> parse_key_value_stream(std::istream& in,
                                                                 const std::string& origin) {
  std::map<std::string, std::string> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string trimmed = detail::trim(line);
    if (trimmed.empty()) continue;
    const auto eq = trimmed.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument(origin + ":" + std::to_string(line_no) + ": expected key=value");
    const std::string key = detail::trim(trimmed.substr(0, eq));
    const std::string value = detail::trim(trimmed.substr(eq + 1));
    if (key.empty())
      throw std::invalid_argument(origin + ":" + std::to_string(line_no) + ": empty key");
    out[key] = value;
  }
  return out;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  ExperimentConfig cfg;
  for (const auto& [key, value] : parse_key_value_stream(in, path))
    apply_config_override(cfg, key, value);
  return cfg;
}

}  // namespace csaim
