#pragma once

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "csaim/config.hpp"
#include "csaim/dataset.hpp"
#include "csaim/engine.hpp"
#include "csaim/memory.hpp"

namespace csaim::harness {

enum class Mode { recsa, csaim };

inline std::string to_string(Mode mode) { return mode == Mode::recsa ? "recsa" : "csaim"; }

inline Mode mode_from_string(const std::string& s) {
  if (s == "recsa") return Mode::recsa;
  if (s == "csaim") return Mode::csaim;
  throw std::invalid_argument("unknown mode '" + s + "' (expected recsa or csaim)");
}

struct RunReport {
  Mode mode = Mode::recsa;
  std::uint64_t seed = 0;
  ExperimentConfig config;
  std::vector<engine::GenerationTrace> traces;
  double train_correct_ratio = 0.0;
  double test_correct_ratio = 0.0;
  double wall_time_seconds = 0.0;
  std::size_t memory_cells = 0;
  std::size_t memory_refusals = 0;
};

namespace detail {

inline double correct_ratio(std::span<const Sample> ds, const memory::MemoryStore* store,
                            const Antibody& best, const ExperimentConfig& cfg) {
  if (ds.empty()) return 0.0;
  int correct = 0;
  for (const Sample& s : ds) {
    const int label = store ? memory::classify_with_memory(*store, s, best, cfg.E_sim,
                                                           cfg.mu_theta, cfg.mu_theta_sum_mode)
                            : classify(best, s, cfg.E_sim);
    correct += label == s.label;
  }
  return static_cast<double>(correct) / static_cast<double>(ds.size());
}

}  // namespace detail

// One full run on in-memory datasets. recsa mode runs the plain loop; csaim
// mode enables the memory store and memory-first classification.
inline RunReport run_experiment(const ExperimentConfig& cfg, std::span<const Sample> train,
                                std::span<const Sample> test, Mode mode,
                                memory::MemoryStore* store_out = nullptr) {
  const auto start = std::chrono::steady_clock::now();

  memory::MemoryStore store(cfg.c_max_memory);
  memory::MemoryStore* store_ptr = mode == Mode::csaim ? &store : nullptr;

  engine::RunResult result = engine::run(cfg, train, store_ptr);

  RunReport report;
  report.mode = mode;
  report.seed = cfg.seed;
  report.config = cfg;
  report.traces = std::move(result.traces);
  report.train_correct_ratio = detail::correct_ratio(train, store_ptr, result.best, cfg);
  report.test_correct_ratio = detail::correct_ratio(test, store_ptr, result.best, cfg);
  report.memory_cells = store_ptr ? store.size() : 0;
  report.memory_refusals = store_ptr ? store.refusals : 0;
  report.wall_time_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (store_out) *store_out = std::move(store);
  return report;
}

inline RunReport run_experiment(const ExperimentConfig& cfg, const std::string& train_path,
                                const std::string& test_path, Mode mode,
                                memory::MemoryStore* store_out = nullptr) {
  const std::vector<Sample> train = dataset::read_csv(train_path);
  const std::vector<Sample> test = dataset::read_csv(test_path);
  return run_experiment(cfg, train, test, mode, store_out);
}

// --- serialization -------------------------------------------------------

namespace detail {

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

inline constexpr const char* kTraceHeader = "generation,best_affinity,correct_ratio,memory_cells";

inline std::string trace_csv(const std::vector<engine::GenerationTrace>& traces) {
  std::string out = kTraceHeader;
  out += '\n';
  for (const engine::GenerationTrace& t : traces) {
    out += std::to_string(t.generation);
    out += ',';
    out += std::to_string(t.best_affinity);
    out += ',';
    out += detail::format_double(t.correct_ratio);
    out += ',';
    out += std::to_string(t.memory_cells);
    out += '\n';
  }
  return out;
}

inline nlohmann::json config_to_json(const ExperimentConfig& c) {
  return nlohmann::json{{"G_max", c.G_max},
                        {"m", c.m},
                        {"n", c.n},
                        {"Q", c.Q},
                        {"E_sim", c.E_sim},
                        {"t", c.t},
                        {"beta", c.beta},
                        {"alpha", c.alpha},
                        {"a_fraction", c.a_fraction},
                        {"gamma_w", c.gamma_w},
                        {"gamma_theta", c.gamma_theta},
                        {"tau", c.tau},
                        {"eta", c.eta},
                        {"mu_theta", c.mu_theta},
                        {"T_IM", c.T_IM},
                        {"E_min", c.E_min},
                        {"c_max_memory", c.c_max_memory},
                        {"seed", c.seed},
                        {"literal_theta_bound", c.literal_theta_bound},
                        {"mu_theta_sum_mode", c.mu_theta_sum_mode}};
}

inline ExperimentConfig config_from_json(const nlohmann::json& j) {
  ExperimentConfig c;
  j.at("G_max").get_to(c.G_max);
  j.at("m").get_to(c.m);
  j.at("n").get_to(c.n);
  j.at("Q").get_to(c.Q);
  j.at("E_sim").get_to(c.E_sim);
  j.at("t").get_to(c.t);
  j.at("beta").get_to(c.beta);
  j.at("alpha").get_to(c.alpha);
  j.at("a_fraction").get_to(c.a_fraction);
  j.at("gamma_w").get_to(c.gamma_w);
  j.at("gamma_theta").get_to(c.gamma_theta);
  j.at("tau").get_to(c.tau);
  j.at("eta").get_to(c.eta);
  j.at("mu_theta").get_to(c.mu_theta);
  j.at("T_IM").get_to(c.T_IM);
  j.at("E_min").get_to(c.E_min);
  j.at("c_max_memory").get_to(c.c_max_memory);
  j.at("seed").get_to(c.seed);
  j.at("literal_theta_bound").get_to(c.literal_theta_bound);
  j.at("mu_theta_sum_mode").get_to(c.mu_theta_sum_mode);
  return c;
}

inline nlohmann::json report_to_json(const RunReport& r) {
  nlohmann::json traces = nlohmann::json::array();
  for (const engine::GenerationTrace& t : r.traces)
    traces.push_back({{"generation", t.generation},
                      {"best_affinity", t.best_affinity},
                      {"correct_ratio", t.correct_ratio},
                      {"memory_cells", t.memory_cells},
                      {"elite_affinity", t.elite_affinity}});
  return nlohmann::json{{"mode", to_string(r.mode)},
                        {"seed", r.seed},
                        {"config", config_to_json(r.config)},
                        {"train_correct_ratio", r.train_correct_ratio},
                        {"test_correct_ratio", r.test_correct_ratio},
                        {"wall_time_seconds", r.wall_time_seconds},
                        {"memory_cells", r.memory_cells},
                        {"memory_refusals", r.memory_refusals},
                        {"traces", std::move(traces)}};
}

inline RunReport report_from_json(const nlohmann::json& j) {
  RunReport r;
  r.mode = mode_from_string(j.at("mode").get<std::string>());
  j.at("seed").get_to(r.seed);
  r.config = config_from_json(j.at("config"));
  j.at("train_correct_ratio").get_to(r.train_correct_ratio);
  j.at("test_correct_ratio").get_to(r.test_correct_ratio);
  j.at("wall_time_seconds").get_to(r.wall_time_seconds);
  j.at("memory_cells").get_to(r.memory_cells);
  j.at("memory_refusals").get_to(r.memory_refusals);
  for (const nlohmann::json& t : j.at("traces")) {
    engine::GenerationTrace trace;
    t.at("generation").get_to(trace.generation);
    t.at("best_affinity").get_to(trace.best_affinity);
    t.at("correct_ratio").get_to(trace.correct_ratio);
    t.at("memory_cells").get_to(trace.memory_cells);
    t.at("elite_affinity").get_to(trace.elite_affinity);
    r.traces.push_back(trace);
  }
  return r;
}

// Writes trace.csv, report.json and memory_snapshot.txt into out_dir.
inline void write_run_outputs(const RunReport& report, const memory::MemoryStore& store,
                              const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  {
    std::ofstream out(out_dir / "trace.csv", std::ios::binary);
    if (!out) throw std::runtime_error("cannot write trace.csv");
    out << trace_csv(report.traces);
  }
  {
    std::ofstream out(out_dir / "report.json", std::ios::binary);
    if (!out) throw std::runtime_error("cannot write report.json");
    out << report_to_json(report).dump(2) << '\n';
  }
  {
    std::ofstream out(out_dir / "memory_snapshot.txt", std::ios::binary);
    if (!out) throw std::runtime_error("cannot write memory_snapshot.txt");
    memory::write_snapshot(store, out);
  }
}

// --- comparison ----------------------------------------------------------

struct ComparisonRow {
  Mode mode = Mode::recsa;
  std::size_t runs = 0;
  double mean_train = 0.0;
  double mean_test = 0.0;
};

// Mean correct ratios per mode. When repeats is nonzero every mode present
// must have exactly that many reports.
inline std::vector<ComparisonRow> compare(const std::vector<RunReport>& reports,
                                          std::size_t repeats = 0) {
  if (reports.empty()) throw std::invalid_argument("compare: no reports");
  std::vector<ComparisonRow> rows;
  for (const Mode mode : {Mode::recsa, Mode::csaim}) {
    ComparisonRow row;
    row.mode = mode;
    for (const RunReport& r : reports) {
      if (r.mode != mode) continue;
      ++row.runs;
      row.mean_train += r.train_correct_ratio;
      row.mean_test += r.test_correct_ratio;
    }
    if (row.runs == 0) continue;
    if (repeats != 0 && row.runs != repeats)
      throw std::invalid_argument("compare: mode " + to_string(mode) + " has " +
                                  std::to_string(row.runs) + " reports, expected " +
                                  std::to_string(repeats));
    row.mean_train /= static_cast<double>(row.runs);
    row.mean_test /= static_cast<double>(row.runs);
    rows.push_back(row);
  }
  return rows;
}

inline std::string format_comparison(const std::vector<ComparisonRow>& rows) {
  std::ostringstream out;
  out << "mode   runs  train    test\n";
  char buf[128];
  for (const ComparisonRow& row : rows) {
    std::snprintf(buf, sizeof buf, "%-6s %4zu  %6.2f%%  %6.2f%%\n", to_string(row.mode).c_str(),
                  row.runs, 100.0 * row.mean_train, 100.0 * row.mean_test);
    out << buf;
  }
  out << "# reference results on the original (non-distributed) clinical database:\n"
         "# RECSA 62.3% train / 58.7% test, CSAIM 99.6% train / 99.4% test;\n"
         "# listed for context only, not expected on synthetic data.\n";
  return out.str();
}

}  // namespace csaim::harness
