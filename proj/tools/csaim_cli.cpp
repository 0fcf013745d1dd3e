// Command-line front end: dataset generation, single experiment runs and
// cross-run comparison tables.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "csaim/config.hpp"
#include "csaim/dataset.hpp"
#include "csaim/harness.hpp"

namespace fs = std::filesystem;

namespace {

int cmd_gen(const std::string& spec_path, const std::string& out_path) {
  const csaim::dataset::DatasetSpec spec = csaim::dataset::load_dataset_spec(spec_path);
  const std::vector<csaim::dataset::RawRecord> records = csaim::dataset::generate(spec);
  csaim::dataset::write_csv_records(records, out_path);
  std::cout << "wrote " << records.size() << " records (" << spec.n_chd << " CHD, "
            << spec.n_non_chd << " non-CHD) to " << out_path << '\n';
  return 0;
}

int cmd_run(const std::string& config_path, const std::string& train_path,
            const std::string& test_path, const std::string& mode_name,
            const std::vector<std::string>& overrides, std::uint64_t seed, bool seed_given,
            const std::string& out_dir) {
  csaim::ExperimentConfig cfg =
      config_path.empty() ? csaim::ExperimentConfig{} : csaim::load_config(config_path);
  for (const std::string& kv : overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("--set expects key=value, got '" + kv + "'");
    csaim::apply_config_override(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (seed_given) cfg.seed = seed;

  if (const auto errors = csaim::validate_config(cfg); !errors.empty()) {
    std::cerr << "invalid configuration:\n";
    for (const auto& e : errors) std::cerr << "  " << e << '\n';
    return 2;
  }

  const csaim::harness::Mode mode = csaim::harness::mode_from_string(mode_name);
  csaim::memory::MemoryStore store(cfg.c_max_memory);
  const csaim::harness::RunReport report =
      csaim::harness::run_experiment(cfg, train_path, test_path, mode, &store);
  csaim::harness::write_run_outputs(report, store, out_dir);

  std::cout << "mode=" << csaim::harness::to_string(report.mode) << " seed=" << report.seed
            << " train=" << 100.0 * report.train_correct_ratio
            << "% test=" << 100.0 * report.test_correct_ratio
            << "% memory_cells=" << report.memory_cells << " wall=" << report.wall_time_seconds
            << "s\n";
  std::cout << "outputs in " << out_dir << '\n';
  return 0;
}

int cmd_compare(const std::string& in_dir, std::size_t repeats) {
  std::vector<fs::path> paths;
  for (const auto& entry : fs::recursive_directory_iterator(in_dir)) {
    if (entry.is_regular_file() && entry.path().filename() == "report.json")
      paths.push_back(entry.path());
  }
  std::sort(paths.begin(), paths.end());
  if (paths.empty()) {
    std::cerr << "no report.json files under " << in_dir << '\n';
    return 2;
  }
  std::vector<csaim::harness::RunReport> reports;
  for (const fs::path& p : paths) {
    std::ifstream in(p);
    nlohmann::json j;
    in >> j;
    reports.push_back(csaim::harness::report_from_json(j));
  }
  const auto rows = csaim::harness::compare(reports, repeats);
  std::cout << csaim::harness::format_comparison(rows);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"clonal-selection classifier with immunological memory"};
  app.require_subcommand(1);

  auto* gen = app.add_subcommand("gen", "generate a synthetic dataset CSV");
  std::string gen_spec, gen_out;
  gen->add_option("--spec", gen_spec, "dataset spec file (key=value)")->required();
  gen->add_option("--out", gen_out, "output CSV path")->required();

  auto* run = app.add_subcommand("run", "run one experiment");
  std::string run_config, run_train, run_test, run_mode = "csaim", run_out = "out";
  std::vector<std::string> run_sets;
  std::uint64_t run_seed = 0;
  run->add_option("--config", run_config, "config file (key=value); defaults if omitted");
  run->add_option("--train", run_train, "training CSV")->required();
  run->add_option("--test", run_test, "test CSV")->required();
  run->add_option("--mode", run_mode, "recsa|csaim")->required();
  auto* seed_opt = run->add_option("--seed", run_seed, "seed override");
  run->add_option("--set", run_sets, "config override key=value (repeatable)");
  run->add_option("--out", run_out, "output directory")->required();

  auto* cmp = app.add_subcommand("compare", "aggregate report.json files into a table");
  std::string cmp_in;
  std::size_t cmp_repeats = 0;
  cmp->add_option("--in", cmp_in, "directory scanned recursively for report.json")->required();
  cmp->add_option("--repeats", cmp_repeats, "expected runs per mode (0 = any)")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return cmd_gen(gen_spec, gen_out);
    if (run->parsed())
      return cmd_run(run_config, run_train, run_test, run_mode, run_sets, run_seed,
                     seed_opt->count() > 0, run_out);
    if (cmp->parsed()) return cmd_compare(cmp_in, cmp_repeats);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
