// padicnn: run p-adic quantum / classical cellular neural network scenarios.
//
//   padicnn run <config.json>
//   padicnn preset <name> [--horizon paper|desk] [--out DIR] [--cat-matrix PATH]
//   padicnn check
//   padicnn batch <dir>

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <future>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include "padicnn/padicnn.hpp"

namespace {

using namespace padicnn;

int report(const RunReport& r, std::ostream& os = std::cout) {
  os << r.summary();
  for (const auto& f : r.files) os << "wrote=" << f.string() << '\n';
  if (r.exit_code != kExitOk) std::cerr << "error: " << r.message << '\n';
  return r.exit_code;
}

int cmd_run(const std::string& path, bool dump_only) {
  ScenarioConfig c;
  try {
    c = load_config(path);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  }
  if (dump_only) {
    std::cout << effective_parameters(c);
    return kExitOk;
  }
  return report(run_scenario(c));
}

int cmd_preset(const std::string& name, const std::string& horizon, const std::string& out_dir,
               const std::string& cat_matrix, bool dump_only, const std::string& save_path) {
  ScenarioConfig c;
  try {
    if (horizon != "paper" && horizon != "desk") throw ConfigError("--horizon must be paper or desk");
    c = make_preset(name, horizon == "paper" ? Horizon::paper : Horizon::desk, cat_matrix);
    if (!cat_matrix.empty() && !std::filesystem::exists(cat_matrix))
      throw ConfigError("cat matrix file " + cat_matrix + " does not exist");
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  }
  if (!out_dir.empty()) c.output.dir = out_dir;
  if (!save_path.empty()) {
    std::ofstream out(save_path);
    out << save_config(c);
    if (!out) {
      std::cerr << "error: cannot write " << save_path << '\n';
      return kExitIo;
    }
    return kExitOk;
  }
  if (dump_only) {
    std::cout << effective_parameters(c);
    return kExitOk;
  }
  return report(run_scenario(c));
}

int cmd_check() {
  const bool ok = print_self_check(std::cout, run_self_check());
  return ok ? 0 : 1;
}

int cmd_batch(const std::string& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) {
    std::cerr << "error: " << dir << " is not a directory\n";
    return kExitIo;
  }
  std::vector<fs::path> configs;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".json") configs.push_back(entry.path());
  std::sort(configs.begin(), configs.end());
  if (configs.empty()) {
    std::cerr << "warning: no *.json configs in " << dir << '\n';
    return kExitOk;
  }

  struct Outcome {
    fs::path path;
    RunReport report;
  };
  auto run_one = [](const fs::path& path) {
    Outcome o{path, {}};
    try {
      o.report = run_scenario(load_config(path.string()));
    } catch (const ConfigError& e) {
      o.report.exit_code = kExitConfig;
      o.report.message = e.what();
    }
    return o;
  };

  // Scenarios are independent; each one writes to its own output directory.
  const std::size_t workers = std::max(1u, std::thread::hardware_concurrency());
  std::vector<Outcome> outcomes;
  for (std::size_t first = 0; first < configs.size(); first += workers) {
    std::vector<std::future<Outcome>> running;
    for (std::size_t k = first; k < std::min(configs.size(), first + workers); ++k)
      running.push_back(std::async(std::launch::async, run_one, configs[k]));
    for (auto& f : running) outcomes.push_back(f.get());
  }

  int worst = kExitOk;
  for (const auto& o : outcomes) {
    std::cout << o.path.filename().string() << ": exit=" << o.report.exit_code
              << " final_norm_sq=" << format_number(o.report.final_norm_sq);
    if (!o.report.message.empty()) std::cout << " message=\"" << o.report.message << '"';
    std::cout << '\n';
    worst = std::max(worst, o.report.exit_code);
  }
  return worst;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Simulation engine for p-adic quantum and classical cellular neural networks"};
  app.require_subcommand(1);

  std::string config_path;
  bool run_dump = false;
  auto* run = app.add_subcommand("run", "Run a scenario described by a JSON config file");
  run->add_option("config", config_path, "Scenario config (JSON)")->required();
  run->add_flag("--dump-params", run_dump, "Print the effective parameters and exit");

  std::string preset_name, horizon = "desk", out_dir, cat_matrix, save_path;
  bool preset_dump = false;
  auto* preset = app.add_subcommand("preset", "Run one of the built-in simulation presets");
  preset->add_option("name", preset_name, "Preset name")->required()->check(CLI::IsMember(preset_names()));
  preset->add_option("--horizon", horizon, "paper or desk time horizon")->check(CLI::IsMember({"paper", "desk"}));
  preset->add_option("--out", out_dir, "Output directory (default out/<name>)");
  preset->add_option("--cat-matrix", cat_matrix, "CSV with the 64x64 cat-cortex matrix (default: synthetic stand-in)");
  preset->add_flag("--dump-params", preset_dump, "Print the effective parameters and exit");
  preset->add_option("--save-config", save_path, "Write the preset as a JSON config and exit");

  auto* check = app.add_subcommand("check", "Run the invariant and certificate self-check");

  std::string batch_dir;
  auto* batch = app.add_subcommand("batch", "Run every *.json config in a directory");
  batch->add_option("dir", batch_dir, "Directory of configs")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  if (*run) return cmd_run(config_path, run_dump);
  if (*preset) return cmd_preset(preset_name, horizon, out_dir, cat_matrix, preset_dump, save_path);
  if (*check) return cmd_check();
  if (*batch) return cmd_batch(batch_dir);
  return kExitConfig;
}
