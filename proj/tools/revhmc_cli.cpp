#include <revhmc/experiments.hpp>

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

int main(int argc, char** argv) {
  CLI::App app{"revhmc: reversibility-checked (G)HMC sampling experiments"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "Run an experiment described by a JSON config file");
  std::string config_path;
  run->add_option("config", config_path, "path to the experiment config (JSON)")->required();
  std::optional<std::uint64_t> seed;
  run->add_option("--seed", seed, "override run.seed");
  std::optional<std::string> out_dir;
  run->add_option("--out", out_dir, "override run.output_dir");
  std::vector<std::string> overrides;
  run->add_option("--override", overrides,
                  "dotted-path override, e.g. kernel.dt=0.5 (repeatable)");

  CLI11_PARSE(app, argc, argv);

  try {
    std::ifstream file(config_path);
    if (!file) throw std::invalid_argument("cannot open config file: " + config_path);
    revhmc::Json doc = revhmc::Json::parse(file);
    for (const auto& kv : overrides) revhmc::apply_override(doc, kv);
    if (seed) doc["run"]["seed"] = *seed;
    if (out_dir)
      doc["run"]["output_dir"] = *out_dir;
    else if (const char* env = std::getenv("REVHMC_OUT_DIR"))
      doc["run"]["output_dir"] = env;

    const revhmc::ExperimentConfig cfg = revhmc::parse_experiment_config(doc);
    const revhmc::ExperimentResult result = revhmc::run_experiment(cfg);
    std::cout << "artifacts written to " << result.out_dir.string() << "\n";
    std::cout << result.summary.dump(2) << "\n";
    return 0;
  } catch (const revhmc::Json::parse_error& e) {
    std::cerr << "config parse error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << "\n";
    return 3;
  }
}
