// Pipeline driver: coordnet <stage|all> --config <path> [--seed N] [--offline-toxicity] [--svg]
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "coordnet/pipeline.hpp"

int main(int argc, char** argv) {
  std::string stage_name;
  std::string config_path;
  std::optional<std::uint64_t> seed;
  coordnet::RunOptions options;

  std::string stages = "all";
  for (auto s : coordnet::all_stages()) stages += "|" + std::string(coordnet::to_string(s));

  CLI::App app{"Coordination and toxicity analysis pipeline"};
  app.add_option("stage", stage_name, stages)->required();
  app.add_option("-c,--config", config_path, "Pipeline configuration file")->required()->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "Override the configured seed");
  app.add_flag("--offline-toxicity", options.offline_toxicity, "Score with the bundled offline lexicon");
  app.add_flag("--svg", options.svg, "Also render SVG figures in the report stage");
  CLI11_PARSE(app, argc, argv);

  options.log = [](std::string_view line) { std::cerr << line << "\n"; };
  try {
    auto config = coordnet::load_config(config_path);
    if (seed) config.seed = *seed;
    if (stage_name == "all") {
      coordnet::run_all(config, options);
    } else {
      coordnet::run_stage(coordnet::parse_stage(stage_name), config, options);
    }
  } catch (const coordnet::DependencyError& e) {
    std::cerr << "dependency error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
