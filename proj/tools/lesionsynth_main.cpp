#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "lesionsynth/config.hpp"
#include "lesionsynth/errors.hpp"
#include "lesionsynth/pipeline.hpp"

int main(int argc, char** argv) {
  CLI::App app{"lesionsynth: skin-lesion image synthesis and evaluation pipeline"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  uint64_t seed = 0;
  bool seed_set = false;

  const std::vector<std::string> commands = {"prepare-maps", "train-pix2pixhd", "train-pgan",
                                             "synthesize",   "evaluate",        "report"};
  for (const auto& name : commands) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "Path to the JSON pipeline config");
    sub->add_option("--out", out_dir, "Output directory (overrides config)");
    sub->add_option("--seed", seed, "Seed override")->each([&](const std::string&) {
      seed_set = true;
    });
  }

  CLI11_PARSE(app, argc, argv);

  const std::string command = app.get_subcommands().at(0)->get_name();
  try {
    lesionsynth::cli::PipelineConfig cfg = config_path.empty()
                                               ? lesionsynth::cli::parse_config_text("")
                                               : lesionsynth::cli::parse_config(config_path);
    if (!out_dir.empty()) cfg.output_dir = out_dir;
    if (seed_set) {
      cfg.seed = seed;
      cfg.trainer.seed = seed;
      cfg.proggan.seed = seed;
      cfg.eval.experiment.seed = seed;
      cfg.eval.experiment.classifier.seed = seed;
    }
    return lesionsynth::cli::dispatch(command, cfg);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
