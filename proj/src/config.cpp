#include "lesionsynth/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "lesionsynth/errors.hpp"
#include "lesionsynth/hash.hpp"

#include "json.hpp"

namespace lesionsynth::cli {

using nlohmann::json;

namespace {

std::string join_path(const std::string& prefix, const std::string& key) {
  return prefix.empty() ? key : prefix + "." + key;
}

void check_keys(const json& j, const std::string& path,
                std::initializer_list<const char*> allowed) {
  if (!j.is_object())
    throw ConfigError("config: expected an object at '" + (path.empty() ? "<root>" : path) + "'");
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* a : allowed)
      if (key == a) {
        ok = true;
        break;
      }
    if (!ok) throw ConfigError("config: unknown key '" + join_path(path, key) + "'");
  }
}

template <typename T>
void read_field(const json& j, const std::string& path, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    j.at(key).get_to(out);
  } catch (const json::exception& e) {
    throw ConfigError("config: bad value for '" + join_path(path, key) + "': " + e.what());
  }
}

void require_positive(double v, const std::string& key) {
  if (!(v > 0)) throw ConfigError("config: '" + key + "' must be > 0");
}

void parse_mapkit(const json& j, const std::string& path, MapkitConfig& c) {
  check_keys(j, path, {"slic_segments", "slic_compactness", "slic_iterations", "width", "height"});
  read_field(j, path, "slic_segments", c.slic_segments);
  read_field(j, path, "slic_compactness", c.slic_compactness);
  read_field(j, path, "slic_iterations", c.slic_iterations);
  read_field(j, path, "width", c.width);
  read_field(j, path, "height", c.height);
  require_positive(c.slic_segments, join_path(path, "slic_segments"));
  require_positive(c.slic_compactness, join_path(path, "slic_compactness"));
  require_positive(c.slic_iterations, join_path(path, "slic_iterations"));
  require_positive(c.width, join_path(path, "width"));
  require_positive(c.height, join_path(path, "height"));
}

void parse_generator(const json& j, const std::string& path, synthnet::GeneratorConfig& c) {
  check_keys(j, path, {"input_channels", "output_channels", "base_channels", "num_downsamples",
                       "num_residual_blocks"});
  read_field(j, path, "input_channels", c.input_channels);
  read_field(j, path, "output_channels", c.output_channels);
  read_field(j, path, "base_channels", c.base_channels);
  read_field(j, path, "num_downsamples", c.num_downsamples);
  read_field(j, path, "num_residual_blocks", c.num_residual_blocks);
}

void parse_discriminator(const json& j, const std::string& path,
                         synthnet::DiscriminatorConfig& c) {
  check_keys(j, path,
             {"cond_channels", "image_channels", "base_channels", "num_layers", "num_scales"});
  read_field(j, path, "cond_channels", c.cond_channels);
  read_field(j, path, "image_channels", c.image_channels);
  read_field(j, path, "base_channels", c.base_channels);
  read_field(j, path, "num_layers", c.num_layers);
  read_field(j, path, "num_scales", c.num_scales);
}

void parse_trainer(const json& j, const std::string& path, trainer::TrainingConfig& c) {
  check_keys(j, path,
             {"epochs", "decay_epochs", "learning_rate", "adam_beta1", "adam_beta2",
              "batch_size", "seed", "width", "height", "use_boundary", "lambda_fm",
              "checkpoint_dir", "checkpoint_every", "generator", "discriminator"});
  read_field(j, path, "epochs", c.epochs);
  read_field(j, path, "decay_epochs", c.decay_epochs);
  read_field(j, path, "learning_rate", c.learning_rate);
  read_field(j, path, "adam_beta1", c.adam_beta1);
  read_field(j, path, "adam_beta2", c.adam_beta2);
  read_field(j, path, "batch_size", c.batch_size);
  read_field(j, path, "seed", c.seed);
  read_field(j, path, "width", c.width);
  read_field(j, path, "height", c.height);
  read_field(j, path, "use_boundary", c.use_boundary);
  read_field(j, path, "lambda_fm", c.lambda_fm);
  read_field(j, path, "checkpoint_dir", c.checkpoint_dir);
  read_field(j, path, "checkpoint_every", c.checkpoint_every);
  if (j.contains("generator")) parse_generator(j.at("generator"), join_path(path, "generator"), c.gen);
  if (j.contains("discriminator"))
    parse_discriminator(j.at("discriminator"), join_path(path, "discriminator"), c.dis);
  // Keep the conditioning width in sync unless explicitly overridden.
  if (!j.contains("generator"))
    c.gen.input_channels = c.use_boundary ? 9 : 8;
  if (!j.contains("discriminator")) c.dis.cond_channels = c.gen.input_channels;
  require_positive(c.learning_rate, join_path(path, "learning_rate"));
  require_positive(c.epochs, join_path(path, "epochs"));
  require_positive(c.batch_size, join_path(path, "batch_size"));
  try {
    c.validate();
  } catch (const std::exception& e) {
    throw ConfigError("config: section '" + path + "': " + e.what());
  }
}

void parse_schedule(const json& j, const std::string& path, proggan::ResolutionSchedule& s) {
  check_keys(j, path,
             {"start_res", "target_res", "fade_epochs", "stable_epochs", "initial_stable_epochs"});
  read_field(j, path, "start_res", s.start_res);
  read_field(j, path, "target_res", s.target_res);
  read_field(j, path, "fade_epochs", s.fade_epochs);
  read_field(j, path, "stable_epochs", s.stable_epochs);
  read_field(j, path, "initial_stable_epochs", s.initial_stable_epochs);
}

void parse_proggan(const json& j, const std::string& path, proggan::PganConfig& c) {
  check_keys(j, path,
             {"latent_dim", "base_channels", "schedule", "learning_rate", "adam_beta1",
              "adam_beta2", "batch_size", "seed", "checkpoint_dir"});
  read_field(j, path, "latent_dim", c.latent_dim);
  read_field(j, path, "base_channels", c.base_channels);
  if (j.contains("schedule")) parse_schedule(j.at("schedule"), join_path(path, "schedule"), c.schedule);
  read_field(j, path, "learning_rate", c.learning_rate);
  read_field(j, path, "adam_beta1", c.adam_beta1);
  read_field(j, path, "adam_beta2", c.adam_beta2);
  read_field(j, path, "batch_size", c.batch_size);
  read_field(j, path, "seed", c.seed);
  read_field(j, path, "checkpoint_dir", c.checkpoint_dir);
  require_positive(c.learning_rate, join_path(path, "learning_rate"));
  try {
    c.validate();
  } catch (const std::exception& e) {
    throw ConfigError("config: section '" + path + "': " + e.what());
  }
}

void parse_classifier(const json& j, const std::string& path, eval::ClassifierConfig& c) {
  check_keys(j, path,
             {"input_res", "base_channels", "epochs", "batch_size", "learning_rate",
              "adam_beta1", "adam_beta2", "augment", "seed"});
  read_field(j, path, "input_res", c.input_res);
  read_field(j, path, "base_channels", c.base_channels);
  read_field(j, path, "epochs", c.epochs);
  read_field(j, path, "batch_size", c.batch_size);
  read_field(j, path, "learning_rate", c.learning_rate);
  read_field(j, path, "adam_beta1", c.adam_beta1);
  read_field(j, path, "adam_beta2", c.adam_beta2);
  read_field(j, path, "augment", c.augment);
  read_field(j, path, "seed", c.seed);
  require_positive(c.learning_rate, join_path(path, "learning_rate"));
}

void parse_spec(const json& j, const std::string& path, eval::DatasetSpec& spec) {
  check_keys(j, path, {"name", "parts"});
  read_field(j, path, "name", spec.name);
  if (!j.contains("parts")) throw ConfigError("config: '" + path + "' requires 'parts'");
  const json& parts = j.at("parts");
  if (!parts.is_array()) throw ConfigError("config: '" + join_path(path, "parts") + "' must be an array");
  int pi = 0;
  for (const auto& pj : parts) {
    const std::string ppath = join_path(path, "parts[" + std::to_string(pi++) + "]");
    check_keys(pj, ppath, {"source", "count"});
    eval::DatasetPart part;
    std::string src;
    read_field(pj, ppath, "source", src);
    if (src.empty()) throw ConfigError("config: '" + ppath + "' requires 'source'");
    try {
      part.source = eval::parse_source(src);
    } catch (const std::exception&) {
      throw ConfigError("config: bad source '" + src + "' at '" + ppath + "'");
    }
    read_field(pj, ppath, "count", part.count);
    require_positive(part.count, join_path(ppath, "count"));
    spec.parts.push_back(part);
  }
}

void parse_eval(const json& j, const std::string& path, EvalConfig& c) {
  check_keys(j, path,
             {"specs", "reference_spec", "runs_per_spec", "seed", "classifier_name",
              "classifier", "tta_replicas"});
  if (j.contains("specs")) {
    const json& specs = j.at("specs");
    if (!specs.is_array())
      throw ConfigError("config: '" + join_path(path, "specs") + "' must be an array");
    int si = 0;
    for (const auto& sj : specs) {
      eval::DatasetSpec spec;
      parse_spec(sj, join_path(path, "specs[" + std::to_string(si++) + "]"), spec);
      c.experiment.specs.push_back(std::move(spec));
    }
  }
  read_field(j, path, "reference_spec", c.experiment.reference_spec);
  read_field(j, path, "runs_per_spec", c.experiment.runs_per_spec);
  read_field(j, path, "seed", c.experiment.seed);
  read_field(j, path, "classifier_name", c.experiment.classifier_name);
  if (j.contains("classifier"))
    parse_classifier(j.at("classifier"), join_path(path, "classifier"), c.experiment.classifier);
  read_field(j, path, "tta_replicas", c.experiment.tta_replicas);
  require_positive(c.experiment.runs_per_spec, join_path(path, "runs_per_spec"));
  require_positive(c.experiment.tta_replicas, join_path(path, "tta_replicas"));
}

json schedule_to_json(const proggan::ResolutionSchedule& s) {
  return {{"start_res", s.start_res},
          {"target_res", s.target_res},
          {"fade_epochs", s.fade_epochs},
          {"stable_epochs", s.stable_epochs},
          {"initial_stable_epochs", s.initial_stable_epochs}};
}

}  // namespace

void PipelineConfig::validate() const {
  if (!(test_ratio > 0.0 && test_ratio < 1.0))
    throw ConfigError("config: 'test_ratio' must be in (0,1)");
  trainer.validate();
  proggan.validate();
  eval.experiment.classifier.validate();
  if (!eval.experiment.specs.empty()) eval.experiment.validate();
}

std::string PipelineConfig::canonical() const {
  json j;
  j["dataset_root"] = dataset_root;
  j["output_dir"] = output_dir;
  j["test_ratio"] = test_ratio;
  j["seed"] = seed;
  j["mapkit"] = {{"slic_segments", mapkit.slic_segments},
                 {"slic_compactness", mapkit.slic_compactness},
                 {"slic_iterations", mapkit.slic_iterations},
                 {"width", mapkit.width},
                 {"height", mapkit.height}};
  j["trainer"] = {
      {"epochs", trainer.epochs},
      {"decay_epochs", trainer.decay_epochs},
      {"learning_rate", trainer.learning_rate},
      {"adam_beta1", trainer.adam_beta1},
      {"adam_beta2", trainer.adam_beta2},
      {"batch_size", trainer.batch_size},
      {"seed", trainer.seed},
      {"width", trainer.width},
      {"height", trainer.height},
      {"use_boundary", trainer.use_boundary},
      {"lambda_fm", trainer.lambda_fm},
      {"checkpoint_dir", trainer.checkpoint_dir},
      {"checkpoint_every", trainer.checkpoint_every},
      {"generator",
       {{"input_channels", trainer.gen.input_channels},
        {"output_channels", trainer.gen.output_channels},
        {"base_channels", trainer.gen.base_channels},
        {"num_downsamples", trainer.gen.num_downsamples},
        {"num_residual_blocks", trainer.gen.num_residual_blocks}}},
      {"discriminator",
       {{"cond_channels", trainer.dis.cond_channels},
        {"image_channels", trainer.dis.image_channels},
        {"base_channels", trainer.dis.base_channels},
        {"num_layers", trainer.dis.num_layers},
        {"num_scales", trainer.dis.num_scales}}}};
  j["proggan"] = {{"latent_dim", proggan.latent_dim},
                  {"base_channels", proggan.base_channels},
                  {"schedule", schedule_to_json(proggan.schedule)},
                  {"learning_rate", proggan.learning_rate},
                  {"adam_beta1", proggan.adam_beta1},
                  {"adam_beta2", proggan.adam_beta2},
                  {"batch_size", proggan.batch_size},
                  {"seed", proggan.seed},
                  {"checkpoint_dir", proggan.checkpoint_dir}};
  json specs = json::array();
  for (const auto& s : eval.experiment.specs) {
    json parts = json::array();
    for (const auto& p : s.parts)
      parts.push_back({{"source", eval::source_name(p.source)}, {"count", p.count}});
    specs.push_back({{"name", s.name}, {"parts", parts}});
  }
  j["eval"] = {{"specs", specs},
               {"reference_spec", eval.experiment.reference_spec},
               {"runs_per_spec", eval.experiment.runs_per_spec},
               {"seed", eval.experiment.seed},
               {"classifier_name", eval.experiment.classifier_name},
               {"classifier",
                {{"input_res", eval.experiment.classifier.input_res},
                 {"base_channels", eval.experiment.classifier.base_channels},
                 {"epochs", eval.experiment.classifier.epochs},
                 {"batch_size", eval.experiment.classifier.batch_size},
                 {"learning_rate", eval.experiment.classifier.learning_rate},
                 {"adam_beta1", eval.experiment.classifier.adam_beta1},
                 {"adam_beta2", eval.experiment.classifier.adam_beta2},
                 {"augment", eval.experiment.classifier.augment},
                 {"seed", eval.experiment.classifier.seed}}},
               {"tta_replicas", eval.experiment.tta_replicas}};
  return j.dump();
}

std::string PipelineConfig::fingerprint() const { return sha256_hex(canonical()); }

PipelineConfig parse_config_text(const std::string& text) {
  json j;
  try {
    j = text.empty() ? json::object() : json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: parse failure: ") + e.what());
  }
  if (j.is_null()) j = json::object();

  PipelineConfig cfg;
  check_keys(j, "",
             {"dataset_root", "output_dir", "test_ratio", "seed", "mapkit", "trainer", "proggan",
              "eval"});
  read_field(j, "", "dataset_root", cfg.dataset_root);
  read_field(j, "", "output_dir", cfg.output_dir);
  read_field(j, "", "test_ratio", cfg.test_ratio);
  read_field(j, "", "seed", cfg.seed);
  if (cfg.dataset_root.empty()) {
    if (const char* env = std::getenv("LESIONSYNTH_DATA")) cfg.dataset_root = env;
  }

  // Top-level seed is the default for every section.
  cfg.trainer.seed = cfg.seed;
  cfg.proggan.seed = cfg.seed;
  cfg.eval.experiment.seed = cfg.seed;
  cfg.eval.experiment.classifier.seed = cfg.seed;

  if (j.contains("mapkit")) parse_mapkit(j.at("mapkit"), "mapkit", cfg.mapkit);
  if (j.contains("trainer")) parse_trainer(j.at("trainer"), "trainer", cfg.trainer);
  if (j.contains("proggan")) parse_proggan(j.at("proggan"), "proggan", cfg.proggan);
  if (j.contains("eval")) parse_eval(j.at("eval"), "eval", cfg.eval);

  cfg.validate();
  return cfg;
}

PipelineConfig parse_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("config: cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

}  // namespace lesionsynth::cli
