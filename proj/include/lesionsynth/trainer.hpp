#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "lesionsynth/checkpoint.hpp"
#include "lesionsynth/mapkit.hpp"
#include "lesionsynth/objectives.hpp"
#include "lesionsynth/synthnet.hpp"

namespace lesionsynth::trainer {

struct TrainingConfig {
  int epochs = 200;
  int decay_epochs = 100;  // linear-decay tail inside `epochs`
  double learning_rate = 2e-4;
  double adam_beta1 = 0.5;
  double adam_beta2 = 0.999;
  int batch_size = 1;
  uint64_t seed = 0;
  int width = 1024;
  int height = 512;
  bool use_boundary = true;
  double lambda_fm = 10.0;
  std::string checkpoint_dir = ".";
  int checkpoint_every = 20;

  synthnet::GeneratorConfig gen;
  synthnet::DiscriminatorConfig dis;

  void validate() const;
  // Canonical key=value serialization; basis of the fingerprint and the
  // checkpoint meta block.
  std::string serialize() const;
  static TrainingConfig deserialize(const std::string& text);
  std::string fingerprint() const;
};

struct Sample {
  Tensorf input;   // (C,H,W) one-hot (+boundary)
  Tensorf target;  // (3,H,W) in [-1,1]
};

class Pix2PixTrainer {
 public:
  explicit Pix2PixTrainer(const TrainingConfig& cfg);

  // One discriminator update then one generator update on a NCHW batch.
  objectives::LossReport train_step(const Tensorf& input, const Tensorf& target);

  // Full loop: constant lr then linear decay, periodic + final checkpoints,
  // NDJSON metrics (one record per step). Returns the final checkpoint.
  Checkpoint train(const std::vector<Sample>& dataset,
                   const std::string& metrics_path = "",
                   const std::optional<Checkpoint>& resume = std::nullopt);

  Tensorf synthesize_batch(const Tensorf& input);

  Checkpoint make_checkpoint(int64_t epoch) const;
  void load(const Checkpoint& ckpt);

  const TrainingConfig& config() const { return cfg_; }
  synthnet::Generator& generator() { return *gen_; }
  synthnet::MultiScaleDiscriminator& discriminator() { return *dis_; }

 private:
  TrainingConfig cfg_;
  std::unique_ptr<synthnet::Generator> gen_;
  std::unique_ptr<synthnet::MultiScaleDiscriminator> dis_;
  std::unique_ptr<nn::Adam> opt_g_;
  std::unique_ptr<nn::Adam> opt_d_;
  int64_t global_step_ = 0;
};

// Learning-rate factor for a 0-based epoch: 1 during the constant phase,
// then linear decay to 0.
double lr_factor(int epoch, int total_epochs, int decay_epochs);

// Map -> image inference from a saved checkpoint. Inputs are letterboxed to
// the trained resolution when needed; generator output is mapped to [0,255].
std::vector<RGBImage> synthesize(
    const Checkpoint& ckpt,
    const std::vector<std::pair<mapkit::SemanticLabelMap,
                                std::optional<mapkit::InstanceMap>>>& maps);

// Shared input-encoding helpers.
Tensorf encode_maps(const mapkit::SemanticLabelMap& sem,
                    const mapkit::InstanceMap* inst, int target_w, int target_h);
RGBImage tensor_to_image(const Tensorf& t, int batch_index = 0);
Tensorf image_to_tensor(const RGBImage& img);  // (3,H,W) in [-1,1]

}  // namespace lesionsynth::trainer
