#pragma once

#include <memory>
#include <string>
#include <vector>

#include "lesionsynth/checkpoint.hpp"
#include "lesionsynth/image.hpp"
#include "lesionsynth/nn.hpp"
#include "lesionsynth/tensor.hpp"

namespace lesionsynth::proggan {

enum class ConditionLabel { kBenign = 0, kMelanoma = 1 };

ConditionLabel parse_label(const std::string& s);
std::string label_name(ConditionLabel l);

struct ResolutionSchedule {
  int start_res = 4;
  int target_res = 256;
  int fade_epochs = 30;
  int stable_epochs = 30;
  // The opening 4x4 stage has nothing to fade from; it trains
  // stabilization-only for this many epochs.
  int initial_stable_epochs = 30;

  void validate() const;
  std::vector<int> stage_resolutions() const;  // 4, 8, ..., target_res
  int num_stages() const;
  int epochs_for_stage(int stage) const;
  int total_epochs() const;
};

// Blend weight of the newly added resolution block:
// min(1, (epoch_in_stage+1)/fade_epochs); 1 during stabilization.
double fade_alpha(int epoch_in_stage, const ResolutionSchedule& schedule);

// Broadcasts the 2-entry one-hot label as constant planes appended
// channel-wise. Accepts (C,H,W) or (N,C,H,W).
Tensorf condition_concat(const Tensorf& features, ConditionLabel label);

struct PganConfig {
  int latent_dim = 64;
  int base_channels = 64;  // channels at 4x4, halving per stage (floor 8)
  ResolutionSchedule schedule;
  double learning_rate = 1e-3;
  double adam_beta1 = 0.0;
  double adam_beta2 = 0.99;
  int batch_size = 4;
  uint64_t seed = 0;
  std::string checkpoint_dir = ".";

  void validate() const;
  std::string serialize() const;
  static PganConfig deserialize(const std::string& text);
  std::string fingerprint() const;
  int channels_at(int stage) const;
};

// Noise + label -> image generator with per-stage toRGB heads and fade-in
// blending of the newest block.
class PganGenerator {
 public:
  PganGenerator(const PganConfig& cfg, nn::Rng& rng);

  // z: (N, latent_dim); labels: one per batch item.
  Tensorf forward(const Tensorf& z, const std::vector<ConditionLabel>& labels, int stage,
                  double alpha);
  Tensorf backward(const Tensorf& gy);
  std::vector<nn::Parameter*> params();

 private:
  PganConfig cfg_;
  nn::Sequential fc_;         // (latent+2) -> ch0*4*4
  nn::Sequential base_conv_;  // 4x4 conv block
  std::vector<std::unique_ptr<nn::Sequential>> blocks_;  // stage s>=1: res/2 -> res
  std::vector<std::unique_ptr<nn::Sequential>> to_rgb_;
  std::vector<class ConditionConcatLayer*> concat_sites_;
  nn::Upsample2xNearest old_path_up_;

  int fwd_stage_ = 0;
  bool fwd_fade_ = false;
  double fwd_alpha_ = 1.0;
  int fwd_batch_ = 0;
};

class PganDiscriminator {
 public:
  PganDiscriminator(const PganConfig& cfg, nn::Rng& rng);

  Tensorf forward(const Tensorf& img, const std::vector<ConditionLabel>& labels, int stage,
                  double alpha);  // (N,1) logits
  Tensorf backward(const Tensorf& gy);
  std::vector<nn::Parameter*> params();

 private:
  PganConfig cfg_;
  std::vector<std::unique_ptr<nn::Sequential>> from_rgb_;
  std::vector<std::unique_ptr<nn::Sequential>> blocks_;  // stage s>=1: res -> res/2
  nn::Sequential head_conv_;  // minibatch stddev + conv at 4x4
  nn::Sequential head_fc_;    // flattened -> 1 logit
  std::vector<class ConditionConcatLayer*> concat_sites_;
  nn::AvgPool2x2 old_path_down_;

  int fwd_stage_ = 0;
  bool fwd_fade_ = false;
  double fwd_alpha_ = 1.0;
  int fwd_batch_ = 0;
};

struct LabeledImage {
  Tensorf image;  // (3, target_res, target_res) in [-1,1]
  ConditionLabel label;
};

// Progressive loop: per stage fade then stabilize, LSGAN objective,
// checkpoint at the end.
Checkpoint train_pgan(const PganConfig& cfg, const std::vector<LabeledImage>& dataset,
                      const std::string& metrics_path = "");

std::vector<RGBImage> sample_pgan(const Checkpoint& ckpt, ConditionLabel label, int n,
                                  uint64_t seed);
// Tensor variant used by the evaluation harness.
std::vector<Tensorf> sample_pgan_tensors(const Checkpoint& ckpt, ConditionLabel label, int n,
                                         uint64_t seed);

}  // namespace lesionsynth::proggan
