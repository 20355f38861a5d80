#pragma once

#include <vector>

#include "lesionsynth/nn.hpp"
#include "lesionsynth/objectives.hpp"
#include "lesionsynth/tensor.hpp"

namespace lesionsynth::synthnet {

using objectives::FeaturePyramid;

struct GeneratorConfig {
  int input_channels = 9;  // 8 labels + boundary
  int output_channels = 3;
  int base_channels = 64;
  int num_downsamples = 4;
  int num_residual_blocks = 9;
};

struct DiscriminatorConfig {
  int cond_channels = 9;
  int image_channels = 3;
  int base_channels = 64;
  int num_layers = 4;  // conv blocks before the patch-logit conv
  int num_scales = 3;
};

// Coarse-to-fine global generator: wide-kernel input conv, stride-2
// downsampling chain, residual bottleneck, mirrored transposed convs,
// wide-kernel output conv with tanh.
class Generator {
 public:
  Generator(const GeneratorConfig& cfg, nn::Rng& rng);

  Tensorf forward(const Tensorf& x);
  Tensorf backward(const Tensorf& gy);
  std::vector<nn::Parameter*> params();

  int conv_layer_count() const { return conv_count_; }
  const GeneratorConfig& config() const { return cfg_; }

 private:
  GeneratorConfig cfg_;
  nn::Sequential net_;
  int conv_count_ = 0;
};

// One 70x70-receptive-field patch discriminator; forward exposes the
// per-block activations plus the final logit map.
class PatchDiscriminator {
 public:
  PatchDiscriminator(const std::string& name, int in_channels,
                     const DiscriminatorConfig& cfg, nn::Rng& rng);

  std::vector<Tensorf> forward(const Tensorf& x);
  // feature_grads aligns with forward's output (last entry = logit grad);
  // returns the gradient w.r.t. the input.
  Tensorf backward(const std::vector<Tensorf>& feature_grads);
  void collect(std::vector<nn::Parameter*>& out);

  size_t num_features() const { return stages_.size(); }

 private:
  std::vector<nn::Sequential> stages_;
};

// [x, pool(x), pool(pool(x))] with 3x3 stride-2 reflect average pooling.
std::vector<Tensorf> downsample_pyramid(const Tensorf& x, int levels = 3);

class MultiScaleDiscriminator {
 public:
  MultiScaleDiscriminator(const DiscriminatorConfig& cfg, nn::Rng& rng);

  // Concatenates cond and img channel-wise and evaluates every scale.
  FeaturePyramid<float> forward(const Tensorf& cond, const Tensorf& img);
  // Backward through all scales and the pooling chain; returns the gradient
  // w.r.t. the full-resolution image (the cond slice is discarded).
  Tensorf backward(const FeaturePyramid<float>& feature_grads);
  std::vector<nn::Parameter*> params();

  const DiscriminatorConfig& config() const { return cfg_; }

 private:
  DiscriminatorConfig cfg_;
  std::vector<PatchDiscriminator> scales_;
  std::vector<nn::AvgPool3x3> pools_;  // pools_[i]: level i -> i+1
};

}  // namespace lesionsynth::synthnet
