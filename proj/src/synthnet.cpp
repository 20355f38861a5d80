#include "lesionsynth/synthnet.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace lesionsynth::synthnet {

namespace {

using nn::Conv2d;
using nn::ConvTranspose2d;
using nn::InstanceNorm;
using nn::PadMode;

void validate(const GeneratorConfig& cfg) {
  if (cfg.input_channels < 1 || cfg.output_channels < 1 || cfg.base_channels < 1 ||
      cfg.num_downsamples < 0 || cfg.num_residual_blocks < 0)
    throw std::invalid_argument("generator config: fields out of range");
}

}  // namespace

Generator::Generator(const GeneratorConfig& cfg, nn::Rng& rng) : cfg_(cfg) {
  validate(cfg);
  int ch = cfg.base_channels;

  net_.add(std::make_unique<Conv2d>("g.in", cfg.input_channels, ch, 7, 1, 3,
                                    PadMode::kReflect, rng));
  ++conv_count_;
  net_.add(std::make_unique<InstanceNorm>("g.in.norm", ch));
  net_.add(std::make_unique<nn::ReLU>());

  for (int i = 0; i < cfg.num_downsamples; ++i) {
    std::string n = "g.down" + std::to_string(i);
    net_.add(std::make_unique<Conv2d>(n, ch, ch * 2, 3, 2, 1, PadMode::kZero, rng));
    ++conv_count_;
    ch *= 2;
    net_.add(std::make_unique<InstanceNorm>(n + ".norm", ch));
    net_.add(std::make_unique<nn::ReLU>());
  }

  for (int i = 0; i < cfg.num_residual_blocks; ++i) {
    std::string n = "g.res" + std::to_string(i);
    auto block = std::make_unique<nn::Sequential>();
    block->add(std::make_unique<Conv2d>(n + ".conv0", ch, ch, 3, 1, 1, PadMode::kReflect, rng));
    block->add(std::make_unique<InstanceNorm>(n + ".norm0", ch));
    block->add(std::make_unique<nn::ReLU>());
    block->add(std::make_unique<Conv2d>(n + ".conv1", ch, ch, 3, 1, 1, PadMode::kReflect, rng));
    block->add(std::make_unique<InstanceNorm>(n + ".norm1", ch));
    conv_count_ += 2;
    net_.add(std::make_unique<nn::ResidualWrap>(std::move(block)));
  }

  for (int i = 0; i < cfg.num_downsamples; ++i) {
    std::string n = "g.up" + std::to_string(i);
    net_.add(std::make_unique<ConvTranspose2d>(n, ch, ch / 2, 3, 2, 1, 1, rng));
    ++conv_count_;
    ch /= 2;
    net_.add(std::make_unique<InstanceNorm>(n + ".norm", ch));
    net_.add(std::make_unique<nn::ReLU>());
  }

  net_.add(std::make_unique<Conv2d>("g.out", ch, cfg.output_channels, 7, 1, 3,
                                    PadMode::kReflect, rng));
  ++conv_count_;
  net_.add(std::make_unique<nn::Tanh>());
}

Tensorf Generator::forward(const Tensorf& x) {
  if (x.ndim() != 4) throw std::invalid_argument("generator: expected NCHW input");
  if (x.dim(1) != cfg_.input_channels)
    throw std::invalid_argument("generator: wrong channel count");
  const int div = 1 << cfg_.num_downsamples;
  if (x.dim(2) % div != 0 || x.dim(3) % div != 0)
    throw std::invalid_argument("generator: spatial dims must be divisible by 2^num_downsamples");
  return net_.forward(x);
}

Tensorf Generator::backward(const Tensorf& gy) { return net_.backward(gy); }

std::vector<nn::Parameter*> Generator::params() {
  std::vector<nn::Parameter*> out;
  net_.collect(out);
  return out;
}

// ---------------------------------------------------------------------------

PatchDiscriminator::PatchDiscriminator(const std::string& name, int in_channels,
                                       const DiscriminatorConfig& cfg, nn::Rng& rng) {
  int ch = in_channels;
  int nf = cfg.base_channels;
  for (int i = 0; i < cfg.num_layers; ++i) {
    const int stride = i + 1 < cfg.num_layers ? 2 : 1;
    nn::Sequential stage;
    std::string n = name + ".block" + std::to_string(i);
    stage.add(std::make_unique<Conv2d>(n, ch, nf, 4, stride, 2, PadMode::kZero, rng));
    if (i > 0) stage.add(std::make_unique<InstanceNorm>(n + ".norm", nf));
    stage.add(std::make_unique<nn::LeakyReLU>(0.2f));
    stages_.push_back(std::move(stage));
    ch = nf;
    nf = std::min(nf * 2, cfg.base_channels * 8);
  }
  nn::Sequential logit;
  logit.add(std::make_unique<Conv2d>(name + ".logit", ch, 1, 4, 1, 2, PadMode::kZero, rng));
  stages_.push_back(std::move(logit));
}

std::vector<Tensorf> PatchDiscriminator::forward(const Tensorf& x) {
  std::vector<Tensorf> feats;
  feats.reserve(stages_.size());
  Tensorf h = x;
  for (auto& stage : stages_) {
    h = stage.forward(h);
    feats.push_back(h);
  }
  return feats;
}

Tensorf PatchDiscriminator::backward(const std::vector<Tensorf>& feature_grads) {
  if (feature_grads.size() != stages_.size())
    throw std::invalid_argument("patch discriminator: feature grad count mismatch");
  Tensorf g = feature_grads.back();
  for (size_t i = stages_.size(); i-- > 0;) {
    if (i + 1 < stages_.size() && !feature_grads[i].empty()) {
      if (!g.same_shape(feature_grads[i]))
        throw std::invalid_argument("patch discriminator: feature grad shape mismatch");
      g = Tensorf(g.shape(), g.array() + feature_grads[i].array());
    }
    g = stages_[i].backward(g);
  }
  return g;
}

void PatchDiscriminator::collect(std::vector<nn::Parameter*>& out) {
  for (auto& s : stages_) s.collect(out);
}

// ---------------------------------------------------------------------------

std::vector<Tensorf> downsample_pyramid(const Tensorf& x, int levels) {
  if (x.ndim() != 4) throw std::invalid_argument("downsample_pyramid: expected NCHW");
  const int div = 1 << (levels - 1);
  if (x.dim(2) % div != 0 || x.dim(3) % div != 0)
    throw std::invalid_argument("downsample_pyramid: dims must halve exactly per level");
  std::vector<Tensorf> out{x};
  nn::AvgPool3x3 pool;
  for (int i = 1; i < levels; ++i) out.push_back(pool.forward(out.back()));
  return out;
}

MultiScaleDiscriminator::MultiScaleDiscriminator(const DiscriminatorConfig& cfg, nn::Rng& rng)
    : cfg_(cfg) {
  if (cfg.num_scales < 1) throw std::invalid_argument("discriminator: num_scales must be >= 1");
  const int in_ch = cfg.cond_channels + cfg.image_channels;
  for (int s = 0; s < cfg.num_scales; ++s)
    scales_.emplace_back("d.scale" + std::to_string(s), in_ch, cfg, rng);
  pools_.resize(cfg.num_scales > 1 ? cfg.num_scales - 1 : 0);
}

FeaturePyramid<float> MultiScaleDiscriminator::forward(const Tensorf& cond, const Tensorf& img) {
  if (cond.ndim() != 4 || img.ndim() != 4 || cond.dim(0) != img.dim(0) ||
      cond.dim(2) != img.dim(2) || cond.dim(3) != img.dim(3))
    throw std::invalid_argument("discriminator: cond and image are not spatially aligned");
  if (cond.dim(1) != cfg_.cond_channels || img.dim(1) != cfg_.image_channels)
    throw std::invalid_argument("discriminator: channel counts do not match config");

  const int n = cond.dim(0), h = cond.dim(2), w = cond.dim(3);
  const int cc = cfg_.cond_channels, ic = cfg_.image_channels;
  Tensorf x({n, cc + ic, h, w});
  const int64_t hw = static_cast<int64_t>(h) * w;
  for (int i = 0; i < n; ++i) {
    std::copy(cond.data() + i * cc * hw, cond.data() + (i + 1) * cc * hw,
              x.data() + static_cast<int64_t>(i) * (cc + ic) * hw);
    std::copy(img.data() + i * ic * hw, img.data() + (i + 1) * ic * hw,
              x.data() + static_cast<int64_t>(i) * (cc + ic) * hw + cc * hw);
  }

  FeaturePyramid<float> out;
  Tensorf level = x;
  for (int s = 0; s < cfg_.num_scales; ++s) {
    if (s > 0) level = pools_[s - 1].forward(level);
    out.push_back(scales_[s].forward(level));
  }
  return out;
}

Tensorf MultiScaleDiscriminator::backward(const FeaturePyramid<float>& feature_grads) {
  if (static_cast<int>(feature_grads.size()) != cfg_.num_scales)
    throw std::invalid_argument("discriminator: scale grad count mismatch");
  Tensorf g;
  for (int s = cfg_.num_scales; s-- > 0;) {
    Tensorf gs = scales_[s].backward(feature_grads[s]);
    if (g.empty())
      g = gs;
    else
      g = Tensorf(gs.shape(), gs.array() + g.array());
    if (s > 0) g = pools_[s - 1].backward(g);
  }
  // Slice out the image channels.
  const int n = g.dim(0), cc = cfg_.cond_channels, ic = cfg_.image_channels;
  const int h = g.dim(2), w = g.dim(3);
  const int64_t hw = static_cast<int64_t>(h) * w;
  Tensorf gimg({n, ic, h, w});
  for (int i = 0; i < n; ++i)
    std::copy(g.data() + (static_cast<int64_t>(i) * (cc + ic) + cc) * hw,
              g.data() + (static_cast<int64_t>(i) * (cc + ic) + cc + ic) * hw,
              gimg.data() + static_cast<int64_t>(i) * ic * hw);
  return gimg;
}

std::vector<nn::Parameter*> MultiScaleDiscriminator::params() {
  std::vector<nn::Parameter*> out;
  for (auto& s : scales_) s.collect(out);
  return out;
}

}  // namespace lesionsynth::synthnet
