#pragma once

#include <stdexcept>
#include <vector>

#include "lesionsynth/tensor.hpp"

namespace lesionsynth::objectives {

// One logit map per discriminator scale.
template <typename T>
using LogitMaps = std::vector<Tensor<T>>;

// [scale][layer] intermediate features; when produced by the multi-scale
// discriminator the last entry of each scale is the patch-logit map.
template <typename T>
using FeaturePyramid = std::vector<std::vector<Tensor<T>>>;

struct LossWeights {
  double lambda_fm = 10.0;
};

struct LossReport {
  double g_gan = 0;
  double g_fm = 0;
  double d_real = 0;
  double d_fake = 0;
  double lambda_fm = 0;

  double g_total() const { return g_gan + lambda_fm * g_fm; }
  double d_total() const { return d_real + d_fake; }
  bool all_finite() const;
};

template <typename T>
void check_same_structure(const FeaturePyramid<T>& a, const FeaturePyramid<T>& b) {
  if (a.size() != b.size())
    throw std::invalid_argument("feature pyramid: scale count mismatch");
  for (size_t s = 0; s < a.size(); ++s) {
    if (a[s].size() != b[s].size())
      throw std::invalid_argument("feature pyramid: layer count mismatch");
    for (size_t l = 0; l < a[s].size(); ++l)
      if (!a[s][l].same_shape(b[s][l]))
        throw std::invalid_argument("feature pyramid: feature shape mismatch");
  }
}

// 0.5*mean((real-1)^2) summed over scales.
template <typename T>
T lsgan_d_real_loss(const LogitMaps<T>& real) {
  T loss = 0;
  for (const auto& r : real) loss += T(0.5) * (r.array() - T(1)).square().mean();
  return loss;
}

// 0.5*mean(fake^2) summed over scales.
template <typename T>
T lsgan_d_fake_loss(const LogitMaps<T>& fake) {
  T loss = 0;
  for (const auto& f : fake) loss += T(0.5) * f.array().square().mean();
  return loss;
}

template <typename T>
T lsgan_d_loss(const LogitMaps<T>& real, const LogitMaps<T>& fake) {
  return lsgan_d_real_loss(real) + lsgan_d_fake_loss(fake);
}

template <typename T>
LogitMaps<T> lsgan_d_real_grad(const LogitMaps<T>& real) {
  LogitMaps<T> g;
  g.reserve(real.size());
  for (const auto& r : real)
    g.emplace_back(r.shape(),
                   typename Tensor<T>::Storage((r.array() - T(1)) / T(r.size())));
  return g;
}

template <typename T>
LogitMaps<T> lsgan_d_fake_grad(const LogitMaps<T>& fake) {
  LogitMaps<T> g;
  g.reserve(fake.size());
  for (const auto& f : fake)
    g.emplace_back(f.shape(), typename Tensor<T>::Storage(f.array() / T(f.size())));
  return g;
}

// mean((fake-1)^2) summed over scales.
template <typename T>
T lsgan_g_loss(const LogitMaps<T>& fake) {
  T loss = 0;
  for (const auto& f : fake) loss += (f.array() - T(1)).square().mean();
  return loss;
}

template <typename T>
LogitMaps<T> lsgan_g_grad(const LogitMaps<T>& fake) {
  LogitMaps<T> g;
  g.reserve(fake.size());
  for (const auto& f : fake)
    g.emplace_back(f.shape(),
                   typename Tensor<T>::Storage(T(2) * (f.array() - T(1)) / T(f.size())));
  return g;
}

// Mean absolute difference per layer, averaged over layers within a scale,
// summed over scales.
template <typename T>
T feature_matching(const FeaturePyramid<T>& real, const FeaturePyramid<T>& fake) {
  check_same_structure(real, fake);
  T loss = 0;
  for (size_t s = 0; s < real.size(); ++s) {
    if (real[s].empty()) continue;
    T scale_loss = 0;
    for (size_t l = 0; l < real[s].size(); ++l)
      scale_loss += (real[s][l].array() - fake[s][l].array()).abs().mean();
    loss += scale_loss / T(real[s].size());
  }
  return loss;
}

// Gradient w.r.t. the fake features (real features are treated as constants).
template <typename T>
FeaturePyramid<T> feature_matching_grad(const FeaturePyramid<T>& real,
                                        const FeaturePyramid<T>& fake) {
  check_same_structure(real, fake);
  FeaturePyramid<T> g(real.size());
  for (size_t s = 0; s < real.size(); ++s) {
    const T layer_w = real[s].empty() ? T(0) : T(1) / T(real[s].size());
    for (size_t l = 0; l < real[s].size(); ++l) {
      auto diff = fake[s][l].array() - real[s][l].array();
      typename Tensor<T>::Storage grad =
          diff.sign() * (layer_w / T(real[s][l].size()));
      g[s].emplace_back(real[s][l].shape(), std::move(grad));
    }
  }
  return g;
}

// Combines the adversarial and feature-matching components. The last entry
// of each scale's feature list is taken as the patch-logit map; feature
// matching runs over the layers before it.
template <typename T>
LossReport total_losses(const FeaturePyramid<T>& real_feats,
                        const FeaturePyramid<T>& fake_feats, const LossWeights& weights) {
  check_same_structure(real_feats, fake_feats);
  LogitMaps<T> real_logits, fake_logits;
  FeaturePyramid<T> real_mid(real_feats.size()), fake_mid(fake_feats.size());
  for (size_t s = 0; s < real_feats.size(); ++s) {
    if (real_feats[s].empty())
      throw std::invalid_argument("total_losses: empty scale");
    real_logits.push_back(real_feats[s].back());
    fake_logits.push_back(fake_feats[s].back());
    real_mid[s].assign(real_feats[s].begin(), real_feats[s].end() - 1);
    fake_mid[s].assign(fake_feats[s].begin(), fake_feats[s].end() - 1);
  }
  LossReport rep;
  rep.lambda_fm = weights.lambda_fm;
  rep.g_gan = static_cast<double>(lsgan_g_loss(fake_logits));
  rep.g_fm = static_cast<double>(feature_matching(real_mid, fake_mid));
  rep.d_real = static_cast<double>(lsgan_d_real_loss(real_logits));
  rep.d_fake = static_cast<double>(lsgan_d_fake_loss(fake_logits));
  return rep;
}

}  // namespace lesionsynth::objectives
