#pragma once

#include <random>

#include "lesionsynth/tensor.hpp"

namespace lesionsynth::augment {

using Rng = std::mt19937_64;

// One sampled transform. Geometric parts are exact-copy flips plus a
// reflect-filled bilinear rotation; photometric jitter operates on the
// [0,1] intensity scale.
struct AugmentParams {
  bool hflip = false;
  bool vflip = false;
  double rotation_deg = 0.0;  // uniform [0, 360)
  double brightness = 1.0;    // uniform [0.9, 1.1]
  double contrast = 1.0;      // uniform [0.9, 1.1]
  double saturation = 1.0;    // uniform [0.9, 1.1]
};

AugmentParams draw_augment_params(Rng& rng);

// image: (3,H,W) with values in [-1,1]; output is clamped to [-1,1].
Tensorf apply_augment(const Tensorf& image, const AugmentParams& p);

// Convenience: draw + apply.
Tensorf random_augment(const Tensorf& image, Rng& rng);

}  // namespace lesionsynth::augment
