#include "lesionsynth/augment.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace lesionsynth::augment {

namespace {

// Reflect index into [0, n) mirroring at the borders (edge pixels not
// duplicated for n > 1).
int reflect_index(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * (n - 1);
  int m = i % period;
  if (m < 0) m += period;
  return m < n ? m : period - m;
}

float sample_bilinear(const Tensorf& img, int c, double y, double x) {
  const int h = img.dim(1), w = img.dim(2);
  const int y0 = static_cast<int>(std::floor(y));
  const int x0 = static_cast<int>(std::floor(x));
  const double fy = y - y0, fx = x - x0;
  const int ya = reflect_index(y0, h), yb = reflect_index(y0 + 1, h);
  const int xa = reflect_index(x0, w), xb = reflect_index(x0 + 1, w);
  const double v00 = img.at3(c, ya, xa), v01 = img.at3(c, ya, xb);
  const double v10 = img.at3(c, yb, xa), v11 = img.at3(c, yb, xb);
  return static_cast<float>((1 - fy) * ((1 - fx) * v00 + fx * v01) +
                            fy * ((1 - fx) * v10 + fx * v11));
}

}  // namespace

AugmentParams draw_augment_params(Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> angle(0.0, 360.0);
  std::uniform_real_distribution<double> jitter(0.9, 1.1);
  AugmentParams p;
  p.hflip = unit(rng) < 0.5;
  p.vflip = unit(rng) < 0.5;
  p.rotation_deg = angle(rng);
  p.brightness = jitter(rng);
  p.contrast = jitter(rng);
  p.saturation = jitter(rng);
  return p;
}

Tensorf apply_augment(const Tensorf& image, const AugmentParams& p) {
  if (image.ndim() != 3 || image.dim(0) != 3)
    throw std::invalid_argument("apply_augment: expected (3,H,W) image");
  const int h = image.dim(1), w = image.dim(2);

  Tensorf out = image;
  if (p.hflip) {
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) out.at3(c, y, x) = image.at3(c, y, w - 1 - x);
  }
  if (p.vflip) {
    Tensorf tmp = out;
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) out.at3(c, y, x) = tmp.at3(c, h - 1 - y, x);
  }

  if (p.rotation_deg != 0.0) {
    const double rad = p.rotation_deg * M_PI / 180.0;
    const double ca = std::cos(rad), sa = std::sin(rad);
    const double cy = 0.5 * (h - 1), cx = 0.5 * (w - 1);
    Tensorf src = out;
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        // Inverse-map output pixel back into the source.
        const double dy = y - cy, dx = x - cx;
        const double sy = cy + (ca * dy - sa * dx);
        const double sx = cx + (sa * dy + ca * dx);
        for (int c = 0; c < 3; ++c) out.at3(c, y, x) = sample_bilinear(src, c, sy, sx);
      }
    }
  }

  // Photometric jitter on the [0,1] scale.
  const bool photometric = p.brightness != 1.0 || p.contrast != 1.0 || p.saturation != 1.0;
  if (photometric) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        double r = (out.at3(0, y, x) + 1.0) * 0.5;
        double g = (out.at3(1, y, x) + 1.0) * 0.5;
        double b = (out.at3(2, y, x) + 1.0) * 0.5;
        r *= p.brightness;
        g *= p.brightness;
        b *= p.brightness;
        const double gray = 0.299 * r + 0.587 * g + 0.114 * b;
        r = gray + p.saturation * (r - gray);
        g = gray + p.saturation * (g - gray);
        b = gray + p.saturation * (b - gray);
        r = 0.5 + p.contrast * (r - 0.5);
        g = 0.5 + p.contrast * (g - 0.5);
        b = 0.5 + p.contrast * (b - 0.5);
        out.at3(0, y, x) = static_cast<float>(r * 2.0 - 1.0);
        out.at3(1, y, x) = static_cast<float>(g * 2.0 - 1.0);
        out.at3(2, y, x) = static_cast<float>(b * 2.0 - 1.0);
      }
    }
  }

  out.array() = out.array().max(-1.0f).min(1.0f);
  return out;
}

Tensorf random_augment(const Tensorf& image, Rng& rng) {
  return apply_augment(image, draw_augment_params(rng));
}

}  // namespace lesionsynth::augment
