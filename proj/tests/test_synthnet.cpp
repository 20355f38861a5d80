#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "lesionsynth/synthnet.hpp"

using namespace lesionsynth;
using namespace lesionsynth::synthnet;

namespace {

Tensorf random_tensor(std::vector<int> shape, nn::Rng& rng, float scale = 1.0f) {
  Tensorf t(std::move(shape));
  std::normal_distribution<float> d(0.0f, scale);
  for (int64_t i = 0; i < t.size(); ++i) t[i] = d(rng);
  return t;
}

}  // namespace

TEST_CASE("generator conv layer count for the default depth") {
  nn::Rng rng(1);
  GeneratorConfig cfg;  // 4 downsamples, 9 residual blocks
  cfg.base_channels = 4;
  Generator g(cfg, rng);
  // 1 input conv + 4 down + 2*9 residual + 4 up + 1 output conv = 28.
  CHECK(g.conv_layer_count() == 28);

  GeneratorConfig small;
  small.base_channels = 4;
  small.num_downsamples = 2;
  small.num_residual_blocks = 3;
  Generator gs(small, rng);
  CHECK(gs.conv_layer_count() == 1 + 2 + 2 * 3 + 2 + 1);
}

TEST_CASE("generator maps 9xHxW to 3xHxW and stays in [-1,1]") {
  nn::Rng rng(2);
  GeneratorConfig cfg;
  cfg.base_channels = 8;
  cfg.num_downsamples = 2;
  cfg.num_residual_blocks = 2;
  Generator g(cfg, rng);
  Tensorf x = random_tensor({1, 9, 32, 64}, rng);
  Tensorf y = g.forward(x);
  CHECK(y.shape() == std::vector<int>({1, 3, 32, 64}));
  for (int64_t i = 0; i < y.size(); ++i) {
    CHECK(y[i] >= -1.0f);
    CHECK(y[i] <= 1.0f);
  }
}

TEST_CASE("generator rejects wrong channels and indivisible dims") {
  nn::Rng rng(3);
  GeneratorConfig cfg;
  cfg.base_channels = 8;
  cfg.num_downsamples = 2;
  cfg.num_residual_blocks = 1;
  Generator g(cfg, rng);
  Tensorf wrong_ch = random_tensor({1, 8, 32, 32}, rng);
  CHECK_THROWS_AS(g.forward(wrong_ch), std::invalid_argument);
  Tensorf indivisible = random_tensor({1, 9, 30, 32}, rng);  // 30 % 4 != 0
  CHECK_THROWS_AS(g.forward(indivisible), std::invalid_argument);
}

TEST_CASE("generator backward populates nearly all parameter gradients") {
  nn::Rng rng(4);
  GeneratorConfig cfg;
  cfg.base_channels = 8;
  cfg.num_downsamples = 2;
  cfg.num_residual_blocks = 2;
  Generator g(cfg, rng);
  Tensorf x = random_tensor({1, 9, 16, 16}, rng);
  Tensorf y = g.forward(x);
  Tensorf gy = random_tensor(y.shape(), rng);
  g.backward(gy);
  int64_t nonzero = 0, total = 0;
  for (nn::Parameter* p : g.params()) {
    for (int64_t i = 0; i < p->grad.size(); ++i) {
      ++total;
      if (p->grad[i] != 0.0f) ++nonzero;
    }
  }
  CHECK(total > 0);
  CHECK(static_cast<double>(nonzero) / static_cast<double>(total) >= 0.99);
}

TEST_CASE("downsample pyramid halves shapes exactly") {
  nn::Rng rng(5);
  Tensorf x = random_tensor({1, 3, 64, 128}, rng);
  auto pyr = downsample_pyramid(x, 3);
  REQUIRE(pyr.size() == 3);
  CHECK(pyr[0].shape() == std::vector<int>({1, 3, 64, 128}));
  CHECK(pyr[1].shape() == std::vector<int>({1, 3, 32, 64}));
  CHECK(pyr[2].shape() == std::vector<int>({1, 3, 16, 32}));

  Tensorf bad = random_tensor({1, 3, 62, 128}, rng);  // 62 % 4 != 0
  CHECK_THROWS_AS(downsample_pyramid(bad, 3), std::invalid_argument);
}

TEST_CASE("multi-scale discriminator emits one pyramid per scale") {
  nn::Rng rng(6);
  DiscriminatorConfig cfg;
  cfg.base_channels = 8;
  cfg.num_scales = 3;
  MultiScaleDiscriminator d(cfg, rng);
  Tensorf cond = random_tensor({1, 9, 32, 64}, rng);
  Tensorf img = random_tensor({1, 3, 32, 64}, rng);
  auto feats = d.forward(cond, img);
  REQUIRE(feats.size() == 3);
  for (const auto& scale : feats) {
    REQUIRE(scale.size() >= 2);  // blocks + logit map
    CHECK(scale.back().dim(1) == 1);
  }
  // Each scale sees a half-resolution input relative to the previous.
  const bool halved = feats[1].back().dim(2) * 2 + 1 >= feats[0].back().dim(2);
  CHECK(halved);

  // Backward accepts logit-only gradients (empty feature slots skipped).
  FeaturePyramid<float> grads(feats.size());
  for (size_t s = 0; s < feats.size(); ++s) {
    grads[s].resize(feats[s].size());
    grads[s].back() = Tensorf::constant(feats[s].back().shape(), 1.0f);
  }
  Tensorf gimg = d.backward(grads);
  CHECK(gimg.shape() == img.shape());
  bool any_nonzero = false;
  for (int64_t i = 0; i < gimg.size(); ++i)
    if (gimg[i] != 0.0f) any_nonzero = true;
  CHECK(any_nonzero);
}

TEST_CASE("generator forward is deterministic for a fixed seed") {
  GeneratorConfig cfg;
  cfg.base_channels = 8;
  cfg.num_downsamples = 2;
  cfg.num_residual_blocks = 1;
  nn::Rng rng_a(42), rng_b(42), rng_x(7);
  Generator ga(cfg, rng_a), gb(cfg, rng_b);
  Tensorf x = random_tensor({1, 9, 16, 16}, rng_x);
  Tensorf xa = x, xb = x;
  Tensorf ya = ga.forward(xa), yb = gb.forward(xb);
  REQUIRE(ya.size() == yb.size());
  for (int64_t i = 0; i < ya.size(); ++i) CHECK(ya[i] == yb[i]);
}
