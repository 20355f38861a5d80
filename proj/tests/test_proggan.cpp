#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <random>

#include "lesionsynth/errors.hpp"
#include "lesionsynth/proggan.hpp"

using namespace lesionsynth;
using namespace lesionsynth::proggan;

namespace {

namespace fs = std::filesystem;

PganConfig tiny_config() {
  PganConfig cfg;
  cfg.latent_dim = 8;
  cfg.base_channels = 8;
  cfg.schedule.start_res = 4;
  cfg.schedule.target_res = 16;
  cfg.schedule.fade_epochs = 1;
  cfg.schedule.stable_epochs = 1;
  cfg.schedule.initial_stable_epochs = 1;
  cfg.batch_size = 4;
  cfg.seed = 5;
  return cfg;
}

Tensorf random_z(int n, int dim, uint64_t seed) {
  nn::Rng rng(seed);
  std::normal_distribution<float> d(0.0f, 1.0f);
  Tensorf z({n, dim});
  for (int64_t i = 0; i < z.size(); ++i) z[i] = d(rng);
  return z;
}

}  // namespace

TEST_CASE("fade alpha follows the schedule table") {
  ResolutionSchedule sched;
  sched.fade_epochs = 30;
  sched.stable_epochs = 30;
  CHECK(fade_alpha(0, sched) == doctest::Approx(1.0 / 30).epsilon(1e-12));
  CHECK(fade_alpha(29, sched) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(fade_alpha(45, sched) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(fade_alpha(59, sched) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_THROWS_AS(fade_alpha(-1, sched), std::out_of_range);
  CHECK_THROWS_AS(fade_alpha(60, sched), std::out_of_range);
}

TEST_CASE("resolution schedule enumerates power-of-two stages") {
  ResolutionSchedule sched;  // 4 -> 256
  auto res = sched.stage_resolutions();
  CHECK(res == std::vector<int>({4, 8, 16, 32, 64, 128, 256}));
  CHECK(sched.num_stages() == 7);
  CHECK(sched.epochs_for_stage(0) == sched.initial_stable_epochs);
  CHECK(sched.epochs_for_stage(1) == sched.fade_epochs + sched.stable_epochs);

  ResolutionSchedule bad = sched;
  bad.target_res = 100;  // not a power-of-two multiple of start
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("condition concat appends exactly 2 constant planes") {
  Tensorf x = Tensorf::constant({3, 4, 4}, 0.25f);
  Tensorf y = condition_concat(x, ConditionLabel::kMelanoma);
  REQUIRE(y.shape() == std::vector<int>({5, 4, 4}));
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) {
      CHECK(y.at3(0, i, j) == 0.25f);          // payload untouched
      CHECK(y.at3(3, i, j) == 0.0f);           // benign plane
      CHECK(y.at3(4, i, j) == 1.0f);           // melanoma plane
    }
  Tensorf yb = condition_concat(x, ConditionLabel::kBenign);
  CHECK(yb.at3(3, 0, 0) == 1.0f);
  CHECK(yb.at3(4, 0, 0) == 0.0f);

  CHECK(parse_label("benign") == ConditionLabel::kBenign);
  CHECK(parse_label("melanoma") == ConditionLabel::kMelanoma);
  CHECK_THROWS_AS(parse_label("other"), std::invalid_argument);
}

TEST_CASE("generator fade blend interpolates the two single paths") {
  PganConfig cfg = tiny_config();
  nn::Rng rng(3);
  PganGenerator g(cfg, rng);
  const int stage = 1;  // 8x8
  Tensorf z = random_z(2, cfg.latent_dim, 17);
  std::vector<ConditionLabel> labels = {ConditionLabel::kBenign, ConditionLabel::kMelanoma};

  Tensorf y_new = g.forward(z, labels, stage, 1.0);    // alpha=1: new path only
  Tensorf y_old_small = g.forward(z, labels, stage - 1, 1.0);
  nn::Upsample2xNearest up;
  Tensorf y_old = up.forward(y_old_small);

  Tensorf y0 = g.forward(z, labels, stage, 0.0);       // alpha=0: old path only
  REQUIRE(y0.shape() == y_old.shape());
  for (int64_t i = 0; i < y0.size(); ++i)
    CHECK(std::abs(y0[i] - y_old[i]) < 1e-6f);

  const double alpha = 0.3;
  Tensorf ymid = g.forward(z, labels, stage, alpha);
  for (int64_t i = 0; i < ymid.size(); ++i) {
    const float expect = static_cast<float>(alpha) * y_new[i] +
                         static_cast<float>(1.0 - alpha) * y_old[i];
    CHECK(std::abs(ymid[i] - expect) < 1e-6f);
  }
}

TEST_CASE("discriminator consumes every stage resolution") {
  PganConfig cfg = tiny_config();
  nn::Rng rng(4);
  PganDiscriminator d(cfg, rng);
  std::vector<ConditionLabel> labels = {ConditionLabel::kBenign, ConditionLabel::kMelanoma};
  for (int stage = 0; stage < cfg.schedule.num_stages(); ++stage) {
    const int res = cfg.schedule.stage_resolutions()[static_cast<size_t>(stage)];
    Tensorf img = random_z(2, 3 * res * res, 100 + static_cast<uint64_t>(stage))
                      .reshaped({2, 3, res, res});
    Tensorf logits = d.forward(img, labels, stage, 0.5);
    CHECK(logits.shape() == std::vector<int>({2, 1}));
    Tensorf gimg = d.backward(Tensorf::constant({2, 1}, 1.0f));
    CHECK(gimg.shape() == img.shape());
  }
}

TEST_CASE("tiny progressive run trains through all stages and samples deterministically") {
  const fs::path tmp =
      fs::temp_directory_path() / ("pgan_test_" + std::to_string(std::random_device{}()));
  fs::create_directories(tmp);
  PganConfig cfg = tiny_config();
  cfg.checkpoint_dir = tmp.string();

  nn::Rng data_rng(9);
  std::normal_distribution<float> d(0.0f, 0.3f);
  std::vector<LabeledImage> dataset(8);
  for (size_t i = 0; i < dataset.size(); ++i) {
    dataset[i].image = Tensorf({3, 16, 16});
    for (int64_t k = 0; k < dataset[i].image.size(); ++k) dataset[i].image[k] = d(data_rng);
    dataset[i].label = i % 2 ? ConditionLabel::kMelanoma : ConditionLabel::kBenign;
  }

  const std::string metrics = (tmp / "metrics.ndjson").string();
  Checkpoint ckpt = train_pgan(cfg, dataset, metrics);
  CHECK(ckpt.kind == "pgan");
  CHECK(fs::exists(tmp / "final.bin"));
  CHECK(fs::exists(metrics));

  auto a = sample_pgan_tensors(ckpt, ConditionLabel::kMelanoma, 3, 77);
  auto b = sample_pgan_tensors(ckpt, ConditionLabel::kMelanoma, 3, 77);
  auto c = sample_pgan_tensors(ckpt, ConditionLabel::kMelanoma, 3, 78);
  REQUIRE(a.size() == 3);
  CHECK(a[0].shape() == std::vector<int>({3, 16, 16}));
  bool identical = true, differs = false;
  for (size_t i = 0; i < a.size(); ++i)
    for (int64_t k = 0; k < a[i].size(); ++k) {
      if (a[i][k] != b[i][k]) identical = false;
      if (a[i][k] != c[i][k]) differs = true;
    }
  CHECK(identical);
  CHECK(differs);
  for (int64_t k = 0; k < a[0].size(); ++k) {
    CHECK(a[0][k] >= -1.0f);
    CHECK(a[0][k] <= 1.0f);
  }

  auto imgs = sample_pgan(ckpt, ConditionLabel::kBenign, 2, 5);
  REQUIRE(imgs.size() == 2);
  CHECK(imgs[0].width == 16);
  CHECK(imgs[0].height == 16);

  fs::remove_all(tmp);
}
