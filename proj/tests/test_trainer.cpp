#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "lesionsynth/errors.hpp"
#include "lesionsynth/trainer.hpp"

using namespace lesionsynth;
using namespace lesionsynth::trainer;

namespace {

namespace fs = std::filesystem;

TrainingConfig desk_config() {
  TrainingConfig cfg;
  cfg.width = 32;
  cfg.height = 16;
  cfg.epochs = 1;
  cfg.decay_epochs = 0;
  cfg.batch_size = 1;
  cfg.seed = 11;
  cfg.gen.base_channels = 8;
  cfg.gen.num_downsamples = 2;
  cfg.gen.num_residual_blocks = 1;
  cfg.dis.base_channels = 8;
  cfg.dis.num_scales = 2;
  cfg.dis.num_layers = 2;
  return cfg;
}

Tensorf random_batch(std::vector<int> shape, uint64_t seed) {
  nn::Rng rng(seed);
  std::normal_distribution<float> d(0.0f, 0.5f);
  Tensorf t(std::move(shape));
  for (int64_t i = 0; i < t.size(); ++i) t[i] = d(rng);
  return t;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("lesionsynth_test_" + std::to_string(std::random_device{}()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("train_step is deterministic and finite") {
  TrainingConfig cfg = desk_config();
  Pix2PixTrainer a(cfg), b(cfg);
  Tensorf input = random_batch({1, 9, 16, 32}, 3);
  Tensorf target = random_batch({1, 3, 16, 32}, 4);

  for (int step = 0; step < 5; ++step) {
    auto ra = a.train_step(input, target);
    auto rb = b.train_step(input, target);
    CHECK(ra.all_finite());
    CHECK(ra.g_gan == rb.g_gan);
    CHECK(ra.g_fm == rb.g_fm);
    CHECK(ra.d_real == rb.d_real);
    CHECK(ra.d_fake == rb.d_fake);
  }
}

TEST_CASE("train_step rejects mismatched shapes") {
  Pix2PixTrainer t(desk_config());
  Tensorf bad_input = random_batch({1, 8, 16, 32}, 5);  // 8 channels vs 9 expected
  Tensorf target = random_batch({1, 3, 16, 32}, 6);
  CHECK_THROWS_AS(t.train_step(bad_input, target), std::invalid_argument);
}

TEST_CASE("boundary flag fixes the generator input width") {
  mapkit::SemanticLabelMap sem(32, 16);
  mapkit::InstanceMap inst(32, 16);
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 32; ++x) {
      sem.at(y, x) = static_cast<uint8_t>(1 + (x > 16));
      inst.at(y, x) = x / 8;
    }
  Tensorf with_boundary = encode_maps(sem, &inst, 32, 16);
  CHECK(with_boundary.dim(0) == 9);
  Tensorf without = encode_maps(sem, nullptr, 32, 16);
  CHECK(without.dim(0) == 8);

  TrainingConfig cfg = desk_config();
  cfg.use_boundary = false;  // but gen still expects 9 channels
  CHECK_THROWS_AS(cfg.validate(), std::exception);
  cfg.gen.input_channels = 8;
  cfg.dis.cond_channels = 8;
  CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("lr factor: constant phase then linear decay") {
  CHECK(lr_factor(0, 200, 100) == doctest::Approx(1.0));
  CHECK(lr_factor(99, 200, 100) == doctest::Approx(1.0));
  CHECK(lr_factor(100, 200, 100) == doctest::Approx(1.0));
  CHECK(lr_factor(150, 200, 100) == doctest::Approx(0.5));
  CHECK(lr_factor(199, 200, 100) == doctest::Approx(0.01));
}

TEST_CASE("checkpoint round-trip is byte-identical and resume enforces the fingerprint") {
  TempDir tmp;
  TrainingConfig cfg = desk_config();
  cfg.checkpoint_dir = tmp.path.string();

  std::vector<Sample> dataset(2);
  dataset[0].input = random_batch({9, 16, 32}, 7);
  dataset[0].target = random_batch({3, 16, 32}, 8);
  dataset[1].input = random_batch({9, 16, 32}, 9);
  dataset[1].target = random_batch({3, 16, 32}, 10);

  Pix2PixTrainer t(cfg);
  const std::string metrics_path = (tmp.path / "metrics.ndjson").string();
  Checkpoint final_ckpt = t.train(dataset, metrics_path);
  const std::string final_path = (tmp.path / "final.bin").string();
  REQUIRE(fs::exists(final_path));

  // save -> load -> save must reproduce the file byte for byte.
  Checkpoint loaded = load_checkpoint(final_path);
  const std::string resaved = (tmp.path / "resaved.bin").string();
  save_checkpoint(resaved, loaded);
  CHECK(slurp(final_path) == slurp(resaved));
  CHECK(loaded.fingerprint == cfg.fingerprint());
  CHECK(loaded.epoch == cfg.epochs - 1);

  // Resuming with the same config continues; a different config refuses.
  Pix2PixTrainer same(cfg);
  CHECK_NOTHROW(same.load(loaded));
  TrainingConfig other = cfg;
  other.learning_rate = 1e-3;
  Pix2PixTrainer mismatched(other);
  CHECK_THROWS_AS(mismatched.load(loaded), ConfigMismatch);

  // Metrics are NDJSON, one record per step, monotone step index.
  std::ifstream in(metrics_path);
  REQUIRE(in.good());
  std::string line;
  int lines = 0;
  while (std::getline(in, line)) {
    CHECK(line.find("\"step\"") != std::string::npos);
    CHECK(line.find("\"g_fm\"") != std::string::npos);
    ++lines;
  }
  CHECK(lines == 2);  // 2 samples, 1 epoch, batch size 1
}

TEST_CASE("synthesize is deterministic and maps [-1,1] to [0,255]") {
  TempDir tmp;
  TrainingConfig cfg = desk_config();
  cfg.checkpoint_dir = tmp.path.string();
  std::vector<Sample> dataset(1);
  dataset[0].input = random_batch({9, 16, 32}, 12);
  dataset[0].target = random_batch({3, 16, 32}, 13);
  Pix2PixTrainer t(cfg);
  Checkpoint ckpt = t.train(dataset);

  mapkit::SemanticLabelMap sem(32, 16);
  mapkit::InstanceMap inst(32, 16);
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 32; ++x) {
      sem.at(y, x) = static_cast<uint8_t>(1 + (y > 8));
      inst.at(y, x) = x / 4;
    }
  std::vector<std::pair<mapkit::SemanticLabelMap, std::optional<mapkit::InstanceMap>>> maps;
  maps.emplace_back(sem, inst);
  maps.emplace_back(sem, inst);
  auto imgs = synthesize(ckpt, maps);
  REQUIRE(imgs.size() == 2);
  CHECK(imgs[0].width == 32);
  CHECK(imgs[0].height == 16);
  CHECK(imgs[0].pixels == imgs[1].pixels);  // same map twice -> identical

  // Affine endpoint mapping.
  Tensorf extremes({1, 3, 1, 2});
  extremes.at4(0, 0, 0, 0) = -1.0f;
  extremes.at4(0, 1, 0, 0) = -1.0f;
  extremes.at4(0, 2, 0, 0) = -1.0f;
  extremes.at4(0, 0, 0, 1) = 1.0f;
  extremes.at4(0, 1, 0, 1) = 1.0f;
  extremes.at4(0, 2, 0, 1) = 1.0f;
  RGBImage img = tensor_to_image(extremes);
  CHECK(static_cast<int>(img.at(0, 0, 0)) == 0);
  CHECK(static_cast<int>(img.at(0, 1, 0)) == 255);

  // Missing instance map when the checkpoint was trained with boundaries.
  std::vector<std::pair<mapkit::SemanticLabelMap, std::optional<mapkit::InstanceMap>>> no_inst;
  no_inst.emplace_back(sem, std::nullopt);
  CHECK_THROWS_AS(synthesize(ckpt, no_inst), std::invalid_argument);
}

TEST_CASE("training rejects an empty dataset") {
  Pix2PixTrainer t(desk_config());
  CHECK_THROWS_AS(t.train({}), std::invalid_argument);
}

TEST_CASE("config serialization round-trips and fingerprints are stable") {
  TrainingConfig cfg = desk_config();
  const std::string text = cfg.serialize();
  TrainingConfig back = TrainingConfig::deserialize(text);
  CHECK(back.serialize() == text);
  CHECK(back.fingerprint() == cfg.fingerprint());

  TrainingConfig other = cfg;
  other.lambda_fm = 5.0;
  CHECK(other.fingerprint() != cfg.fingerprint());
}
