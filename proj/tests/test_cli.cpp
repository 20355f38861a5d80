#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <random>

#include "lesionsynth/config.hpp"
#include "lesionsynth/errors.hpp"
#include "lesionsynth/manifest.hpp"
#include "lesionsynth/pipeline.hpp"

using namespace lesionsynth;
using namespace lesionsynth::cli;

namespace {

namespace fs = std::filesystem;

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("lesionsynth_cli_" + std::to_string(std::random_device{}()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

void touch(const fs::path& p) { std::ofstream(p).put('\n'); }

std::string isic_id(int i) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "ISIC_%07d", i);
  return buf;
}

void make_record(const fs::path& root, const std::string& id, bool complete = true) {
  touch(root / (id + ".jpg"));
  touch(root / (id + "_segmentation.png"));
  const char* markers[] = {"pigment_network", "negative_network", "streaks", "milia_like_cyst",
                           "globules"};
  const int n = complete ? 5 : 4;  // incomplete: drop the last marker
  for (int i = 0; i < n; ++i)
    touch(root / (id + "_attribute_" + markers[i] + ".png"));
}

}  // namespace

TEST_CASE("empty config document yields all defaults") {
  PipelineConfig cfg = parse_config_text("");
  CHECK(cfg.trainer.epochs == 200);
  CHECK(cfg.trainer.decay_epochs == 100);
  CHECK(cfg.trainer.learning_rate == doctest::Approx(2e-4));
  CHECK(cfg.trainer.adam_beta1 == doctest::Approx(0.5));
  CHECK(cfg.trainer.lambda_fm == doctest::Approx(10.0));
  CHECK(cfg.trainer.width == 1024);
  CHECK(cfg.trainer.height == 512);
  CHECK(cfg.trainer.use_boundary);
  CHECK(cfg.trainer.gen.num_residual_blocks == 9);
  CHECK(cfg.proggan.schedule.target_res == 256);
  CHECK(cfg.proggan.schedule.fade_epochs == 30);
  CHECK(cfg.eval.experiment.reference_spec == "Real+Instance+PGAN");
  CHECK(cfg.test_ratio == doctest::Approx(248.0 / 2594.0));
}

TEST_CASE("config errors name the offending key path") {
  CHECK_THROWS_WITH_AS(parse_config_text(R"({"trainer":{"learning_rate":-1}})"),
                       doctest::Contains("trainer.learning_rate"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_config_text(R"({"trainer":{"turbo":true}})"),
                       doctest::Contains("trainer.turbo"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_config_text(R"({"warp_drive":1})"),
                       doctest::Contains("warp_drive"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_config_text(R"({"proggan":{"schedule":{"target_res":100}}})"),
                       doctest::Contains("target_res"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("{not json"), ConfigError);
}

TEST_CASE("config fingerprints are deterministic") {
  const std::string text = R"({"seed": 7, "trainer": {"epochs": 3, "decay_epochs": 0}})";
  PipelineConfig a = parse_config_text(text);
  PipelineConfig b = parse_config_text(text);
  CHECK(a.fingerprint() == b.fingerprint());
  CHECK(a.fingerprint().size() == 64);  // sha-256 hex

  PipelineConfig c = parse_config_text(R"({"seed": 8, "trainer": {"epochs": 3, "decay_epochs": 0}})");
  CHECK(c.fingerprint() != a.fingerprint());

  TempDir tmp;
  const std::string path = (tmp.path / "config.json").string();
  std::ofstream(path) << text;
  PipelineConfig d = parse_config(path);
  CHECK(d.fingerprint() == a.fingerprint());
  CHECK(d.seed == 7);
  CHECK(d.trainer.seed == 7);  // top-level seed propagates
  CHECK(d.trainer.epochs == 3);
}

TEST_CASE("ingestion discovers records, skips incomplete ones, and splits deterministically") {
  TempDir tmp;
  for (int i = 0; i < 100; ++i) make_record(tmp.path, isic_id(i));
  make_record(tmp.path, isic_id(100), /*complete=*/false);
  touch(tmp.path / (isic_id(101) + ".jpg"));  // image only, no masks

  DatasetManifest m = ingest_dataset(tmp.path.string());
  CHECK(m.records.size() == 100);
  CHECK(m.skipped.size() == 2);
  // round(100 * 248/2594) = 10 test records
  CHECK(m.test_count() == 10);
  CHECK(m.train_count() == 90);

  DatasetManifest m2 = ingest_dataset(tmp.path.string());
  REQUIRE(m2.records.size() == m.records.size());
  for (size_t i = 0; i < m.records.size(); ++i) {
    CHECK(m.records[i].id == m2.records[i].id);
    CHECK((m.records[i].split == m2.records[i].split));
  }
}

TEST_CASE("hash split takes exactly round(N * ratio) test ids") {
  std::vector<std::string> ids;
  for (int i = 0; i < 2594; ++i) ids.push_back(isic_id(i));
  auto test_ids = pick_test_ids(ids, 248.0 / 2594.0);
  CHECK(test_ids.size() == 248);

  // Membership is stable under input permutation.
  std::vector<std::string> shuffled = ids;
  std::mt19937_64 rng(4);
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  auto test_ids2 = pick_test_ids(shuffled, 248.0 / 2594.0);
  CHECK(test_ids == test_ids2);
}

TEST_CASE("ingestion of an empty root yields an empty manifest") {
  TempDir tmp;
  DatasetManifest m = ingest_dataset(tmp.path.string());
  CHECK(m.records.empty());
  CHECK(m.skipped.empty());
  CHECK_THROWS_AS(ingest_dataset((tmp.path / "absent").string()), ConfigError);
}

TEST_CASE("dispatch handles unknown commands and missing prerequisites") {
  TempDir tmp;
  PipelineConfig cfg = parse_config_text("");
  cfg.dataset_root = tmp.path.string();
  cfg.output_dir = (tmp.path / "out").string();
  CHECK(dispatch("make-coffee", cfg) == 2);
  CHECK(dispatch("synthesize", cfg) == 1);  // no checkpoint yet
  CHECK(dispatch("report", cfg) == 1);      // no evaluation yet
}
