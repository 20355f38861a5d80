#include "lesionsynth/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "lesionsynth/errors.hpp"
#include "lesionsynth/evalharness.hpp"
#include "lesionsynth/manifest.hpp"
#include "lesionsynth/proggan.hpp"
#include "lesionsynth/trainer.hpp"

namespace lesionsynth::cli {

namespace fs = std::filesystem;

namespace {

void atomic_write_text(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp);
    out << content;
  }
  fs::rename(tmp, path);
}

void write_png_rgb_atomic(const std::string& path, const RGBImage& img) {
  const std::string tmp = path + ".tmp.png";
  write_png_rgb(tmp, img);
  fs::rename(tmp, path);
}

void write_png_gray_atomic(const std::string& path, const GrayImage& img) {
  const std::string tmp = path + ".tmp.png";
  write_png_gray(tmp, img);
  fs::rename(tmp, path);
}

RGBImage resize_bilinear(const RGBImage& src, int tw, int th) {
  RGBImage out(tw, th);
  for (int y = 0; y < th; ++y) {
    for (int x = 0; x < tw; ++x) {
      const double sy = (y + 0.5) * src.height / th - 0.5;
      const double sx = (x + 0.5) * src.width / tw - 0.5;
      const int y0 = std::clamp(static_cast<int>(std::floor(sy)), 0, src.height - 1);
      const int x0 = std::clamp(static_cast<int>(std::floor(sx)), 0, src.width - 1);
      const int y1 = std::min(y0 + 1, src.height - 1);
      const int x1 = std::min(x0 + 1, src.width - 1);
      const double fy = std::clamp(sy - y0, 0.0, 1.0);
      const double fx = std::clamp(sx - x0, 0.0, 1.0);
      for (int c = 0; c < 3; ++c) {
        const double v = (1 - fy) * ((1 - fx) * src.at(y0, x0, c) + fx * src.at(y0, x1, c)) +
                         fy * ((1 - fx) * src.at(y1, x0, c) + fx * src.at(y1, x1, c));
        out.at(y, x, c) = static_cast<uint8_t>(std::lround(std::clamp(v, 0.0, 255.0)));
      }
    }
  }
  return out;
}

// Same geometry as the map letterbox: scaled content centred with the
// extra padding on the right/bottom, black borders.
RGBImage letterbox_image(const RGBImage& src, int tw, int th) {
  const double s = std::min(static_cast<double>(tw) / src.width,
                            static_cast<double>(th) / src.height);
  int cw = std::clamp(static_cast<int>(std::floor(s * src.width + 0.5)), 1, tw);
  int ch = std::clamp(static_cast<int>(std::floor(s * src.height + 0.5)), 1, th);
  RGBImage content = resize_bilinear(src, cw, ch);
  RGBImage out(tw, th);
  const int px = (tw - cw) / 2, py = (th - ch) / 2;
  for (int y = 0; y < ch; ++y)
    for (int x = 0; x < cw; ++x)
      for (int c = 0; c < 3; ++c) out.at(py + y, px + x, c) = content.at(y, x, c);
  return out;
}

struct PreparedMaps {
  mapkit::SemanticLabelMap semantic;
  mapkit::InstanceMap instances;
};

std::string maps_dir(const PipelineConfig& cfg) { return cfg.output_dir + "/maps"; }

PreparedMaps load_prepared(const PipelineConfig& cfg, const std::string& id) {
  const std::string sem_path = maps_dir(cfg) + "/" + id + "_semantic.png";
  const std::string inst_path = maps_dir(cfg) + "/" + id + "_instances.png";
  if (!fs::exists(sem_path) || !fs::exists(inst_path))
    throw ConfigError("missing prepared maps for " + id + "; run prepare-maps first");
  PreparedMaps p;
  p.semantic = mapkit::read_semantic_png(sem_path);
  p.instances = mapkit::decode_superpixel_png(read_png_rgb(inst_path));
  return p;
}

int cmd_prepare_maps(const PipelineConfig& cfg) {
  const DatasetManifest manifest = ingest_dataset(cfg.dataset_root, cfg.test_ratio);
  fs::create_directories(maps_dir(cfg));

  const auto n = static_cast<int>(manifest.records.size());
#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < n; ++i) {
    const auto& rec = manifest.records[static_cast<size_t>(i)];
    const mapkit::Mask seg = mapkit::read_mask_png(rec.segmentation_path);
    mapkit::AttributeMaskSet attrs;
    for (int a = 0; a < mapkit::kNumMarkers; ++a)
      attrs.masks[static_cast<size_t>(a)] =
          mapkit::read_mask_png(rec.attribute_paths[static_cast<size_t>(a)]);
    mapkit::SemanticLabelMap sem = mapkit::build_semantic_map(seg, attrs);

    mapkit::InstanceMap inst;
    if (!rec.superpixel_path.empty()) {
      inst = mapkit::decode_superpixel_png(read_png_rgb(rec.superpixel_path));
    } else {
      const RGBImage img = read_png_rgb(rec.image_path);
      inst = mapkit::slic_superpixels(img, cfg.mapkit.slic_segments,
                                      cfg.mapkit.slic_compactness, cfg.mapkit.slic_iterations);
    }

    sem = mapkit::letterbox(sem, cfg.mapkit.width, cfg.mapkit.height);
    inst = mapkit::letterbox(inst, cfg.mapkit.width, cfg.mapkit.height);
    const mapkit::BoundaryMap boundary = mapkit::boundary_map(inst);

    const std::string base = maps_dir(cfg) + "/" + rec.id;
    const std::string tmp_sem = base + "_semantic.png.tmp";
    mapkit::write_semantic_png(tmp_sem, sem);
    fs::rename(tmp_sem, base + "_semantic.png");
    write_png_rgb_atomic(base + "_instances.png", mapkit::encode_superpixel_png(inst));
    GrayImage bimg(boundary.width, boundary.height);
    for (size_t k = 0; k < boundary.values.size(); ++k)
      bimg.pixels[k] = boundary.values[k] ? 255 : 0;
    write_png_gray_atomic(base + "_boundary.png", bimg);
  }

  std::string report = "records: " + std::to_string(manifest.records.size()) +
                       "\ntrain: " + std::to_string(manifest.train_count()) +
                       "\ntest: " + std::to_string(manifest.test_count()) + "\nskipped: " +
                       std::to_string(manifest.skipped.size()) + "\n";
  for (const auto& s : manifest.skipped) report += "  " + s.id + ": " + s.reason + "\n";
  atomic_write_text(maps_dir(cfg) + "/ingest_report.txt", report);
  std::cout << report;
  return 0;
}

std::vector<trainer::Sample> build_translation_dataset(const PipelineConfig& cfg) {
  const DatasetManifest manifest = ingest_dataset(cfg.dataset_root, cfg.test_ratio);
  std::vector<trainer::Sample> dataset;
  for (const auto& rec : manifest.records) {
    if (rec.split != Split::kTrain) continue;
    PreparedMaps maps = load_prepared(cfg, rec.id);
    trainer::Sample s;
    s.input = trainer::encode_maps(maps.semantic,
                                   cfg.trainer.use_boundary ? &maps.instances : nullptr,
                                   cfg.trainer.width, cfg.trainer.height);
    const RGBImage img = read_png_rgb(rec.image_path);
    s.target = trainer::image_to_tensor(letterbox_image(img, cfg.trainer.width,
                                                        cfg.trainer.height));
    dataset.push_back(std::move(s));
  }
  if (dataset.empty()) throw InsufficientData("train-pix2pixhd: no training records");
  return dataset;
}

int cmd_train_pix2pixhd(const PipelineConfig& cfg) {
  trainer::TrainingConfig tcfg = cfg.trainer;
  tcfg.checkpoint_dir = cfg.output_dir + "/pix2pixhd";
  fs::create_directories(tcfg.checkpoint_dir);
  auto dataset = build_translation_dataset(cfg);
  trainer::Pix2PixTrainer t(tcfg);
  t.train(dataset, tcfg.checkpoint_dir + "/metrics.ndjson");
  return 0;
}

int cmd_train_pgan(const PipelineConfig& cfg) {
  const DatasetManifest manifest = ingest_dataset(cfg.dataset_root, cfg.test_ratio);
  proggan::PganConfig pcfg = cfg.proggan;
  pcfg.checkpoint_dir = cfg.output_dir + "/pgan";
  fs::create_directories(pcfg.checkpoint_dir);

  const int res = pcfg.schedule.target_res;
  std::vector<proggan::LabeledImage> dataset;
  for (const auto& rec : manifest.records) {
    if (rec.split != Split::kTrain) continue;
    proggan::LabeledImage item;
    item.image = trainer::image_to_tensor(resize_bilinear(read_png_rgb(rec.image_path), res, res));
    item.label = rec.diagnosis.value_or(0) ? proggan::ConditionLabel::kMelanoma
                                           : proggan::ConditionLabel::kBenign;
    dataset.push_back(std::move(item));
  }
  if (dataset.empty()) throw InsufficientData("train-pgan: no training records");
  proggan::train_pgan(pcfg, dataset, pcfg.checkpoint_dir + "/metrics.ndjson");
  return 0;
}

int cmd_synthesize(const PipelineConfig& cfg) {
  const std::string ckpt_path = cfg.output_dir + "/pix2pixhd/final.bin";
  if (!fs::exists(ckpt_path))
    throw ConfigError("synthesize: missing checkpoint " + ckpt_path +
                      "; run train-pix2pixhd first");
  const Checkpoint ckpt = load_checkpoint(ckpt_path);

  const DatasetManifest manifest = ingest_dataset(cfg.dataset_root, cfg.test_ratio);
  const std::string out_dir = cfg.output_dir + "/synth";
  fs::create_directories(out_dir);
  for (const auto& rec : manifest.records) {
    if (rec.split != Split::kTrain) continue;
    PreparedMaps maps = load_prepared(cfg, rec.id);
    std::vector<std::pair<mapkit::SemanticLabelMap, std::optional<mapkit::InstanceMap>>> req;
    req.emplace_back(maps.semantic, std::optional<mapkit::InstanceMap>(maps.instances));
    const auto imgs = trainer::synthesize(ckpt, req);
    write_png_rgb_atomic(out_dir + "/" + rec.id + "_synth.png", imgs.at(0));
  }
  return 0;
}

eval::Pool load_pool_dir(const std::string& dir, int res) {
  eval::Pool pool;
  for (const auto& [label_name, label] :
       std::vector<std::pair<std::string, int>>{{"benign", 0}, {"melanoma", 1}}) {
    const fs::path sub = fs::path(dir) / label_name;
    if (!fs::exists(sub)) continue;
    std::vector<fs::path> paths;
    for (const auto& e : fs::directory_iterator(sub))
      if (e.is_regular_file() && e.path().extension() == ".png") paths.push_back(e.path());
    std::sort(paths.begin(), paths.end());
    for (const auto& p : paths) {
      eval::LabeledExample ex;
      ex.image = trainer::image_to_tensor(resize_bilinear(read_png_rgb(p.string()), res, res));
      ex.label = label;
      pool.push_back(std::move(ex));
    }
  }
  return pool;
}

int cmd_evaluate(const PipelineConfig& cfg) {
  if (cfg.eval.experiment.specs.empty())
    throw ConfigError("evaluate: config has no eval.specs");
  const std::string pools_dir = cfg.output_dir + "/pools";
  const int res = cfg.eval.experiment.classifier.input_res;

  eval::SamplePools pools;
  for (eval::Source src : {eval::Source::kReal, eval::Source::kSemantic,
                           eval::Source::kInstance, eval::Source::kPgan}) {
    eval::Pool p = load_pool_dir(pools_dir + "/" + eval::source_name(src), res);
    if (!p.empty()) pools[src] = std::move(p);
  }
  eval::Pool test_set = load_pool_dir(pools_dir + "/test", res);
  if (test_set.empty())
    throw InsufficientData("evaluate: no test images under " + pools_dir + "/test");

  const eval::ExperimentReport report =
      eval::run_experiment(cfg.eval.experiment, pools, test_set);
  fs::create_directories(cfg.output_dir);
  atomic_write_text(cfg.output_dir + "/report.csv", eval::report_to_csv(report));
  atomic_write_text(cfg.output_dir + "/report.json", eval::report_to_json(report));
  std::cout << eval::report_to_csv(report);
  return 0;
}

int cmd_report(const PipelineConfig& cfg) {
  const std::string path = cfg.output_dir + "/report.csv";
  if (!fs::exists(path))
    throw ConfigError("report: no completed evaluation at " + path + "; run evaluate first");
  std::ifstream in(path);
  std::cout << in.rdbuf();
  return 0;
}

}  // namespace

int dispatch(const std::string& command, const PipelineConfig& cfg) {
  try {
    if (command == "prepare-maps") return cmd_prepare_maps(cfg);
    if (command == "train-pix2pixhd") return cmd_train_pix2pixhd(cfg);
    if (command == "train-pgan") return cmd_train_pgan(cfg);
    if (command == "synthesize") return cmd_synthesize(cfg);
    if (command == "evaluate") return cmd_evaluate(cfg);
    if (command == "report") return cmd_report(cfg);
    std::cerr << "unknown command: " << command << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace lesionsynth::cli
