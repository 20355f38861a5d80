#include "lesionsynth/manifest.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <unordered_set>

#include "lesionsynth/errors.hpp"
#include "lesionsynth/hash.hpp"

namespace lesionsynth::cli {

namespace fs = std::filesystem;

int DatasetManifest::train_count() const {
  int n = 0;
  for (const auto& r : records) n += r.split == Split::kTrain ? 1 : 0;
  return n;
}

int DatasetManifest::test_count() const {
  return static_cast<int>(records.size()) - train_count();
}

std::vector<std::string> pick_test_ids(std::vector<std::string> ids, double test_ratio) {
  if (!(test_ratio >= 0.0 && test_ratio <= 1.0))
    throw ConfigError("split: test_ratio must be in [0,1]");
  // Hash order is stable across machines and insertion order; ties (hash
  // collisions) fall back to the id itself.
  std::sort(ids.begin(), ids.end(), [](const std::string& a, const std::string& b) {
    const uint64_t ha = fnv1a64(a), hb = fnv1a64(b);
    return ha != hb ? ha < hb : a < b;
  });
  const auto n_test = static_cast<size_t>(
      std::lround(static_cast<double>(ids.size()) * test_ratio));
  ids.resize(std::min(n_test, ids.size()));
  return ids;
}

DatasetManifest ingest_dataset(const std::string& root, double test_ratio) {
  DatasetManifest m;
  m.root = root;
  if (!fs::exists(root)) throw ConfigError("ingest: dataset root does not exist: " + root);

  // Pass 1: find base images (ISIC_<id>.jpg/.png that are not derived files)
  // and index every file by basename so nested layouts work.
  std::set<std::string> ids;  // sorted for deterministic record order
  std::map<std::string, std::string> by_basename;
  for (const auto& entry : fs::recursive_directory_iterator(root)) {
    if (!entry.is_regular_file()) continue;
    by_basename.emplace(entry.path().filename().string(), entry.path().string());
    const std::string stem = entry.path().stem().string();
    const std::string ext = entry.path().extension().string();
    if ((ext == ".jpg" || ext == ".png") && stem.rfind("ISIC_", 0) == 0 &&
        stem.find('_', 5) == std::string::npos)
      ids.insert(stem);
  }

  auto find_file = [&](const std::string& name) -> std::string {
    auto it = by_basename.find(name);
    return it == by_basename.end() ? std::string() : it->second;
  };

  std::vector<std::string> kept_ids;
  for (const auto& id : ids) {
    DatasetRecord rec;
    rec.id = id;
    rec.image_path = find_file(id + ".jpg");
    if (rec.image_path.empty()) rec.image_path = find_file(id + ".png");
    rec.segmentation_path = find_file(id + "_segmentation.png");
    if (rec.segmentation_path.empty()) {
      m.skipped.push_back({id, "missing segmentation mask"});
      continue;
    }
    bool ok = true;
    for (int i = 0; i < mapkit::kNumMarkers; ++i) {
      rec.attribute_paths[static_cast<size_t>(i)] =
          find_file(id + "_attribute_" + mapkit::kMarkerNames[static_cast<size_t>(i)] + ".png");
      if (rec.attribute_paths[static_cast<size_t>(i)].empty()) {
        m.skipped.push_back({id, std::string("missing attribute mask: ") +
                                     mapkit::kMarkerNames[static_cast<size_t>(i)]});
        ok = false;
        break;
      }
    }
    if (!ok) continue;
    rec.superpixel_path = find_file(id + "_superpixels.png");

    // Optional diagnosis sidecar: a text file holding 0 (benign) or 1.
    const std::string diag = find_file(id + ".txt");
    if (!diag.empty()) {
      std::ifstream in(diag);
      int v;
      if (in >> v) rec.diagnosis = v ? 1 : 0;
    }
    m.records.push_back(std::move(rec));
    kept_ids.push_back(id);
  }

  const auto test_ids = pick_test_ids(kept_ids, test_ratio);
  const std::unordered_set<std::string> test_set(test_ids.begin(), test_ids.end());
  for (auto& rec : m.records)
    rec.split = test_set.count(rec.id) ? Split::kTest : Split::kTrain;
  return m;
}

}  // namespace lesionsynth::cli
