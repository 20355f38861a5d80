#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "lesionsynth/mapkit.hpp"

namespace lesionsynth::cli {

enum class Split { kTrain, kTest };

struct DatasetRecord {
  std::string id;  // e.g. "ISIC_0000000"
  std::string image_path;
  std::string segmentation_path;
  std::array<std::string, mapkit::kNumMarkers> attribute_paths;  // marker code order
  std::string superpixel_path;  // optional, empty if absent
  Split split = Split::kTrain;
  std::optional<int> diagnosis;  // 1 = melanoma, from <id>.txt sidecar if present
};

struct SkippedRecord {
  std::string id;
  std::string reason;
};

struct DatasetManifest {
  std::string root;
  std::vector<DatasetRecord> records;
  std::vector<SkippedRecord> skipped;

  int train_count() const;
  int test_count() const;
};

// Scans `root` for the ISIC naming convention:
//   ISIC_<id>.jpg|.png                      image
//   ISIC_<id>_segmentation.png              lesion mask
//   ISIC_<id>_attribute_<marker>.png        5 marker masks
//   ISIC_<id>_superpixels.png               optional superpixel map
// Records missing the segmentation or any attribute mask are skipped and
// reported. The train/test split is deterministic: ids ordered by FNV-1a
// hash, the first round(N * test_ratio) become the test set.
DatasetManifest ingest_dataset(const std::string& root, double test_ratio = 248.0 / 2594.0);

// Split assignment used by ingest_dataset, exposed for reuse: returns the
// set of ids assigned to test.
std::vector<std::string> pick_test_ids(std::vector<std::string> ids, double test_ratio);

}  // namespace lesionsynth::cli
