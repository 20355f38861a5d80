#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lesionsynth/image.hpp"
#include "lesionsynth/tensor.hpp"

namespace lesionsynth::mapkit {

// Semantic label codes. 0 is reserved for letterbox borders; markers keep
// the clinical ordering used for overlap priority (lowest code wins).
enum Label : uint8_t {
  kBorder = 0,
  kSkin = 1,
  kLesionNoMarker = 2,
  kPigmentNetwork = 3,
  kNegativeNetwork = 4,
  kStreaks = 5,
  kMiliaLikeCyst = 6,
  kGlobules = 7,
};

inline constexpr int kNumLabels = 8;
inline constexpr int kNumMarkers = 5;

inline constexpr std::array<const char*, kNumMarkers> kMarkerNames = {
    "pigment_network", "negative_network", "streaks", "milia_like_cyst", "globules"};

// Binary per-pixel mask (0/1).
struct Mask {
  int width = 0;
  int height = 0;
  std::vector<uint8_t> values;

  Mask() = default;
  Mask(int w, int h) : width(w), height(h), values(static_cast<size_t>(w) * h, 0) {}
  uint8_t& at(int y, int x) { return values[static_cast<size_t>(y) * width + x]; }
  uint8_t at(int y, int x) const { return values[static_cast<size_t>(y) * width + x]; }
};

// The five marker masks, indexed in code order (pigment_network first).
struct AttributeMaskSet {
  std::array<Mask, kNumMarkers> masks;
};

struct SemanticLabelMap {
  int width = 0;
  int height = 0;
  std::vector<uint8_t> labels;

  SemanticLabelMap() = default;
  SemanticLabelMap(int w, int h) : width(w), height(h), labels(static_cast<size_t>(w) * h, 0) {}
  uint8_t& at(int y, int x) { return labels[static_cast<size_t>(y) * width + x]; }
  uint8_t at(int y, int x) const { return labels[static_cast<size_t>(y) * width + x]; }
};

struct InstanceMap {
  int width = 0;
  int height = 0;
  std::vector<int32_t> ids;

  InstanceMap() = default;
  InstanceMap(int w, int h) : width(w), height(h), ids(static_cast<size_t>(w) * h, 0) {}
  int32_t& at(int y, int x) { return ids[static_cast<size_t>(y) * width + x]; }
  int32_t at(int y, int x) const { return ids[static_cast<size_t>(y) * width + x]; }
};

struct BoundaryMap {
  int width = 0;
  int height = 0;
  std::vector<uint8_t> values;

  BoundaryMap() = default;
  BoundaryMap(int w, int h) : width(w), height(h), values(static_cast<size_t>(w) * h, 0) {}
  uint8_t& at(int y, int x) { return values[static_cast<size_t>(y) * width + x]; }
  uint8_t at(int y, int x) const { return values[static_cast<size_t>(y) * width + x]; }
};

// SLIC superpixels in CIELAB, grid-seeded with 3x3 lowest-gradient seed
// perturbation, 2Sx2S assignment windows, orphan merge post-pass.
InstanceMap slic_superpixels(const RGBImage& image, int k, double compactness, int max_iter);

// Channel weights for mapping an RGB superpixel raster to integer ids.
struct SuperpixelIdConvention {
  int r_mult = 1;
  int g_mult = 256;
  int b_mult = 65536;
};

InstanceMap decode_superpixel_png(const RGBImage& image,
                                  const SuperpixelIdConvention& conv = {});
RGBImage encode_superpixel_png(const InstanceMap& inst,
                               const SuperpixelIdConvention& conv = {});

// Merge a lesion segmentation with the five marker masks into per-pixel
// labels. Marker overlaps resolve to the lowest code; marker pixels outside
// the segmentation keep the marker code.
SemanticLabelMap build_semantic_map(const Mask& seg, const AttributeMaskSet& markers);

// Aspect-preserving nearest-neighbor resize onto a target canvas; rounding
// is half-up and the odd pad pixel goes right/bottom.
SemanticLabelMap letterbox(const SemanticLabelMap& map, int target_w, int target_h,
                           uint8_t fill = kBorder);
// Instance variant; fill < 0 picks a fresh id (max id + 1).
InstanceMap letterbox(const InstanceMap& map, int target_w, int target_h, int32_t fill = -1);

BoundaryMap boundary_map(const InstanceMap& inst);

// One-hot encode labels to a (num_labels[+1], H, W) tensor; the boundary
// channel, when present, is appended last.
Tensorf one_hot(const SemanticLabelMap& map, int num_labels,
                const BoundaryMap* boundary = nullptr);

// PNG round-trips for the derived rasters.
SemanticLabelMap read_semantic_png(const std::string& path);
void write_semantic_png(const std::string& path, const SemanticLabelMap& map);
void write_boundary_png(const std::string& path, const BoundaryMap& map);
Mask read_mask_png(const std::string& path);  // thresholds at >127

}  // namespace lesionsynth::mapkit
