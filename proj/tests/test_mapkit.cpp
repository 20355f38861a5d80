#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <deque>
#include <random>
#include <set>

#include "lesionsynth/mapkit.hpp"

using namespace lesionsynth;
using namespace lesionsynth::mapkit;

namespace {

// Brute-force 4-neighborhood edge oracle.
BoundaryMap boundary_oracle(const InstanceMap& inst) {
  BoundaryMap out(inst.width, inst.height);
  for (int y = 0; y < inst.height; ++y) {
    for (int x = 0; x < inst.width; ++x) {
      bool edge = false;
      const int dy[4] = {0, 0, 1, -1};
      const int dx[4] = {1, -1, 0, 0};
      for (int d = 0; d < 4; ++d) {
        int ny = y + dy[d], nx = x + dx[d];
        if (ny < 0 || ny >= inst.height || nx < 0 || nx >= inst.width) continue;
        if (inst.at(ny, nx) != inst.at(y, x)) edge = true;
      }
      out.at(y, x) = edge ? 1 : 0;
    }
  }
  return out;
}

// Flood-fill check that every id's pixel set is one 4-connected region.
bool all_regions_connected(const InstanceMap& inst) {
  const int w = inst.width, h = inst.height, n = w * h;
  std::vector<bool> seen(n, false);
  std::set<int32_t> done;
  for (int i = 0; i < n; ++i) {
    if (seen[i]) continue;
    int32_t id = inst.ids[i];
    if (done.count(id)) return false;  // second component of the same id
    done.insert(id);
    std::deque<int> q{i};
    seen[i] = true;
    while (!q.empty()) {
      int p = q.front();
      q.pop_front();
      int y = p / w, x = p % w;
      const int dy[4] = {0, 0, 1, -1};
      const int dx[4] = {1, -1, 0, 0};
      for (int d = 0; d < 4; ++d) {
        int ny = y + dy[d], nx = x + dx[d];
        if (ny < 0 || ny >= h || nx < 0 || nx >= w) continue;
        int np = ny * w + nx;
        if (!seen[np] && inst.ids[np] == id) {
          seen[np] = true;
          q.push_back(np);
        }
      }
    }
  }
  return true;
}

RGBImage constant_image(int w, int h, uint8_t v) {
  RGBImage img(w, h);
  std::fill(img.pixels.begin(), img.pixels.end(), v);
  return img;
}

RGBImage noise_image(int w, int h, uint32_t seed) {
  RGBImage img(w, h);
  std::mt19937 rng(seed);
  std::uniform_int_distribution<int> d(0, 255);
  for (auto& p : img.pixels) p = static_cast<uint8_t>(d(rng));
  return img;
}

}  // namespace

TEST_CASE("slic: constant 20x20, k=4 gives the four 10x10 quadrants") {
  auto img = constant_image(20, 20, 128);
  auto inst = slic_superpixels(img, 4, 10.0, 10);

  // Oracle: nearest grid seed in plain spatial distance (color term is zero).
  const double seeds[4][2] = {{4.5, 4.5}, {14.5, 4.5}, {4.5, 14.5}, {14.5, 14.5}};
  std::set<int32_t> labels(inst.ids.begin(), inst.ids.end());
  CHECK(labels.size() == 4);
  for (int y = 0; y < 20; ++y) {
    for (int x = 0; x < 20; ++x) {
      int best = 0;
      double bd = 1e18;
      for (int s = 0; s < 4; ++s) {
        double d = (x - seeds[s][0]) * (x - seeds[s][0]) + (y - seeds[s][1]) * (y - seeds[s][1]);
        if (d < bd) {
          bd = d;
          best = s;
        }
      }
      // Same quadrant membership as the oracle (up to label renaming).
      int ox = x < 10 ? 0 : 1, oy = y < 10 ? 0 : 1;
      CHECK(best == oy * 2 + ox);
      CHECK(inst.at(y, x) == inst.at(oy * 10 + 5, ox * 10 + 5));
    }
  }
  // Exactly 100 pixels per quadrant.
  for (int32_t l : labels)
    CHECK(std::count(inst.ids.begin(), inst.ids.end(), l) == 100);
}

TEST_CASE("slic: k=1 is a single superpixel") {
  auto img = noise_image(17, 9, 3);
  auto inst = slic_superpixels(img, 1, 10.0, 5);
  std::set<int32_t> labels(inst.ids.begin(), inst.ids.end());
  CHECK(labels.size() == 1);
}

TEST_CASE("slic: natural image partition properties") {
  auto img = noise_image(64, 64, 42);
  // Smooth the noise a bit so superpixels are meaningful.
  RGBImage smooth(64, 64);
  for (int y = 0; y < 64; ++y)
    for (int x = 0; x < 64; ++x)
      for (int c = 0; c < 3; ++c) {
        int sum = 0, cnt = 0;
        for (int dy = -2; dy <= 2; ++dy)
          for (int dx = -2; dx <= 2; ++dx) {
            int ny = y + dy, nx = x + dx;
            if (ny < 0 || ny >= 64 || nx < 0 || nx >= 64) continue;
            sum += img.at(ny, nx, c);
            ++cnt;
          }
        smooth.at(y, x, c) = static_cast<uint8_t>(sum / cnt);
      }
  auto inst = slic_superpixels(smooth, 16, 10.0, 10);
  std::set<int32_t> labels(inst.ids.begin(), inst.ids.end());
  CHECK(labels.size() >= 8);
  CHECK(labels.size() <= 32);
  CHECK(all_regions_connected(inst));
}

TEST_CASE("slic: argument validation") {
  auto img = constant_image(4, 4, 0);
  CHECK_THROWS_AS(slic_superpixels(img, 17, 10.0, 5), std::invalid_argument);
  CHECK_THROWS_AS(slic_superpixels(img, 0, 10.0, 5), std::invalid_argument);
  CHECK_THROWS_AS(slic_superpixels(img, 2, 0.0, 5), std::invalid_argument);
  CHECK_THROWS_AS(slic_superpixels(RGBImage{}, 1, 10.0, 5), std::invalid_argument);
}

TEST_CASE("decode_superpixel_png id convention") {
  RGBImage img(3, 1);
  img.at(0, 0, 0) = 5;
  img.at(0, 1, 1) = 1;
  img.at(0, 2, 0) = 2;
  img.at(0, 2, 1) = 1;
  auto inst = decode_superpixel_png(img);
  CHECK(inst.at(0, 0) == 5);
  CHECK(inst.at(0, 1) == 256);
  CHECK(inst.at(0, 2) == 258);

  // Alternative channel weighting is honored.
  SuperpixelIdConvention conv{65536, 256, 1};
  auto inst2 = decode_superpixel_png(img, conv);
  CHECK(inst2.at(0, 0) == 5 * 65536);
}

TEST_CASE("encode/decode superpixel raster round-trip") {
  InstanceMap inst(5, 4);
  std::mt19937 rng(7);
  std::uniform_int_distribution<int32_t> d(0, 1 << 20);
  for (auto& id : inst.ids) id = d(rng);
  auto dec = decode_superpixel_png(encode_superpixel_png(inst));
  CHECK(dec.ids == inst.ids);
}

TEST_CASE("build_semantic_map basic labeling") {
  Mask seg(4, 3);
  AttributeMaskSet markers;
  for (auto& m : markers.masks) m = Mask(4, 3);

  SUBCASE("all empty -> skin everywhere") {
    auto sm = build_semantic_map(seg, markers);
    for (uint8_t l : sm.labels) CHECK(l == kSkin);
  }
  SUBCASE("seg full -> lesion_no_marker everywhere") {
    std::fill(seg.values.begin(), seg.values.end(), 1);
    auto sm = build_semantic_map(seg, markers);
    for (uint8_t l : sm.labels) CHECK(l == kLesionNoMarker);
  }
  SUBCASE("marker overlap resolves to lowest code") {
    std::fill(seg.values.begin(), seg.values.end(), 1);
    markers.masks[0].at(1, 1) = 1;  // pigment_network
    markers.masks[4].at(1, 1) = 1;  // globules
    auto sm = build_semantic_map(seg, markers);
    // Reference scan applying the documented priority order.
    CHECK(sm.at(1, 1) == kPigmentNetwork);
  }
  SUBCASE("marker outside segmentation keeps the marker code") {
    markers.masks[2].at(0, 0) = 1;  // streaks, seg = 0 there
    auto sm = build_semantic_map(seg, markers);
    CHECK(sm.at(0, 0) == kStreaks);
  }
  SUBCASE("dimension mismatch throws") {
    markers.masks[1] = Mask(5, 3);
    CHECK_THROWS_AS(build_semantic_map(seg, markers), std::invalid_argument);
  }
}

TEST_CASE("build_semantic_map priority is by code, not mask storage order") {
  Mask seg(2, 2);
  std::fill(seg.values.begin(), seg.values.end(), 1);
  AttributeMaskSet markers;
  for (auto& m : markers.masks) m = Mask(2, 2);
  markers.masks[1].at(0, 0) = 1;
  markers.masks[3].at(0, 0) = 1;
  auto sm = build_semantic_map(seg, markers);
  CHECK(sm.at(0, 0) == kNegativeNetwork);
}

TEST_CASE("letterbox 600x450 -> 1024x512") {
  SemanticLabelMap map(600, 450);
  std::fill(map.labels.begin(), map.labels.end(), uint8_t{kLesionNoMarker});
  auto out = letterbox(map, 1024, 512);
  CHECK(out.width == 1024);
  CHECK(out.height == 512);
  // s = 512/450, content 683x512, pad 341 split 170 left / 171 right.
  for (int x = 0; x < 170; ++x) CHECK(out.at(256, x) == kBorder);
  for (int x = 170; x < 853; ++x) CHECK(out.at(256, x) == kLesionNoMarker);
  for (int x = 853; x < 1024; ++x) CHECK(out.at(256, x) == kBorder);
}

TEST_CASE("letterbox identity when shapes match") {
  SemanticLabelMap map(16, 8);
  for (size_t i = 0; i < map.labels.size(); ++i) map.labels[i] = static_cast<uint8_t>(i % 8);
  auto out = letterbox(map, 16, 8);
  CHECK(out.labels == map.labels);
}

TEST_CASE("letterbox 10x10 -> 20x10 centers with 5-column bands") {
  SemanticLabelMap map(10, 10);
  std::fill(map.labels.begin(), map.labels.end(), uint8_t{kSkin});
  auto out = letterbox(map, 20, 10);
  for (int x = 0; x < 5; ++x) CHECK(out.at(4, x) == kBorder);
  for (int x = 5; x < 15; ++x) CHECK(out.at(4, x) == kSkin);
  for (int x = 15; x < 20; ++x) CHECK(out.at(4, x) == kBorder);
}

TEST_CASE("letterbox preserves content label set") {
  std::mt19937 rng(11);
  SemanticLabelMap map(13, 7);
  std::uniform_int_distribution<int> d(1, 7);
  for (auto& l : map.labels) l = static_cast<uint8_t>(d(rng));
  auto out = letterbox(map, 40, 24);
  std::set<uint8_t> in_labels(map.labels.begin(), map.labels.end());
  std::set<uint8_t> out_labels(out.labels.begin(), out.labels.end());
  out_labels.erase(kBorder);
  // Nearest-neighbor upsampling keeps every source label and invents none.
  CHECK(in_labels == out_labels);
}

TEST_CASE("letterbox instance map uses a fresh fill id") {
  InstanceMap map(4, 4);
  for (size_t i = 0; i < map.ids.size(); ++i) map.ids[i] = static_cast<int32_t>(i % 3);
  auto out = letterbox(map, 8, 4);
  CHECK(out.at(0, 0) == 3);  // max id + 1
  CHECK(out.at(0, 2) == map.at(0, 0));
}

TEST_CASE("boundary_map matches the 4-neighborhood oracle") {
  SUBCASE("hand cases") {
    InstanceMap a(2, 2);
    std::fill(a.ids.begin(), a.ids.end(), 1);
    auto ba = boundary_map(a);
    CHECK(std::count(ba.values.begin(), ba.values.end(), 0) == 4);

    InstanceMap b(2, 2);
    b.at(0, 0) = 1;
    b.at(0, 1) = 2;
    b.at(1, 0) = 1;
    b.at(1, 1) = 2;
    auto bb = boundary_map(b);
    CHECK(std::count(bb.values.begin(), bb.values.end(), 1) == 4);

    InstanceMap c(3, 3);
    for (int y = 0; y < 3; ++y) {
      c.at(y, 0) = 1;
      c.at(y, 1) = 1;
      c.at(y, 2) = 2;
    }
    auto bc = boundary_map(c);
    for (int y = 0; y < 3; ++y) {
      CHECK(bc.at(y, 0) == 0);
      CHECK(bc.at(y, 1) == 1);
      CHECK(bc.at(y, 2) == 1);
    }
  }
  SUBCASE("random 8x8 maps") {
    std::mt19937 rng(5);
    std::uniform_int_distribution<int32_t> d(0, 4);
    for (int t = 0; t < 100; ++t) {
      InstanceMap m(8, 8);
      for (auto& id : m.ids) id = d(rng);
      auto got = boundary_map(m);
      auto want = boundary_oracle(m);
      CHECK(got.values == want.values);
    }
  }
}

TEST_CASE("one_hot encoding") {
  SemanticLabelMap map(2, 1);
  map.at(0, 0) = 0;
  map.at(0, 1) = 3;

  SUBCASE("without boundary") {
    auto t = one_hot(map, 8);
    CHECK(t.shape() == std::vector<int>{8, 1, 2});
    CHECK(t.at3(0, 0, 0) == 1.0f);
    CHECK(t.at3(3, 0, 1) == 1.0f);
    CHECK(t.array().sum() == 2.0f);
  }
  SUBCASE("with boundary") {
    BoundaryMap b(2, 1);
    b.at(0, 0) = 1;
    auto t = one_hot(map, 8, &b);
    CHECK(t.shape() == std::vector<int>{9, 1, 2});
    CHECK(t.at3(8, 0, 0) == 1.0f);
    CHECK(t.at3(8, 0, 1) == 0.0f);
  }
  SUBCASE("label out of range throws") {
    map.at(0, 1) = 8;
    CHECK_THROWS_AS(one_hot(map, 8), std::invalid_argument);
  }
}

TEST_CASE("one_hot label channels sum to one everywhere") {
  std::mt19937 rng(13);
  std::uniform_int_distribution<int> d(0, 7);
  SemanticLabelMap map(9, 6);
  for (auto& l : map.labels) l = static_cast<uint8_t>(d(rng));
  auto t = one_hot(map, 8);
  for (int y = 0; y < 6; ++y)
    for (int x = 0; x < 9; ++x) {
      float s = 0;
      for (int c = 0; c < 8; ++c) s += t.at3(c, y, x);
      CHECK(s == 1.0f);
    }
}

TEST_CASE("semantic map png round-trip") {
  SemanticLabelMap map(6, 5);
  std::mt19937 rng(17);
  std::uniform_int_distribution<int> d(0, 7);
  for (auto& l : map.labels) l = static_cast<uint8_t>(d(rng));
  std::string path = "/tmp/lesionsynth_test_semantic.png";
  write_semantic_png(path, map);
  auto back = read_semantic_png(path);
  CHECK(back.labels == map.labels);
}
