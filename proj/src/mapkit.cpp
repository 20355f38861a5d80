#include "lesionsynth/mapkit.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <stdexcept>

namespace lesionsynth::mapkit {

namespace {

struct Lab {
  float l, a, b;
};

float srgb_to_linear(uint8_t v) {
  float c = v / 255.0f;
  return c <= 0.04045f ? c / 12.92f : std::pow((c + 0.055f) / 1.055f, 2.4f);
}

// sRGB (D65) -> CIELAB.
Lab rgb_to_lab(uint8_t r8, uint8_t g8, uint8_t b8) {
  float r = srgb_to_linear(r8), g = srgb_to_linear(g8), b = srgb_to_linear(b8);
  float x = 0.4124564f * r + 0.3575761f * g + 0.1804375f * b;
  float y = 0.2126729f * r + 0.7151522f * g + 0.0721750f * b;
  float z = 0.0193339f * r + 0.1191920f * g + 0.9503041f * b;
  x /= 0.95047f;
  z /= 1.08883f;
  auto f = [](float t) {
    return t > 0.008856f ? std::cbrt(t) : 7.787f * t + 16.0f / 116.0f;
  };
  float fx = f(x), fy = f(y), fz = f(z);
  return {116.0f * fy - 16.0f, 500.0f * (fx - fy), 200.0f * (fy - fz)};
}

struct Cluster {
  float l = 0, a = 0, b = 0;
  float x = 0, y = 0;
};

// Squared CIELAB gradient, summed over channels.
float lab_gradient(const std::vector<Lab>& lab, int w, int h, int x, int y) {
  auto px = [&](int yy, int xx) -> const Lab& {
    yy = std::clamp(yy, 0, h - 1);
    xx = std::clamp(xx, 0, w - 1);
    return lab[static_cast<size_t>(yy) * w + xx];
  };
  const Lab& xp = px(y, x + 1);
  const Lab& xm = px(y, x - 1);
  const Lab& yp = px(y + 1, x);
  const Lab& ym = px(y - 1, x);
  auto sq = [](float v) { return v * v; };
  return sq(xp.l - xm.l) + sq(xp.a - xm.a) + sq(xp.b - xm.b) +
         sq(yp.l - ym.l) + sq(yp.a - ym.a) + sq(yp.b - ym.b);
}

// 4-connected components of the SLIC label image, then merge every
// non-largest component of each label into the biggest adjacent superpixel.
void enforce_connectivity(InstanceMap& inst) {
  const int w = inst.width, h = inst.height;
  const int n = w * h;
  std::vector<int> comp(n, -1);
  std::vector<int> comp_label;
  std::vector<int> comp_size;

  for (int i = 0; i < n; ++i) {
    if (comp[i] >= 0) continue;
    int id = static_cast<int>(comp_label.size());
    comp_label.push_back(inst.ids[i]);
    comp_size.push_back(0);
    std::deque<int> q{i};
    comp[i] = id;
    while (!q.empty()) {
      int p = q.front();
      q.pop_front();
      ++comp_size[id];
      int y = p / w, x = p % w;
      const int dy[4] = {0, 0, 1, -1};
      const int dx[4] = {1, -1, 0, 0};
      for (int d = 0; d < 4; ++d) {
        int ny = y + dy[d], nx = x + dx[d];
        if (ny < 0 || ny >= h || nx < 0 || nx >= w) continue;
        int np = ny * w + nx;
        if (comp[np] < 0 && inst.ids[np] == inst.ids[i]) {
          comp[np] = id;
          q.push_back(np);
        }
      }
    }
  }

  // Keeper per label = its largest component.
  int ncomp = static_cast<int>(comp_label.size());
  std::vector<bool> kept(ncomp, false);
  {
    std::vector<int> best_for_label;  // comp id, indexed by label via map
    std::vector<std::pair<int, int>> order(ncomp);
    for (int c = 0; c < ncomp; ++c) order[c] = {comp_label[c], c};
    std::sort(order.begin(), order.end());
    for (size_t i = 0; i < order.size();) {
      size_t j = i;
      int best = order[i].second;
      for (; j < order.size() && order[j].first == order[i].first; ++j)
        if (comp_size[order[j].second] > comp_size[best]) best = order[j].second;
      kept[best] = true;
      i = j;
    }
  }

  // Total area per label, for picking the merge target.
  std::vector<std::pair<int, int64_t>> label_area;  // sorted label -> area
  {
    std::vector<std::pair<int, int>> lc;
    for (int c = 0; c < ncomp; ++c)
      if (kept[c]) label_area.push_back({comp_label[c], comp_size[c]});
    std::sort(label_area.begin(), label_area.end());
  }
  auto area_of = [&](int label) -> int64_t {
    auto it = std::lower_bound(label_area.begin(), label_area.end(),
                               std::make_pair(label, int64_t{0}));
    return it != label_area.end() && it->first == label ? it->second : 0;
  };

  // Iteratively absorb orphan components; deferred when only orphan
  // neighbors exist, which shrinks every round.
  std::vector<int> pending;
  for (int c = 0; c < ncomp; ++c)
    if (!kept[c]) pending.push_back(c);

  while (!pending.empty()) {
    std::vector<int> next;
    for (int c : pending) {
      int best_label = -1;
      int64_t best_area = -1;
      for (int i = 0; i < n; ++i) {
        if (comp[i] != c) continue;
        int y = i / w, x = i % w;
        const int dy[4] = {0, 0, 1, -1};
        const int dx[4] = {1, -1, 0, 0};
        for (int d = 0; d < 4; ++d) {
          int ny = y + dy[d], nx = x + dx[d];
          if (ny < 0 || ny >= h || nx < 0 || nx >= w) continue;
          int np = ny * w + nx;
          if (comp[np] == c || !kept[comp[np]]) continue;
          int64_t a = area_of(inst.ids[np]);
          if (a > best_area) {
            best_area = a;
            best_label = inst.ids[np];
          }
        }
      }
      if (best_label < 0) {
        next.push_back(c);
        continue;
      }
      for (int i = 0; i < n; ++i)
        if (comp[i] == c) inst.ids[i] = best_label;
      kept[c] = true;  // absorbed pixels now count as settled
      // Note: absorbed area is not added to label_area; the largest-area
      // preference only needs the pre-merge ranking.
    }
    if (next.size() == pending.size()) break;  // isolated islands, keep as-is
    pending = std::move(next);
  }
}

}  // namespace

InstanceMap slic_superpixels(const RGBImage& image, int k, double compactness, int max_iter) {
  if (!image.valid()) throw std::invalid_argument("slic: non-RGB or empty input");
  const int w = image.width, h = image.height;
  const int64_t n = static_cast<int64_t>(w) * h;
  if (k < 1 || k > n) throw std::invalid_argument("slic: k out of range");
  if (!(compactness > 0)) throw std::invalid_argument("slic: compactness must be > 0");
  if (max_iter < 1) throw std::invalid_argument("slic: max_iter must be >= 1");

  std::vector<Lab> lab(n);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      lab[static_cast<size_t>(y) * w + x] =
          rgb_to_lab(image.at(y, x, 0), image.at(y, x, 1), image.at(y, x, 2));

  const double S = std::sqrt(static_cast<double>(n) / k);
  int nx = std::max(1, static_cast<int>(std::llround(w / S)));
  int ny = std::max(1, static_cast<int>(std::llround(h / S)));
  while (nx * ny < k) (nx * w >= ny * h ? nx : ny) += 1;  // at least k seeds
  const double sx = static_cast<double>(w) / nx;
  const double sy = static_cast<double>(h) / ny;

  std::vector<Cluster> centers;
  centers.reserve(static_cast<size_t>(nx) * ny);
  for (int gy = 0; gy < ny; ++gy) {
    for (int gx = 0; gx < nx; ++gx) {
      double cx = (gx + 0.5) * sx - 0.5;
      double cy = (gy + 0.5) * sy - 0.5;
      // Perturb to the strictly lowest-gradient pixel in a 3x3 window.
      int px = std::clamp(static_cast<int>(std::llround(cx)), 0, w - 1);
      int py = std::clamp(static_cast<int>(std::llround(cy)), 0, h - 1);
      float best = lab_gradient(lab, w, h, px, py);
      int bx = -1, by = -1;
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          int qx = px + dx, qy = py + dy;
          if (qx < 0 || qx >= w || qy < 0 || qy >= h || (dx == 0 && dy == 0)) continue;
          float g = lab_gradient(lab, w, h, qx, qy);
          if (g < best) {
            best = g;
            bx = qx;
            by = qy;
          }
        }
      }
      Cluster c;
      if (bx >= 0) {
        cx = bx;
        cy = by;
      }
      int ix = std::clamp(static_cast<int>(std::llround(cx)), 0, w - 1);
      int iy = std::clamp(static_cast<int>(std::llround(cy)), 0, h - 1);
      const Lab& p = lab[static_cast<size_t>(iy) * w + ix];
      c.l = p.l;
      c.a = p.a;
      c.b = p.b;
      c.x = static_cast<float>(cx);
      c.y = static_cast<float>(cy);
      centers.push_back(c);
    }
  }

  const int nc = static_cast<int>(centers.size());
  std::vector<int> assign(n, -1);
  std::vector<float> dist(n);
  const float inv_s2 = static_cast<float>(1.0 / (S * S));
  const float m2 = static_cast<float>(compactness * compactness);

  for (int iter = 0; iter < max_iter; ++iter) {
    std::fill(dist.begin(), dist.end(), std::numeric_limits<float>::max());
    const int win = static_cast<int>(std::ceil(S));
    for (int c = 0; c < nc; ++c) {
      const Cluster& cl = centers[c];
      int x0 = std::max(0, static_cast<int>(std::floor(cl.x)) - win);
      int x1 = std::min(w - 1, static_cast<int>(std::ceil(cl.x)) + win);
      int y0 = std::max(0, static_cast<int>(std::floor(cl.y)) - win);
      int y1 = std::min(h - 1, static_cast<int>(std::ceil(cl.y)) + win);
      for (int y = y0; y <= y1; ++y) {
        for (int x = x0; x <= x1; ++x) {
          const size_t i = static_cast<size_t>(y) * w + x;
          const Lab& p = lab[i];
          float dc = (p.l - cl.l) * (p.l - cl.l) + (p.a - cl.a) * (p.a - cl.a) +
                     (p.b - cl.b) * (p.b - cl.b);
          float dxy = (x - cl.x) * (x - cl.x) + (y - cl.y) * (y - cl.y);
          float d = dc + dxy * inv_s2 * m2;
          if (d < dist[i]) {
            dist[i] = d;
            assign[i] = c;
          }
        }
      }
    }
    // Windows can miss pixels on extreme aspect ratios; fall back to a
    // full nearest-center search for those.
    for (int64_t i = 0; i < n; ++i) {
      if (assign[i] >= 0) continue;
      int x = static_cast<int>(i % w), y = static_cast<int>(i / w);
      const Lab& p = lab[i];
      for (int c = 0; c < nc; ++c) {
        const Cluster& cl = centers[c];
        float dc = (p.l - cl.l) * (p.l - cl.l) + (p.a - cl.a) * (p.a - cl.a) +
                   (p.b - cl.b) * (p.b - cl.b);
        float dxy = (x - cl.x) * (x - cl.x) + (y - cl.y) * (y - cl.y);
        float d = dc + dxy * inv_s2 * m2;
        if (d < dist[i]) {
          dist[i] = d;
          assign[i] = c;
        }
      }
    }

    // Recompute cluster means.
    std::vector<Cluster> sum(nc);
    std::vector<int64_t> cnt(nc, 0);
    for (int64_t i = 0; i < n; ++i) {
      int c = assign[i];
      const Lab& p = lab[i];
      sum[c].l += p.l;
      sum[c].a += p.a;
      sum[c].b += p.b;
      sum[c].x += static_cast<float>(i % w);
      sum[c].y += static_cast<float>(i / w);
      ++cnt[c];
    }
    bool moved = false;
    for (int c = 0; c < nc; ++c) {
      if (cnt[c] == 0) continue;
      Cluster nc2{sum[c].l / cnt[c], sum[c].a / cnt[c], sum[c].b / cnt[c],
                  sum[c].x / cnt[c], sum[c].y / cnt[c]};
      if (std::abs(nc2.x - centers[c].x) > 1e-4f || std::abs(nc2.y - centers[c].y) > 1e-4f)
        moved = true;
      centers[c] = nc2;
    }
    if (!moved && iter > 0) break;
  }

  InstanceMap out(w, h);
  for (int64_t i = 0; i < n; ++i) out.ids[i] = assign[i];
  enforce_connectivity(out);
  return out;
}

InstanceMap decode_superpixel_png(const RGBImage& image, const SuperpixelIdConvention& conv) {
  if (!image.valid()) throw std::invalid_argument("decode_superpixel_png: invalid raster");
  InstanceMap out(image.width, image.height);
  for (int y = 0; y < image.height; ++y)
    for (int x = 0; x < image.width; ++x)
      out.at(y, x) = image.at(y, x, 0) * conv.r_mult + image.at(y, x, 1) * conv.g_mult +
                     image.at(y, x, 2) * conv.b_mult;
  return out;
}

RGBImage encode_superpixel_png(const InstanceMap& inst, const SuperpixelIdConvention& conv) {
  // Only the default 1/256/65536 little-endian-style packing is invertible
  // here; other conventions are for decoding third-party rasters.
  if (conv.r_mult != 1 || conv.g_mult != 256 || conv.b_mult != 65536)
    throw std::invalid_argument("encode_superpixel_png: unsupported convention");
  RGBImage out(inst.width, inst.height);
  for (int y = 0; y < inst.height; ++y) {
    for (int x = 0; x < inst.width; ++x) {
      int32_t id = inst.at(y, x);
      if (id < 0 || id > 0xFFFFFF)
        throw std::invalid_argument("encode_superpixel_png: id out of 24-bit range");
      out.at(y, x, 0) = static_cast<uint8_t>(id & 0xFF);
      out.at(y, x, 1) = static_cast<uint8_t>((id >> 8) & 0xFF);
      out.at(y, x, 2) = static_cast<uint8_t>((id >> 16) & 0xFF);
    }
  }
  return out;
}

SemanticLabelMap build_semantic_map(const Mask& seg, const AttributeMaskSet& markers) {
  for (const Mask& m : markers.masks)
    if (m.width != seg.width || m.height != seg.height)
      throw std::invalid_argument("build_semantic_map: mask dimension mismatch");

  SemanticLabelMap out(seg.width, seg.height);
  const size_t n = seg.values.size();
  for (size_t i = 0; i < n; ++i) {
    uint8_t label = seg.values[i] ? kLesionNoMarker : kSkin;
    // Lowest marker code wins on overlap; marker outranks segmentation.
    for (int m = 0; m < kNumMarkers; ++m) {
      if (markers.masks[m].values[i]) {
        label = static_cast<uint8_t>(kPigmentNetwork + m);
        break;
      }
    }
    out.labels[i] = label;
  }
  return out;
}

namespace {

struct LetterboxGeometry {
  int content_w, content_h, pad_left, pad_top;
};

LetterboxGeometry letterbox_geometry(int w, int h, int tw, int th) {
  double s = std::min(static_cast<double>(tw) / w, static_cast<double>(th) / h);
  int cw = static_cast<int>(std::floor(s * w + 0.5));
  int ch = static_cast<int>(std::floor(s * h + 0.5));
  cw = std::clamp(cw, 1, tw);
  ch = std::clamp(ch, 1, th);
  return {cw, ch, (tw - cw) / 2, (th - ch) / 2};
}

template <typename MapT, typename V>
MapT letterbox_impl(const MapT& map, int tw, int th, V fill) {
  if (tw < 1 || th < 1) throw std::invalid_argument("letterbox: target must be >= 1");
  auto g = letterbox_geometry(map.width, map.height, tw, th);
  MapT out(tw, th);
  for (int y = 0; y < th; ++y) {
    for (int x = 0; x < tw; ++x) {
      int cx = x - g.pad_left, cy = y - g.pad_top;
      if (cx < 0 || cx >= g.content_w || cy < 0 || cy >= g.content_h) {
        out.at(y, x) = fill;
      } else {
        int sx = std::min(map.width - 1,
                          static_cast<int>((cx + 0.5) * map.width / g.content_w));
        int sy = std::min(map.height - 1,
                          static_cast<int>((cy + 0.5) * map.height / g.content_h));
        out.at(y, x) = map.at(sy, sx);
      }
    }
  }
  return out;
}

}  // namespace

SemanticLabelMap letterbox(const SemanticLabelMap& map, int tw, int th, uint8_t fill) {
  return letterbox_impl(map, tw, th, fill);
}

InstanceMap letterbox(const InstanceMap& map, int tw, int th, int32_t fill) {
  if (fill < 0) {
    int32_t mx = 0;
    for (int32_t id : map.ids) mx = std::max(mx, id);
    fill = mx + 1;
  }
  return letterbox_impl(map, tw, th, fill);
}

BoundaryMap boundary_map(const InstanceMap& inst) {
  BoundaryMap out(inst.width, inst.height);
  for (int y = 0; y < inst.height; ++y) {
    for (int x = 0; x < inst.width; ++x) {
      int32_t id = inst.at(y, x);
      bool edge = (x + 1 < inst.width && inst.at(y, x + 1) != id) ||
                  (x > 0 && inst.at(y, x - 1) != id) ||
                  (y + 1 < inst.height && inst.at(y + 1, x) != id) ||
                  (y > 0 && inst.at(y - 1, x) != id);
      out.at(y, x) = edge ? 1 : 0;
    }
  }
  return out;
}

Tensorf one_hot(const SemanticLabelMap& map, int num_labels, const BoundaryMap* boundary) {
  if (boundary && (boundary->width != map.width || boundary->height != map.height))
    throw std::invalid_argument("one_hot: boundary dimension mismatch");
  const int c = num_labels + (boundary ? 1 : 0);
  Tensorf out({c, map.height, map.width});
  for (int y = 0; y < map.height; ++y) {
    for (int x = 0; x < map.width; ++x) {
      uint8_t label = map.at(y, x);
      if (label >= num_labels)
        throw std::invalid_argument("one_hot: label exceeds num_labels");
      out.at3(label, y, x) = 1.0f;
      if (boundary) out.at3(num_labels, y, x) = static_cast<float>(boundary->at(y, x));
    }
  }
  return out;
}

SemanticLabelMap read_semantic_png(const std::string& path) {
  GrayImage g = read_png_gray(path);
  SemanticLabelMap out(g.width, g.height);
  out.labels.assign(g.pixels.begin(), g.pixels.end());
  return out;
}

void write_semantic_png(const std::string& path, const SemanticLabelMap& map) {
  GrayImage g(map.width, map.height);
  g.pixels.assign(map.labels.begin(), map.labels.end());
  write_png_gray(path, g);
}

void write_boundary_png(const std::string& path, const BoundaryMap& map) {
  GrayImage g(map.width, map.height);
  for (size_t i = 0; i < map.values.size(); ++i) g.pixels[i] = map.values[i] ? 255 : 0;
  write_png_gray(path, g);
}

Mask read_mask_png(const std::string& path) {
  GrayImage g = read_png_gray(path);
  Mask m(g.width, g.height);
  for (size_t i = 0; i < g.pixels.size(); ++i) m.values[i] = g.pixels[i] > 127 ? 1 : 0;
  return m;
}

}  // namespace lesionsynth::mapkit
