#include "gravtrack/segmentation.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <deque>
#include <numeric>
#include <queue>
#include <unordered_set>

#include "gravtrack/error.hpp"
#include "gravtrack/morphology.hpp"

namespace gravtrack {

namespace {

constexpr std::array<std::array<int, 2>, 4> kSteps4{{{1, 0}, {-1, 0}, {0, 1}, {0, -1}}};
constexpr std::array<std::array<int, 2>, 8> kSteps8{
    {{1, 0}, {-1, 0}, {0, 1}, {0, -1}, {1, 1}, {-1, 1}, {1, -1}, {-1, -1}}};

constexpr double kSigmaFloor = 0.02;
constexpr int kRimWidth = 2;

struct Window {
  int x0 = 0, y0 = 0, w = 0, h = 0;

  bool empty() const { return w <= 0 || h <= 0; }
};

struct BoxAccumulator {
  int x0 = 0, y0 = 0, x1 = -1, y1 = -1;

  void add(int x, int y) {
    if (x1 < x0) {
      x0 = x1 = x;
      y0 = y1 = y;
      return;
    }
    x0 = std::min(x0, x);
    x1 = std::max(x1, x);
    y0 = std::min(y0, y);
    y1 = std::max(y1, y);
  }

  Window grown(int margin, int width, int height) const {
    if (x1 < x0) return {};
    const int ax = std::max(0, x0 - margin);
    const int ay = std::max(0, y0 - margin);
    const int bx = std::min(width - 1, x1 + margin);
    const int by = std::min(height - 1, y1 + margin);
    return {ax, ay, bx - ax + 1, by - ay + 1};
  }
};

template <typename T>
Grid<T> crop(const Grid<T>& g, const Window& win) {
  Grid<T> out(win.w, win.h);
  for (int y = 0; y < win.h; ++y) {
    for (int x = 0; x < win.w; ++x) out(x, y) = g(win.x0 + x, win.y0 + y);
  }
  return out;
}

Mask crop_label(const LabelMap& labels, std::int32_t label, const Window& win) {
  Mask out(win.w, win.h);
  for (int y = 0; y < win.h; ++y) {
    for (int x = 0; x < win.w; ++x) out(x, y) = labels(win.x0 + x, win.y0 + y) == label;
  }
  return out;
}

Window mask_window(const Mask& mask, int margin) {
  BoxAccumulator box;
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      if (mask(x, y)) box.add(x, y);
    }
  }
  return box.grown(margin, mask.width(), mask.height());
}

Mask paste(const Mask& local, const Window& win, int width, int height) {
  Mask out(width, height);
  for (int y = 0; y < win.h; ++y) {
    for (int x = 0; x < win.w; ++x) out(win.x0 + x, win.y0 + y) = local(x, y);
  }
  return out;
}

// Stats of a window-local mask; `img` is the full image and the window must leave
// room for the rim where the image allows it.
CellStats measure_local(const Mask& local, const Window& win, const Image2D& img) {
  CellStats s;
  const Mask rim = dilate_disk(local, kRimWidth);
  double in_sum = 0.0, rim_sum = 0.0;
  std::size_t rim_n = 0;
  for (int y = 0; y < win.h; ++y) {
    for (int x = 0; x < win.w; ++x) {
      const double v = img(win.x0 + x, win.y0 + y);
      if (local(x, y)) {
        in_sum += v;
        ++s.area;
      } else if (rim(x, y)) {
        rim_sum += v;
        ++rim_n;
      }
    }
  }
  if (s.area > 0) s.mean_interior = in_sum / static_cast<double>(s.area);
  if (rim_n > 0) s.mean_rim = rim_sum / static_cast<double>(rim_n);
  return s;
}

struct Gaussian {
  double mean = 0.0;
  double var = 0.0;

  double log_density(double v) const {
    const double d = v - mean;
    return -0.5 * d * d / var - 0.5 * std::log(var);
  }
};

Gaussian fit(double sum, double sum_sq, std::size_t n) {
  Gaussian g;
  if (n == 0) {
    g.var = kSigmaFloor * kSigmaFloor;
    return g;
  }
  const double dn = static_cast<double>(n);
  g.mean = sum / dn;
  g.var = std::max(sum_sq / dn - g.mean * g.mean, kSigmaFloor * kSigmaFloor);
  return g;
}

// Mean curvature div(grad phi / |grad phi|) by central differences.
double curvature(const Image2D& phi, int x, int y) {
  const int w = phi.width();
  const int h = phi.height();
  auto at = [&](int px, int py) {
    return phi(std::clamp(px, 0, w - 1), std::clamp(py, 0, h - 1));
  };
  const double c = at(x, y);
  const double px = 0.5 * (at(x + 1, y) - at(x - 1, y));
  const double py = 0.5 * (at(x, y + 1) - at(x, y - 1));
  const double pxx = at(x + 1, y) - 2.0 * c + at(x - 1, y);
  const double pyy = at(x, y + 1) - 2.0 * c + at(x, y - 1);
  const double pxy =
      0.25 * (at(x + 1, y + 1) - at(x - 1, y + 1) - at(x + 1, y - 1) + at(x - 1, y - 1));
  const double g2 = px * px + py * py;
  if (g2 < 1e-12) return 0.0;
  return (pxx * py * py - 2.0 * px * py * pxy + pyy * px * px) / std::pow(g2, 1.5);
}

// Level-set evolution on a window. `local` and `allowed` are window-sized.
RefineResult refine_local(const Image2D& img, const Window& win, const Mask& local,
                          const Mask* allowed, const SegParams& p) {
  RefineResult out;
  Mask cur = local;
  if (allowed != nullptr) {
    for (std::size_t i = 0; i < cur.size(); ++i) cur[i] = cur[i] && (*allowed)[i];
  }
  auto permitted = [&](std::size_t i) { return allowed == nullptr || (*allowed)[i] != 0; };
  const Image2D values = crop(img, win);
  std::vector<std::uint8_t> flip(cur.size(), 0);

  for (int it = 0; it < p.cv_iterations; ++it) {
    double s_in = 0.0, q_in = 0.0, s_out = 0.0, q_out = 0.0;
    std::size_t n_in = 0, n_out = 0;
    for (std::size_t i = 0; i < cur.size(); ++i) {
      if (!permitted(i)) continue;
      const double v = values[i];
      if (cur[i]) {
        s_in += v;
        q_in += v * v;
        ++n_in;
      } else {
        s_out += v;
        q_out += v * v;
        ++n_out;
      }
    }
    if (n_in == 0) break;
    const Gaussian g_in = fit(s_in, q_in, n_in);
    const Gaussian g_out = fit(s_out, q_out, n_out);

    const Image2D phi = gaussian_blur(signed_distance(cur), 1.0);
    std::size_t flips = 0;
    std::fill(flip.begin(), flip.end(), 0);
    for (int y = 0; y < win.h; ++y) {
      for (int x = 0; x < win.w; ++x) {
        const std::size_t i = cur.index(x, y);
        if (!permitted(i)) continue;
        bool front = false;
        for (const auto& s : kSteps4) {
          const int nx = x + s[0];
          const int ny = y + s[1];
          if (cur.contains(nx, ny) && cur(nx, ny) != cur[i]) front = true;
        }
        if (!front) continue;
        const double force = p.cv_smoothness_mu * curvature(phi, x, y) +
                             g_in.log_density(values[i]) - g_out.log_density(values[i]);
        if ((cur[i] && force < 0.0) || (!cur[i] && force > 0.0)) {
          flip[i] = 1;
          ++flips;
        }
      }
    }
    if (flips == 0) break;
    for (std::size_t i = 0; i < cur.size(); ++i) {
      if (flip[i]) cur[i] = cur[i] ? 0 : 1;
    }
  }

  // Keep the component with the largest overlap with the input mask.
  const LabelMap cc = connected_components(cur, Connectivity::four);
  std::vector<std::size_t> overlap(static_cast<std::size_t>(max_label(cc)) + 1, 0);
  for (std::size_t i = 0; i < cc.size(); ++i) {
    if (cc[i] > 0 && local[i]) ++overlap[static_cast<std::size_t>(cc[i])];
  }
  std::int32_t best = 0;
  for (std::size_t k = 1; k < overlap.size(); ++k) {
    if (overlap[k] > overlap[static_cast<std::size_t>(best)]) best = static_cast<std::int32_t>(k);
  }
  if (best == 0) {
    out.mask = local;
    out.collapsed = true;
    return out;
  }
  out.mask = Mask(win.w, win.h);
  for (std::size_t i = 0; i < cc.size(); ++i) out.mask[i] = cc[i] == best;
  return out;
}

// Grayscale reconstruction by dilation of `marker` under `limit` (8-connected).
Image2D reconstruct(Image2D marker, const Image2D& limit) {
  using Entry = std::pair<double, std::size_t>;
  std::priority_queue<Entry> queue;
  for (std::size_t i = 0; i < marker.size(); ++i) queue.emplace(marker[i], i);
  const int w = marker.width();
  while (!queue.empty()) {
    const auto [v, i] = queue.top();
    queue.pop();
    if (v < marker[i]) continue;
    const int x = static_cast<int>(i % static_cast<std::size_t>(w));
    const int y = static_cast<int>(i / static_cast<std::size_t>(w));
    for (const auto& s : kSteps8) {
      const int nx = x + s[0];
      const int ny = y + s[1];
      if (!marker.contains(nx, ny)) continue;
      const std::size_t j = marker.index(nx, ny);
      const double nv = std::min(v, limit[j]);
      if (nv > marker[j]) {
        marker[j] = nv;
        queue.emplace(nv, j);
      }
    }
  }
  return marker;
}

std::size_t find_root(std::vector<std::size_t>& parent, std::size_t a) {
  while (parent[a] != a) {
    parent[a] = parent[parent[a]];
    a = parent[a];
  }
  return a;
}

std::vector<Mask> split_local(const Mask& local, const SegParams& p) {
  const Image2D dist = distance_transform(local);
  Image2D marker = dist;
  for (std::size_t i = 0; i < marker.size(); ++i) {
    marker[i] = local[i] ? std::max(0.0, dist[i] - p.h_maxima_h) : 0.0;
  }
  const Image2D hmax = reconstruct(std::move(marker), dist);

  // Regional maxima plateaus of the reconstructed surface.
  const int w = local.width();
  LabelMap plateau(local.width(), local.height());
  std::vector<std::vector<std::size_t>> seeds;
  std::vector<std::size_t> members;
  std::deque<std::size_t> queue;
  for (std::size_t start = 0; start < local.size(); ++start) {
    if (!local[start] || plateau[start] != 0) continue;
    const double level = hmax[start];
    const auto id = static_cast<std::int32_t>(seeds.size() + 1);
    members.clear();
    bool is_max = true;
    plateau[start] = id;
    queue.push_back(start);
    while (!queue.empty()) {
      const std::size_t i = queue.front();
      queue.pop_front();
      members.push_back(i);
      const int x = static_cast<int>(i % static_cast<std::size_t>(w));
      const int y = static_cast<int>(i / static_cast<std::size_t>(w));
      for (const auto& s : kSteps8) {
        const int nx = x + s[0];
        const int ny = y + s[1];
        if (!local.contains(nx, ny)) continue;
        const std::size_t j = local.index(nx, ny);
        if (!local[j]) continue;
        if (hmax[j] > level) is_max = false;
        if (hmax[j] == level && plateau[j] == 0) {
          plateau[j] = id;
          queue.push_back(j);
        }
      }
    }
    seeds.push_back(is_max ? members : std::vector<std::size_t>{});
  }

  std::vector<std::size_t> maxima;
  std::vector<Vec2> centers;
  for (std::size_t k = 0; k < seeds.size(); ++k) {
    if (seeds[k].empty()) continue;
    Vec2 c;
    for (std::size_t i : seeds[k]) {
      c += Vec2{static_cast<double>(i % static_cast<std::size_t>(w)),
                static_cast<double>(i / static_cast<std::size_t>(w))};
    }
    centers.push_back(c * (1.0 / static_cast<double>(seeds[k].size())));
    maxima.push_back(k);
  }
  std::vector<std::size_t> parent(maxima.size());
  std::iota(parent.begin(), parent.end(), 0);
  for (std::size_t a = 0; a < maxima.size(); ++a) {
    for (std::size_t b = a + 1; b < maxima.size(); ++b) {
      if (norm(centers[a] - centers[b]) < p.min_seed_separation) {
        parent[find_root(parent, b)] = find_root(parent, a);
      }
    }
  }
  std::vector<std::int32_t> group_of(maxima.size(), 0);
  std::int32_t groups = 0;
  for (std::size_t a = 0; a < maxima.size(); ++a) {
    const std::size_t r = find_root(parent, a);
    if (group_of[r] == 0) group_of[r] = ++groups;
    group_of[a] = group_of[r];
  }
  if (groups <= 1) return {local};

  // Marker flooding on the negated distance: deepest pixels first.
  LabelMap owner(local.width(), local.height());
  struct Entry {
    double depth;
    std::size_t index;
    std::int32_t label;
    bool operator<(const Entry& o) const {
      if (depth != o.depth) return depth < o.depth;
      if (index != o.index) return index > o.index;
      return label > o.label;
    }
  };
  std::priority_queue<Entry> heap;
  for (std::size_t a = 0; a < maxima.size(); ++a) {
    for (std::size_t i : seeds[maxima[a]]) {
      owner[i] = group_of[a];
      heap.push({dist[i], i, group_of[a]});
    }
  }
  while (!heap.empty()) {
    const Entry e = heap.top();
    heap.pop();
    const int x = static_cast<int>(e.index % static_cast<std::size_t>(w));
    const int y = static_cast<int>(e.index / static_cast<std::size_t>(w));
    for (const auto& s : kSteps4) {
      const int nx = x + s[0];
      const int ny = y + s[1];
      if (!local.contains(nx, ny)) continue;
      const std::size_t j = local.index(nx, ny);
      if (!local[j] || owner[j] != 0) continue;
      owner[j] = e.label;
      heap.push({dist[j], j, e.label});
    }
  }
  std::vector<Mask> pieces(static_cast<std::size_t>(groups), Mask(local.width(), local.height()));
  for (std::size_t i = 0; i < owner.size(); ++i) {
    if (owner[i] > 0) pieces[static_cast<std::size_t>(owner[i] - 1)][i] = 1;
  }
  return pieces;
}

// Pieces without a seed pixel are dropped.
std::vector<Mask> keep_seeded(std::vector<Mask> pieces, const Mask& seeds) {
  std::vector<Mask> out;
  for (Mask& piece : pieces) {
    bool seeded = false;
    for (std::size_t i = 0; i < seeds.size() && !seeded; ++i) seeded = piece[i] && seeds[i];
    if (seeded) out.push_back(std::move(piece));
  }
  return out;
}

}  // namespace

void validate(const SegParams& p) {
  if (!(p.contrast_delta > 0.0 && p.contrast_delta < 1.0)) {
    throw ParameterError("seg contrast_delta must lie in (0, 1)");
  }
  if (p.cv_iterations < 1) throw ParameterError("seg cv_iterations must be >= 1");
  if (!(p.cv_smoothness_mu >= 0.0)) throw ParameterError("seg cv_mu must be >= 0");
  if (!(p.h_maxima_h > 0.0)) throw ParameterError("seg h_maxima_h must be > 0");
  if (!(p.min_seed_separation >= 0.0)) {
    throw ParameterError("seg min_seed_separation must be >= 0");
  }
  if (p.cv_margin < 0) throw ParameterError("seg cv_margin must be >= 0");
  if (p.min_cell_area < 1) throw ParameterError("seg min_cell_area must be >= 1");
}

CellStats measure_cell(const Mask& mask, const Image2D& img) {
  if (!mask.same_shape(img)) throw DataError("mask and image sizes differ");
  const Window win = mask_window(mask, kRimWidth + 1);
  if (win.empty()) return {};
  return measure_local(crop(mask, win), win, img);
}

std::vector<CellStats> measure_cells(const LabelMap& labels, const Image2D& img) {
  if (!labels.same_shape(img)) throw DataError("label map and image sizes differ");
  const auto k = static_cast<std::size_t>(max_label(labels));
  std::vector<BoxAccumulator> boxes(k);
  for (int y = 0; y < labels.height(); ++y) {
    for (int x = 0; x < labels.width(); ++x) {
      const std::int32_t l = labels(x, y);
      if (l > 0) boxes[static_cast<std::size_t>(l - 1)].add(x, y);
    }
  }
  std::vector<CellStats> stats(k);
#pragma omp parallel for schedule(dynamic)
  for (std::size_t l = 0; l < k; ++l) {
    const Window win = boxes[l].grown(kRimWidth + 1, labels.width(), labels.height());
    if (win.empty()) continue;
    stats[l] = measure_local(crop_label(labels, static_cast<std::int32_t>(l + 1), win), win, img);
  }
  return stats;
}

CellMaskSet region_grow(const Image2D& enhanced, const std::vector<Vec2>& seeds,
                        const SegParams& p) {
  validate(p);
  CellMaskSet out;
  out.labels = LabelMap(enhanced.width(), enhanced.height());
  out.stats.assign(seeds.size(), {});
  if (seeds.empty() || enhanced.empty()) return out;

  struct Entry {
    double value;
    std::size_t index;
    std::int32_t seed;
    bool operator<(const Entry& o) const {
      if (value != o.value) return value < o.value;
      if (index != o.index) return index > o.index;
      return seed > o.seed;
    }
  };
  std::priority_queue<Entry> heap;
  std::vector<std::unordered_set<std::size_t>> visited(seeds.size());
  std::vector<double> sum(seeds.size(), 0.0);
  std::vector<std::size_t> n(seeds.size(), 0);
  const int w = enhanced.width();
  for (std::size_t s = 0; s < seeds.size(); ++s) {
    const Vec2 c = clamp_to_domain(seeds[s], enhanced.width(), enhanced.height());
    const std::size_t i =
        enhanced.index(static_cast<int>(std::lround(c.x)), static_cast<int>(std::lround(c.y)));
    visited[s].insert(i);
    heap.push({enhanced[i], i, static_cast<std::int32_t>(s)});
  }
  while (!heap.empty()) {
    const Entry e = heap.top();
    heap.pop();
    if (out.labels[e.index] != 0) continue;
    const auto s = static_cast<std::size_t>(e.seed);
    if (n[s] > 0 && e.value < sum[s] / static_cast<double>(n[s]) - p.contrast_delta) continue;
    out.labels[e.index] = e.seed + 1;
    sum[s] += e.value;
    ++n[s];
    const int x = static_cast<int>(e.index % static_cast<std::size_t>(w));
    const int y = static_cast<int>(e.index / static_cast<std::size_t>(w));
    for (const auto& st : kSteps4) {
      const int nx = x + st[0];
      const int ny = y + st[1];
      if (!enhanced.contains(nx, ny)) continue;
      const std::size_t j = enhanced.index(nx, ny);
      if (out.labels[j] != 0 || !visited[s].insert(j).second) continue;
      heap.push({enhanced[j], j, e.seed});
    }
  }
  out.stats = measure_cells(out.labels, enhanced);
  out.stats.resize(seeds.size());
  return out;
}

RefineResult chan_vese_refine(const Image2D& img, const Mask& mask, const SegParams& p,
                              const Mask* allowed) {
  validate(p);
  if (!mask.same_shape(img)) throw DataError("mask and image sizes differ");
  if (allowed != nullptr && !allowed->same_shape(img)) {
    throw DataError("allowed region and image sizes differ");
  }
  const Window win = mask_window(mask, p.cv_margin);
  if (win.empty()) return {mask, true};
  Mask local_allowed;
  if (allowed != nullptr) local_allowed = crop(*allowed, win);
  RefineResult local = refine_local(img, win, crop(mask, win), allowed ? &local_allowed : nullptr, p);
  if (local.collapsed) return {mask, true};
  return {paste(local.mask, win, img.width(), img.height()), false};
}

std::vector<Mask> split_mask(const Mask& mask, const SegParams& p) {
  validate(p);
  const Window win = mask_window(mask, 1);
  if (win.empty()) return {mask};
  const std::vector<Mask> pieces = split_local(crop(mask, win), p);
  if (pieces.size() == 1) return {mask};
  std::vector<Mask> out;
  out.reserve(pieces.size());
  for (const Mask& piece : pieces) out.push_back(paste(piece, win, mask.width(), mask.height()));
  return out;
}

Image2D enhance_for_segmentation(const Image2D& brightened, const ClaheParams& clahe_params) {
  return fill_dark_spots(clahe(brightened, clahe_params));
}

CellMaskSet segment_enhanced(const Image2D& enhanced, const std::vector<Vec2>& minima,
                             const SegParams& p) {
  validate(p);
  const int width = enhanced.width();
  const int height = enhanced.height();
  CellMaskSet grown = region_grow(enhanced, minima, p);
  const auto k = static_cast<std::size_t>(minima.size());

  // Geodesic Voronoi zones of the grown masks bound each refinement.
  LabelMap zones = grown.labels;
  std::deque<std::size_t> queue;
  for (std::size_t i = 0; i < zones.size(); ++i) {
    if (zones[i] != 0) queue.push_back(i);
  }
  while (!queue.empty()) {
    const std::size_t i = queue.front();
    queue.pop_front();
    const int x = static_cast<int>(i % static_cast<std::size_t>(width));
    const int y = static_cast<int>(i / static_cast<std::size_t>(width));
    for (const auto& s : kSteps4) {
      const int nx = x + s[0];
      const int ny = y + s[1];
      if (!zones.contains(nx, ny)) continue;
      const std::size_t j = zones.index(nx, ny);
      if (zones[j] != 0) continue;
      zones[j] = zones[i];
      queue.push_back(j);
    }
  }

  std::vector<BoxAccumulator> boxes(k);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const std::int32_t l = grown.labels(x, y);
      if (l > 0) boxes[static_cast<std::size_t>(l - 1)].add(x, y);
    }
  }

  Mask seed_pixels(width, height);
  for (const Vec2& m : minima) {
    const Vec2 c = clamp_to_domain(m, width, height);
    seed_pixels(static_cast<int>(std::lround(c.x)), static_cast<int>(std::lround(c.y))) = 1;
  }

  struct Pieces {
    Window win;
    std::vector<Mask> masks;
  };
  std::vector<Pieces> results(k);
#pragma omp parallel for schedule(dynamic)
  for (std::size_t l = 0; l < k; ++l) {
    const Window win = boxes[l].grown(p.cv_margin, width, height);
    if (win.empty()) continue;
    const auto label = static_cast<std::int32_t>(l + 1);
    const Mask local = crop_label(grown.labels, label, win);
    const Mask allowed = crop_label(zones, label, win);
    const RefineResult refined = refine_local(enhanced, win, local, &allowed, p);
    results[l] = {win, keep_seeded(split_local(refined.mask, p), crop(seed_pixels, win))};
  }

  CellMaskSet out;
  out.labels = LabelMap(width, height);
  std::int32_t next = 0;
  for (const Pieces& r : results) {
    for (const Mask& piece : r.masks) {
      if (count(piece) < static_cast<std::size_t>(p.min_cell_area)) continue;
      ++next;
      for (int y = 0; y < r.win.h; ++y) {
        for (int x = 0; x < r.win.w; ++x) {
          if (piece(x, y)) out.labels(r.win.x0 + x, r.win.y0 + y) = next;
        }
      }
    }
  }
  out.stats = measure_cells(out.labels, enhanced);
  return out;
}

CellMaskSet segment_frame(const Image2D& brightened, const std::vector<Vec2>& minima,
                          const SegParams& p, const ClaheParams& clahe_params) {
  return segment_enhanced(enhance_for_segmentation(brightened, clahe_params), minima, p);
}

}  // namespace gravtrack
