#pragma once

// Brute-force references the tests compare the library against. Nothing here
// calls into the code under test except for container types.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <map>
#include <random>
#include <set>
#include <tuple>
#include <vector>

#include "gravtrack/image.hpp"

namespace oracle {

using gravtrack::Image2D;
using gravtrack::LabelMap;
using gravtrack::Mask;
using gravtrack::Vec2;

inline int reflect(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

/// Formula 1 summed pixel by pixel: every mass inside the square support pulls the
/// field point along the unit vector toward it with strength m / r^2.
inline std::pair<Image2D, Image2D> gravity_sum(const Image2D& img, int radius, double eps) {
  const int w = img.width(), h = img.height();
  Image2D fx(w, h, 0.0), fy(w, h, 0.0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double sx = 0.0, sy = 0.0;
      for (int dy = -radius; dy <= radius; ++dy) {
        for (int dx = -radius; dx <= radius; ++dx) {
          if (dx == 0 && dy == 0) continue;
          const double m = img(reflect(x + dx, w), reflect(y + dy, h));
          const double r = std::max(std::sqrt(double(dx * dx + dy * dy)), eps);
          sx += m * (dx / r) / (r * r);
          sy += m * (dy / r) / (r * r);
        }
      }
      fx(x, y) = sx;
      fy(x, y) = sy;
    }
  }
  return {fx, fy};
}

/// Sum of Gaussian blobs (centre, sigma, peak) on a zero background.
struct Blob {
  Vec2 c;
  double sigma;
  double peak;
};

inline Image2D blobs(int w, int h, const std::vector<Blob>& bs) {
  Image2D img(w, h, 0.0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (const Blob& b : bs) {
        const double d2 = (x - b.c.x) * (x - b.c.x) + (y - b.c.y) * (y - b.c.y);
        img(x, y) += b.peak * std::exp(-d2 / (2.0 * b.sigma * b.sigma));
      }
    }
  }
  return img;
}

inline Mask disk(int w, int h, Vec2 c, double r) {
  Mask m(w, h, 0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if ((x - c.x) * (x - c.x) + (y - c.y) * (y - c.y) <= r * r) m(x, y) = 1;
    }
  }
  return m;
}

/// Pixels 4-connected to `seed` whose value is at least `threshold`.
inline Mask flood_fill(const Image2D& img, int sx, int sy, double threshold) {
  Mask out(img.width(), img.height(), 0);
  std::deque<std::pair<int, int>> q{{sx, sy}};
  out(sx, sy) = 1;
  while (!q.empty()) {
    const auto [x, y] = q.front();
    q.pop_front();
    const int nx[4] = {x + 1, x - 1, x, x}, ny[4] = {y, y, y + 1, y - 1};
    for (int k = 0; k < 4; ++k) {
      if (!img.contains(nx[k], ny[k]) || out(nx[k], ny[k]) || img(nx[k], ny[k]) < threshold) continue;
      out(nx[k], ny[k]) = 1;
      q.push_back({nx[k], ny[k]});
    }
  }
  return out;
}

/// Hole filling by iterated geodesic erosion of a border marker over `img`
/// (4-neighbourhood) until nothing changes.
inline Image2D fill_holes(const Image2D& img) {
  const int w = img.width(), h = img.height();
  double top = 0.0;
  for (double v : img.pixels()) top = std::max(top, v);
  Image2D m(w, h, top);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (x == 0 || y == 0 || x == w - 1 || y == h - 1) m(x, y) = img(x, y);
    }
  }
  for (bool changed = true; changed;) {
    changed = false;
    for (int y = 1; y + 1 < h; ++y) {
      for (int x = 1; x + 1 < w; ++x) {
        const double lo = std::min({m(x, y), m(x + 1, y), m(x - 1, y), m(x, y + 1), m(x, y - 1)});
        const double v = std::max(img(x, y), lo);
        if (v < m(x, y)) {
          m(x, y) = v;
          changed = true;
        }
      }
    }
  }
  return m;
}

inline bool four_connected(const Mask& m) {
  int sx = -1, sy = -1;
  std::size_t total = 0;
  for (int y = 0; y < m.height(); ++y) {
    for (int x = 0; x < m.width(); ++x) {
      if (m(x, y)) {
        ++total;
        if (sx < 0) sx = x, sy = y;
      }
    }
  }
  if (total == 0) return true;
  Image2D as_img(m.width(), m.height());
  for (std::size_t i = 0; i < m.size(); ++i) as_img[i] = m[i];
  const Mask reached = flood_fill(as_img, sx, sy, 0.5);
  std::size_t n = 0;
  for (auto v : reached.pixels()) n += v;
  return n == total;
}

inline std::size_t area(const Mask& m) {
  std::size_t n = 0;
  for (auto v : m.pixels()) n += v != 0;
  return n;
}

inline double iou(const Mask& a, const Mask& b) {
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    inter += a[i] && b[i];
    uni += a[i] || b[i];
  }
  return uni == 0 ? 1.0 : double(inter) / double(uni);
}

inline Vec2 centroid(const Mask& m) {
  Vec2 s;
  double n = 0.0;
  for (int y = 0; y < m.height(); ++y) {
    for (int x = 0; x < m.width(); ++x) {
      if (m(x, y)) {
        s += Vec2{double(x), double(y)};
        n += 1.0;
      }
    }
  }
  return n > 0 ? s * (1.0 / n) : s;
}

/// Fraction of pixels outside a 1 px band around the reference boundaries on which
/// `a` agrees with `ref` after a greedy one-to-one label correspondence (largest
/// overlaps first). Returns (agreeing, counted).
inline std::pair<std::size_t, std::size_t> label_agreement(const LabelMap& a, const LabelMap& ref) {
  std::map<std::pair<int, int>, std::size_t> overlap;
  for (std::size_t i = 0; i < ref.size(); ++i) ++overlap[{ref[i], a[i]}];
  std::vector<std::tuple<std::size_t, int, int>> v;
  for (const auto& [k, c] : overlap) {
    if (k.first > 0 && k.second > 0) v.emplace_back(c, k.first, k.second);
  }
  std::sort(v.begin(), v.end(), [](const auto& p, const auto& q) {
    if (std::get<0>(p) != std::get<0>(q)) return std::get<0>(p) > std::get<0>(q);
    return std::make_pair(std::get<1>(p), std::get<2>(p)) < std::make_pair(std::get<1>(q), std::get<2>(q));
  });
  std::map<int, int> to_a;
  std::set<int> used;
  for (const auto& [c, r, l] : v) {
    if (to_a.count(r) || used.count(l)) continue;
    to_a[r] = l;
    used.insert(l);
  }
  std::size_t agree = 0, counted = 0;
  for (int y = 0; y < ref.height(); ++y) {
    for (int x = 0; x < ref.width(); ++x) {
      const int l = ref(x, y);
      bool band = false;
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          if (ref.contains(x + dx, y + dy) && ref(x + dx, y + dy) != l) band = true;
        }
      }
      if (band) continue;
      ++counted;
      const int want = l == 0 ? 0 : (to_a.count(l) ? to_a[l] : -1);
      if (a(x, y) == want) ++agree;
    }
  }
  return {agree, counted};
}

/// Verbatim hysteresis rule: discard when any mask is smaller than the lower bound
/// or all masks are smaller than the upper bound.
inline bool hysteresis_discards(const std::vector<std::size_t>& areas, double lower, double upper) {
  bool any_small = false, all_below_upper = true;
  for (std::size_t a : areas) {
    if (double(a) < lower) any_small = true;
    if (!(double(a) < upper)) all_below_upper = false;
  }
  return any_small || all_below_upper;
}

/// Least-squares slope of y on x.
inline double slope(const std::vector<double>& x, const std::vector<double>& y) {
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) mx += x[i], my += y[i];
  mx /= double(x.size());
  my /= double(y.size());
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  return sxy / sxx;
}

}  // namespace oracle
