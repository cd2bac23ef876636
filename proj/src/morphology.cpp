#include "gravtrack/morphology.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace gravtrack {

namespace {

constexpr double kInf = 1e20;

// 1-D squared distance transform of a sampled function (lower envelope of parabolas).
// Samples at kInf are not parabola sites.
void edt_1d(const double* f, double* d, int n, std::vector<int>& v, std::vector<double>& z) {
  v.assign(static_cast<std::size_t>(n), 0);
  z.assign(static_cast<std::size_t>(n) + 1, 0.0);
  int k = -1;
  for (int q = 0; q < n; ++q) {
    if (f[q] >= kInf) continue;
    double s = -kInf;
    while (k >= 0) {
      const int p = v[static_cast<std::size_t>(k)];
      s = ((f[q] + static_cast<double>(q) * q) - (f[p] + static_cast<double>(p) * p)) /
          (2.0 * q - 2.0 * p);
      if (s <= z[static_cast<std::size_t>(k)]) {
        --k;
        continue;
      }
      break;
    }
    ++k;
    v[static_cast<std::size_t>(k)] = q;
    z[static_cast<std::size_t>(k)] = k == 0 ? -kInf : s;
    z[static_cast<std::size_t>(k) + 1] = kInf;
  }
  if (k < 0) {
    std::fill(d, d + n, kInf);
    return;
  }
  int j = 0;
  for (int q = 0; q < n; ++q) {
    while (z[static_cast<std::size_t>(j) + 1] < q) ++j;
    const int p = v[static_cast<std::size_t>(j)];
    d[q] = static_cast<double>(q - p) * (q - p) + f[p];
  }
}

// Squared distance to the nearest pixel where `is_target` holds, with a one-pixel
// target frame around the raster when `border_is_target` is set.
Image2D squared_edt(const Mask& mask, bool target_value, bool border_is_target) {
  const int pad = border_is_target ? 1 : 0;
  const int w = mask.width() + 2 * pad;
  const int h = mask.height() + 2 * pad;
  std::vector<double> g(static_cast<std::size_t>(w) * h, kInf);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int sx = x - pad;
      const int sy = y - pad;
      bool target = false;
      if (!mask.contains(sx, sy)) {
        target = true;
      } else {
        target = (mask(sx, sy) != 0) == target_value;
      }
      if (target) g[static_cast<std::size_t>(y) * w + x] = 0.0;
    }
  }
  const int n = std::max(w, h);
  std::vector<double> f(static_cast<std::size_t>(n)), d(static_cast<std::size_t>(n));
  std::vector<int> v;
  std::vector<double> z;
  for (int x = 0; x < w; ++x) {
    for (int y = 0; y < h; ++y) f[static_cast<std::size_t>(y)] = g[static_cast<std::size_t>(y) * w + x];
    edt_1d(f.data(), d.data(), h, v, z);
    for (int y = 0; y < h; ++y) g[static_cast<std::size_t>(y) * w + x] = d[static_cast<std::size_t>(y)];
  }
  for (int y = 0; y < h; ++y) {
    double* row = g.data() + static_cast<std::size_t>(y) * w;
    std::copy(row, row + w, f.begin());
    edt_1d(f.data(), d.data(), w, v, z);
    std::copy(d.begin(), d.begin() + w, row);
  }
  Image2D out(mask.width(), mask.height());
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      out(x, y) = g[static_cast<std::size_t>(y + pad) * w + (x + pad)];
    }
  }
  return out;
}

}  // namespace

Image2D distance_transform(const Mask& mask) {
  Image2D d = squared_edt(mask, false, true);
  for (auto& v : d.vec()) v = std::sqrt(v);
  return d;
}

Image2D signed_distance(const Mask& mask) {
  const Image2D inside = distance_transform(mask);
  bool any_inside = false;
  for (auto v : mask.pixels()) any_inside |= v != 0;
  Image2D out(mask.width(), mask.height());
  if (!any_inside) {
    for (auto& v : out.vec()) v = -kInf;
    return out;
  }
  const Image2D outside = squared_edt(mask, true, false);
  for (std::size_t i = 0; i < mask.size(); ++i) {
    out[i] = mask[i] ? inside[i] - 0.5 : -(std::sqrt(outside[i]) - 0.5);
  }
  return out;
}

Mask dilate_disk(const Mask& mask, double radius) {
  Mask out(mask.width(), mask.height(), 0);
  bool any = false;
  for (auto v : mask.pixels()) any |= v != 0;
  if (!any) return out;
  const Image2D d2 = squared_edt(mask, true, false);
  const double r2 = radius * radius;
  for (std::size_t i = 0; i < mask.size(); ++i) out[i] = d2[i] <= r2 ? 1 : 0;
  return out;
}

LabelMap connected_components(const Mask& mask, Connectivity conn) {
  LabelMap labels(mask.width(), mask.height(), 0);
  std::vector<std::size_t> stack;
  std::int32_t next = 0;
  const int w = mask.width();
  const int h = mask.height();
  for (int y0 = 0; y0 < h; ++y0) {
    for (int x0 = 0; x0 < w; ++x0) {
      if (!mask(x0, y0) || labels(x0, y0)) continue;
      ++next;
      labels(x0, y0) = next;
      stack.assign(1, mask.index(x0, y0));
      while (!stack.empty()) {
        const std::size_t i = stack.back();
        stack.pop_back();
        const int x = static_cast<int>(i % static_cast<std::size_t>(w));
        const int y = static_cast<int>(i / static_cast<std::size_t>(w));
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            if (dx == 0 && dy == 0) continue;
            if (conn == Connectivity::four && dx != 0 && dy != 0) continue;
            const int nx = x + dx;
            const int ny = y + dy;
            if (!mask.contains(nx, ny) || !mask(nx, ny) || labels(nx, ny)) continue;
            labels(nx, ny) = next;
            stack.push_back(mask.index(nx, ny));
          }
        }
      }
    }
  }
  return labels;
}

Mask components_touching(const Mask& mask, const Mask& seed, Connectivity conn) {
  const LabelMap cc = connected_components(mask, conn);
  std::vector<std::uint8_t> keep(static_cast<std::size_t>(max_label(cc)) + 1, 0);
  for (std::size_t i = 0; i < cc.size(); ++i) {
    if (cc[i] && seed[i]) keep[static_cast<std::size_t>(cc[i])] = 1;
  }
  Mask out(mask.width(), mask.height(), 0);
  for (std::size_t i = 0; i < cc.size(); ++i) out[i] = keep[static_cast<std::size_t>(cc[i])] && cc[i];
  return out;
}

Image2D gaussian_blur(const Image2D& img, double sigma) {
  if (sigma <= 0.0 || img.empty()) return img;
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    const double v = std::exp(-0.5 * i * i / (sigma * sigma));
    k[static_cast<std::size_t>(i + radius)] = v;
    sum += v;
  }
  for (auto& v : k) v /= sum;

  const int w = img.width();
  const int h = img.height();
  Image2D tmp(w, h), out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) {
        acc += k[static_cast<std::size_t>(i + radius)] * img(std::clamp(x + i, 0, w - 1), y);
      }
      tmp(x, y) = acc;
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) {
        acc += k[static_cast<std::size_t>(i + radius)] * tmp(x, std::clamp(y + i, 0, h - 1));
      }
      out(x, y) = acc;
    }
  }
  return out;
}

std::size_t count(const Mask& mask) {
  std::size_t n = 0;
  for (auto v : mask.pixels()) n += v != 0;
  return n;
}

}  // namespace gravtrack
