#include "gravtrack/preprocess.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <numbers>
#include <queue>
#include <vector>

#include "gravtrack/error.hpp"
#include "gravtrack/morphology.hpp"
#include "gravtrack/reference.hpp"

namespace gravtrack {

void validate(const KuwaharaParams& p) {
  if (p.radius < 1) throw ParameterError("kuwahara radius must be >= 1");
  if (p.sector_count < 2) throw ParameterError("kuwahara sector_count must be >= 2");
  if (!(p.sharpness_q > 0.0)) throw ParameterError("kuwahara sharpness_q must be > 0");
  if (p.tensor_smoothing_sigma < 0.0) {
    throw ParameterError("kuwahara tensor_smoothing_sigma must be >= 0");
  }
}

void validate(const ClaheParams& p) {
  if (p.tile_size < 8) throw ParameterError("clahe tile_size must be >= 8");
  if (!(p.clip_limit > 0.0 && p.clip_limit <= 1.0)) {
    throw ParameterError("clahe clip_limit must lie in (0, 1]");
  }
}

Image2D log_brighten(const Image2D& img, double gain) {
  if (!(gain > 0.0)) throw ParameterError("log gain must be > 0");
  const double scale = 1.0 / std::log1p(gain);
  Image2D out(img.width(), img.height());
  for (std::size_t i = 0; i < img.size(); ++i) {
    out[i] = std::clamp(std::log1p(gain * img[i]) * scale, 0.0, 1.0);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Anisotropic Kuwahara

namespace {

struct Tensor {
  Image2D xx, xy, yy;
};

Tensor structure_tensor(const Image2D& img, double sigma) {
  const int w = img.width();
  const int h = img.height();
  // Gradient kernel tuned for rotational symmetry.
  constexpr double corner = 0.182;
  constexpr double center = 1.0 - 2.0 * corner;
  auto at = [&](int x, int y) { return img(std::clamp(x, 0, w - 1), std::clamp(y, 0, h - 1)); };
  Tensor t{Image2D(w, h), Image2D(w, h), Image2D(w, h)};
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double gx = corner * (at(x + 1, y - 1) - at(x - 1, y - 1)) +
                        center * (at(x + 1, y) - at(x - 1, y)) +
                        corner * (at(x + 1, y + 1) - at(x - 1, y + 1));
      const double gy = corner * (at(x - 1, y + 1) - at(x - 1, y - 1)) +
                        center * (at(x, y + 1) - at(x, y - 1)) +
                        corner * (at(x + 1, y + 1) - at(x + 1, y - 1));
      t.xx(x, y) = gx * gx;
      t.xy(x, y) = gx * gy;
      t.yy(x, y) = gy * gy;
    }
  }
  t.xx = gaussian_blur(t.xx, sigma);
  t.xy = gaussian_blur(t.xy, sigma);
  t.yy = gaussian_blur(t.yy, sigma);
  return t;
}

class KuwaharaKernel {
 public:
  KuwaharaKernel(const Image2D& img, const KuwaharaParams& p)
      : img_(img), p_(p), tensor_(structure_tensor(img, p.tensor_smoothing_sigma)) {
    const int n = p.sector_count;
    cos_.resize(static_cast<std::size_t>(n));
    sin_.resize(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) {
      const double a = 2.0 * std::numbers::pi * k / n;
      cos_[static_cast<std::size_t>(k)] = std::cos(a);
      sin_[static_cast<std::size_t>(k)] = std::sin(a);
    }
    zeta_ = 2.0 / p.radius;
    const double gamma = 1.5 * std::numbers::pi / n;
    eta_ = (zeta_ + std::cos(gamma)) / (std::sin(gamma) * std::sin(gamma));
  }

  double operator()(int x, int y) const {
    const int w = img_.width();
    const int h = img_.height();
    const int n = p_.sector_count;

    const double exx = tensor_.xx(x, y);
    const double exy = tensor_.xy(x, y);
    const double eyy = tensor_.yy(x, y);
    const double mean_term = 0.5 * (exx + eyy);
    const double root_term = 0.5 * std::sqrt((exx - eyy) * (exx - eyy) + 4.0 * exy * exy);
    const double l1 = mean_term + root_term;
    const double l2 = mean_term - root_term;

    double tx = l1 - exx;
    double ty = -exy;
    const double tlen = std::hypot(tx, ty);
    if (tlen > 0.0) {
      tx /= tlen;
      ty /= tlen;
    } else {
      tx = 1.0;
      ty = 0.0;
    }
    const double anisotropy = (l1 + l2) > 0.0 ? (l1 - l2) / (l1 + l2) : 0.0;

    constexpr double eccentricity = 1.0;
    const double stretch = (eccentricity + anisotropy) / eccentricity;
    const double a = p_.radius * stretch;
    const double b = p_.radius / stretch;

    // Inverse map from the ellipse onto the unit disk.
    const double m00 = tx / a, m01 = ty / a;
    const double m10 = -ty / b, m11 = tx / b;
    const int bx = static_cast<int>(std::ceil(std::sqrt(a * a * tx * tx + b * b * ty * ty)));
    const int by = static_cast<int>(std::ceil(std::sqrt(a * a * ty * ty + b * b * tx * tx)));

    constexpr int kMaxSectors = 32;
    std::array<double, kMaxSectors> sum_w{}, sum_v{}, sum_vv{};
    std::vector<double> heap_w, heap_v, heap_vv;
    double* sw = sum_w.data();
    double* sv = sum_v.data();
    double* svv = sum_vv.data();
    if (n > kMaxSectors) {
      heap_w.assign(static_cast<std::size_t>(n), 0.0);
      heap_v.assign(static_cast<std::size_t>(n), 0.0);
      heap_vv.assign(static_cast<std::size_t>(n), 0.0);
      sw = heap_w.data();
      sv = heap_v.data();
      svv = heap_vv.data();
    }
    std::array<double, kMaxSectors> local{};
    std::vector<double> heap_local;
    double* weights = local.data();
    if (n > kMaxSectors) {
      heap_local.assign(static_cast<std::size_t>(n), 0.0);
      weights = heap_local.data();
    }

    for (int j = -by; j <= by; ++j) {
      for (int i = -bx; i <= bx; ++i) {
        const double u = m00 * i + m01 * j;
        const double v = m10 * i + m11 * j;
        const double r2 = u * u + v * v;
        if (r2 > 1.0) continue;
        const double value = img_(std::clamp(x + i, 0, w - 1), std::clamp(y + j, 0, h - 1));
        double total = 0.0;
        if (i == 0 && j == 0) {
          for (int k = 0; k < n; ++k) weights[k] = 1.0 / n;
          total = 1.0;
        } else {
          for (int k = 0; k < n; ++k) {
            const double c = cos_[static_cast<std::size_t>(k)];
            const double s = sin_[static_cast<std::size_t>(k)];
            const double ru = c * u + s * v;
            const double rv = -s * u + c * v;
            const double poly = std::max(0.0, rv + zeta_ - eta_ * ru * ru);
            weights[k] = poly * poly;
            total += weights[k];
          }
        }
        if (!(total > 0.0)) continue;
        const double radial = std::exp(-std::numbers::pi * r2) / total;
        for (int k = 0; k < n; ++k) {
          const double wk = weights[k] * radial;
          sw[k] += wk;
          sv[k] += wk * value;
          svv[k] += wk * value * value;
        }
      }
    }

    double num = 0.0;
    double den = 0.0;
    for (int k = 0; k < n; ++k) {
      if (!(sw[k] > 0.0)) continue;
      const double mean = sv[k] / sw[k];
      const double var = std::abs(svv[k] / sw[k] - mean * mean);
      const double weight = 1.0 / std::pow(std::max(0.02, std::sqrt(var)), p_.sharpness_q);
      num += weight * mean;
      den += weight;
    }
    return den > 0.0 ? num / den : img_(x, y);
  }

 private:
  const Image2D& img_;
  KuwaharaParams p_;
  Tensor tensor_;
  std::vector<double> cos_, sin_;
  double zeta_ = 0.0;
  double eta_ = 0.0;
};

Image2D run_kuwahara(const Image2D& img, const KuwaharaParams& p, bool parallel) {
  validate(p);
  Image2D out(img.width(), img.height());
  if (img.empty()) return out;
  const KuwaharaKernel kernel(img, p);
  const int h = img.height();
  const int w = img.width();
#pragma omp parallel for schedule(dynamic, 4) if (parallel)
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) out(x, y) = kernel(x, y);
  }
  return out;
}

}  // namespace

Image2D kuwahara_anisotropic(const Image2D& img, const KuwaharaParams& p) {
  return run_kuwahara(img, p, true);
}

Image2D reference::kuwahara_anisotropic(const Image2D& img, const KuwaharaParams& p) {
  return run_kuwahara(img, p, false);
}

// ---------------------------------------------------------------------------
// CLAHE

namespace {

constexpr int kBins = 256;

int bin_of(double v) {
  return std::clamp(static_cast<int>(v * kBins), 0, kBins - 1);
}

// Cumulative mapping of one tile's clipped histogram, values in [0, 1].
std::array<double, kBins> tile_mapping(const Image2D& img, int x0, int x1, int y0, int y1,
                                       double clip_limit) {
  std::array<double, kBins> hist{};
  for (int y = y0; y < y1; ++y) {
    for (int x = x0; x < x1; ++x) hist[static_cast<std::size_t>(bin_of(img(x, y)))] += 1.0;
  }
  const double mass = static_cast<double>(x1 - x0) * (y1 - y0);
  const double clip = std::max(1.0, clip_limit * mass);
  double excess = 0.0;
  for (auto& c : hist) {
    if (c > clip) {
      excess += c - clip;
      c = clip;
    }
  }
  const double share = excess / kBins;
  std::array<double, kBins> map{};
  double acc = 0.0;
  for (int b = 0; b < kBins; ++b) {
    acc += hist[static_cast<std::size_t>(b)] + share;
    map[static_cast<std::size_t>(b)] = std::clamp(acc / mass, 0.0, 1.0);
  }
  return map;
}

}  // namespace

Image2D clahe(const Image2D& img, const ClaheParams& p) {
  validate(p);
  const int w = img.width();
  const int h = img.height();
  Image2D out(w, h);
  if (img.empty()) return out;

  const int nx = std::max(1, w / p.tile_size);
  const int ny = std::max(1, h / p.tile_size);
  auto edge = [](int k, int tiles, int extent) {
    return static_cast<int>(static_cast<long long>(k) * extent / tiles);
  };

  std::vector<std::array<double, kBins>> maps(static_cast<std::size_t>(nx) * ny);
  std::vector<double> cx(static_cast<std::size_t>(nx)), cy(static_cast<std::size_t>(ny));
  for (int ty = 0; ty < ny; ++ty) {
    for (int tx = 0; tx < nx; ++tx) {
      const int x0 = edge(tx, nx, w), x1 = edge(tx + 1, nx, w);
      const int y0 = edge(ty, ny, h), y1 = edge(ty + 1, ny, h);
      maps[static_cast<std::size_t>(ty) * nx + tx] = tile_mapping(img, x0, x1, y0, y1, p.clip_limit);
      cx[static_cast<std::size_t>(tx)] = 0.5 * (x0 + x1 - 1);
      cy[static_cast<std::size_t>(ty)] = 0.5 * (y0 + y1 - 1);
    }
  }

  // Neighbouring tile centres and blend weight along one axis.
  auto locate = [](const std::vector<double>& centers, double pos, int& lo, int& hi, double& t) {
    const int n = static_cast<int>(centers.size());
    if (n == 1 || pos <= centers.front()) {
      lo = hi = 0;
      t = 0.0;
      return;
    }
    if (pos >= centers.back()) {
      lo = hi = n - 1;
      t = 0.0;
      return;
    }
    lo = 0;
    while (lo + 1 < n && centers[static_cast<std::size_t>(lo) + 1] <= pos) ++lo;
    hi = lo + 1;
    t = (pos - centers[static_cast<std::size_t>(lo)]) /
        (centers[static_cast<std::size_t>(hi)] - centers[static_cast<std::size_t>(lo)]);
  };

  for (int y = 0; y < h; ++y) {
    int ylo = 0, yhi = 0;
    double ty = 0.0;
    locate(cy, y, ylo, yhi, ty);
    for (int x = 0; x < w; ++x) {
      int xlo = 0, xhi = 0;
      double tx = 0.0;
      locate(cx, x, xlo, xhi, tx);
      const auto b = static_cast<std::size_t>(bin_of(img(x, y)));
      auto m = [&](int tyi, int txi) { return maps[static_cast<std::size_t>(tyi) * nx + txi][b]; };
      const double top = (1.0 - tx) * m(ylo, xlo) + tx * m(ylo, xhi);
      const double bottom = (1.0 - tx) * m(yhi, xlo) + tx * m(yhi, xhi);
      out(x, y) = std::clamp((1.0 - ty) * top + ty * bottom, 0.0, 1.0);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Hole filling

Image2D fill_dark_spots(const Image2D& img) {
  const int w = img.width();
  const int h = img.height();
  Image2D out = img;
  if (img.empty()) return out;

  // Priority flood from the border: each pixel rises to the lowest level at which
  // it connects to the border.
  using Entry = std::pair<double, std::size_t>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> queue;
  std::vector<std::uint8_t> done(img.size(), 0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (x == 0 || y == 0 || x == w - 1 || y == h - 1) {
        const std::size_t i = img.index(x, y);
        done[i] = 1;
        queue.emplace(img[i], i);
      }
    }
  }
  constexpr std::array<std::array<int, 2>, 4> kSteps{{{1, 0}, {-1, 0}, {0, 1}, {0, -1}}};
  while (!queue.empty()) {
    const auto [level, i] = queue.top();
    queue.pop();
    const int x = static_cast<int>(i % static_cast<std::size_t>(w));
    const int y = static_cast<int>(i / static_cast<std::size_t>(w));
    for (const auto& s : kSteps) {
      const int nx = x + s[0];
      const int ny = y + s[1];
      if (!img.contains(nx, ny)) continue;
      const std::size_t j = img.index(nx, ny);
      if (done[j]) continue;
      done[j] = 1;
      out[j] = std::max(img[j], level);
      queue.emplace(out[j], j);
    }
  }
  return out;
}

}  // namespace gravtrack
