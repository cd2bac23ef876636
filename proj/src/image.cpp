#include "gravtrack/image.hpp"

#include <algorithm>

namespace gravtrack {

Image2D normalize(const Image2D& img) {
  Image2D out(img.width(), img.height(), 0.0);
  if (img.empty()) return out;
  const auto [lo, hi] = std::minmax_element(img.vec().begin(), img.vec().end());
  const double range = *hi - *lo;
  if (!(range > 0.0)) return out;
  const double min_value = *lo;
  for (std::size_t i = 0; i < img.size(); ++i) {
    out[i] = std::clamp((img[i] - min_value) / range, 0.0, 1.0);
  }
  return out;
}

Vec2 clamp_to_domain(Vec2 p, int width, int height) {
  return {std::clamp(p.x, 0.0, static_cast<double>(width - 1)),
          std::clamp(p.y, 0.0, static_cast<double>(height - 1))};
}

namespace {

struct Stencil {
  int x0, y0, x1, y1;
  double tx, ty;
};

Stencil stencil_at(Vec2 p, int width, int height) {
  const Vec2 q = clamp_to_domain(p, width, height);
  Stencil s{};
  s.x0 = std::min(static_cast<int>(std::floor(q.x)), width - 1);
  s.y0 = std::min(static_cast<int>(std::floor(q.y)), height - 1);
  s.x1 = std::min(s.x0 + 1, width - 1);
  s.y1 = std::min(s.y0 + 1, height - 1);
  s.tx = q.x - s.x0;
  s.ty = q.y - s.y0;
  return s;
}

double blend(const Image2D& g, const Stencil& s) {
  const double top = g(s.x0, s.y0) + s.tx * (g(s.x1, s.y0) - g(s.x0, s.y0));
  const double bottom = g(s.x0, s.y1) + s.tx * (g(s.x1, s.y1) - g(s.x0, s.y1));
  return top + s.ty * (bottom - top);
}

}  // namespace

double bilinear_sample(const Image2D& img, Vec2 p) {
  return blend(img, stencil_at(p, img.width(), img.height()));
}

Vec2 bilinear_sample(const ForceField2D& field, Vec2 p) {
  const Stencil s = stencil_at(p, field.width(), field.height());
  return {blend(field.fx, s), blend(field.fy, s)};
}

Mask mask_of(const LabelMap& labels, std::int32_t label) {
  Mask m(labels.width(), labels.height(), 0);
  for (std::size_t i = 0; i < labels.size(); ++i) m[i] = labels[i] == label ? 1 : 0;
  return m;
}

std::int32_t max_label(const LabelMap& labels) {
  std::int32_t best = 0;
  for (auto v : labels.pixels()) best = std::max(best, v);
  return best;
}

}  // namespace gravtrack
