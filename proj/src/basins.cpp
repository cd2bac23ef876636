#include "gravtrack/basins.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>

#include "gravtrack/error.hpp"
#include "gravtrack/reference.hpp"

namespace gravtrack {

const char* to_string(CriticalKind kind) {
  switch (kind) {
    case CriticalKind::minimum: return "minimum";
    case CriticalKind::saddle: return "saddle";
    case CriticalKind::maximum: return "maximum";
    case CriticalKind::spiral_sink: return "spiral-sink";
    case CriticalKind::spiral_source: return "spiral-source";
    case CriticalKind::degenerate: return "degenerate";
  }
  return "unknown";
}

namespace {

constexpr double kDegenerateDet = 1e-9;

Vec2 eigenvector_for(const Jacobian2& j, double lambda) {
  const Vec2 r1{j.xx - lambda, j.xy};
  const Vec2 r2{j.yx, j.yy - lambda};
  const Vec2 r = norm(r1) >= norm(r2) ? r1 : r2;
  const double n = norm(r);
  if (n < 1e-300) return {1.0, 0.0};
  return {-r.y / n, r.x / n};
}

void fill_spectrum(CriticalPoint& cp) {
  const Jacobian2& j = cp.jacobian;
  const double half_tr = 0.5 * j.trace();
  const double disc = half_tr * half_tr - j.det();
  if (disc >= 0.0) {
    const double root = std::sqrt(disc);
    const double l1 = half_tr - root;  // smaller (most negative) first
    const double l2 = half_tr + root;
    cp.eigenvalues = {std::complex<double>(l1, 0.0), std::complex<double>(l2, 0.0)};
    cp.eigenvectors = {eigenvector_for(j, l1), eigenvector_for(j, l2)};
    if (root == 0.0) cp.eigenvectors[1] = {-cp.eigenvectors[0].y, cp.eigenvectors[0].x};
  } else {
    const double im = std::sqrt(-disc);
    cp.eigenvalues = {std::complex<double>(half_tr, -im), std::complex<double>(half_tr, im)};
    cp.eigenvectors = {Vec2{1.0, 0.0}, Vec2{0.0, 1.0}};
  }
}

struct BilinearCell {
  // f(u, v) = c0 + c1 u + c2 v + c3 u v on the unit square.
  double a0, a1, a2, a3;
  double b0, b1, b2, b3;

  Vec2 eval(double u, double v) const {
    return {a0 + a1 * u + a2 * v + a3 * u * v, b0 + b1 * u + b2 * v + b3 * u * v};
  }
  Jacobian2 jacobian(double u, double v) const {
    return {a1 + a3 * v, a2 + a3 * u, b1 + b3 * v, b2 + b3 * u};
  }
};

bool straddles_zero(double c00, double c10, double c01, double c11) {
  const double lo = std::min({c00, c10, c01, c11});
  const double hi = std::max({c00, c10, c01, c11});
  if (lo == 0.0 && hi == 0.0) return false;
  return lo <= 0.0 && hi >= 0.0;
}

// Newton iteration on the bilinear system. Returns false if it fails to converge.
bool newton_polish(const BilinearCell& cell, double& u, double& v, int max_iter, double scale) {
  for (int it = 0; it < max_iter; ++it) {
    const Vec2 f = cell.eval(u, v);
    const Jacobian2 j = cell.jacobian(u, v);
    const double det = j.det();
    if (std::abs(det) < 1e-300) return norm(f) <= 1e-12 * scale;
    const double du = (j.yy * f.x - j.xy * f.y) / det;
    const double dv = (-j.yx * f.x + j.xx * f.y) / det;
    u -= du;
    v -= dv;
    if (!std::isfinite(u) || !std::isfinite(v)) return false;
    if (std::hypot(du, dv) < 1e-10) return true;
  }
  return norm(cell.eval(u, v)) <= 1e-9 * scale;
}

// Roots of the bilinear system inside the (slightly enlarged) unit square.
void cell_roots(const BilinearCell& c, double scale, std::vector<Vec2>& out,
                std::size_t& nonconvergent) {
  constexpr double kSlack = 1e-9;
  const double qa = c.b2 * c.a3 - c.b3 * c.a2;
  const double qb = c.b0 * c.a3 - c.b1 * c.a2 + c.b2 * c.a1 - c.b3 * c.a0;
  const double qc = c.b0 * c.a1 - c.b1 * c.a0;
  const double mag = std::max({std::abs(qa), std::abs(qb), std::abs(qc)});
  std::vector<double> vs;
  if (mag == 0.0) return;
  if (std::abs(qa) <= 1e-14 * mag) {
    if (std::abs(qb) > 1e-14 * mag) vs.push_back(-qc / qb);
  } else {
    const double disc = qb * qb - 4.0 * qa * qc;
    if (disc >= 0.0) {
      const double sq = std::sqrt(disc);
      const double q = -0.5 * (qb + std::copysign(sq, qb));
      vs.push_back(q / qa);
      if (q != 0.0) vs.push_back(qc / q);
    }
  }
  for (double v : vs) {
    if (!(v >= -kSlack && v <= 1.0 + kSlack)) continue;
    const double den_a = c.a1 + c.a3 * v;
    const double den_b = c.b1 + c.b3 * v;
    double u = 0.0;
    if (std::abs(den_a) >= std::abs(den_b)) {
      if (std::abs(den_a) < 1e-300) continue;
      u = -(c.a0 + c.a2 * v) / den_a;
    } else {
      u = -(c.b0 + c.b2 * v) / den_b;
    }
    if (!(u >= -kSlack && u <= 1.0 + kSlack)) continue;
    if (!newton_polish(c, u, v, 50, scale)) {
      ++nonconvergent;
      continue;
    }
    if (u < -1e-6 || u > 1.0 + 1e-6 || v < -1e-6 || v > 1.0 + 1e-6) continue;
    out.push_back({std::clamp(u, 0.0, 1.0), std::clamp(v, 0.0, 1.0)});
  }
}

}  // namespace

CriticalKind classify(const Jacobian2& j) {
  const double det = j.det();
  const double tr = j.trace();
  if (!std::isfinite(det) || std::abs(det) < kDegenerateDet) return CriticalKind::degenerate;
  const double disc = tr * tr - 4.0 * det;
  if (disc >= 0.0) {
    if (det < 0.0) return CriticalKind::saddle;
    if (tr < 0.0) return CriticalKind::minimum;
    if (tr > 0.0) return CriticalKind::maximum;
    return CriticalKind::degenerate;
  }
  const double re = 0.5 * tr;
  if (std::abs(re) <= 1e-12 * std::sqrt(std::abs(det))) return CriticalKind::degenerate;
  return re < 0.0 ? CriticalKind::spiral_sink : CriticalKind::spiral_source;
}

std::vector<CriticalPoint> find_critical_points(const ForceField2D& f, double stagnation_tol,
                                                CriticalPointStats* stats) {
  const int w = f.width();
  const int h = f.height();
  std::vector<CriticalPoint> result;
  if (w < 2 || h < 2) return result;

  double scale = 0.0;
  for (std::size_t i = 0; i < f.fx.size(); ++i) {
    scale = std::max({scale, std::abs(f.fx[i]), std::abs(f.fy[i])});
  }
  if (scale == 0.0) return result;
  // Round-off from cancelling contributions must not masquerade as sign changes.
  const double zero_tol = 1e-12 * scale;
  auto snap = [zero_tol](double v) { return std::abs(v) < zero_tol ? 0.0 : v; };

  std::vector<std::vector<CriticalPoint>> rows(static_cast<std::size_t>(h - 1));
  std::vector<std::size_t> row_cells(static_cast<std::size_t>(h - 1), 0);
  std::vector<std::size_t> row_failures(static_cast<std::size_t>(h - 1), 0);

#pragma omp parallel for schedule(dynamic, 8)
  for (int y = 0; y < h - 1; ++y) {
    std::vector<Vec2> roots;
    auto& row = rows[static_cast<std::size_t>(y)];
    for (int x = 0; x < w - 1; ++x) {
      const double x00 = snap(f.fx(x, y)), x10 = snap(f.fx(x + 1, y));
      const double x01 = snap(f.fx(x, y + 1)), x11 = snap(f.fx(x + 1, y + 1));
      if (!straddles_zero(x00, x10, x01, x11)) continue;
      const double y00 = snap(f.fy(x, y)), y10 = snap(f.fy(x + 1, y));
      const double y01 = snap(f.fy(x, y + 1)), y11 = snap(f.fy(x + 1, y + 1));
      if (!straddles_zero(y00, y10, y01, y11)) continue;
      const double corner_max = std::max({std::hypot(x00, y00), std::hypot(x10, y10),
                                          std::hypot(x01, y01), std::hypot(x11, y11)});
      if (corner_max < stagnation_tol) continue;
      ++row_cells[static_cast<std::size_t>(y)];
      const BilinearCell cell{x00, x10 - x00, x01 - x00, x00 - x10 - x01 + x11,
                              y00, y10 - y00, y01 - y00, y00 - y10 - y01 + y11};
      roots.clear();
      cell_roots(cell, corner_max, roots, row_failures[static_cast<std::size_t>(y)]);
      for (const Vec2& r : roots) {
        CriticalPoint cp;
        cp.pos = {x + r.x, y + r.y};
        cp.jacobian = cell.jacobian(r.x, r.y);
        cp.kind = classify(cp.jacobian);
        fill_spectrum(cp);
        row.push_back(cp);
      }
    }
  }

  CriticalPointStats local;
  // Deduplicate in scan order using a coarse bucket grid.
  std::vector<std::vector<std::size_t>> buckets(static_cast<std::size_t>(w) * h);
  for (int y = 0; y < h - 1; ++y) {
    local.candidate_cells += row_cells[static_cast<std::size_t>(y)];
    local.discarded_nonconvergent += row_failures[static_cast<std::size_t>(y)];
    for (const CriticalPoint& cp : rows[static_cast<std::size_t>(y)]) {
      const int bx = std::clamp(static_cast<int>(std::floor(cp.pos.x)), 0, w - 1);
      const int by = std::clamp(static_cast<int>(std::floor(cp.pos.y)), 0, h - 1);
      bool duplicate = false;
      for (int dy = -1; dy <= 1 && !duplicate; ++dy) {
        for (int dx = -1; dx <= 1 && !duplicate; ++dx) {
          const int nx = bx + dx;
          const int ny = by + dy;
          if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
          for (std::size_t idx : buckets[static_cast<std::size_t>(ny) * w + nx]) {
            if (norm(result[idx].pos - cp.pos) < 0.5) {
              duplicate = true;
              break;
            }
          }
        }
      }
      if (duplicate) {
        ++local.merged_duplicates;
        continue;
      }
      buckets[static_cast<std::size_t>(by) * w + bx].push_back(result.size());
      result.push_back(cp);
    }
  }
  if (stats) *stats = local;
  return result;
}

// ---------------------------------------------------------------------------

MinimaIndex::MinimaIndex(std::span<const Vec2> minima, int width, int height)
    : minima_(minima), width_(std::max(1, (width + 3) / 4)), height_(std::max(1, (height + 3) / 4)),
      buckets_(static_cast<std::size_t>(width_) * height_) {
  for (std::size_t i = 0; i < minima.size(); ++i) {
    const int bx = std::clamp(static_cast<int>(std::floor(minima[i].x / 4.0)), 0, width_ - 1);
    const int by = std::clamp(static_cast<int>(std::floor(minima[i].y / 4.0)), 0, height_ - 1);
    buckets_[static_cast<std::size_t>(by) * width_ + bx].push_back(static_cast<std::int32_t>(i + 1));
  }
}

std::int32_t MinimaIndex::nearest(Vec2 p, double radius) const {
  const int reach = static_cast<int>(std::ceil(radius / 4.0));
  const int bx = std::clamp(static_cast<int>(std::floor(p.x / 4.0)), 0, width_ - 1);
  const int by = std::clamp(static_cast<int>(std::floor(p.y / 4.0)), 0, height_ - 1);
  std::int32_t best = 0;
  double best_d = radius;
  for (int y = std::max(0, by - reach); y <= std::min(height_ - 1, by + reach); ++y) {
    for (int x = std::max(0, bx - reach); x <= std::min(width_ - 1, bx + reach); ++x) {
      for (std::int32_t label : buckets_[static_cast<std::size_t>(y) * width_ + x]) {
        const double d = norm(minima_[static_cast<std::size_t>(label - 1)] - p);
        if (d < best_d || (d == best_d && best != 0 && label < best)) {
          best_d = d;
          best = label;
        }
      }
    }
  }
  return best;
}

namespace {

bool outside_domain(Vec2 p, int w, int h) {
  return p.x < 0.0 || p.y < 0.0 || p.x > w - 1 || p.y > h - 1;
}

constexpr int kStallWindow = 25;
constexpr double kStallDistance = 0.02;

}  // namespace

namespace {

std::vector<Vec2> source_positions(std::span<const CriticalPoint> cps) {
  std::vector<Vec2> out;
  for (const auto& m : cps) {
    if (m.kind == CriticalKind::maximum || m.kind == CriticalKind::spiral_source) out.push_back(m.pos);
  }
  return out;
}

std::array<Polyline, 2> trace_indexed(const CriticalPoint& saddle, const ForceField2D& field,
                                      const IntegratorConfig& cfg, std::span<const Vec2> maxima_pos,
                                      const MinimaIndex& maxima_index) {
  const int w = field.width();
  const int h = field.height();
  constexpr double kOffset = 0.5;
  // The stable direction of descent is the unstable direction of ascent.
  const Vec2 dir = saddle.eigenvectors[0];

  std::array<Polyline, 2> lines;
  for (int side = 0; side < 2; ++side) {
    Polyline& line = lines[static_cast<std::size_t>(side)];
    const double sgn = side == 0 ? 1.0 : -1.0;
    line.points.push_back(saddle.pos);
    Vec2 state = saddle.pos + (sgn * kOffset) * dir;
    const bool started_outside = outside_domain(state, w, h);
    state = clamp_to_domain(state, w, h);
    line.points.push_back(state);
    if (started_outside) continue;

    double step = cfg.h_init;
    int attempts = 0;
    bool done = false;
    std::deque<Vec2> recent;
    while (!done) {
      if (attempts >= cfg.max_steps) {
        line.truncated = true;
        break;
      }
      ++attempts;
      const StepResult s = integrate_step(state, field, step, Direction::ascent);
      const StepDecision d = adapt_step(s.error, step, cfg);
      if (d.accept) {
        const bool hit_border = outside_domain(s.state, w, h);
        state = clamp_to_domain(s.state, w, h);
        line.points.push_back(state);
        if (hit_border) break;
        if (const std::int32_t m = maxima_index.nearest(state, 0.5); m != 0) {
          line.points.push_back(maxima_pos[static_cast<std::size_t>(m - 1)]);
          break;
        }
        if (norm(bilinear_sample(field, state)) < cfg.stagnation_tol) break;
        recent.push_back(state);
        if (recent.size() > kStallWindow) {
          if (norm(recent.back() - recent.front()) < kStallDistance) done = true;
          recent.pop_front();
        }
      }
      step = d.h_next;
    }
  }
  return lines;
}

}  // namespace

std::array<Polyline, 2> trace_separatrix(const CriticalPoint& saddle, const ForceField2D& field,
                                         const IntegratorConfig& cfg,
                                         std::span<const CriticalPoint> maxima) {
  if (saddle.kind != CriticalKind::saddle) {
    throw ParameterError("trace_separatrix requires a saddle point");
  }
  const std::vector<Vec2> pos = source_positions(maxima);
  const MinimaIndex index(pos, field.width(), field.height());
  return trace_indexed(saddle, field, cfg, pos, index);
}

namespace {

// Descent that also stops on entering a pixel `settled` already labels.
template <typename Settled>
DescentResult descend_until(const ForceField2D& field, Vec2 start, const IntegratorConfig& cfg,
                            const MinimaIndex& minima, Settled&& settled) {
  constexpr double kCapture = 0.5;
  constexpr double kLooseCapture = 1.0;
  const int w = field.width();
  const int h = field.height();
  DescentResult r;
  Vec2 state = clamp_to_domain(start, w, h);
  r.end = state;
  if ((r.label = minima.nearest(state, kCapture)) != 0) return r;

  double step = cfg.h_init;
  std::deque<Vec2> recent;
  while (r.steps < cfg.max_steps) {
    ++r.steps;
    const StepResult s = integrate_step(state, field, step, Direction::descent);
    const StepDecision d = adapt_step(s.error, step, cfg);
    step = d.h_next;
    if (!d.accept) continue;
    state = clamp_to_domain(s.state, w, h);
    r.end = state;
    if ((r.label = minima.nearest(state, kCapture)) != 0) return r;
    if ((r.label = settled(state)) != 0) return r;
    if (norm(bilinear_sample(field, state)) < cfg.stagnation_tol) break;
    recent.push_back(state);
    if (recent.size() > kStallWindow) {
      if (norm(recent.back() - recent.front()) < kStallDistance) break;
      recent.pop_front();
    }
  }
  r.label = minima.nearest(state, kLooseCapture);
  return r;
}

}  // namespace

DescentResult descend(const ForceField2D& field, Vec2 start, const IntegratorConfig& cfg,
                      const MinimaIndex& minima) {
  return descend_until(field, start, cfg, minima, [](Vec2) { return std::int32_t{0}; });
}

namespace {

// 8-connected Bresenham segment.
template <typename Fn>
void raster_segment(int x0, int y0, int x1, int y1, Fn&& plot) {
  const int dx = std::abs(x1 - x0);
  const int dy = -std::abs(y1 - y0);
  const int sx = x0 < x1 ? 1 : -1;
  const int sy = y0 < y1 ? 1 : -1;
  int err = dx + dy;
  for (;;) {
    plot(x0, y0);
    if (x0 == x1 && y0 == y1) break;
    const int e2 = 2 * err;
    if (e2 >= dy) {
      err += dy;
      x0 += sx;
    }
    if (e2 <= dx) {
      err += dx;
      y0 += sy;
    }
  }
}

int round_px(double v) { return static_cast<int>(std::lround(v)); }

}  // namespace

BasinMap extract_basins(const ForceField2D& f, std::span<const CriticalPoint> cps,
                        const IntegratorConfig& cfg) {
  validate(cfg);
  const int w = f.width();
  const int h = f.height();
  BasinMap out;
  out.labels = LabelMap(w, h, 0);
  std::vector<CriticalPoint> saddles, maxima;
  for (const auto& cp : cps) {
    if (cp.attracts()) out.minima.push_back(cp.pos);
    if (cp.kind == CriticalKind::saddle) saddles.push_back(cp);
    if (cp.kind == CriticalKind::maximum || cp.kind == CriticalKind::spiral_source) {
      maxima.push_back(cp);
    }
  }
  if (out.minima.empty() || w == 0 || h == 0) return out;

  // Separatrix walls.
  std::vector<std::array<Polyline, 2>> traces(saddles.size());
  const std::vector<Vec2> maxima_pos = source_positions(maxima);
  const MinimaIndex maxima_index(maxima_pos, w, h);
  const int n_saddles = static_cast<int>(saddles.size());
#pragma omp parallel for schedule(dynamic, 4)
  for (int i = 0; i < n_saddles; ++i) {
    traces[static_cast<std::size_t>(i)] =
        trace_indexed(saddles[static_cast<std::size_t>(i)], f, cfg, maxima_pos, maxima_index);
  }
  Mask wall(w, h, 0);
  for (const auto& pair : traces) {
    for (const auto& line : pair) {
      for (std::size_t i = 1; i < line.points.size(); ++i) {
        const Vec2 a = line.points[i - 1];
        const Vec2 b = line.points[i];
        raster_segment(round_px(a.x), round_px(a.y), round_px(b.x), round_px(b.y),
                       [&](int x, int y) {
                         if (wall.contains(x, y)) wall(x, y) = 1;
                       });
      }
    }
  }

  // Flood from every minimum through non-wall, non-stagnant pixels.
  LabelMap& labels = out.labels;
  std::vector<std::uint8_t> stagnant(f.fx.size());
  for (std::size_t i = 0; i < stagnant.size(); ++i) {
    stagnant[i] = f.magnitude(i) < cfg.stagnation_tol;
  }
  std::deque<std::size_t> queue;
  for (std::size_t k = 0; k < out.minima.size(); ++k) {
    const Vec2 p = clamp_to_domain(out.minima[k], w, h);
    const std::size_t i = labels.index(round_px(p.x), round_px(p.y));
    if (labels[i] != 0) continue;
    labels[i] = static_cast<std::int32_t>(k + 1);
    queue.push_back(i);
  }
  while (!queue.empty()) {
    const std::size_t i = queue.front();
    queue.pop_front();
    const int x = static_cast<int>(i % static_cast<std::size_t>(w));
    const int y = static_cast<int>(i / static_cast<std::size_t>(w));
    const int nx[4] = {x + 1, x - 1, x, x};
    const int ny[4] = {y, y, y + 1, y - 1};
    for (int k = 0; k < 4; ++k) {
      if (!labels.contains(nx[k], ny[k])) continue;
      const std::size_t j = labels.index(nx[k], ny[k]);
      if (labels[j] != 0 || wall[j] || stagnant[j]) continue;
      labels[j] = labels[i];
      queue.push_back(j);
    }
  }

  // Walls and unreached pixels follow their own streamline.
  std::vector<std::size_t> ambiguous;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == 0 && !stagnant[i]) ambiguous.push_back(i);
    else if (wall[i] && !stagnant[i]) ambiguous.push_back(i);
  }
  // Flooded pixels whose whole 8-neighbourhood agrees and holds no wall.
  LabelMap settled(w, h, 0);
  for (int y = 1; y + 1 < h; ++y) {
    for (int x = 1; x + 1 < w; ++x) {
      const std::int32_t l = labels(x, y);
      if (l == 0) continue;
      bool interior = true;
      for (int dy = -1; dy <= 1 && interior; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          const std::size_t j = labels.index(x + dx, y + dy);
          if (labels[j] != l || wall[j]) {
            interior = false;
            break;
          }
        }
      }
      if (interior) settled(x, y) = l;
    }
  }
  const auto settled_at = [&](Vec2 p) {
    return settled(round_px(p.x), round_px(p.y));
  };
  const MinimaIndex index(out.minima, w, h);
  std::vector<std::int32_t> resolved(ambiguous.size(), 0);
  const long long n_amb = static_cast<long long>(ambiguous.size());
#pragma omp parallel for schedule(dynamic, 64)
  for (long long a = 0; a < n_amb; ++a) {
    const std::size_t i = ambiguous[static_cast<std::size_t>(a)];
    const Vec2 start{static_cast<double>(i % static_cast<std::size_t>(w)),
                     static_cast<double>(i / static_cast<std::size_t>(w))};
    resolved[static_cast<std::size_t>(a)] = descend_until(f, start, cfg, index, settled_at).label;
  }
  for (std::size_t a = 0; a < ambiguous.size(); ++a) labels[ambiguous[a]] = resolved[a];
  return out;
}

// ---------------------------------------------------------------------------
// Drop-of-water oracle

namespace {

constexpr int kDx[8] = {1, 1, 0, -1, -1, -1, 0, 1};
constexpr int kDy[8] = {0, 1, 1, 1, 0, -1, -1, -1};
constexpr std::int64_t kTerminus = -1;
constexpr std::int64_t kPlateau = -2;

std::vector<std::int64_t> oracle_successors(const ForceField2D& f, double stagnation_tol,
                                            bool parallel) {
  const int w = f.width();
  const int h = f.height();
  std::vector<std::int64_t> next(f.fx.size(), kTerminus);
#pragma omp parallel for schedule(static) if (parallel)
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t i = f.fx.index(x, y);
      const Vec2 fp = f.at(i);
      bool flat = norm(fp) < stagnation_tol;
      double best_align = -2.0;
      int best = -1;
      for (int k = 0; k < 8; ++k) {
        const int nx = x + kDx[k];
        const int ny = y + kDy[k];
        if (!f.fx.contains(nx, ny)) continue;
        if (norm(f.at(nx, ny)) >= stagnation_tol) flat = false;
        const Vec2 d{static_cast<double>(kDx[k]), static_cast<double>(kDy[k])};
        const double align = dot(fp, d) / norm(d);
        if (align > best_align) {
          best_align = align;
          best = k;
        }
      }
      if (flat) {
        next[i] = kPlateau;
        continue;
      }
      if (best < 0 || !(best_align > 0.0)) continue;
      const int nx = x + kDx[best];
      const int ny = y + kDy[best];
      const Vec2 d{static_cast<double>(kDx[best]), static_cast<double>(kDy[best])};
      // Trapezoidal work along the move: positive means the potential drops.
      const double work = dot(fp + f.at(nx, ny), d);
      if (work > 0.0) next[i] = static_cast<std::int64_t>(f.fx.index(nx, ny));
    }
  }
  return next;
}

BasinMap oracle_impl(const ForceField2D& f, double stagnation_tol, bool parallel) {
  const int w = f.width();
  const int h = f.height();
  BasinMap out;
  out.labels = LabelMap(w, h, 0);
  if (w == 0 || h == 0) return out;
  const std::vector<std::int64_t> next = oracle_successors(f, stagnation_tol, parallel);
  const std::size_t n = next.size();

  // Group 8-adjacent termini.
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  auto find = [&](std::size_t a) {
    while (parent[a] != a) {
      parent[a] = parent[parent[a]];
      a = parent[a];
    }
    return a;
  };
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t i = out.labels.index(x, y);
      if (next[i] != kTerminus) continue;
      constexpr int kFwdX[4] = {1, -1, 0, 1};
      constexpr int kFwdY[4] = {0, 1, 1, 1};
      for (int k = 0; k < 4; ++k) {
        const int nx = x + kFwdX[k];
        const int ny = y + kFwdY[k];
        if (!out.labels.contains(nx, ny)) continue;
        const std::size_t j = out.labels.index(nx, ny);
        if (next[j] != kTerminus) continue;
        const std::size_t ri = find(i), rj = find(j);
        if (ri != rj) parent[std::max(ri, rj)] = std::min(ri, rj);
      }
    }
  }
  std::vector<std::int32_t> root_label(n, 0);
  std::vector<Vec2> sums;
  std::vector<double> counts;
  for (std::size_t i = 0; i < n; ++i) {
    if (next[i] != kTerminus) continue;
    const std::size_t r = find(i);
    if (root_label[r] == 0) {
      root_label[r] = static_cast<std::int32_t>(sums.size() + 1);
      sums.push_back({0.0, 0.0});
      counts.push_back(0.0);
    }
    const auto k = static_cast<std::size_t>(root_label[r] - 1);
    sums[k] += Vec2{static_cast<double>(i % static_cast<std::size_t>(w)),
                    static_cast<double>(i / static_cast<std::size_t>(w))};
    counts[k] += 1.0;
  }
  for (std::size_t k = 0; k < sums.size(); ++k) out.minima.push_back(sums[k] * (1.0 / counts[k]));

  // Follow successor chains with memoisation; cycles resolve to 0.
  enum : std::uint8_t { kUnseen = 0, kOnPath = 1, kDone = 2 };
  std::vector<std::uint8_t> state(n, kUnseen);
  std::vector<std::size_t> path;
  for (std::size_t start = 0; start < n; ++start) {
    if (state[start] == kDone) continue;
    path.clear();
    std::size_t cur = start;
    std::int32_t label = 0;
    for (;;) {
      if (state[cur] == kDone) {
        label = out.labels[cur];
        break;
      }
      if (state[cur] == kOnPath) {
        label = 0;
        break;
      }
      state[cur] = kOnPath;
      path.push_back(cur);
      const std::int64_t nx = next[cur];
      if (nx == kTerminus) {
        label = root_label[find(cur)];
        break;
      }
      if (nx == kPlateau) {
        label = 0;
        break;
      }
      cur = static_cast<std::size_t>(nx);
    }
    for (std::size_t p : path) {
      out.labels[p] = label;
      state[p] = kDone;
    }
  }
  return out;
}

}  // namespace

BasinMap drop_of_water_oracle(const ForceField2D& f, double stagnation_tol) {
  return oracle_impl(f, stagnation_tol, true);
}

BasinMap reference::drop_of_water_oracle(const ForceField2D& f, double stagnation_tol) {
  return oracle_impl(f, stagnation_tol, false);
}

std::vector<std::size_t> basin_areas(const BasinMap& basins) {
  std::vector<std::size_t> areas(basins.minima.size() + 1, 0);
  for (auto v : basins.labels.pixels()) {
    if (v >= 0 && static_cast<std::size_t>(v) < areas.size()) ++areas[static_cast<std::size_t>(v)];
  }
  return areas;
}

std::vector<std::int32_t> significant_minima(const BasinMap& basins, double min_area) {
  const auto areas = basin_areas(basins);
  std::vector<std::int32_t> keep;
  for (std::size_t k = 1; k < areas.size(); ++k) {
    if (static_cast<double>(areas[k]) >= min_area) keep.push_back(static_cast<std::int32_t>(k));
  }
  return keep;
}

}  // namespace gravtrack
