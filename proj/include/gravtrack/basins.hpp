#pragma once

#include <array>
#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include "gravtrack/image.hpp"
#include "gravtrack/integrator.hpp"

namespace gravtrack {

enum class CriticalKind { minimum, saddle, maximum, spiral_sink, spiral_source, degenerate };

const char* to_string(CriticalKind kind);

/// Jacobian of the force, rows (dfx/dx, dfx/dy), (dfy/dx, dfy/dy).
struct Jacobian2 {
  double xx = 0.0, xy = 0.0, yx = 0.0, yy = 0.0;
  double det() const { return xx * yy - xy * yx; }
  double trace() const { return xx + yy; }
};

struct CriticalPoint {
  Vec2 pos;
  CriticalKind kind = CriticalKind::degenerate;
  Jacobian2 jacobian;
  std::array<std::complex<double>, 2> eigenvalues{};
  /// Unit eigenvectors; only meaningful when both eigenvalues are real.
  std::array<Vec2, 2> eigenvectors{};

  bool attracts() const {
    return kind == CriticalKind::minimum || kind == CriticalKind::spiral_sink;
  }
};

struct CriticalPointStats {
  std::size_t candidate_cells = 0;
  std::size_t discarded_nonconvergent = 0;
  std::size_t merged_duplicates = 0;
};

/// Basin label per pixel plus the minimum each label belongs to: label k marks the
/// basin of minima[k - 1]. Label 0 marks unassigned pixels.
struct BasinMap {
  LabelMap labels;
  std::vector<Vec2> minima;
};

struct Polyline {
  std::vector<Vec2> points;
  bool truncated = false;  ///< max_steps reached before a terminal condition
};

/// Classifies the linearised dynamics x' = J x (descent along the force).
CriticalKind classify(const Jacobian2& j);

/// Zeros of the bilinear force field, located per grid cell with sub-pixel
/// accuracy, deduplicated within 0.5 px, classified by the local Jacobian.
/// Cells whose four corners are all below the stagnation magnitude are skipped.
std::vector<CriticalPoint> find_critical_points(const ForceField2D& f,
                                                double stagnation_tol = 1e-6,
                                                CriticalPointStats* stats = nullptr);

/// Ascent traces of the stable manifold of `saddle`. Each polyline starts at the
/// saddle and ends at a maximum (when `maxima` is given), the image border, a
/// stalled/stagnant point, or after max_steps.
std::array<Polyline, 2> trace_separatrix(const CriticalPoint& saddle, const ForceField2D& field,
                                         const IntegratorConfig& cfg,
                                         std::span<const CriticalPoint> maxima = {});

/// Spatial lookup of minima positions.
class MinimaIndex {
 public:
  MinimaIndex(std::span<const Vec2> minima, int width, int height);
  /// 1-based label of the nearest minimum within `radius`, or 0.
  std::int32_t nearest(Vec2 p, double radius) const;

 private:
  std::span<const Vec2> minima_;
  int width_ = 0;
  int height_ = 0;
  std::vector<std::vector<std::int32_t>> buckets_;
};

struct DescentResult {
  Vec2 end;
  std::int32_t label = 0;  ///< 0 when no minimum was reached
  int steps = 0;
};

/// Adaptive descent from `start` until it comes within 0.5 px of a listed minimum,
/// stagnates, stalls, or exhausts max_steps.
DescentResult descend(const ForceField2D& field, Vec2 start, const IntegratorConfig& cfg,
                      const MinimaIndex& minima);

/// Basins of attraction: separatrices from every saddle are rasterised as walls,
/// minima flood their regions (4-connected), and wall or unreached pixels fall back
/// to per-pixel descent. Minima are the attracting critical points in `cps` order.
BasinMap extract_basins(const ForceField2D& f, std::span<const CriticalPoint> cps,
                        const IntegratorConfig& cfg);

/// Discrete steepest-descent labelling (watershed by the drop-of-water principle).
BasinMap drop_of_water_oracle(const ForceField2D& f, double stagnation_tol = 1e-6);

/// Pixel count per label (index 0 = unassigned).
std::vector<std::size_t> basin_areas(const BasinMap& basins);

/// Labels whose basin area is at least min_area, ascending.
std::vector<std::int32_t> significant_minima(const BasinMap& basins, double min_area);

}  // namespace gravtrack
