#pragma once

#include <vector>

#include "gravtrack/image.hpp"
#include "gravtrack/preprocess.hpp"

namespace gravtrack {

struct SegParams {
  double contrast_delta = 0.15;   ///< wall threshold below the running mask mean
  int cv_iterations = 50;
  double cv_smoothness_mu = 0.2;  ///< perimeter weight
  double h_maxima_h = 2.0;        ///< distance-transform units
  double min_seed_separation = 5.0;
  int cv_margin = 10;             ///< refinement window margin around the mask
  int min_cell_area = 10;         ///< fragments below this are dropped
};

void validate(const SegParams& p);

struct CellStats {
  std::size_t area = 0;
  double mean_interior = 0.0;
  double mean_rim = 0.0;  ///< 2 px dilated ring outside the mask
  bool recovered = false;

  double contrast() const { return mean_interior - mean_rim; }
};

/// Instance masks of one frame; stats[k - 1] describes label k.
struct CellMaskSet {
  LabelMap labels;
  std::vector<CellStats> stats;

  std::size_t size() const { return stats.size(); }
};

struct RefineResult {
  Mask mask;
  bool collapsed = false;
};

/// Interior mean minus mean of the 2 px ring around `mask`.
CellStats measure_cell(const Mask& mask, const Image2D& img);

/// Recomputes stats for every label 1..max_label of `labels`.
std::vector<CellStats> measure_cells(const LabelMap& labels, const Image2D& img);

/// Concurrent seeded growth from each seed pixel. Pixels are taken brightest first
/// from one shared heap (ties by row-major index, then seed order); a pixel darker
/// than the claiming mask's running mean minus contrast_delta becomes a wall for
/// that mask. Label k belongs to seeds[k - 1]; labels may be empty.
CellMaskSet region_grow(const Image2D& enhanced, const std::vector<Vec2>& seeds,
                        const SegParams& p);

/// Region-based level set with Gaussian in/out intensity models and a perimeter
/// term, evolved on a window around the mask. When `allowed` is given the result
/// never leaves it. The result keeps only components overlapping the input mask.
RefineResult chan_vese_refine(const Image2D& img, const Mask& mask, const SegParams& p,
                              const Mask* allowed = nullptr);

/// Splits a mask at the watershed of its distance transform, seeded by h-maxima
/// (closer than min_seed_separation merge). Pieces partition the input exactly.
std::vector<Mask> split_mask(const Mask& mask, const SegParams& p);

/// CLAHE followed by hole filling; the image region growing and refinement work on.
Image2D enhance_for_segmentation(const Image2D& brightened, const ClaheParams& clahe_params);

/// region_grow -> per-cell chan_vese_refine (clipped to each cell's Voronoi zone)
/// -> split_mask, renumbered 1..K. Stats are measured on `enhanced`.
CellMaskSet segment_enhanced(const Image2D& enhanced, const std::vector<Vec2>& minima,
                             const SegParams& p);

/// enhance_for_segmentation + segment_enhanced on a log-brightened frame.
CellMaskSet segment_frame(const Image2D& brightened, const std::vector<Vec2>& minima,
                          const SegParams& p, const ClaheParams& clahe_params = {});

}  // namespace gravtrack
