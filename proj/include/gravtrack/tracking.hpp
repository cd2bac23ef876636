#pragma once

#include <optional>
#include <vector>

#include "gravtrack/basins.hpp"
#include "gravtrack/image.hpp"
#include "gravtrack/segmentation.hpp"
#include "gravtrack/track_io.hpp"

namespace gravtrack {

struct TrackParams {
  double match_min_fraction = 0.2;
  double contrast_accept_ratio = 0.5;
  double filter_lower = 0.0;  ///< px^2
  double filter_upper = 0.0;  ///< px^2
  double min_contrast = 0.05;
  int max_recovery_chain = 3;  ///< consecutive recovered frames allowed per cell
};

void validate(const TrackParams& p);

/// Basin map relabelled by cell instance: basins whose minimum lies in a cell take
/// that cell's id, and every cell's own pixels carry its id.
struct InstanceBasinMap {
  LabelMap labels;
};

struct Match {
  std::int32_t source = 0;
  std::int32_t target = 0;
  double fraction = 0.0;  ///< voting pixels / source area
};

struct FrameMatching {
  std::vector<Match> votes;         ///< sorted by (source, target)
  std::vector<std::int32_t> best;   ///< best[source - 1]; 0 when unmatched
  std::vector<double> best_fraction;
};

/// A cell's per-frame history. cells[i] is the cell id at frame begin + i.
struct Tracklet {
  std::int32_t label = 0;
  int begin = 0;
  int end = 0;
  std::int32_t parent = 0;
  std::vector<std::int32_t> cells;
  std::vector<std::size_t> areas;
  std::vector<double> contrasts;
};

struct TrackGraph {
  std::vector<Tracklet> tracklets;  ///< ordered by label, labels 1..n

  std::vector<TrackRecord> records() const;
};

/// Everything the tracker needs about one frame. Recovery may append cells.
struct TrackingFrame {
  Image2D enhanced;  ///< image used for refinement and contrast
  BasinMap basins;
  CellMaskSet cells;
};

struct TrackingStats {
  std::size_t recovered = 0;
  std::size_t interpolated = 0;
  std::size_t mitoses = 0;
};

InstanceBasinMap merge_basins(const BasinMap& basins, const CellMaskSet& cells);

/// Votes of every cell of `cells_t` into the instance basins of an adjacent frame.
/// The best target has the highest fraction (lower label on ties) and must reach
/// min_fraction.
FrameMatching associate(const CellMaskSet& cells_t, const InstanceBasinMap& other,
                        double min_fraction);

/// Level-set refinement seeded with prev_mask on `frame`, accepted when its local
/// contrast reaches accept_ratio * ref_contrast (always when ref_contrast <= 0).
/// `allowed` restricts where the candidate may lie.
std::optional<Mask> recover_missing(const Mask& prev_mask, const Image2D& frame,
                                    double ref_contrast, const SegParams& p,
                                    double accept_ratio, const Mask* allowed = nullptr);

/// Mean of the two signed distance maps, thresholded at 0. Masks whose bounding
/// boxes are disjoint yield the smaller mask moved to the mean centroid.
Mask interpolate_gap(const Mask& mask_before, const Mask& mask_after);

/// Backward, forward (with gap interpolation and recovery) and reverse-time linking
/// passes. Frames gain recovered and interpolated cells in place.
TrackGraph track_sequence(std::vector<TrackingFrame>& frames, const TrackParams& tp,
                          const SegParams& sp, TrackingStats* stats = nullptr);

double median(std::vector<double> values);

/// Hysteresis rule: no area below lower, some area at or above upper, and median
/// contrast at least min_contrast.
bool keep_tracklet(const std::vector<std::size_t>& areas, const std::vector<double>& contrasts,
                   double lower, double upper, double min_contrast);

/// Drops tracklets failing keep_tracklet. Children of a dropped parent lose their
/// parent; a parent left with a single child is joined with it when the joined
/// history still passes. Labels are renumbered 1..n in order.
TrackGraph filter_tracklets(const TrackGraph& g, double lower, double upper, double min_contrast);

/// Per-frame masks carrying tracklet labels.
std::vector<LabelMap> render_tracks(const TrackGraph& g, const std::vector<TrackingFrame>& frames);

}  // namespace gravtrack
