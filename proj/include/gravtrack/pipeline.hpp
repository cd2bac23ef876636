#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "gravtrack/basins.hpp"
#include "gravtrack/config.hpp"
#include "gravtrack/gravity.hpp"
#include "gravtrack/tracking.hpp"

namespace gravtrack {

/// Wall-clock seconds summed over frames, plus the slowest frame of each
/// per-frame stage.
struct StageTimes {
  double load = 0.0;
  double preprocess = 0.0;
  double detection = 0.0;  ///< force field and critical points
  double basins = 0.0;
  double segmentation = 0.0;
  double tracking = 0.0;
  double filtering = 0.0;
  double write = 0.0;
  double max_preprocess = 0.0;
  double max_detection = 0.0;
  double max_basins = 0.0;
  double max_segmentation = 0.0;
};

/// Intermediate products of one frame up to the seed list.
struct FrameDetection {
  Image2D brightened;
  Image2D smoothed;
  ForceField2D field;
  std::vector<CriticalPoint> critical_points;
  BasinMap basins;
  std::vector<Vec2> seeds;  ///< positions of the significant minima
  StageTimes times;
};

/// normalize -> log brighten -> Kuwahara -> force field -> critical points ->
/// basins -> significant minima.
FrameDetection detect_frame(const Image2D& raw, const PipelineConfig& cfg);

/// Lets callers edit a frame's seeds before segmentation.
using SeedFilter = std::function<void(int frame, std::vector<Vec2>& seeds)>;

struct SequenceResult {
  TrackGraph raw_graph;  ///< before filtering
  TrackGraph graph;
  std::vector<LabelMap> masks;  ///< tracklet labels per frame
  std::vector<TrackingFrame> frames;
  TrackingStats tracking;
  StageTimes times;
};

/// Detection and segmentation per frame (frames in parallel), then tracking and
/// filtering. Errors name the stage and frame.
SequenceResult process_sequence(const std::vector<Image2D>& raw_frames, const PipelineConfig& cfg,
                                const SeedFilter& seed_filter = {});

struct RunOptions {
  bool overlay = false;
  SeedFilter seed_filter;
};

struct RunSummary {
  std::size_t frames = 0;
  std::size_t tracklets = 0;
  TrackingStats tracking;
  StageTimes times;
};

/// Loads cfg.input, processes it and writes maskNNN.tif, res_track.txt and
/// timing.json (plus overlayNNN.png) into cfg.output. Files are written to a
/// temporary sibling directory that replaces the output only on success.
RunSummary run_pipeline(const PipelineConfig& cfg, const RunOptions& opts = {});

std::string timing_json(const StageTimes& t, std::size_t frames);

/// Frame with mask contours in per-label colours and label numbers drawn at the
/// mask centroids; RGB bytes.
std::vector<std::uint8_t> render_overlay(const Image2D& frame, const LabelMap& labels);

}  // namespace gravtrack
