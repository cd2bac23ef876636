#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "gravtrack/image.hpp"
#include "gravtrack/track_io.hpp"

namespace gravtrack {

struct EvalReport {
  std::size_t frames = 0;
  std::size_t true_positives = 0;
  std::size_t false_positives = 0;
  std::size_t false_negatives = 0;
  double precision = 1.0;  ///< 1 by convention when nothing was predicted
  double recall = 0.0;
  double f1 = 0.0;
  bool no_predictions = false;

  std::size_t gt_tracks = 0;
  std::size_t pure_tracks = 0;  ///< matched in every frame, always by the same tracklet
  double track_purity = 0.0;
  std::size_t identity_switches = 0;

  std::size_t mitoses_expected = 0;
  std::size_t mitoses_detected = 0;
  std::size_t predicted_mitoses = 0;  ///< parents with at least two children
};

/// Detection matches per frame: a pair qualifies when the predicted centroid lies in
/// the reference mask or the reference centroid lies in the predicted mask; pairs are
/// taken one-to-one by decreasing IoU. Tracks are compared through these matches.
EvalReport evaluate(const std::vector<LabelMap>& pred, const std::vector<TrackRecord>& pred_tracks,
                    const std::vector<LabelMap>& gt, const std::vector<TrackRecord>& gt_tracks);

/// Reads maskNNN.tif + res_track.txt from `pred_dir` and maskNNN.tif + man_track.txt
/// from `gt_dir`.
EvalReport evaluate_dirs(const std::filesystem::path& pred_dir, const std::filesystem::path& gt_dir);

std::string report_json(const EvalReport& r);

}  // namespace gravtrack
