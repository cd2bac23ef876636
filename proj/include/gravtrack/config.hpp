#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "gravtrack/integrator.hpp"
#include "gravtrack/preprocess.hpp"
#include "gravtrack/segmentation.hpp"
#include "gravtrack/tracking.hpp"

namespace gravtrack {

/// Every tunable of the pipeline. Optional values mean "auto" and are derived from
/// the gravity radius.
struct PipelineConfig {
  double log_gain = 100.0;
  KuwaharaParams kuwahara;
  ClaheParams clahe;

  int gravity_radius = 20;
  double softening_eps = 0.5;

  IntegratorConfig integrator;
  std::optional<double> basins_min_area;  ///< auto: pi * (radius / 2)^2

  SegParams seg;

  double match_min_fraction = 0.2;
  double contrast_accept_ratio = 0.5;
  std::optional<double> filter_lower;  ///< auto: min_area / 4
  std::optional<double> filter_upper;  ///< auto: min_area
  double min_contrast = 0.05;
  int max_recovery_chain = 3;

  std::string input;
  std::string output;
  int threads = 0;  ///< 0 leaves the OpenMP default

  double min_area() const;
  TrackParams track_params() const;

  friend bool operator==(const PipelineConfig&, const PipelineConfig&);
};

/// Range checks of every parameter group; throws ConfigError naming the key.
void validate(const PipelineConfig& cfg);

/// `key = value` lines; `#` starts a comment line; blank lines are ignored.
/// Unknown or repeated keys are errors. Missing keys keep their defaults.
PipelineConfig parse_config(std::string_view text);
PipelineConfig load_config(const std::filesystem::path& path);

/// Every key in a fixed order, numbers printed with 17 significant digits.
std::string serialize_config(const PipelineConfig& cfg);

}  // namespace gravtrack
