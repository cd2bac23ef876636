#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "gravtrack/image.hpp"
#include "gravtrack/track_io.hpp"

namespace gravtrack {

struct MitosisEvent {
  int frame = 0;   ///< first frame of the two children
  int blob = -1;   ///< index of the dividing blob; -1 picks one from the seed
};

struct SynthSpec {
  int width = 256;
  int height = 256;
  int frames = 20;
  int blob_count = 10;
  double radius_min = 11.0;  ///< half-maximum radius, pixels
  double radius_max = 14.0;
  double speed = 2.0;        ///< pixels per frame; each blob gets a random heading
  double noise_sigma = 0.05;
  double peak = 0.8;
  double background = 0.05;
  double child_radius_ratio = 1.0;
  /// Children start this many radii to either side of the parent.
  double child_offset = 1.25;
  std::vector<MitosisEvent> mitoses;
  /// Blobs that are not siblings keep at least this many max radii apart in all frames.
  double min_separation = 2.5;
  std::uint64_t seed = 42;
};

struct SynthBlob {
  Vec2 center;
  double radius = 0.0;
};

struct SynthSequence {
  std::vector<Image2D> frames;         ///< values in [0, 1]
  std::vector<LabelMap> ground_truth;  ///< track label per pixel (half-maximum disks)
  std::vector<TrackRecord> tracks;
  /// Blob geometry per frame, keyed by track label - 1 (radius 0 when absent).
  std::vector<std::vector<SynthBlob>> blobs;
};

/// Gaussian blobs on a flat background with additive Gaussian noise, moving at
/// constant velocity and reflecting off the borders. Deterministic in `seed`.
/// Throws DataError when the blobs cannot be packed.
SynthSequence synthesize(const SynthSpec& spec);

/// Writes frames as tNNN.tif and ground truth as gt/maskNNN.tif + gt/man_track.txt.
void write_synth(const std::filesystem::path& dir, const SynthSequence& seq);

}  // namespace gravtrack
