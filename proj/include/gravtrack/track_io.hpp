#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace gravtrack {

/// One line of a CTC-style track file: "L B E P".
struct TrackRecord {
  std::int32_t label = 0;
  int begin = 0;
  int end = 0;
  std::int32_t parent = 0;

  friend bool operator==(const TrackRecord&, const TrackRecord&) = default;
};

void write_tracks(const std::filesystem::path& path, const std::vector<TrackRecord>& tracks);
std::vector<TrackRecord> read_tracks(const std::filesystem::path& path);

}  // namespace gravtrack
