#include "gravtrack/track_io.hpp"

#include <fstream>
#include <sstream>
#include <string>

#include "gravtrack/error.hpp"

namespace gravtrack {

void write_tracks(const std::filesystem::path& path, const std::vector<TrackRecord>& tracks) {
  std::ofstream out(path);
  if (!out) throw Error("cannot create track file: " + path.string());
  for (const auto& t : tracks) {
    out << t.label << ' ' << t.begin << ' ' << t.end << ' ' << t.parent << '\n';
  }
  if (!out) throw Error("failed writing track file: " + path.string());
}

std::vector<TrackRecord> read_tracks(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open track file: " + path.string());
  std::vector<TrackRecord> tracks;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ss(line);
    TrackRecord t;
    if (!(ss >> t.label >> t.begin >> t.end >> t.parent)) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) +
                        ": expected 'label begin end parent'");
    }
    tracks.push_back(t);
  }
  return tracks;
}

}  // namespace gravtrack
