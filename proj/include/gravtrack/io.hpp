#pragma once

#include <filesystem>
#include <vector>

#include "gravtrack/image.hpp"

namespace gravtrack {

/// Ordered list of frames in a sequence directory.
struct SequenceMeta {
  std::size_t frame_count = 0;
  std::vector<std::filesystem::path> frame_paths;
  int pixel_depth = 0;
};

/// Reads an 8/16-bit single-channel TIFF or binary PGM. Intensities are raw integers
/// converted to double, not normalized. Throws FormatError naming the offending property.
Image2D load_frame(const std::filesystem::path& path);

/// Reads a label TIFF/PGM into integer labels.
LabelMap load_labels(const std::filesystem::path& path);

/// Writes labels as a 16-bit single-channel TIFF. Labels above 65535 are rejected.
void save_labels(const std::filesystem::path& path, const LabelMap& labels);

/// Writes an image in [0,1] as a 16-bit TIFF (value * 65535, rounded).
void save_image16(const std::filesystem::path& path, const Image2D& img);

/// Binary PGM (P5); maxval 255 writes 1 byte per sample, larger values 2 bytes big-endian.
void save_pgm(const std::filesystem::path& path, const Grid<std::uint16_t>& raster,
              int maxval = 65535);

/// 8-bit RGB PNG, `rgb` holds width*height*3 bytes.
void save_png_rgb(const std::filesystem::path& path, int width, int height,
                  const std::vector<std::uint8_t>& rgb);

/// Frames in `dir` (.tif, .tiff, .pgm) sorted by the numeric suffix of their stem.
SequenceMeta list_frames(const std::filesystem::path& dir);

}  // namespace gravtrack
