#pragma once

#include "gravtrack/image.hpp"

namespace gravtrack {

struct KuwaharaParams {
  int radius = 4;
  int sector_count = 8;
  double sharpness_q = 8.0;
  double tensor_smoothing_sigma = 2.0;
};

struct ClaheParams {
  int tile_size = 64;
  /// Fraction of the tile's pixel count allowed per histogram bin.
  double clip_limit = 0.01;
};

void validate(const KuwaharaParams& p);
void validate(const ClaheParams& p);

/// log(1 + c*img) / log(1 + c). Requires c > 0.
Image2D log_brighten(const Image2D& img, double gain);

/// Anisotropic Kuwahara filter with polynomial sector weights. Sectors follow the
/// orientation and anisotropy of the smoothed structure tensor; a degenerate tensor
/// yields isotropic (circular) sectors.
Image2D kuwahara_anisotropic(const Image2D& img, const KuwaharaParams& p);

/// Contrast limited adaptive histogram equalization, 256 bins, bilinear blending of
/// the per-tile mappings. A tile larger than the image degenerates to global equalization.
Image2D clahe(const Image2D& img, const ClaheParams& p);

/// Raises dark regional minima not connected to the image border to their surrounding
/// level (grayscale hole filling by reconstruction). Never lowers a pixel.
Image2D fill_dark_spots(const Image2D& img);

}  // namespace gravtrack
