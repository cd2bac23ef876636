#pragma once

#include "gravtrack/image.hpp"

namespace gravtrack {

enum class Connectivity { four = 4, eight = 8 };

/// Exact Euclidean distance from each inside pixel to the nearest outside pixel.
/// Pixels beyond the raster border count as outside. Outside pixels get 0.
Image2D distance_transform(const Mask& mask);

/// Positive inside (distance to the boundary minus half a pixel), negative outside.
Image2D signed_distance(const Mask& mask);

/// Pixels within Euclidean distance `radius` of the mask.
Mask dilate_disk(const Mask& mask, double radius);

/// Connected components labelled 1..K in row-major order of first pixel.
LabelMap connected_components(const Mask& mask, Connectivity conn = Connectivity::four);

/// Keeps only components of `mask` that intersect `seed`.
Mask components_touching(const Mask& mask, const Mask& seed,
                         Connectivity conn = Connectivity::four);

/// Separable Gaussian blur with clamped borders.
Image2D gaussian_blur(const Image2D& img, double sigma);

std::size_t count(const Mask& mask);

}  // namespace gravtrack
