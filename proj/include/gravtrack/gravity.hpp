#pragma once

#include <span>
#include <vector>

#include "gravtrack/image.hpp"

namespace gravtrack {

/// Inverse-square correlation kernels on a (2r+1)^2 square support, indexed by
/// offset (dx, dy) from the field point to the contributing mass.
struct GravityKernelSet {
  int radius = 0;
  double softening_eps = 0.0;
  Image2D kx;  ///< dx / r^3
  Image2D ky;  ///< dy / r^3
  Image2D kp;  ///< -1 / r

  int side() const { return 2 * radius + 1; }
  double x_at(int dx, int dy) const { return kx(dx + radius, dy + radius); }
  double y_at(int dx, int dy) const { return ky(dx + radius, dy + radius); }
  double p_at(int dx, int dy) const { return kp(dx + radius, dy + radius); }
};

struct PotentialField2D {
  Image2D phi;
};

/// Kernel radius above which correlation runs through the FFT path.
inline constexpr int kDirectCorrelationMaxRadius = 15;

GravityKernelSet build_kernels(int radius, double softening_eps = 0.5);

/// fx = img (*) kx, fy = img (*) ky with reflect ("mirror without edge repeat") padding.
/// Positive components point from the field point toward the attracting mass.
ForceField2D force_field(const Image2D& img, const GravityKernelSet& k);

PotentialField2D potential_field(const Image2D& img, const GravityKernelSet& k);

/// Reflect-padded correlation of `img` with every kernel in `kernels` (all the same,
/// odd, square size). Uses FFT for large kernels and direct OpenMP loops otherwise.
std::vector<Image2D> correlate_reflect(const Image2D& img, std::span<const Image2D* const> kernels);

/// Mirror index into [0, n) without repeating the edge sample; handles |i| >= n.
int reflect_index(int i, int n);

}  // namespace gravtrack
