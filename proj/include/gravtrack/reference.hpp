#pragma once

// Single-threaded reference kernels. The production entry points run the same
// arithmetic under OpenMP (or through a different algorithm, for the gravity
// correlation); these are kept to check them and to benchmark against.

#include "gravtrack/basins.hpp"
#include "gravtrack/gravity.hpp"
#include "gravtrack/preprocess.hpp"

namespace gravtrack::reference {

/// Direct reflect-padded correlation, O(pixels * kernel taps), no threading.
Image2D correlate_reflect(const Image2D& img, const Image2D& kernel);

Image2D kuwahara_anisotropic(const Image2D& img, const KuwaharaParams& p);

BasinMap drop_of_water_oracle(const ForceField2D& f, double stagnation_tol = 1e-6);

}  // namespace gravtrack::reference
