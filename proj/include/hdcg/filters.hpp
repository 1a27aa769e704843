#pragma once

#include <vector>

#include "hdcg/image.hpp"

namespace hdcg {

/// Normalized 1D Gaussian taps for offsets -radius..radius.
std::vector<double> gaussian_kernel(double sigma, int radius);

/// Radius used when none is given: ceil(3 sigma).
int gaussian_radius(double sigma);

/// Correlates rows then columns with the same odd-length kernel.
Image separable_filter(const Image& img, const std::vector<double>& kernel, PadMode mode);

Image gaussian_blur(const Image& img, double sigma, PadMode mode = PadMode::Reflect);

/// Pads by `r` on every side with mirror indexing.
Image reflect_pad(const Image& img, int r);

}  // namespace hdcg
