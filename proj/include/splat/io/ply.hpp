#pragma once

#include <string>

#include "splat/core/gaussian_cloud.hpp"

namespace splat {

// Binary little-endian PLY in the de-facto Gaussian Splatting vertex layout
// (x y z, nx ny nz, f_dc_*, f_rest_* channel-major, opacity, scale_*, rot_*)
// plus uchar damage_label and frozen. 32-bit float payload; write -> read is
// the exact inverse on those fields.
void write_ply(const GaussianCloud& cloud, const std::string& path);
GaussianCloud read_ply(const std::string& path);

}  // namespace splat
