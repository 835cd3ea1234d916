#pragma once

#include <map>
#include <string>
#include <vector>

#include "splat/core/camera.hpp"
#include "splat/core/types.hpp"

namespace splat {

struct ColmapCamera {
    int id = 0;
    int width = 0, height = 0;
    double fx = 0, fy = 0, cx = 0, cy = 0;
};

struct ColmapImage {
    int id = 0;
    std::string name;
    int camera_id = 0;
    Vec4 rotation;  // (qw,qx,qy,qz), world-to-camera
    Vec3 translation;
};

struct SparseModel {
    std::map<int, ColmapCamera> cameras;
    std::vector<ColmapImage> images;
    std::vector<std::pair<Vec3, Vec3>> points;  // position, RGB in [0,1]
};

// Reads cameras.txt / images.txt / points3D.txt. PINHOLE and SIMPLE_PINHOLE
// only; distortion-bearing models are rejected by name. Parse errors carry
// file and line number.
SparseModel parse_colmap_text(const std::string& dir);

void write_colmap_text(const SparseModel& model, const std::string& dir);

// COLMAP pose convention mapped directly onto Camera fields.
Camera camera_from_colmap(const SparseModel& model, const ColmapImage& img);
std::vector<Camera> cameras_from_colmap(const SparseModel& model);

}  // namespace splat
