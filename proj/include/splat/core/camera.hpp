#pragma once

#include <string>

#include "splat/core/types.hpp"

namespace splat {

// Pinhole intrinsics plus world-to-camera rigid pose.
struct Camera {
    double fx = 1.0, fy = 1.0;
    double cx = 0.0, cy = 0.0;
    int width = 1, height = 1;
    Mat3 world_to_camera_rotation = Mat3::Identity();
    Vec3 world_to_camera_translation = Vec3::Zero();
    std::string id;

    void validate() const {
        if (fx <= 0 || fy <= 0) throw InputError("Camera: focal lengths must be positive");
        if (width < 1 || height < 1) throw InputError("Camera: degenerate image size");
        if (cx < 0 || cx >= width || cy < 0 || cy >= height)
            throw InputError("Camera: principal point outside image");
        const Mat3& R = world_to_camera_rotation;
        if ((R.transpose() * R - Mat3::Identity()).cwiseAbs().maxCoeff() > 1e-6)
            throw InputError("Camera: rotation is not orthonormal");
        if (R.determinant() < 0.0) throw InputError("Camera: rotation has negative determinant");
    }

    // Camera center in world coordinates: -R^T t.
    Vec3 center() const {
        return -(world_to_camera_rotation.transpose() * world_to_camera_translation);
    }
};

}  // namespace splat
