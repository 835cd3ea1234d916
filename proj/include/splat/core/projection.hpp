#pragma once

#include "splat/core/camera.hpp"
#include "splat/core/types.hpp"

namespace splat {

constexpr double kNearPlane = 0.01;

inline Vec3 world_to_camera(const Camera& cam, const Vec3& point) {
    return cam.world_to_camera_rotation * point + cam.world_to_camera_translation;
}

// Pixel coordinates of a camera-frame point.
inline Vec2 project_point(const Camera& cam, const Vec3& t) {
    return Vec2(cam.fx * t[0] / t[2] + cam.cx, cam.fy * t[1] / t[2] + cam.cy);
}

// Jacobian of the pinhole projection at a camera-frame point.
// Throws NumericalError when depth is at or behind the near plane.
Mat23 projection_jacobian(const Camera& cam, const Vec3& cam_point);

// Sigma' = J * R_wc * Sigma * R_wc^T * J^T + blur * I.
Mat2 project_covariance(const Mat23& J, const Mat3& cam_rotation, const Mat3& cov3, double blur);

// --- backward helpers -----------------------------------------------------

// d(mu')/d(cam_point) for the pinhole projection.
Mat23 project_point_jacobian(const Camera& cam, const Vec3& t);

// Accumulates dL/d(cam_point) given dL/dJ of projection_jacobian.
Vec3 projection_jacobian_backward(const Camera& cam, const Vec3& t, const Mat23& dL_dJ);

}  // namespace splat
