#include "splat/core/projection.hpp"

namespace splat {

Mat23 projection_jacobian(const Camera& cam, const Vec3& t) {
    const double tz = t[2];
    if (!(tz > kNearPlane))
        throw NumericalError("projection_jacobian: depth at or behind the near plane");
    Mat23 J;
    J << cam.fx / tz, 0, -cam.fx * t[0] / (tz * tz),
        0, cam.fy / tz, -cam.fy * t[1] / (tz * tz);
    return J;
}

Mat2 project_covariance(const Mat23& J, const Mat3& cam_rotation, const Mat3& cov3, double blur) {
    Mat23 T = J * cam_rotation;
    Mat2 out = T * cov3 * T.transpose();
    // symmetrize against round-off
    out = 0.5 * (out + out.transpose());
    out += blur * Mat2::Identity();
    return out;
}

Mat23 project_point_jacobian(const Camera& cam, const Vec3& t) {
    // same closed form as projection_jacobian, factored for clarity at call sites
    return projection_jacobian(cam, t);
}

Vec3 projection_jacobian_backward(const Camera& cam, const Vec3& t, const Mat23& dL_dJ) {
    const double tz = t[2];
    const double tz2 = tz * tz, tz3 = tz2 * tz;
    Vec3 g = Vec3::Zero();
    g[0] = dL_dJ(0, 2) * (-cam.fx / tz2);
    g[1] = dL_dJ(1, 2) * (-cam.fy / tz2);
    g[2] = dL_dJ(0, 0) * (-cam.fx / tz2) + dL_dJ(0, 2) * (2 * cam.fx * t[0] / tz3) +
           dL_dJ(1, 1) * (-cam.fy / tz2) + dL_dJ(1, 2) * (2 * cam.fy * t[1] / tz3);
    return g;
}

}  // namespace splat
