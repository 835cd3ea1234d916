#include "splat/core/covariance.hpp"

#include <cmath>

namespace splat {

Mat3 quat_to_rotation(const Vec4& q) {
    Vec4 u = q / q.norm();
    const double w = u[0], x = u[1], y = u[2], z = u[3];
    Mat3 R;
    R << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
        2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
        2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
    return R;
}

Mat3 covariance_3d(const Vec3& log_scale, const Vec4& rotation) {
    if (std::abs(rotation.norm() - 1.0) > 1e-3)
        throw InputError("covariance_3d: quaternion is not unit-norm");
    Mat3 R = quat_to_rotation(rotation);
    Vec3 s = log_scale.array().exp();
    Mat3 M = R * s.asDiagonal();
    return M * M.transpose();
}

double gaussian_density_3d(const Vec3& x, const Vec3& mean, const Mat3& cov) {
    double det = cov.determinant();
    if (!(det > 1e-18)) throw NumericalError("gaussian_density_3d: singular covariance");
    Vec3 d = x - mean;
    double maha = d.dot(cov.inverse() * d);
    constexpr double two_pi = 2.0 * M_PI;
    return std::exp(-0.5 * maha) / (std::pow(two_pi, 1.5) * std::sqrt(det));
}

Vec4 rotation_backward(const Vec4& q_raw, const Mat3& dL_dR) {
    Vec4 u = q_raw / q_raw.norm();
    const double w = u[0], x = u[1], y = u[2], z = u[3];

    Mat3 dw, dx, dy, dz;
    dw << 0, -z, y, z, 0, -x, -y, x, 0;
    dx << 0, y, z, y, -2 * x, -w, z, w, -2 * x;
    dy << -2 * y, x, w, x, 0, z, -w, z, -2 * y;
    dz << -2 * z, -w, x, w, -2 * z, y, x, y, 0;

    Vec4 g_hat;
    g_hat[0] = 2.0 * dL_dR.cwiseProduct(dw).sum();
    g_hat[1] = 2.0 * dL_dR.cwiseProduct(dx).sum();
    g_hat[2] = 2.0 * dL_dR.cwiseProduct(dy).sum();
    g_hat[3] = 2.0 * dL_dR.cwiseProduct(dz).sum();

    // chain through q_hat = q / |q|
    double n = q_raw.norm();
    return (g_hat - u * u.dot(g_hat)) / n;
}

void covariance_3d_backward(const Vec3& log_scale, const Vec4& rotation,
                            const Mat3& dL_dSigma, Vec3& dL_dlog_scale, Vec4& dL_dq) {
    Mat3 R = quat_to_rotation(rotation);
    Vec3 s = log_scale.array().exp();
    Mat3 M = R * s.asDiagonal();

    // Sigma = M M^T  =>  dL/dM = (G + G^T) M
    Mat3 dL_dM = (dL_dSigma + dL_dSigma.transpose()) * M;

    Mat3 dL_dR = Mat3::Zero();
    for (int k = 0; k < 3; ++k) {
        double ds_k = 0.0;
        for (int i = 0; i < 3; ++i) {
            ds_k += dL_dM(i, k) * R(i, k);
            dL_dR(i, k) = dL_dM(i, k) * s[k];
        }
        dL_dlog_scale[k] += ds_k * s[k];
    }
    dL_dq += rotation_backward(rotation, dL_dR);
}

}  // namespace splat
