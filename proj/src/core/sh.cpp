#include "splat/core/sh.hpp"

#include <cmath>

namespace splat {

namespace {

constexpr double C0 = 0.28209479177387814;
constexpr double C1 = 0.4886025119029199;
constexpr double C2[5] = {1.0925484305920792, -1.0925484305920792, 0.31539156525252005,
                          -1.0925484305920792, 0.5462742152960396};
constexpr double C3[7] = {-0.5900435899266435, 2.890611442640554,  -0.4570457994644658,
                          0.3731763325901154,  -0.4570457994644658, 1.445305721320277,
                          -0.5900435899266435};

}  // namespace

void sh_basis(int degree, const Vec3& dir, double* basis) {
    const double x = dir[0], y = dir[1], z = dir[2];
    basis[0] = C0;
    if (degree < 1) return;
    basis[1] = -C1 * y;
    basis[2] = C1 * z;
    basis[3] = -C1 * x;
    if (degree < 2) return;
    const double xx = x * x, yy = y * y, zz = z * z;
    basis[4] = C2[0] * x * y;
    basis[5] = C2[1] * y * z;
    basis[6] = C2[2] * (2 * zz - xx - yy);
    basis[7] = C2[3] * x * z;
    basis[8] = C2[4] * (xx - yy);
    if (degree < 3) return;
    basis[9] = C3[0] * y * (3 * xx - yy);
    basis[10] = C3[1] * x * y * z;
    basis[11] = C3[2] * y * (4 * zz - xx - yy);
    basis[12] = C3[3] * z * (2 * zz - 3 * xx - 3 * yy);
    basis[13] = C3[4] * x * (4 * zz - xx - yy);
    basis[14] = C3[5] * z * (xx - yy);
    basis[15] = C3[6] * x * (xx - 3 * yy);
}

void sh_basis_grad(int degree, const Vec3& dir, double* basis, Vec3* dbasis) {
    sh_basis(degree, dir, basis);
    const double x = dir[0], y = dir[1], z = dir[2];
    dbasis[0] = Vec3::Zero();
    if (degree < 1) return;
    dbasis[1] = Vec3(0, -C1, 0);
    dbasis[2] = Vec3(0, 0, C1);
    dbasis[3] = Vec3(-C1, 0, 0);
    if (degree < 2) return;
    dbasis[4] = C2[0] * Vec3(y, x, 0);
    dbasis[5] = C2[1] * Vec3(0, z, y);
    dbasis[6] = C2[2] * Vec3(-2 * x, -2 * y, 4 * z);
    dbasis[7] = C2[3] * Vec3(z, 0, x);
    dbasis[8] = C2[4] * Vec3(2 * x, -2 * y, 0);
    if (degree < 3) return;
    const double xx = x * x, yy = y * y, zz = z * z;
    dbasis[9] = C3[0] * Vec3(6 * x * y, 3 * xx - 3 * yy, 0);
    dbasis[10] = C3[1] * Vec3(y * z, x * z, x * y);
    dbasis[11] = C3[2] * Vec3(-2 * x * y, 4 * zz - xx - 3 * yy, 8 * y * z);
    dbasis[12] = C3[3] * Vec3(-6 * x * z, -6 * y * z, 6 * zz - 3 * xx - 3 * yy);
    dbasis[13] = C3[4] * Vec3(4 * zz - 3 * xx - yy, -2 * x * y, 8 * x * z);
    dbasis[14] = C3[5] * Vec3(2 * x * z, -2 * y * z, xx - yy);
    dbasis[15] = C3[6] * Vec3(3 * xx - 3 * yy, -6 * x * y, 0);
}

Vec3 eval_sh(const std::vector<Vec3>& coeffs, const Vec3& dir, int degree) {
    if (degree < 0 || degree > 3) throw InputError("eval_sh: degree must be in 0..3");
    const size_t terms = static_cast<size_t>(degree + 1) * (degree + 1);
    if (coeffs.size() < terms) throw InputError("eval_sh: degree exceeds stored coefficients");
    double basis[16];
    sh_basis(degree, dir, basis);
    Vec3 rgb = Vec3::Zero();
    for (size_t t = 0; t < terms; ++t) rgb += basis[t] * coeffs[t];
    rgb.array() += 0.5;
    return rgb.cwiseMax(0.0).cwiseMin(1.0);
}

void eval_sh_backward(const std::vector<Vec3>& coeffs, const Vec3& dir, int degree,
                      const Vec3& dL_drgb, std::vector<Vec3>& dL_dcoeffs, Vec3& dL_ddir) {
    const size_t terms = static_cast<size_t>(degree + 1) * (degree + 1);
    double basis[16];
    Vec3 dbasis[16];
    sh_basis_grad(degree, dir, basis, dbasis);

    Vec3 raw = Vec3::Zero();
    for (size_t t = 0; t < terms; ++t) raw += basis[t] * coeffs[t];
    raw.array() += 0.5;

    Vec3 g = dL_drgb;
    for (int c = 0; c < 3; ++c)
        if (raw[c] <= 0.0 || raw[c] >= 1.0) g[c] = 0.0;  // clamp pins the channel

    for (size_t t = 0; t < terms; ++t) {
        dL_dcoeffs[t] += basis[t] * g;
        dL_ddir += dbasis[t] * g.dot(coeffs[t]);
    }
}

}  // namespace splat
