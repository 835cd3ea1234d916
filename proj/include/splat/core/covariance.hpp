#pragma once

#include "splat/core/types.hpp"

namespace splat {

// Rotation matrix from a (w,x,y,z) quaternion; normalizes internally.
Mat3 quat_to_rotation(const Vec4& q);

// Sigma = R * S * S^T * R^T with S = diag(exp(log_scale)).
// Throws InputError if |q| deviates from 1 by more than 1e-3.
Mat3 covariance_3d(const Vec3& log_scale, const Vec4& rotation);

// Normalized anisotropic Gaussian density. Throws NumericalError on a
// (near-)singular covariance.
double gaussian_density_3d(const Vec3& x, const Vec3& mean, const Mat3& cov);

// --- backward helpers -----------------------------------------------------

// Given dL/dSigma (3x3, treated as a full matrix of independent entries as
// produced by chaining symmetric 2x2 grads through T Sigma T^T), accumulate
// gradients onto log_scale and the raw quaternion. Chains through the
// internal quaternion normalization so finite differences on raw components
// agree.
void covariance_3d_backward(const Vec3& log_scale, const Vec4& rotation,
                            const Mat3& dL_dSigma, Vec3& dL_dlog_scale, Vec4& dL_dq);

// dL/dq_raw from dL/dR, chained through normalization.
Vec4 rotation_backward(const Vec4& q_raw, const Mat3& dL_dR);

}  // namespace splat
