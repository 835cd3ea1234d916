#pragma once

#include <vector>

#include "splat/core/types.hpp"

namespace splat {

// Real SH basis values for bands 0..degree at a unit direction.
// `basis` must hold (degree+1)^2 entries.
void sh_basis(int degree, const Vec3& dir, double* basis);

// Basis values plus per-term gradients with respect to the direction vector.
void sh_basis_grad(int degree, const Vec3& dir, double* basis, Vec3* dbasis);

// View-dependent color: sum of coeffs times basis, +0.5 band-0 offset,
// clamped to [0,1]. Throws InputError if degree exceeds the stored block.
Vec3 eval_sh(const std::vector<Vec3>& coeffs, const Vec3& dir, int degree);

// Backward of eval_sh. dL_dcoeffs must match coeffs in size; channels pinned
// by the [0,1] clamp propagate zero. dir gradient is with respect to the
// (unit) direction argument itself; normalization is chained by the caller.
void eval_sh_backward(const std::vector<Vec3>& coeffs, const Vec3& dir, int degree,
                      const Vec3& dL_drgb, std::vector<Vec3>& dL_dcoeffs, Vec3& dL_ddir);

}  // namespace splat
