#pragma once

#include <cstdint>
#include <vector>

#include "splat/core/types.hpp"

namespace splat {

// Structure-of-sequences for all per-primitive parameters. Quaternions are
// stored (w,x,y,z) and kept unit-norm; scales live in log-space and opacities
// in logit-space so unconstrained optimizer steps preserve the invariants.
struct GaussianCloud {
    size_t count = 0;
    int sh_degree = 1;  // 0..3

    std::vector<Vec3> positions;
    std::vector<Vec4> rotations;  // (w,x,y,z), unit norm
    std::vector<Vec3> log_scales;
    std::vector<double> logit_opacities;
    std::vector<std::vector<Vec3>> sh_coeffs;  // per primitive: (degree+1)^2 RGB terms
    std::vector<uint8_t> frozen;
    std::vector<DamageLabel> damage_label;

    static size_t sh_terms(int degree) {
        return static_cast<size_t>(degree + 1) * static_cast<size_t>(degree + 1);
    }
    size_t sh_terms() const { return sh_terms(sh_degree); }

    void resize(size_t n) {
        count = n;
        positions.resize(n, Vec3::Zero());
        rotations.resize(n, Vec4(1, 0, 0, 0));
        log_scales.resize(n, Vec3::Zero());
        logit_opacities.resize(n, 0.0);
        sh_coeffs.resize(n, std::vector<Vec3>(sh_terms(), Vec3::Zero()));
        frozen.resize(n, 0);
        damage_label.resize(n, kNoDamage);
    }

    void remove_indices(const std::vector<size_t>& sorted_indices);
    void append_from(const GaussianCloud& other, size_t i);

    void renormalize_rotations();
    void validate() const;  // throws ConsistencyError / InputError on violation
};

double opacity_of(const GaussianCloud& c, size_t i);

}  // namespace splat
