#include "splat/core/gaussian_cloud.hpp"

#include <algorithm>

namespace splat {

void GaussianCloud::remove_indices(const std::vector<size_t>& sorted_indices) {
    if (sorted_indices.empty()) return;
    std::vector<uint8_t> dead(count, 0);
    for (size_t i : sorted_indices) {
        if (i >= count) throw ConsistencyError("remove_indices: index out of range");
        dead[i] = 1;
    }
    size_t w = 0;
    for (size_t r = 0; r < count; ++r) {
        if (dead[r]) continue;
        if (w != r) {
            positions[w] = positions[r];
            rotations[w] = rotations[r];
            log_scales[w] = log_scales[r];
            logit_opacities[w] = logit_opacities[r];
            sh_coeffs[w] = std::move(sh_coeffs[r]);
            frozen[w] = frozen[r];
            damage_label[w] = damage_label[r];
        }
        ++w;
    }
    count = w;
    positions.resize(w);
    rotations.resize(w);
    log_scales.resize(w);
    logit_opacities.resize(w);
    sh_coeffs.resize(w);
    frozen.resize(w);
    damage_label.resize(w);
}

void GaussianCloud::append_from(const GaussianCloud& other, size_t i) {
    if (i >= other.count) throw ConsistencyError("append_from: index out of range");
    if (other.sh_degree != sh_degree) throw ConsistencyError("append_from: SH degree mismatch");
    positions.push_back(other.positions[i]);
    rotations.push_back(other.rotations[i]);
    log_scales.push_back(other.log_scales[i]);
    logit_opacities.push_back(other.logit_opacities[i]);
    sh_coeffs.push_back(other.sh_coeffs[i]);
    frozen.push_back(other.frozen[i]);
    damage_label.push_back(other.damage_label[i]);
    ++count;
}

void GaussianCloud::renormalize_rotations() {
    for (auto& q : rotations) {
        double n = q.norm();
        if (n < 1e-12) {
            q = Vec4(1, 0, 0, 0);
        } else {
            q /= n;
        }
    }
}

void GaussianCloud::validate() const {
    const size_t n = count;
    if (positions.size() != n || rotations.size() != n || log_scales.size() != n ||
        logit_opacities.size() != n || sh_coeffs.size() != n || frozen.size() != n ||
        damage_label.size() != n)
        throw ConsistencyError("GaussianCloud: sequence lengths disagree with count");
    const size_t terms = sh_terms();
    for (size_t i = 0; i < n; ++i) {
        if (std::abs(rotations[i].norm() - 1.0) > 1e-6)
            throw ConsistencyError("GaussianCloud: non-unit quaternion");
        if (sh_coeffs[i].size() != terms)
            throw ConsistencyError("GaussianCloud: SH block size mismatch");
        if (!positions[i].allFinite() || !log_scales[i].allFinite() ||
            !std::isfinite(logit_opacities[i]))
            throw ConsistencyError("GaussianCloud: non-finite parameter");
    }
}

double opacity_of(const GaussianCloud& c, size_t i) { return sigmoid(c.logit_opacities[i]); }

}  // namespace splat
