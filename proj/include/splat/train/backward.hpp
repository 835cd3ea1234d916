#pragma once

#include "splat/core/camera.hpp"
#include "splat/core/gaussian_cloud.hpp"
#include "splat/render/rasterizer.hpp"
#include "splat/train/loss.hpp"

namespace splat {

// Per-primitive gradient blocks, shaped like the cloud's parameter groups.
struct Gradients {
    std::vector<Vec3> d_position;
    std::vector<Vec4> d_rotation;
    std::vector<Vec3> d_log_scale;
    std::vector<double> d_logit_opacity;
    std::vector<std::vector<Vec3>> d_sh;
    std::vector<double> pos2d_grad_norm;  // densification statistic, per primitive

    void resize_like(const GaussianCloud& cloud) {
        d_position.assign(cloud.count, Vec3::Zero());
        d_rotation.assign(cloud.count, Vec4::Zero());
        d_log_scale.assign(cloud.count, Vec3::Zero());
        d_logit_opacity.assign(cloud.count, 0.0);
        d_sh.assign(cloud.count, std::vector<Vec3>(cloud.sh_terms(), Vec3::Zero()));
        pos2d_grad_norm.assign(cloud.count, 0.0);
    }
};

// Optional regularizer on exp(log_scale)^2; 0 when cfg.scale_reg == 0.
double scale_reg_loss(const GaussianCloud& cloud, const LossConfig& cfg);

// Analytic gradients of total_loss (+ scale regularizer) with respect to
// every unfrozen parameter, chained through alpha blending, the 2D splat
// footprint, the covariance projection, and SH color evaluation. Throws
// ConsistencyError if the blend log does not belong to (cloud, camera).
Gradients backward(const RenderOutput& render_output, const GaussianCloud& cloud,
                   const Camera& camera, const ImageBuffer& target, const MaskBuffer* mask,
                   const LossConfig& cfg);

}  // namespace splat
