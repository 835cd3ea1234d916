#pragma once

#include <optional>

#include "splat/core/types.hpp"

namespace splat {

struct LossConfig {
    double lambda_ssim = 0.2;
    int ssim_window = 11;
    double ssim_sigma = 1.5;
    double ssim_c1 = 0.01 * 0.01;  // (0.01 L)^2, L = 1
    double ssim_c2 = 0.03 * 0.03;
    double scale_reg = 0.0;  // optional penalty on exp(log_scale)^2, off by default

    void validate() const {
        if (lambda_ssim < 0.0 || lambda_ssim > 1.0)
            throw InputError("LossConfig: lambda_ssim outside [0,1]");
        if (ssim_window < 3 || ssim_window % 2 == 0)
            throw InputError("LossConfig: ssim_window must be odd and >= 3");
    }
};

// Mean absolute channel difference over mask-true pixels (all pixels when the
// mask is null); 0 for an empty mask.
double l1_loss(const ImageBuffer& rendered, const ImageBuffer& target,
               const MaskBuffer* mask = nullptr);

// Mean local SSIM with a Gaussian window over mask-true centers. Window taps
// falling outside the image are handled by renormalizing the kernel; taps may
// read outside the mask. 1 when there are no centers.
double ssim(const ImageBuffer& rendered, const ImageBuffer& target,
            const MaskBuffer* mask = nullptr, const LossConfig& cfg = {});

// (1 - lambda) * L1 + lambda * (1 - SSIM), masked consistently.
double total_loss(const ImageBuffer& rendered, const ImageBuffer& target, const MaskBuffer* mask,
                  const LossConfig& cfg);

// Analytic d(total_loss)/d(rendered pixel), same masking as total_loss.
ImageBuffer total_loss_image_grad(const ImageBuffer& rendered, const ImageBuffer& target,
                                  const MaskBuffer* mask, const LossConfig& cfg);

}  // namespace splat
