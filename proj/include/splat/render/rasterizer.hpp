#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "splat/core/camera.hpp"
#include "splat/core/gaussian_cloud.hpp"
#include "splat/core/types.hpp"

namespace splat {

constexpr double kAlphaClamp = 0.99;
constexpr double kAlphaFloor = 1.0 / 255.0;
constexpr double kTransmittanceCutoff = 1e-4;

// One projected primitive for a given view.
struct Splat2D {
    Vec2 mean2d;
    Mat2 cov2d;
    Mat2 inv_cov2d;
    double depth = 0.0;   // camera-frame z of the center
    Vec3 rgb;             // eval_sh at the center's view direction
    double alpha = 0.0;   // sigmoid(logit_opacity)
    uint32_t source_index = 0;
};

struct RenderOptions {
    int tile_size = 16;
    Vec3 background = Vec3::Zero();
    double blur = 0.3;  // px^2 floor added to Sigma'
    int threads = 1;
    bool early_termination = true;
};

// Image plus everything the backward pass needs to replay the blend.
struct RenderOutput {
    ImageBuffer image;
    std::vector<double> final_transmittance;          // per pixel
    std::vector<std::vector<uint32_t>> blend_log;     // per pixel, indices into `splats`
    std::vector<Splat2D> splats;
    RenderOptions options;
    uint64_t cloud_revision = 0;  // set by callers that track cloud mutations
};

std::vector<Splat2D> project_and_cull(const GaussianCloud& cloud, const Camera& camera,
                                      double blur = 0.3);

// Per-tile index lists (into `splats`), each sorted by depth then source index.
std::vector<std::vector<uint32_t>> tile_bin(const std::vector<Splat2D>& splats, int width,
                                            int height, int tile_size);

double alpha_at_pixel(const Vec2& x, const Splat2D& splat);

// Front-to-back accumulation over a black background.
std::pair<Vec3, double> composite_pixel(const std::vector<std::pair<Vec3, double>>& contributors);

RenderOutput render(const GaussianCloud& cloud, const Camera& camera,
                    const RenderOptions& options = {});

}  // namespace splat
