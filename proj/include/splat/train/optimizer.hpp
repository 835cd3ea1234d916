#pragma once

#include <random>
#include <string>
#include <vector>

#include "splat/core/camera.hpp"
#include "splat/core/gaussian_cloud.hpp"
#include "splat/render/rasterizer.hpp"
#include "splat/train/backward.hpp"
#include "splat/train/loss.hpp"

namespace splat {

struct TrainConfig {
    int iterations = 2000;

    // learning rates; position is additionally scaled by the scene extent and
    // decays exponentially to 1/100 of its initial value over `iterations`
    double lr_position = 1.6e-4;
    double lr_rotation = 1e-3;
    double lr_log_scale = 5e-3;
    double lr_logit_opacity = 5e-2;
    double lr_sh = 2.5e-3;

    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;

    int densify_interval = 100;
    double densify_grad_threshold = 2e-4;
    double split_scale_threshold = 0.01;  // fraction of scene extent
    double prune_opacity_threshold = 0.005;
    double prune_scale_fraction = 0.5;  // world-size pathology bound
    int densify_start = 100;
    int densify_end = 1800;
    int opacity_reset_interval = 0;  // 0 = disabled

    uint64_t seed = 0;
    Vec3 background = Vec3::Zero();
    int tile_size = 16;
    int threads = 1;
    int sh_degree = 1;
    int log_interval = 100;

    LossConfig loss;

    void validate() const;
    std::string to_json() const;
    static TrainConfig from_json(const std::string& text);
};

struct LearningRates {
    double position, rotation, log_scale, logit_opacity, sh;
};

// Exponentially decayed position lr for iteration t of cfg.iterations.
LearningRates resolve_lrs(const TrainConfig& cfg, double scene_extent, int iteration);

struct AdamState {
    int64_t timestep = 0;
    std::vector<Vec3> m_pos, v_pos, m_scale, v_scale;
    std::vector<Vec4> m_rot, v_rot;
    std::vector<double> m_op, v_op;
    std::vector<std::vector<Vec3>> m_sh, v_sh;

    void resize_like(const GaussianCloud& cloud);
    void check_shapes(const GaussianCloud& cloud) const;
};

struct DensifyStats {
    std::vector<double> accum_norm;   // summed 2D position gradient norms
    std::vector<int> seen;            // views in which the primitive was visible
    std::vector<Vec3> accum_pos_grad; // summed 3D position gradients (clone direction)

    void resize_like(const GaussianCloud& cloud);
    void accumulate(const Gradients& g, const RenderOutput& ro);
    void reset();
};

struct TrainReportEntry {
    int iteration;
    double loss;
    size_t primitive_count;
    double psnr;  // NaN when not evaluated at this entry
};

struct TrainReport {
    std::vector<TrainReportEntry> entries;
    double wall_seconds = 0.0;
    double final_psnr = 0.0;  // mean over training views
    std::string to_json() const;
};

struct TrainView {
    Camera camera;
    ImageBuffer target;
    const MaskBuffer* loss_mask = nullptr;  // optional restriction of the loss
};

// Radius of the bounding sphere of the camera centers (1 for a single camera).
double scene_extent(const std::vector<Camera>& cameras);

GaussianCloud init_from_points(const std::vector<std::pair<Vec3, Vec3>>& points,
                               const std::vector<Camera>& cameras, int sh_degree = 1);

// One bias-corrected adaptive update per parameter group. Frozen primitives
// are untouched; quaternions are renormalized afterwards.
void adam_step(GaussianCloud& cloud, const Gradients& grads, AdamState& state,
               const TrainConfig& cfg, const LearningRates& lrs);

// Clone/split/prune. Frozen primitives are never densified or pruned, which
// is what restricts refinement-time densification to the selected set.
// `state`, when given, is kept row-aligned with the cloud.
void densify_and_prune(GaussianCloud& cloud, DensifyStats& stats, const TrainConfig& cfg,
                       double extent, std::mt19937_64& rng, AdamState* state = nullptr);

TrainReport train(GaussianCloud& cloud, const std::vector<TrainView>& views,
                  const TrainConfig& cfg);

double psnr(const ImageBuffer& a, const ImageBuffer& b);

}  // namespace splat
