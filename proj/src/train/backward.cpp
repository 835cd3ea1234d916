#include "splat/train/backward.hpp"

#include <cmath>

#include "splat/core/covariance.hpp"
#include "splat/core/projection.hpp"
#include "splat/core/sh.hpp"
#include "splat/util/parallel.hpp"

namespace splat {

namespace {

// Splat-space adjoints accumulated over pixels in stage 1.
struct SplatGrad {
    Vec3 rgb = Vec3::Zero();
    double alpha = 0.0;  // w.r.t. the per-splat opacity value (post-sigmoid)
    Vec2 mean2d = Vec2::Zero();
    Mat2 inv_cov = Mat2::Zero();
};

}  // namespace

double scale_reg_loss(const GaussianCloud& cloud, const LossConfig& cfg) {
    if (cfg.scale_reg <= 0.0 || cloud.count == 0) return 0.0;
    double acc = 0.0;
    for (size_t i = 0; i < cloud.count; ++i)
        acc += cloud.log_scales[i].array().exp().square().sum();
    return cfg.scale_reg * acc / static_cast<double>(cloud.count);
}

Gradients backward(const RenderOutput& ro, const GaussianCloud& cloud, const Camera& camera,
                   const ImageBuffer& target, const MaskBuffer* mask, const LossConfig& cfg) {
    if (ro.image.width != camera.width || ro.image.height != camera.height)
        throw ConsistencyError("backward: render output does not match the camera");
    for (const Splat2D& s : ro.splats)
        if (s.source_index >= cloud.count)
            throw ConsistencyError("backward: blend log references a missing primitive");

    const int W = camera.width, H = camera.height;
    ImageBuffer dI = total_loss_image_grad(ro.image, target, mask, cfg);

    Gradients g;
    g.resize_like(cloud);

    // Stage 1: replay the blend per pixel and push adjoints down to the
    // per-splat 2D quantities. Tiles get private shards merged in tile order
    // so the reduction is deterministic at any thread count.
    const int ts = ro.options.tile_size;
    const int tiles_x = (W + ts - 1) / ts;
    const int tiles_y = (H + ts - 1) / ts;
    const size_t n_tiles = static_cast<size_t>(tiles_x) * tiles_y;

    std::vector<std::vector<SplatGrad>> shards(n_tiles);

    parallel_for(n_tiles, ro.options.threads, [&](size_t tile) {
        auto& shard = shards[tile];
        shard.assign(ro.splats.size(), SplatGrad{});
        const int tx = static_cast<int>(tile) % tiles_x;
        const int ty = static_cast<int>(tile) / tiles_x;
        const int px1 = std::min(W, (tx + 1) * ts), py1 = std::min(H, (ty + 1) * ts);

        std::vector<double> alphas, trans;
        for (int py = ty * ts; py < py1; ++py) {
            for (int px = tx * ts; px < px1; ++px) {
                const size_t pix = static_cast<size_t>(py) * W + px;
                const auto& log = ro.blend_log[pix];
                if (log.empty()) continue;
                const Vec3 dpix = dI.pixels[pix];
                if (dpix.isZero()) continue;

                const Vec2 x(px, py);
                alphas.clear();
                trans.clear();
                double T = 1.0;
                for (uint32_t si : log) {
                    double a = alpha_at_pixel(x, ro.splats[si]);
                    alphas.push_back(a);
                    trans.push_back(T);
                    T *= (1.0 - a);
                }

                Vec3 suffix = ro.options.background * T;
                for (size_t n = log.size(); n-- > 0;) {
                    const Splat2D& s = ro.splats[log[n]];
                    SplatGrad& sg = shard[log[n]];
                    const double a = alphas[n], Tn = trans[n];
                    const double w = a * Tn;

                    sg.rgb += dpix * w;
                    double da = dpix.dot(s.rgb * Tn - suffix / (1.0 - a));
                    suffix += s.rgb * w;

                    // alpha' = min(alpha * G, clamp); the clamp pins everything
                    Vec2 d = x - s.mean2d;
                    double G = std::exp(-0.5 * d.dot(s.inv_cov2d * d));
                    if (s.alpha * G >= kAlphaClamp) continue;
                    sg.alpha += da * G;
                    Vec2 md = s.inv_cov2d * d;
                    sg.mean2d += da * a * md;
                    sg.inv_cov += da * (-0.5 * a) * (d * d.transpose());
                }
            }
        }
    });

    std::vector<SplatGrad> sg(ro.splats.size());
    for (size_t t = 0; t < n_tiles; ++t) {
        for (size_t si = 0; si < ro.splats.size(); ++si) {
            sg[si].rgb += shards[t][si].rgb;
            sg[si].alpha += shards[t][si].alpha;
            sg[si].mean2d += shards[t][si].mean2d;
            sg[si].inv_cov += shards[t][si].inv_cov;
        }
        shards[t].clear();
        shards[t].shrink_to_fit();
    }

    // Stage 2: chain each splat's 2D adjoints back to the 3D parameters.
    const Vec3 cam_center = camera.center();
    const Mat3& Rwc = camera.world_to_camera_rotation;

    parallel_for(ro.splats.size(), ro.options.threads, [&](size_t si) {
        const Splat2D& s = ro.splats[si];
        const size_t i = s.source_index;
        if (cloud.frozen[i]) return;

        g.pos2d_grad_norm[i] += sg[si].mean2d.norm();

        // opacity
        double a = s.alpha;
        g.d_logit_opacity[i] += sg[si].alpha * a * (1.0 - a);

        // color: rgb = eval_sh(coeffs, normalize(mu - cam_center))
        Vec3 v = cloud.positions[i] - cam_center;
        double vn = v.norm();
        Vec3 dir = v / vn;
        Vec3 d_dir = Vec3::Zero();
        eval_sh_backward(cloud.sh_coeffs[i], dir, cloud.sh_degree, sg[si].rgb, g.d_sh[i], d_dir);
        g.d_position[i] += (d_dir - dir * dir.dot(d_dir)) / vn;

        // footprint: inv_cov -> cov2d -> (cov3, J) -> (log_scale, rotation, position)
        Mat2 dSigma2 = -s.inv_cov2d * sg[si].inv_cov * s.inv_cov2d;
        Vec3 t = world_to_camera(camera, cloud.positions[i]);
        Mat23 J = projection_jacobian(camera, t);
        Mat23 Tm = J * Rwc;
        Mat3 cov3 = covariance_3d(cloud.log_scales[i], cloud.rotations[i]);

        Mat3 dSigma3 = Tm.transpose() * dSigma2 * Tm;
        covariance_3d_backward(cloud.log_scales[i], cloud.rotations[i], dSigma3, g.d_log_scale[i],
                               g.d_rotation[i]);

        Mat23 dT = (dSigma2 + dSigma2.transpose()) * Tm * cov3;
        Mat23 dJ = dT * Rwc.transpose();
        Vec3 d_campoint = projection_jacobian_backward(camera, t, dJ);

        // center projection: mu' = project(t)
        d_campoint += J.transpose() * sg[si].mean2d;
        g.d_position[i] += Rwc.transpose() * d_campoint;
    });

    // scale regularizer
    if (cfg.scale_reg > 0.0 && cloud.count > 0) {
        double w = 2.0 * cfg.scale_reg / static_cast<double>(cloud.count);
        for (size_t i = 0; i < cloud.count; ++i)
            if (!cloud.frozen[i])
                g.d_log_scale[i] += w * (2.0 * cloud.log_scales[i]).array().exp().matrix();
    }

    // freeze contract: frozen primitives report exact zeros
    for (size_t i = 0; i < cloud.count; ++i) {
        if (!cloud.frozen[i]) continue;
        g.d_position[i].setZero();
        g.d_rotation[i].setZero();
        g.d_log_scale[i].setZero();
        g.d_logit_opacity[i] = 0.0;
        for (auto& c : g.d_sh[i]) c.setZero();
        g.pos2d_grad_norm[i] = 0.0;
    }
    return g;
}

}  // namespace splat
