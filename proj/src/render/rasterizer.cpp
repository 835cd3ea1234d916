#include "splat/render/rasterizer.hpp"

#include <algorithm>
#include <cmath>

#include "splat/core/covariance.hpp"
#include "splat/core/projection.hpp"
#include "splat/core/sh.hpp"
#include "splat/util/parallel.hpp"

namespace splat {

namespace {

double major_eigenvalue(const Mat2& cov2) {
    double mid = 0.5 * (cov2(0, 0) + cov2(1, 1));
    double det = cov2(0, 0) * cov2(1, 1) - cov2(0, 1) * cov2(1, 0);
    double disc = std::sqrt(std::max(0.0, mid * mid - det));
    return mid + disc;
}

// Screen-space radius: 3 sigma along the major axis.
double screen_radius(const Mat2& cov2) {
    return 3.0 * std::sqrt(std::max(0.0, major_eigenvalue(cov2)));
}

// Radius beyond which alpha' provably falls under the contribution floor.
// Binning with this bound makes tile truncation agree with alpha_at_pixel
// exactly, so renders are independent of the tile size.
double support_radius(const Splat2D& s) {
    if (s.alpha < kAlphaFloor) return -1.0;
    double lambda_max = std::max(0.0, major_eigenvalue(s.cov2d));
    return std::sqrt(lambda_max * 2.0 * std::log(s.alpha / kAlphaFloor));
}

}  // namespace

std::vector<Splat2D> project_and_cull(const GaussianCloud& cloud, const Camera& camera,
                                      double blur) {
    std::vector<Splat2D> out;
    out.reserve(cloud.count);
    const Vec3 cam_center = camera.center();
    for (size_t i = 0; i < cloud.count; ++i) {
        Vec3 t = world_to_camera(camera, cloud.positions[i]);
        if (!(t[2] > kNearPlane)) continue;

        Mat23 J = projection_jacobian(camera, t);
        Mat3 cov3 = covariance_3d(cloud.log_scales[i], cloud.rotations[i]);
        Mat2 cov2 = project_covariance(J, camera.world_to_camera_rotation, cov3, blur);
        double det = cov2(0, 0) * cov2(1, 1) - cov2(0, 1) * cov2(1, 0);
        if (!(det > 1e-12)) continue;

        Vec2 mean2d = project_point(camera, t);
        double r = screen_radius(cov2);
        if (mean2d[0] + r < 0 || mean2d[0] - r > camera.width - 1 || mean2d[1] + r < 0 ||
            mean2d[1] - r > camera.height - 1)
            continue;

        Splat2D s;
        s.mean2d = mean2d;
        s.cov2d = cov2;
        s.inv_cov2d << cov2(1, 1) / det, -cov2(0, 1) / det, -cov2(1, 0) / det, cov2(0, 0) / det;
        s.depth = t[2];
        Vec3 view_dir = (cloud.positions[i] - cam_center).normalized();
        s.rgb = eval_sh(cloud.sh_coeffs[i], view_dir, cloud.sh_degree);
        s.alpha = sigmoid(cloud.logit_opacities[i]);
        s.source_index = static_cast<uint32_t>(i);
        out.push_back(s);
    }
    return out;
}

std::vector<std::vector<uint32_t>> tile_bin(const std::vector<Splat2D>& splats, int width,
                                            int height, int tile_size) {
    if (tile_size < 1) throw InputError("tile_bin: tile_size must be >= 1");
    const int tiles_x = (width + tile_size - 1) / tile_size;
    const int tiles_y = (height + tile_size - 1) / tile_size;
    std::vector<std::vector<uint32_t>> bins(static_cast<size_t>(tiles_x) * tiles_y);

    for (uint32_t si = 0; si < splats.size(); ++si) {
        const Splat2D& s = splats[si];
        double r = support_radius(s);
        if (r < 0.0) continue;
        int x0 = std::clamp(static_cast<int>(std::floor((s.mean2d[0] - r) / tile_size)), 0,
                            tiles_x - 1);
        int x1 = std::clamp(static_cast<int>(std::floor((s.mean2d[0] + r) / tile_size)), 0,
                            tiles_x - 1);
        int y0 = std::clamp(static_cast<int>(std::floor((s.mean2d[1] - r) / tile_size)), 0,
                            tiles_y - 1);
        int y1 = std::clamp(static_cast<int>(std::floor((s.mean2d[1] + r) / tile_size)), 0,
                            tiles_y - 1);
        for (int ty = y0; ty <= y1; ++ty)
            for (int tx = x0; tx <= x1; ++tx)
                bins[static_cast<size_t>(ty) * tiles_x + tx].push_back(si);
    }
    for (auto& bin : bins) {
        std::sort(bin.begin(), bin.end(), [&](uint32_t a, uint32_t b) {
            if (splats[a].depth != splats[b].depth) return splats[a].depth < splats[b].depth;
            return splats[a].source_index < splats[b].source_index;
        });
    }
    return bins;
}

double alpha_at_pixel(const Vec2& x, const Splat2D& splat) {
    Vec2 d = x - splat.mean2d;
    double maha = d.dot(splat.inv_cov2d * d);
    double a = splat.alpha * std::exp(-0.5 * maha);
    a = std::min(a, kAlphaClamp);
    return a < kAlphaFloor ? 0.0 : a;
}

std::pair<Vec3, double> composite_pixel(const std::vector<std::pair<Vec3, double>>& contributors) {
    Vec3 color = Vec3::Zero();
    double transmittance = 1.0;
    for (const auto& [rgb, a] : contributors) {
        if (transmittance < kTransmittanceCutoff) break;
        color += rgb * a * transmittance;
        transmittance *= (1.0 - a);
    }
    return {color, transmittance};
}

RenderOutput render(const GaussianCloud& cloud, const Camera& camera,
                    const RenderOptions& options) {
    camera.validate();
    const int W = camera.width, H = camera.height;

    RenderOutput out;
    out.options = options;
    out.image = ImageBuffer(W, H, options.background);
    out.final_transmittance.assign(static_cast<size_t>(W) * H, 1.0);
    out.blend_log.assign(static_cast<size_t>(W) * H, {});
    out.splats = project_and_cull(cloud, camera, options.blur);

    auto bins = tile_bin(out.splats, W, H, options.tile_size);
    const int tiles_x = (W + options.tile_size - 1) / options.tile_size;

    parallel_for(bins.size(), options.threads, [&](size_t tile) {
        const auto& bin = bins[tile];
        const int tx = static_cast<int>(tile) % tiles_x;
        const int ty = static_cast<int>(tile) / tiles_x;
        const int px0 = tx * options.tile_size, px1 = std::min(W, px0 + options.tile_size);
        const int py0 = ty * options.tile_size, py1 = std::min(H, py0 + options.tile_size);

        for (int py = py0; py < py1; ++py) {
            for (int px = px0; px < px1; ++px) {
                const size_t pix = static_cast<size_t>(py) * W + px;
                const Vec2 x(px, py);
                Vec3 color = Vec3::Zero();
                double T = 1.0;
                auto& log = out.blend_log[pix];
                for (uint32_t si : bin) {
                    if (options.early_termination && T < kTransmittanceCutoff) break;
                    double a = alpha_at_pixel(x, out.splats[si]);
                    if (a <= 0.0) continue;
                    color += out.splats[si].rgb * a * T;
                    T *= (1.0 - a);
                    log.push_back(si);
                }
                out.image.pixels[pix] = color + options.background * T;
                out.final_transmittance[pix] = T;
            }
        }
    });
    return out;
}

}  // namespace splat
