#include "splat/train/optimizer.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>

#include <json.hpp>

#include "splat/core/covariance.hpp"

namespace splat {

using nlohmann::json;

void TrainConfig::validate() const {
    if (iterations < 0) throw InputError("TrainConfig: negative iterations");
    if (adam_beta1 <= 0 || adam_beta1 >= 1 || adam_beta2 <= 0 || adam_beta2 >= 1)
        throw InputError("TrainConfig: betas must lie in (0,1)");
    if (densify_interval <= 0 || densify_grad_threshold <= 0 || split_scale_threshold <= 0 ||
        prune_opacity_threshold <= 0)
        throw InputError("TrainConfig: thresholds must be positive");
    if (sh_degree < 0 || sh_degree > 3) throw InputError("TrainConfig: sh_degree must be 0..3");
    loss.validate();
}

namespace {

template <typename T>
void get_if(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

std::string TrainConfig::to_json() const {
    json j;
    j["iterations"] = iterations;
    j["lr_position"] = lr_position;
    j["lr_rotation"] = lr_rotation;
    j["lr_log_scale"] = lr_log_scale;
    j["lr_logit_opacity"] = lr_logit_opacity;
    j["lr_sh"] = lr_sh;
    j["adam_beta1"] = adam_beta1;
    j["adam_beta2"] = adam_beta2;
    j["adam_eps"] = adam_eps;
    j["densify_interval"] = densify_interval;
    j["densify_grad_threshold"] = densify_grad_threshold;
    j["split_scale_threshold"] = split_scale_threshold;
    j["prune_opacity_threshold"] = prune_opacity_threshold;
    j["prune_scale_fraction"] = prune_scale_fraction;
    j["densify_start"] = densify_start;
    j["densify_end"] = densify_end;
    j["opacity_reset_interval"] = opacity_reset_interval;
    j["seed"] = seed;
    j["background"] = {background[0], background[1], background[2]};
    j["tile_size"] = tile_size;
    j["threads"] = threads;
    j["sh_degree"] = sh_degree;
    j["log_interval"] = log_interval;
    j["loss"] = {{"lambda_ssim", loss.lambda_ssim}, {"ssim_window", loss.ssim_window},
                 {"ssim_sigma", loss.ssim_sigma},   {"ssim_c1", loss.ssim_c1},
                 {"ssim_c2", loss.ssim_c2},         {"scale_reg", loss.scale_reg}};
    return j.dump(2);
}

TrainConfig TrainConfig::from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ParseError(std::string("TrainConfig: ") + e.what());
    }
    TrainConfig c;
    try {
        get_if(j, "iterations", c.iterations);
        get_if(j, "lr_position", c.lr_position);
        get_if(j, "lr_rotation", c.lr_rotation);
        get_if(j, "lr_log_scale", c.lr_log_scale);
        get_if(j, "lr_logit_opacity", c.lr_logit_opacity);
        get_if(j, "lr_sh", c.lr_sh);
        get_if(j, "adam_beta1", c.adam_beta1);
        get_if(j, "adam_beta2", c.adam_beta2);
        get_if(j, "adam_eps", c.adam_eps);
        get_if(j, "densify_interval", c.densify_interval);
        get_if(j, "densify_grad_threshold", c.densify_grad_threshold);
        get_if(j, "split_scale_threshold", c.split_scale_threshold);
        get_if(j, "prune_opacity_threshold", c.prune_opacity_threshold);
        get_if(j, "prune_scale_fraction", c.prune_scale_fraction);
        get_if(j, "densify_start", c.densify_start);
        get_if(j, "densify_end", c.densify_end);
        get_if(j, "opacity_reset_interval", c.opacity_reset_interval);
        get_if(j, "seed", c.seed);
        get_if(j, "tile_size", c.tile_size);
        get_if(j, "threads", c.threads);
        get_if(j, "sh_degree", c.sh_degree);
        get_if(j, "log_interval", c.log_interval);
        if (j.contains("background")) {
            auto b = j.at("background");
            c.background = Vec3(b.at(0).get<double>(), b.at(1).get<double>(), b.at(2).get<double>());
        }
        if (j.contains("loss")) {
            const json& l = j.at("loss");
            get_if(l, "lambda_ssim", c.loss.lambda_ssim);
            get_if(l, "ssim_window", c.loss.ssim_window);
            get_if(l, "ssim_sigma", c.loss.ssim_sigma);
            get_if(l, "ssim_c1", c.loss.ssim_c1);
            get_if(l, "ssim_c2", c.loss.ssim_c2);
            get_if(l, "scale_reg", c.loss.scale_reg);
        }
    } catch (const json::exception& e) {
        throw ParseError(std::string("TrainConfig: ") + e.what());
    }
    c.validate();
    return c;
}

LearningRates resolve_lrs(const TrainConfig& cfg, double scene_extent, int iteration) {
    double t = cfg.iterations > 1
                   ? static_cast<double>(iteration) / static_cast<double>(cfg.iterations)
                   : 0.0;
    double decay = std::exp(t * std::log(0.01));  // to 1% over the schedule
    return LearningRates{cfg.lr_position * scene_extent * decay, cfg.lr_rotation,
                         cfg.lr_log_scale, cfg.lr_logit_opacity, cfg.lr_sh};
}

void AdamState::resize_like(const GaussianCloud& cloud) {
    const size_t n = cloud.count;
    m_pos.assign(n, Vec3::Zero());
    v_pos.assign(n, Vec3::Zero());
    m_scale.assign(n, Vec3::Zero());
    v_scale.assign(n, Vec3::Zero());
    m_rot.assign(n, Vec4::Zero());
    v_rot.assign(n, Vec4::Zero());
    m_op.assign(n, 0.0);
    v_op.assign(n, 0.0);
    m_sh.assign(n, std::vector<Vec3>(cloud.sh_terms(), Vec3::Zero()));
    v_sh.assign(n, std::vector<Vec3>(cloud.sh_terms(), Vec3::Zero()));
}

void AdamState::check_shapes(const GaussianCloud& cloud) const {
    if (m_pos.size() != cloud.count || m_sh.size() != cloud.count)
        throw ConsistencyError("AdamState: shape mismatch with the cloud");
}

void DensifyStats::resize_like(const GaussianCloud& cloud) {
    accum_norm.assign(cloud.count, 0.0);
    seen.assign(cloud.count, 0);
    accum_pos_grad.assign(cloud.count, Vec3::Zero());
}

void DensifyStats::accumulate(const Gradients& g, const RenderOutput& ro) {
    if (g.pos2d_grad_norm.size() != accum_norm.size())
        throw ConsistencyError("DensifyStats: shape mismatch");
    for (size_t i = 0; i < accum_norm.size(); ++i) {
        accum_norm[i] += g.pos2d_grad_norm[i];
        accum_pos_grad[i] += g.d_position[i];
    }
    for (const Splat2D& s : ro.splats) seen[s.source_index] += 1;
}

void DensifyStats::reset() {
    std::fill(accum_norm.begin(), accum_norm.end(), 0.0);
    std::fill(seen.begin(), seen.end(), 0);
    std::fill(accum_pos_grad.begin(), accum_pos_grad.end(), Vec3::Zero());
}

double scene_extent(const std::vector<Camera>& cameras) {
    if (cameras.empty()) return 1.0;
    Vec3 centroid = Vec3::Zero();
    for (const Camera& c : cameras) centroid += c.center();
    centroid /= static_cast<double>(cameras.size());
    double r = 0.0;
    for (const Camera& c : cameras) r = std::max(r, (c.center() - centroid).norm());
    return r > 0.0 ? r : 1.0;
}

GaussianCloud init_from_points(const std::vector<std::pair<Vec3, Vec3>>& points,
                               const std::vector<Camera>& cameras, int sh_degree) {
    if (points.empty()) throw InputError("init_from_points: empty point set");
    const double extent = scene_extent(cameras);
    constexpr double kC0 = 0.28209479177387814;

    GaussianCloud cloud;
    cloud.sh_degree = sh_degree;
    cloud.resize(points.size());

    for (size_t i = 0; i < points.size(); ++i) {
        cloud.positions[i] = points[i].first;
        // mean distance to the 3 nearest neighbors, clamped
        std::array<double, 3> best = {1e300, 1e300, 1e300};
        for (size_t jx = 0; jx < points.size(); ++jx) {
            if (jx == i) continue;
            double d = (points[jx].first - points[i].first).norm();
            if (d < best[2]) {
                best[2] = d;
                std::sort(best.begin(), best.end());
            }
        }
        double mean_d = 0.0;
        int have = 0;
        for (double d : best)
            if (d < 1e300) {
                mean_d += d;
                ++have;
            }
        double scale = have > 0 ? mean_d / have : 1e-4;
        scale = std::clamp(scale, 1e-4, extent);
        cloud.log_scales[i] = Vec3::Constant(std::log(scale));
        cloud.logit_opacities[i] = logit(0.1);
        cloud.sh_coeffs[i][0] = (points[i].second.array() - 0.5) / kC0;
    }
    return cloud;
}

namespace {

inline double adam_update(double g, double& m, double& v, double lr, const TrainConfig& cfg,
                          double bc1, double bc2) {
    m = cfg.adam_beta1 * m + (1.0 - cfg.adam_beta1) * g;
    v = cfg.adam_beta2 * v + (1.0 - cfg.adam_beta2) * g * g;
    double mh = m / bc1, vh = v / bc2;
    return -lr * mh / (std::sqrt(vh) + cfg.adam_eps);
}

}  // namespace

void adam_step(GaussianCloud& cloud, const Gradients& grads, AdamState& state,
               const TrainConfig& cfg, const LearningRates& lrs) {
    state.check_shapes(cloud);
    if (grads.d_position.size() != cloud.count)
        throw ConsistencyError("adam_step: gradient shape mismatch");
    state.timestep += 1;
    const double bc1 = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(state.timestep));
    const double bc2 = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(state.timestep));

    for (size_t i = 0; i < cloud.count; ++i) {
        if (cloud.frozen[i]) continue;
        for (int k = 0; k < 3; ++k) {
            cloud.positions[i][k] += adam_update(grads.d_position[i][k], state.m_pos[i][k],
                                                 state.v_pos[i][k], lrs.position, cfg, bc1, bc2);
            cloud.log_scales[i][k] += adam_update(grads.d_log_scale[i][k], state.m_scale[i][k],
                                                  state.v_scale[i][k], lrs.log_scale, cfg, bc1, bc2);
        }
        for (int k = 0; k < 4; ++k)
            cloud.rotations[i][k] += adam_update(grads.d_rotation[i][k], state.m_rot[i][k],
                                                 state.v_rot[i][k], lrs.rotation, cfg, bc1, bc2);
        cloud.logit_opacities[i] += adam_update(grads.d_logit_opacity[i], state.m_op[i],
                                                state.v_op[i], lrs.logit_opacity, cfg, bc1, bc2);
        for (size_t t = 0; t < cloud.sh_terms(); ++t)
            for (int k = 0; k < 3; ++k)
                cloud.sh_coeffs[i][t][k] +=
                    adam_update(grads.d_sh[i][t][k], state.m_sh[i][t][k], state.v_sh[i][t][k],
                                lrs.sh, cfg, bc1, bc2);
        double n = cloud.rotations[i].norm();
        cloud.rotations[i] = n > 1e-12 ? Vec4(cloud.rotations[i] / n) : Vec4(1, 0, 0, 0);
    }
}

void densify_and_prune(GaussianCloud& cloud, DensifyStats& stats, const TrainConfig& cfg,
                       double extent, std::mt19937_64& rng, AdamState* state) {
    if (stats.accum_norm.size() != cloud.count)
        throw ConsistencyError("densify_and_prune: stats shape mismatch");

    const size_t n0 = cloud.count;
    std::vector<size_t> to_remove;
    std::normal_distribution<double> gauss(0.0, 1.0);

    auto append_state_row = [&](size_t) {
        if (!state) return;
        state->m_pos.push_back(Vec3::Zero());
        state->v_pos.push_back(Vec3::Zero());
        state->m_scale.push_back(Vec3::Zero());
        state->v_scale.push_back(Vec3::Zero());
        state->m_rot.push_back(Vec4::Zero());
        state->v_rot.push_back(Vec4::Zero());
        state->m_op.push_back(0.0);
        state->v_op.push_back(0.0);
        state->m_sh.emplace_back(cloud.sh_terms(), Vec3::Zero());
        state->v_sh.emplace_back(cloud.sh_terms(), Vec3::Zero());
    };

    for (size_t i = 0; i < n0; ++i) {
        if (cloud.frozen[i]) continue;

        double mean_norm = stats.seen[i] > 0 ? stats.accum_norm[i] / stats.seen[i] : 0.0;
        double max_scale = cloud.log_scales[i].array().exp().maxCoeff();

        if (opacity_of(cloud, i) < cfg.prune_opacity_threshold ||
            max_scale > cfg.prune_scale_fraction * extent) {
            to_remove.push_back(i);
            continue;
        }
        if (mean_norm <= cfg.densify_grad_threshold) continue;

        if (max_scale < cfg.split_scale_threshold * extent) {
            // clone, offset along the accumulated descent direction
            cloud.append_from(cloud, i);
            append_state_row(i);
            Vec3 gdir = stats.accum_pos_grad[i];
            if (gdir.norm() > 1e-12) {
                double step = cloud.log_scales[i].array().exp().mean();
                cloud.positions.back() -= gdir.normalized() * step;
            }
        } else {
            // split: two children sampled from the parent, scales shrunk by 1.6
            Mat3 R = quat_to_rotation(cloud.rotations[i]);
            Vec3 s = cloud.log_scales[i].array().exp();
            for (int child = 0; child < 2; ++child) {
                cloud.append_from(cloud, i);
                append_state_row(i);
                Vec3 z(gauss(rng), gauss(rng), gauss(rng));
                cloud.positions.back() = cloud.positions[i] + R * (s.cwiseProduct(z));
                cloud.log_scales.back() =
                    cloud.log_scales[i] - Vec3::Constant(std::log(1.6));
            }
            to_remove.push_back(i);
        }
    }

    cloud.remove_indices(to_remove);
    if (state && !to_remove.empty()) {
        auto drop = [&](auto& vec) {
            size_t w = 0, r = 0, d = 0;
            for (r = 0; r < vec.size(); ++r) {
                if (d < to_remove.size() && to_remove[d] == r) {
                    ++d;
                    continue;
                }
                if (w != r) vec[w] = std::move(vec[r]);
                ++w;
            }
            vec.resize(w);
        };
        drop(state->m_pos);
        drop(state->v_pos);
        drop(state->m_scale);
        drop(state->v_scale);
        drop(state->m_rot);
        drop(state->v_rot);
        drop(state->m_op);
        drop(state->v_op);
        drop(state->m_sh);
        drop(state->v_sh);
    }
    stats.resize_like(cloud);
}

double psnr(const ImageBuffer& a, const ImageBuffer& b) {
    if (!a.same_dims(b)) throw InputError("psnr: dimension mismatch");
    double mse = 0.0;
    for (size_t i = 0; i < a.size(); ++i) mse += (a.pixels[i] - b.pixels[i]).squaredNorm();
    mse /= (3.0 * a.size());
    if (mse <= 0.0) return std::numeric_limits<double>::infinity();
    return -10.0 * std::log10(mse);
}

TrainReport train(GaussianCloud& cloud, const std::vector<TrainView>& views,
                  const TrainConfig& cfg) {
    cfg.validate();
    if (views.empty()) throw InputError("train: at least one view required");
    for (const TrainView& v : views) {
        v.camera.validate();
        if (v.target.width != v.camera.width || v.target.height != v.camera.height)
            throw InputError("train: target does not match its camera dimensions");
    }

    std::vector<Camera> cameras;
    cameras.reserve(views.size());
    for (const TrainView& v : views) cameras.push_back(v.camera);
    const double extent = scene_extent(cameras);

    RenderOptions ropt;
    ropt.tile_size = cfg.tile_size;
    ropt.background = cfg.background;
    ropt.threads = cfg.threads;

    AdamState state;
    state.resize_like(cloud);
    DensifyStats stats;
    stats.resize_like(cloud);

    std::mt19937_64 rng(cfg.seed);
    std::vector<size_t> order(views.size());
    std::iota(order.begin(), order.end(), 0);
    size_t order_pos = order.size();  // forces a shuffle on first use

    TrainReport report;
    auto t0 = std::chrono::steady_clock::now();

    for (int it = 1; it <= cfg.iterations; ++it) {
        if (order_pos >= order.size()) {
            std::shuffle(order.begin(), order.end(), rng);
            order_pos = 0;
        }
        const TrainView& view = views[order[order_pos++]];

        RenderOutput ro = render(cloud, view.camera, ropt);
        Gradients g = backward(ro, cloud, view.camera, view.target, view.loss_mask, cfg.loss);
        stats.accumulate(g, ro);
        adam_step(cloud, g, state, cfg, resolve_lrs(cfg, extent, it - 1));

        if (cfg.log_interval > 0 && (it % cfg.log_interval == 0 || it == cfg.iterations)) {
            double l = total_loss(ro.image, view.target, view.loss_mask, cfg.loss) +
                       scale_reg_loss(cloud, cfg.loss);
            report.entries.push_back(
                {it, l, cloud.count, std::numeric_limits<double>::quiet_NaN()});
        }

        if (it >= cfg.densify_start && it <= cfg.densify_end && it % cfg.densify_interval == 0) {
            densify_and_prune(cloud, stats, cfg, extent, rng, &state);
        }
        if (cfg.opacity_reset_interval > 0 && it % cfg.opacity_reset_interval == 0) {
            double cap = logit(0.01);
            for (size_t i = 0; i < cloud.count; ++i)
                if (!cloud.frozen[i])
                    cloud.logit_opacities[i] = std::min(cloud.logit_opacities[i], cap);
        }
    }

    // final PSNR over training views
    double acc = 0.0;
    for (const TrainView& v : views) {
        RenderOutput ro = render(cloud, v.camera, ropt);
        acc += psnr(ro.image, v.target);
    }
    report.final_psnr = acc / views.size();
    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return report;
}

std::string TrainReport::to_json() const {
    json j;
    j["wall_seconds"] = wall_seconds;
    j["final_psnr"] = final_psnr;
    j["entries"] = json::array();
    for (const auto& e : entries) {
        json je = {{"iteration", e.iteration},
                   {"loss", e.loss},
                   {"primitive_count", e.primitive_count}};
        if (!std::isnan(e.psnr)) je["psnr"] = e.psnr;
        j["entries"].push_back(je);
    }
    return j.dump(2);
}

}  // namespace splat
