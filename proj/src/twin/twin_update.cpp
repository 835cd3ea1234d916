#include "splat/twin/twin_update.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "splat/core/projection.hpp"

namespace splat {

using nlohmann::json;

std::map<std::string, MaskBuffer> render_segmentation_views(const GaussianCloud& cloud,
                                                            const std::vector<Camera>& cameras,
                                                            const DamageClassSet& classes,
                                                            const RenderOptions& options) {
    std::map<std::string, MaskBuffer> out;
    for (const Camera& cam : cameras) {
        cam.validate();
        if (out.count(cam.id))
            throw InputError("render_segmentation_views: duplicate camera id '" + cam.id + "'");
        RenderOutput ro = render(cloud, cam, options);
        out.emplace(cam.id, extract_mask(ro.image, classes));
    }
    return out;
}

namespace {

// boolean disk dilation by radius d (Euclidean)
std::vector<uint8_t> dilate_bool(const std::vector<uint8_t>& src, int w, int h, int d) {
    if (d <= 0) return src;
    std::vector<uint8_t> out(src.size(), 0);
    std::vector<std::pair<int, int>> offs;
    for (int dy = -d; dy <= d; ++dy)
        for (int dx = -d; dx <= d; ++dx)
            if (dx * dx + dy * dy <= d * d) offs.emplace_back(dx, dy);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            if (!src[static_cast<size_t>(y) * w + x]) continue;
            for (auto [dx, dy] : offs) {
                int qx = x + dx, qy = y + dy;
                if (qx >= 0 && qx < w && qy >= 0 && qy < h)
                    out[static_cast<size_t>(qy) * w + qx] = 1;
            }
        }
    return out;
}

}  // namespace

MaskBuffer diff_masks(const MaskBuffer& new_mask, const MaskBuffer& rendered_old,
                      size_t n_classes, int tolerance_px, size_t* shrinkage_pixels) {
    if (!new_mask.same_dims(rendered_old)) throw InputError("diff_masks: dimension mismatch");
    if (n_classes == 0 || n_classes > 120)
        throw InputError("diff_masks: class count must lie in [1,120]");
    if (tolerance_px < 0) throw InputError("diff_masks: negative tolerance");
    const int W = new_mask.width, H = new_mask.height;
    const size_t N = new_mask.labels.size();

    MaskBuffer out(W, H);
    if (shrinkage_pixels) *shrinkage_pixels = 0;

    std::vector<uint8_t> any_new_dilated(N, 0);
    {
        std::vector<uint8_t> any_new(N, 0);
        for (size_t i = 0; i < N; ++i) any_new[i] = new_mask.labels[i] != 0;
        any_new_dilated = dilate_bool(any_new, W, H, tolerance_px);
    }

    for (size_t k = 1; k <= n_classes; ++k) {
        std::vector<uint8_t> old_k(N, 0), new_k(N, 0);
        bool any_old = false, any_new = false;
        for (size_t i = 0; i < N; ++i) {
            uint8_t ol = rendered_old.labels[i];
            old_k[i] = (ol == k || ol == kAnyDamage);
            new_k[i] = new_mask.labels[i] == k;
            any_old |= old_k[i] != 0;
            any_new |= new_k[i] != 0;
        }
        if (!any_old && !any_new) continue;

        std::vector<uint8_t> old_dilated = dilate_bool(old_k, W, H, tolerance_px);
        for (size_t i = 0; i < N; ++i) {
            if (!new_k[i]) continue;
            out.labels[i] = old_dilated[i] ? static_cast<uint8_t>(k)
                                           : static_cast<uint8_t>(n_classes + k);
        }
        if (shrinkage_pixels) {
            for (size_t i = 0; i < N; ++i) {
                uint8_t ol = rendered_old.labels[i];
                // kAnyDamage is counted against damage of any class below
                if (ol == k && !any_new_dilated[i] && new_mask.labels[i] != k)
                    *shrinkage_pixels += 1;
            }
        }
    }
    if (shrinkage_pixels) {
        for (size_t i = 0; i < N; ++i)
            if (rendered_old.labels[i] == kAnyDamage && !any_new_dilated[i])
                *shrinkage_pixels += 1;
    }
    return out;
}

ImageBuffer recolor_progression(const ImageBuffer& image, const MaskBuffer& progression,
                                size_t n_classes, const Vec3& preexisting_color,
                                const Vec3& new_color) {
    if (!progression.same_dims(image))
        throw InputError("recolor_progression: dimension mismatch");
    // the two-class set enforces the color-collision contract
    DamageClassSet colors({{"preexisting", preexisting_color}, {"new", new_color}});

    ImageBuffer out = image;
    for (size_t i = 0; i < out.size(); ++i) {
        uint8_t l = progression.labels[i];
        if (l == 0) continue;
        out.pixels[i] = progression_is_new(l, n_classes) ? new_color : preexisting_color;
    }
    return out;
}

void prepare_plan(UpdatePlan& plan, const GaussianCloud& cloud, const DamageClassSet& classes,
                  const UpdateConfig& cfg) {
    if (plan.new_views.empty()) throw InputError("prepare_plan: no new views");
    if (classes.size() == 0) throw InputError("prepare_plan: empty class set");

    for (const NewView& v : plan.new_views) {
        v.camera.validate();
        if (v.image.width != v.camera.width || v.image.height != v.camera.height ||
            !v.mask.same_dims(v.image))
            throw InputError("prepare_plan: view '" + v.camera.id +
                             "' image/mask/camera dimensions disagree");
        for (uint8_t l : v.mask.labels)
            if (l > classes.size())
                throw InputError("prepare_plan: view '" + v.camera.id +
                                 "' mask uses an unknown class label");
    }

    for (const NewView& v : plan.new_views) {
        const std::string& id = v.camera.id;
        if (!plan.rendered_masks.count(id)) {
            RenderOutput ro = render(cloud, v.camera, cfg.render);
            MaskBuffer m = extract_mask(ro.image, classes);
            // damage recolored by an earlier update pass matches no original
            // class; tag it so the diff treats it as existing damage
            for (size_t i = 0; i < m.labels.size(); ++i) {
                if (m.labels[i]) continue;
                const Vec3& px = ro.image.pixels[i];
                if ((px - cfg.preexisting_color).cwiseAbs().maxCoeff() <= cfg.recolor_tolerance ||
                    (px - cfg.new_color).cwiseAbs().maxCoeff() <= cfg.recolor_tolerance)
                    m.labels[i] = kAnyDamage;
            }
            plan.rendered_masks.emplace(id, std::move(m));
        }
        if (!plan.progression_masks.count(id)) {
            size_t shrink = 0;
            plan.progression_masks.emplace(
                id, diff_masks(v.mask, plan.rendered_masks.at(id), classes.size(),
                               cfg.diff_tolerance_px, &shrink));
            plan.shrinkage_pixels[id] = shrink;
        }
    }
}

namespace {

// projection-validated vote for primitives under newly detected damage; no
// color filter, these primitives still carry the pre-damage appearance
std::vector<size_t> select_new_damage(const GaussianCloud& cloud, const UpdatePlan& plan,
                                      size_t n_classes, const UpdateConfig& cfg, double extent,
                                      std::vector<uint8_t>& class_out) {
    std::vector<int> votes(cloud.count, 0);
    std::vector<uint8_t> cls(cloud.count, 0);
    const double margin = cfg.select.occlusion_margin_fraction * extent;

    for (const NewView& v : plan.new_views) {
        const Camera& cam = v.camera;
        const MaskBuffer& prog = plan.progression_masks.at(cam.id);
        std::vector<double> med = render_median_depth(cloud, cam, cfg.render);

        for (size_t i = 0; i < cloud.count; ++i) {
            Vec3 t = world_to_camera(cam, cloud.positions[i]);
            if (!(t[2] > kNearPlane)) continue;
            Vec2 p = project_point(cam, t);
            int px = static_cast<int>(std::lround(p[0]));
            int py = static_cast<int>(std::lround(p[1]));
            if (px < 0 || px >= cam.width || py < 0 || py >= cam.height) continue;
            if (t[2] > med[static_cast<size_t>(py) * cam.width + px] + margin) continue;

            int d = cfg.select.mask_dilation_px;
            for (int dy = -d; dy <= d; ++dy) {
                bool hit = false;
                for (int dx = -d; dx <= d; ++dx) {
                    int qx = px + dx, qy = py + dy;
                    if (qx < 0 || qx >= prog.width || qy < 0 || qy >= prog.height) continue;
                    uint8_t l = prog.at(qx, qy);
                    if (progression_is_new(l, n_classes)) {
                        votes[i] += 1;
                        if (!cls[i]) cls[i] = progression_class(l, n_classes);
                        hit = true;
                        break;
                    }
                }
                if (hit) break;
            }
        }
    }

    std::vector<size_t> out;
    for (size_t i = 0; i < cloud.count; ++i)
        if (votes[i] >= cfg.select.v_min) {
            out.push_back(i);
            class_out.push_back(cls[i]);
        }
    return out;
}

}  // namespace

UpdateReport update_model(GaussianCloud& cloud, UpdatePlan& plan, const DamageClassSet& classes,
                          const TrainConfig& train_cfg, RefineMode mode,
                          const UpdateConfig& cfg) {
    for (const DamageClass& c : classes.classes())
        if ((cfg.new_color - c.color).cwiseAbs().maxCoeff() <= c.tolerance + cfg.recolor_tolerance)
            throw ConfigError("update_model: new-damage color collides with class '" + c.name +
                              "'");
    prepare_plan(plan, cloud, classes, cfg);
    const size_t K = classes.size();

    UpdateReport report;
    report.shrinkage_pixels = plan.shrinkage_pixels;
    for (const auto& [id, prog] : plan.progression_masks)
        for (uint8_t l : prog.labels)
            if (progression_is_new(l, K)) report.new_damage_pixels += 1;

    if (report.new_damage_pixels == 0) {
        report.no_op = true;  // nothing new: the old model already covers the survey
        return report;
    }

    std::vector<Camera> cams;
    std::vector<MaskBuffer> preexisting_masks;
    for (const NewView& v : plan.new_views) {
        cams.push_back(v.camera);
        const MaskBuffer& prog = plan.progression_masks.at(v.camera.id);
        MaskBuffer pre(prog.width, prog.height);
        for (size_t i = 0; i < prog.labels.size(); ++i) {
            uint8_t l = prog.labels[i];
            if (l != 0 && !progression_is_new(l, K)) pre.labels[i] = l;
        }
        preexisting_masks.push_back(std::move(pre));
    }

    const double extent = scene_extent(cams);
    Selection sel;
    std::vector<uint8_t> pre_class;
    std::vector<size_t> pre_idx =
        select_damage_gaussians(cloud, classes, preexisting_masks, cams, cfg.select, &pre_class);
    std::vector<uint8_t> new_class;
    std::vector<size_t> new_idx = select_new_damage(cloud, plan, K, cfg, extent, new_class);

    std::vector<uint8_t> in_sel(cloud.count, 0);
    for (size_t j = 0; j < pre_idx.size(); ++j) {
        sel.damage_indices.push_back(pre_idx[j]);
        sel.damage_class_of.push_back(pre_class[j]);
        in_sel[pre_idx[j]] = 1;
    }
    for (size_t j = 0; j < new_idx.size(); ++j) {
        if (in_sel[new_idx[j]]) continue;
        sel.damage_indices.push_back(new_idx[j]);
        sel.damage_class_of.push_back(new_class[j]);
        in_sel[new_idx[j]] = 1;
    }
    if (sel.damage_indices.empty())
        throw ConsistencyError(
            "update_model: new damage detected but no primitives project into it");

    double r0 = cfg.neighbor_r0_fraction > 0 ? cfg.neighbor_r0_fraction * extent
                                             : neighbor_r0(cloud, sel.damage_indices);
    sel.neighbor_indices =
        expand_neighbors(cloud, sel.damage_indices, cfg.neighbor_k_min, std::max(1e-9, r0),
                         extent);

    std::vector<size_t> all = sel.all_indices();
    for (const Camera& cam : cams)
        sel.hull_masks[cam.id] = hull_mask(cloud, all, cam, cfg.hull_dilation_px);

    for (size_t j = 0; j < sel.damage_indices.size(); ++j)
        cloud.damage_label[sel.damage_indices[j]] = sel.damage_class_of[j];

    std::vector<TrainView> views;
    views.reserve(plan.new_views.size());
    for (const NewView& v : plan.new_views) {
        TrainView tv;
        tv.camera = v.camera;
        tv.target = recolor_progression(v.image, plan.progression_masks.at(v.camera.id), K,
                                        cfg.preexisting_color, cfg.new_color);
        views.push_back(std::move(tv));
    }

    report.refine_report = refine(cloud, sel, views, train_cfg, mode);
    report.selection = std::move(sel);
    return report;
}

std::string UpdateReport::to_json() const {
    json j;
    j["no_op"] = no_op;
    j["new_damage_pixels"] = new_damage_pixels;
    j["shrinkage_pixels"] = shrinkage_pixels;
    j["selected_damage"] = selection.damage_indices.size();
    j["selected_neighbors"] = selection.neighbor_indices.size();
    if (!no_op) j["refine"] = json::parse(refine_report.to_json());
    return j.dump(2);
}

}  // namespace splat
