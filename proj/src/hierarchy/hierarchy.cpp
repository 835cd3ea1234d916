#include "splat/hierarchy/hierarchy.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "splat/core/covariance.hpp"
#include "splat/core/projection.hpp"
#include "splat/core/sh.hpp"
#include "splat/io/image_io.hpp"

namespace splat {

using nlohmann::json;

ImageBuffer downsample_image(const ImageBuffer& image, int factor) {
    if (factor < 1) throw InputError("downsample_image: factor must be >= 1");
    if (factor == 1) return image;
    int W = image.width / factor, H = image.height / factor;
    if (W < 1 || H < 1) throw InputError("downsample_image: factor larger than the image");
    ImageBuffer out(W, H);
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            Vec3 acc = Vec3::Zero();
            for (int dy = 0; dy < factor; ++dy)
                for (int dx = 0; dx < factor; ++dx)
                    acc += image.at(x * factor + dx, y * factor + dy);
            out.at(x, y) = acc / (factor * factor);
        }
    return out;
}

Camera downsample_camera(const Camera& cam, int factor) {
    if (factor < 1) throw InputError("downsample_camera: factor must be >= 1");
    Camera out = cam;
    out.width = cam.width / factor;
    out.height = cam.height / factor;
    double f = static_cast<double>(factor);
    out.fx = cam.fx / f;
    out.fy = cam.fy / f;
    out.cx = cam.cx / f;
    out.cy = cam.cy / f;
    out.validate();
    return out;
}

std::vector<size_t> Selection::all_indices() const {
    std::vector<size_t> out = damage_indices;
    out.insert(out.end(), neighbor_indices.begin(), neighbor_indices.end());
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<double> render_median_depth(const GaussianCloud& cloud, const Camera& camera,
                                        const RenderOptions& options) {
    const int W = camera.width, H = camera.height;
    std::vector<double> depth(static_cast<size_t>(W) * H,
                              std::numeric_limits<double>::infinity());
    auto splats = project_and_cull(cloud, camera, options.blur);
    auto bins = tile_bin(splats, W, H, options.tile_size);
    const int tiles_x = (W + options.tile_size - 1) / options.tile_size;

    for (size_t tile = 0; tile < bins.size(); ++tile) {
        const int tx = static_cast<int>(tile) % tiles_x;
        const int ty = static_cast<int>(tile) / tiles_x;
        const int px1 = std::min(W, (tx + 1) * options.tile_size);
        const int py1 = std::min(H, (ty + 1) * options.tile_size);
        for (int py = ty * options.tile_size; py < py1; ++py)
            for (int px = tx * options.tile_size; px < px1; ++px) {
                double T = 1.0;
                for (uint32_t si : bins[tile]) {
                    double a = alpha_at_pixel(Vec2(px, py), splats[si]);
                    if (a <= 0.0) continue;
                    T *= (1.0 - a);
                    if (T < 0.5) {
                        depth[static_cast<size_t>(py) * W + px] = splats[si].depth;
                        break;
                    }
                }
            }
    }
    return depth;
}

std::vector<size_t> select_damage_gaussians(const GaussianCloud& cloud,
                                            const DamageClassSet& classes,
                                            const std::vector<MaskBuffer>& masks,
                                            const std::vector<Camera>& cameras,
                                            const SelectConfig& cfg,
                                            std::vector<uint8_t>* class_of) {
    if (masks.empty() || masks.size() != cameras.size())
        throw InputError("select_damage_gaussians: need one mask per view");
    const double extent = scene_extent(cameras);
    const double margin = cfg.occlusion_margin_fraction * extent;

    // mean training view direction per primitive
    std::vector<Vec3> mean_dirs(cloud.count, Vec3::Zero());
    for (const Camera& cam : cameras) {
        Vec3 c = cam.center();
        for (size_t i = 0; i < cloud.count; ++i)
            mean_dirs[i] += (cloud.positions[i] - c).normalized();
    }

    // color filter
    std::vector<uint8_t> color_label(cloud.count, 0);
    for (size_t i = 0; i < cloud.count; ++i) {
        Vec3 d = mean_dirs[i].norm() > 1e-12 ? Vec3(mean_dirs[i].normalized()) : Vec3(0, 0, 1);
        Vec3 rgb = eval_sh(cloud.sh_coeffs[i], d, cloud.sh_degree);
        double best = 1e300;
        for (size_t k = 0; k < classes.size(); ++k) {
            double dist = (rgb - classes.classes()[k].color).cwiseAbs().maxCoeff();
            if (dist <= classes.classes()[k].tolerance && dist < best) {
                best = dist;
                color_label[i] = static_cast<uint8_t>(k + 1);
            }
        }
    }

    // projection validation with the median-depth occlusion test
    std::vector<int> votes(cloud.count, 0);
    for (size_t v = 0; v < cameras.size(); ++v) {
        const Camera& cam = cameras[v];
        const MaskBuffer& mask = masks[v];
        if (mask.width != cam.width || mask.height != cam.height)
            throw InputError("select_damage_gaussians: mask does not match its camera");
        std::vector<double> med = render_median_depth(cloud, cam);

        for (size_t i = 0; i < cloud.count; ++i) {
            if (!color_label[i]) continue;
            Vec3 t = world_to_camera(cam, cloud.positions[i]);
            if (!(t[2] > kNearPlane)) continue;
            Vec2 p = project_point(cam, t);
            int px = static_cast<int>(std::lround(p[0]));
            int py = static_cast<int>(std::lround(p[1]));
            if (px < 0 || px >= cam.width || py < 0 || py >= cam.height) continue;
            if (t[2] > med[static_cast<size_t>(py) * cam.width + px] + margin) continue;

            bool hit = false;
            int d = cfg.mask_dilation_px;
            for (int dy = -d; dy <= d && !hit; ++dy)
                for (int dx = -d; dx <= d && !hit; ++dx) {
                    int qx = px + dx, qy = py + dy;
                    if (qx < 0 || qx >= mask.width || qy < 0 || qy >= mask.height) continue;
                    if (mask.at(qx, qy) == color_label[i]) hit = true;
                }
            if (hit) votes[i] += 1;
        }
    }

    std::vector<size_t> out;
    if (class_of) class_of->clear();
    for (size_t i = 0; i < cloud.count; ++i) {
        if (color_label[i] && votes[i] >= cfg.v_min) {
            out.push_back(i);
            if (class_of) class_of->push_back(color_label[i]);
        }
    }
    return out;
}

double neighbor_r0(const GaussianCloud& cloud, const std::vector<size_t>& seeds) {
    if (seeds.empty()) throw InputError("neighbor_r0: empty seed set");
    std::vector<double> scales;
    scales.reserve(seeds.size());
    for (size_t i : seeds) scales.push_back(cloud.log_scales[i].array().exp().mean());
    size_t mid = scales.size() / 2;
    std::nth_element(scales.begin(), scales.begin() + mid, scales.end());
    return 2.0 * scales[mid];
}

std::vector<size_t> expand_neighbors(const GaussianCloud& cloud, const std::vector<size_t>& seeds,
                                     size_t k_min, double r0, double extent) {
    if (seeds.empty()) throw InputError("expand_neighbors: empty seed set");
    std::vector<uint8_t> is_seed(cloud.count, 0);
    for (size_t s : seeds) is_seed[s] = 1;

    // distance from each non-seed primitive to the nearest seed
    std::vector<double> dist(cloud.count, std::numeric_limits<double>::infinity());
    for (size_t i = 0; i < cloud.count; ++i) {
        if (is_seed[i]) continue;
        for (size_t s : seeds)
            dist[i] = std::min(dist[i], (cloud.positions[i] - cloud.positions[s]).norm());
    }

    double r = r0;
    while (true) {
        size_t inside = 0;
        for (size_t i = 0; i < cloud.count; ++i)
            if (!is_seed[i] && dist[i] <= r) ++inside;
        if (inside >= k_min || r > extent) break;
        r *= 2.0;
    }

    std::vector<size_t> out;
    for (size_t i = 0; i < cloud.count; ++i)
        if (!is_seed[i] && dist[i] <= r) out.push_back(i);
    return out;
}

namespace {

// Monotone chain; returns the hull in counter-clockwise order.
std::vector<Vec2> convex_hull(std::vector<Vec2> pts) {
    std::sort(pts.begin(), pts.end(), [](const Vec2& a, const Vec2& b) {
        return a[0] != b[0] ? a[0] < b[0] : a[1] < b[1];
    });
    pts.erase(std::unique(pts.begin(), pts.end(),
                          [](const Vec2& a, const Vec2& b) { return a == b; }),
              pts.end());
    if (pts.size() < 3) return pts;
    auto cross = [](const Vec2& o, const Vec2& a, const Vec2& b) {
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
    };
    std::vector<Vec2> hull(2 * pts.size());
    size_t k = 0;
    for (const Vec2& p : pts) {
        while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 0) --k;
        hull[k++] = p;
    }
    size_t lower = k + 1;
    for (size_t i = pts.size() - 1; i-- > 0;) {
        while (k >= lower && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
        hull[k++] = pts[i];
    }
    hull.resize(k - 1);
    return hull;
}

double point_segment_dist(const Vec2& p, const Vec2& a, const Vec2& b) {
    Vec2 ab = b - a;
    double t = ab.squaredNorm() > 0 ? (p - a).dot(ab) / ab.squaredNorm() : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    return (p - (a + t * ab)).norm();
}

bool inside_convex(const Vec2& p, const std::vector<Vec2>& hull) {
    for (size_t i = 0; i < hull.size(); ++i) {
        const Vec2& a = hull[i];
        const Vec2& b = hull[(i + 1) % hull.size()];
        double c = (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]);
        if (c < 0) return false;  // CCW hull: inside is left of every edge
    }
    return true;
}

void euclidean_dilate(MaskBuffer& m, int d) {
    if (d <= 0) return;
    MaskBuffer src = m;
    std::vector<std::pair<int, int>> offs;
    for (int dy = -d; dy <= d; ++dy)
        for (int dx = -d; dx <= d; ++dx)
            if (dx * dx + dy * dy <= d * d) offs.emplace_back(dx, dy);
    for (int y = 0; y < m.height; ++y)
        for (int x = 0; x < m.width; ++x) {
            if (!src.at(x, y)) continue;
            for (auto [dx, dy] : offs) {
                int qx = x + dx, qy = y + dy;
                if (qx >= 0 && qx < m.width && qy >= 0 && qy < m.height) m.at(qx, qy) = 1;
            }
        }
}

}  // namespace

MaskBuffer hull_mask(const GaussianCloud& cloud, const std::vector<size_t>& selection,
                     const Camera& camera, int dilation_px) {
    MaskBuffer mask(camera.width, camera.height);

    std::vector<Vec2> pts;
    bool any_in_frame = false;
    for (size_t i : selection) {
        Vec3 t = world_to_camera(camera, cloud.positions[i]);
        if (!(t[2] > kNearPlane)) continue;
        Vec2 c = project_point(camera, t);
        if (c[0] >= 0 && c[0] <= camera.width - 1 && c[1] >= 0 && c[1] <= camera.height - 1)
            any_in_frame = true;
        pts.push_back(c);

        // 2-sigma extremal points of the projected ellipse
        Mat23 J = projection_jacobian(camera, t);
        Mat3 cov3 = covariance_3d(cloud.log_scales[i], cloud.rotations[i]);
        Mat2 cov2 = project_covariance(J, camera.world_to_camera_rotation, cov3, 0.0);
        Eigen::SelfAdjointEigenSolver<Mat2> eig(cov2);
        for (int k = 0; k < 2; ++k) {
            double lambda = std::max(0.0, eig.eigenvalues()[k]);
            Vec2 axis = eig.eigenvectors().col(k) * 2.0 * std::sqrt(lambda);
            pts.push_back(c + axis);
            pts.push_back(c - axis);
        }
    }
    if (pts.empty() || !any_in_frame) return mask;

    std::vector<Vec2> hull = convex_hull(pts);
    if (hull.empty()) return mask;

    if (hull.size() == 1) {
        // degenerate: single point -> dilated disk
        for (int y = 0; y < mask.height; ++y)
            for (int x = 0; x < mask.width; ++x)
                if ((Vec2(x, y) - hull[0]).norm() <= dilation_px) mask.at(x, y) = 1;
        if (dilation_px == 0) {
            int px = static_cast<int>(std::lround(hull[0][0]));
            int py = static_cast<int>(std::lround(hull[0][1]));
            if (px >= 0 && px < mask.width && py >= 0 && py < mask.height) mask.at(px, py) = 1;
        }
        return mask;
    }
    if (hull.size() == 2) {
        // degenerate: collinear points -> dilated segment
        for (int y = 0; y < mask.height; ++y)
            for (int x = 0; x < mask.width; ++x)
                if (point_segment_dist(Vec2(x, y), hull[0], hull[1]) <= std::max(dilation_px, 0))
                    mask.at(x, y) = 1;
        return mask;
    }

    double min_x = 1e300, max_x = -1e300, min_y = 1e300, max_y = -1e300;
    for (const Vec2& p : hull) {
        min_x = std::min(min_x, p[0]);
        max_x = std::max(max_x, p[0]);
        min_y = std::min(min_y, p[1]);
        max_y = std::max(max_y, p[1]);
    }
    int x0 = std::max(0, static_cast<int>(std::floor(min_x)));
    int x1 = std::min(mask.width - 1, static_cast<int>(std::ceil(max_x)));
    int y0 = std::max(0, static_cast<int>(std::floor(min_y)));
    int y1 = std::min(mask.height - 1, static_cast<int>(std::ceil(max_y)));
    for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x)
            if (inside_convex(Vec2(x, y), hull)) mask.at(x, y) = 1;

    euclidean_dilate(mask, dilation_px);
    return mask;
}

TrainReport refine(GaussianCloud& cloud, const Selection& selection,
                   const std::vector<TrainView>& views, const TrainConfig& cfg, RefineMode mode) {
    if (selection.damage_indices.empty() && selection.neighbor_indices.empty())
        throw InputError("refine: empty selection");
    for (const TrainView& v : views)
        if (!selection.hull_masks.count(v.camera.id))
            throw InputError("refine: no hull mask for view '" + v.camera.id + "'");

    std::vector<uint8_t> saved_frozen = cloud.frozen;
    std::fill(cloud.frozen.begin(), cloud.frozen.end(), 1);
    for (size_t i : selection.damage_indices) {
        if (i >= cloud.count) throw InputError("refine: selection index out of range");
        cloud.frozen[i] = 0;
    }
    for (size_t i : selection.neighbor_indices) {
        if (i >= cloud.count) throw InputError("refine: selection index out of range");
        cloud.frozen[i] = 0;
    }
    // original flags of the rows that stay frozen, in row order; retrain may
    // remove or append selected rows, but frozen rows survive in order
    std::vector<uint8_t> nonselected_saved;
    for (size_t i = 0; i < cloud.count; ++i)
        if (cloud.frozen[i]) nonselected_saved.push_back(saved_frozen[i]);

    std::vector<TrainView> masked_views;
    masked_views.reserve(views.size());
    for (const TrainView& v : views) {
        TrainView mv = v;
        mv.loss_mask = &selection.hull_masks.at(v.camera.id);
        masked_views.push_back(mv);
    }

    TrainConfig rcfg = cfg;
    if (mode == RefineMode::finetune) {
        rcfg.densify_start = rcfg.iterations + 1;  // count invariant
        rcfg.densify_end = rcfg.iterations + 1;
    } else {
        rcfg.densify_interval = 100;
        rcfg.densify_start = std::min(rcfg.densify_start, 100);
        rcfg.densify_end = rcfg.iterations;
    }

    TrainReport report = train(cloud, masked_views, rcfg);

    // selection rows (and their children) end unfrozen; frozen rows map back
    // one-to-one onto their saved flags
    size_t next = 0;
    for (size_t i = 0; i < cloud.count; ++i)
        cloud.frozen[i] = cloud.frozen[i] ? nonselected_saved.at(next++) : 0;
    if (next != nonselected_saved.size())
        throw ConsistencyError("refine: frozen primitives changed during refinement");
    return report;
}

void save_selection(const Selection& sel, const std::string& json_path,
                    const std::string& mask_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(mask_dir);

    json j;
    j["damage_indices"] = sel.damage_indices;
    j["damage_class_of"] = sel.damage_class_of;
    j["neighbor_indices"] = sel.neighbor_indices;
    j["hull_masks"] = json::object();
    int idx = 0;
    for (const auto& [cam_id, mask] : sel.hull_masks) {
        std::string file = "hull_" + std::to_string(idx++) + ".png";
        std::string path = (fs::path(mask_dir) / file).string();
        ImageBuffer img(mask.width, mask.height);
        for (size_t i = 0; i < mask.labels.size(); ++i)
            if (mask.labels[i]) img.pixels[i] = Vec3::Ones();
        save_image(img, path);
        j["hull_masks"][cam_id] = path;
    }
    std::ofstream out(json_path);
    if (!out) throw InputError("save_selection: cannot open '" + json_path + "'");
    out << j.dump(2) << '\n';
}

Selection load_selection(const std::string& json_path) {
    std::ifstream in(json_path);
    if (!in) throw ParseError("load_selection: cannot open '" + json_path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    json j;
    try {
        j = json::parse(ss.str());
    } catch (const json::exception& e) {
        throw ParseError(std::string("load_selection: ") + e.what());
    }
    Selection sel;
    try {
        sel.damage_indices = j.at("damage_indices").get<std::vector<size_t>>();
        if (j.contains("damage_class_of"))
            sel.damage_class_of = j.at("damage_class_of").get<std::vector<uint8_t>>();
        sel.neighbor_indices = j.at("neighbor_indices").get<std::vector<size_t>>();
        for (auto& [cam_id, path] : j.at("hull_masks").items()) {
            ImageBuffer img = load_image(path.get<std::string>());
            MaskBuffer mask(img.width, img.height);
            for (size_t i = 0; i < img.size(); ++i)
                mask.labels[i] = img.pixels[i].mean() > 0.5 ? 1 : 0;
            sel.hull_masks[cam_id] = std::move(mask);
        }
    } catch (const json::exception& e) {
        throw ParseError(std::string("load_selection: ") + e.what());
    }
    return sel;
}

}  // namespace splat
