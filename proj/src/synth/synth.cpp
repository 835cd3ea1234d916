#include "splat/synth/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "splat/core/projection.hpp"
#include "splat/io/image_io.hpp"

namespace splat {

using nlohmann::json;
namespace fs = std::filesystem;

bool point_in_polygon(const Vec2& p, const std::vector<Vec2>& poly) {
    bool inside = false;
    const size_t n = poly.size();
    for (size_t i = 0, j = n - 1; i < n; j = i++) {
        const Vec2& a = poly[i];
        const Vec2& b = poly[j];
        if ((a[1] > p[1]) != (b[1] > p[1]) &&
            p[0] < (b[0] - a[0]) * (p[1] - a[1]) / (b[1] - a[1]) + a[0])
            inside = !inside;
    }
    return inside;
}

DamagePolygon rect_polygon(const std::string& class_name, double x0, double y0, double x1,
                           double y1) {
    return {class_name, {Vec2(x0, y0), Vec2(x1, y0), Vec2(x1, y1), Vec2(x0, y1)}};
}

DamagePolygon polyline_polygon(const std::string& class_name, const std::vector<Vec2>& points,
                               double width) {
    if (points.size() < 2) throw InputError("polyline_polygon: need at least two points");
    if (width <= 0) throw InputError("polyline_polygon: width must be positive");
    const size_t n = points.size();
    std::vector<Vec2> normals(n);
    for (size_t i = 0; i < n; ++i) {
        Vec2 d = Vec2::Zero();
        if (i > 0) d += (points[i] - points[i - 1]).normalized();
        if (i + 1 < n) d += (points[i + 1] - points[i]).normalized();
        if (d.norm() < 1e-12) d = Vec2(1, 0);
        d.normalize();
        normals[i] = Vec2(-d[1], d[0]);
    }
    DamagePolygon poly;
    poly.class_name = class_name;
    for (size_t i = 0; i < n; ++i) poly.vertices.push_back(points[i] + normals[i] * width / 2);
    for (size_t i = n; i-- > 0;) poly.vertices.push_back(points[i] - normals[i] * width / 2);
    return poly;
}

void SynthSpec::validate() const {
    if (facade_width <= 0 || facade_height <= 0) throw ConfigError("SynthSpec: facade dims");
    if (palette_cells_x < 1 || palette_cells_y < 1) throw ConfigError("SynthSpec: palette cells");
    if (gaussians_x < 2 || gaussians_y < 2) throw ConfigError("SynthSpec: gaussian grid");
    if (camera_count < 2) throw ConfigError("SynthSpec: at least two cameras required");
    if (ring_radius <= 0) throw ConfigError("SynthSpec: ring radius");
    if (arc_degrees <= 0 || arc_degrees > 180) throw ConfigError("SynthSpec: arc degrees");
    if (image_width < 8 || image_height < 8) throw ConfigError("SynthSpec: image resolution");
    DamageClassSet set(classes);  // validates separation
    for (const DamagePolygon& p : damage) {
        if (p.vertices.size() < 3)
            throw ConfigError("SynthSpec: polygon needs at least three vertices");
        if (set.label_of(p.class_name) < 0)
            throw ConfigError("SynthSpec: unknown damage class '" + p.class_name + "'");
        for (const Vec2& v : p.vertices)
            if (v[0] < 0 || v[0] > facade_width || v[1] < 0 || v[1] > facade_height)
                throw ConfigError("SynthSpec: polygon leaves the facade");
    }
}

SynthSpec SynthSpec::with_default_damage(uint64_t seed) {
    SynthSpec s;
    s.seed = seed;
    double w = s.facade_width, h = s.facade_height;
    s.damage.push_back(rect_polygon("spalling", 0.22 * w, 0.25 * h, 0.40 * w, 0.45 * h));
    s.damage.push_back(polyline_polygon(
        "crack",
        {Vec2(0.55 * w, 0.30 * h), Vec2(0.62 * w, 0.45 * h), Vec2(0.58 * w, 0.60 * h),
         Vec2(0.68 * w, 0.75 * h)},
        0.03 * std::min(w, h)));
    return s;
}

namespace {

json polygon_to_json(const DamagePolygon& p) {
    json jp;
    jp["class"] = p.class_name;
    jp["vertices"] = json::array();
    for (const Vec2& v : p.vertices) jp["vertices"].push_back({v[0], v[1]});
    return jp;
}

DamagePolygon polygon_from_json(const json& jp) {
    DamagePolygon p;
    p.class_name = jp.at("class").get<std::string>();
    for (const auto& v : jp.at("vertices"))
        p.vertices.emplace_back(v.at(0).get<double>(), v.at(1).get<double>());
    return p;
}

}  // namespace

std::string SynthSpec::to_json() const {
    json j;
    j["facade_width"] = facade_width;
    j["facade_height"] = facade_height;
    j["palette_cells_x"] = palette_cells_x;
    j["palette_cells_y"] = palette_cells_y;
    j["gaussians_x"] = gaussians_x;
    j["gaussians_y"] = gaussians_y;
    j["classes"] = json::parse(DamageClassSet(classes).to_json());
    j["damage"] = json::array();
    for (const DamagePolygon& p : damage) j["damage"].push_back(polygon_to_json(p));
    j["camera_count"] = camera_count;
    j["ring_radius"] = ring_radius;
    j["ring_height_range"] = ring_height_range;
    j["arc_degrees"] = arc_degrees;
    j["image_width"] = image_width;
    j["image_height"] = image_height;
    j["seed"] = seed;
    return j.dump(2);
}

SynthSpec SynthSpec::from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ParseError(std::string("SynthSpec: ") + e.what());
    }
    SynthSpec s;
    auto get_if = [&](const char* key, auto& out) {
        if (j.contains(key)) out = j.at(key).get<std::decay_t<decltype(out)>>();
    };
    try {
        get_if("facade_width", s.facade_width);
        get_if("facade_height", s.facade_height);
        get_if("palette_cells_x", s.palette_cells_x);
        get_if("palette_cells_y", s.palette_cells_y);
        get_if("gaussians_x", s.gaussians_x);
        get_if("gaussians_y", s.gaussians_y);
        get_if("camera_count", s.camera_count);
        get_if("ring_radius", s.ring_radius);
        get_if("ring_height_range", s.ring_height_range);
        get_if("arc_degrees", s.arc_degrees);
        get_if("image_width", s.image_width);
        get_if("image_height", s.image_height);
        get_if("seed", s.seed);
        if (j.contains("classes"))
            s.classes = DamageClassSet::from_json(j.at("classes").dump()).classes();
        if (j.contains("damage")) {
            s.damage.clear();
            for (const auto& jp : j.at("damage")) s.damage.push_back(polygon_from_json(jp));
        }
    } catch (const json::exception& e) {
        throw ParseError(std::string("SynthSpec: ") + e.what());
    }
    s.validate();
    return s;
}

namespace {

struct FacadeModel {
    const SynthSpec& spec;
    DamageClassSet classes;
    std::vector<Vec3> palette;                     // cell colors
    std::vector<const DamagePolygon*> polys;       // active damage set
    std::vector<uint8_t> poly_label;

    Vec3 base_color(double x, double y) const {
        int cx = std::clamp(static_cast<int>(x / spec.facade_width * spec.palette_cells_x), 0,
                            spec.palette_cells_x - 1);
        int cy = std::clamp(static_cast<int>(y / spec.facade_height * spec.palette_cells_y), 0,
                            spec.palette_cells_y - 1);
        return palette[static_cast<size_t>(cy) * spec.palette_cells_x + cx];
    }

    uint8_t label_at(double x, double y) const {
        for (size_t i = 0; i < polys.size(); ++i)
            if (point_in_polygon(Vec2(x, y), polys[i]->vertices)) return poly_label[i];
        return 0;
    }

    Vec3 composited_color(double x, double y) const {
        uint8_t l = label_at(x, y);
        return l ? classes.at_label(l).color : base_color(x, y);
    }
};

FacadeModel make_facade(const SynthSpec& spec, const std::vector<DamagePolygon>& polys) {
    FacadeModel f{spec, DamageClassSet(spec.classes), {}, {}, {}};
    std::mt19937_64 rng(spec.seed);
    std::uniform_real_distribution<double> ur(0.25, 0.55), ug(0.30, 0.55), ub(0.25, 0.55);
    const size_t cells = static_cast<size_t>(spec.palette_cells_x) * spec.palette_cells_y;
    for (size_t c = 0; c < cells; ++c) {
        Vec3 col;
        bool ok = false;
        for (int attempt = 0; attempt < 100 && !ok; ++attempt) {
            col = Vec3(ur(rng), ug(rng), ub(rng));
            ok = true;
            for (const DamageClass& dc : spec.classes)
                if ((col - dc.color).cwiseAbs().maxCoeff() < 0.4) ok = false;
        }
        if (!ok)
            throw ConfigError("SynthSpec: cannot keep the palette 0.4 away from class colors");
        f.palette.push_back(col);
    }
    for (const DamagePolygon& p : polys) {
        f.polys.push_back(&p);
        f.poly_label.push_back(static_cast<uint8_t>(f.classes.label_of(p.class_name)));
    }
    return f;
}

Camera ring_camera(const SynthSpec& spec, double angle_rad, double height_offset,
                   const std::string& id) {
    Vec3 C(spec.facade_width / 2, spec.facade_height / 2, 0.0);
    Vec3 eye = C + spec.ring_radius * Vec3(std::sin(angle_rad), 0.0, -std::cos(angle_rad)) +
               Vec3(0.0, height_offset, 0.0);
    Vec3 fwd = (C - eye).normalized();
    Vec3 right = Vec3(0, 1, 0).cross(fwd).normalized();
    Vec3 down = fwd.cross(right);

    Camera cam;
    cam.id = id;
    cam.width = spec.image_width;
    cam.height = spec.image_height;
    double f = 0.85 * std::min(spec.image_width * spec.ring_radius / spec.facade_width,
                               spec.image_height * spec.ring_radius / spec.facade_height);
    cam.fx = cam.fy = f;
    cam.cx = spec.image_width / 2.0;
    cam.cy = spec.image_height / 2.0;
    cam.world_to_camera_rotation.row(0) = right.transpose();
    cam.world_to_camera_rotation.row(1) = down.transpose();
    cam.world_to_camera_rotation.row(2) = fwd.transpose();
    cam.world_to_camera_translation = -cam.world_to_camera_rotation * eye;
    cam.validate();
    return cam;
}

std::vector<Camera> camera_ring(const SynthSpec& spec, int count, double angle_offset_rad,
                                const std::string& prefix) {
    std::vector<Camera> cams;
    double arc = spec.arc_degrees * M_PI / 180.0;
    for (int i = 0; i < count; ++i) {
        double t = count > 1 ? static_cast<double>(i) / (count - 1) : 0.5;
        double angle = -arc / 2 + t * arc + angle_offset_rad;
        // alternate above and below the ring mid-height
        double hfrac = count > 1 ? (i % 2 == 0 ? -0.5 : 0.5) * (1.0 - t * 0.5) : 0.0;
        char name[64];
        std::snprintf(name, sizeof(name), "%s%03d", prefix.c_str(), i);
        cams.push_back(ring_camera(spec, angle, hfrac * spec.ring_height_range, name));
    }
    return cams;
}

// ray through the pixel center onto the facade plane z = 0
bool facade_hit(const Camera& cam, int px, int py, Vec2& out) {
    Vec3 dir_cam((px - cam.cx) / cam.fx, (py - cam.cy) / cam.fy, 1.0);
    Vec3 dir = cam.world_to_camera_rotation.transpose() * dir_cam;
    Vec3 origin = cam.center();
    if (std::abs(dir[2]) < 1e-15) return false;
    double t = -origin[2] / dir[2];
    if (t <= kNearPlane) return false;
    Vec3 q = origin + t * dir;
    out = Vec2(q[0], q[1]);
    return true;
}

void render_analytic(const FacadeModel& f, const Camera& cam, ImageBuffer& original,
                     ImageBuffer& target, MaskBuffer& mask) {
    original = ImageBuffer(cam.width, cam.height);
    target = ImageBuffer(cam.width, cam.height);
    mask = MaskBuffer(cam.width, cam.height);
    const SynthSpec& spec = f.spec;
    for (int py = 0; py < cam.height; ++py)
        for (int px = 0; px < cam.width; ++px) {
            Vec2 q;
            if (!facade_hit(cam, px, py, q)) continue;
            if (q[0] < 0 || q[0] > spec.facade_width || q[1] < 0 || q[1] > spec.facade_height)
                continue;
            Vec3 base = f.base_color(q[0], q[1]);
            uint8_t l = f.label_at(q[0], q[1]);
            original.at(px, py) = base;
            target.at(px, py) = l ? f.classes.at_label(l).color : base;
            mask.at(px, py) = l;
        }
}

GaussianCloud facade_cloud(const FacadeModel& f) {
    const SynthSpec& spec = f.spec;
    constexpr double kC0 = 0.28209479177387814;
    const double sx = spec.facade_width / spec.gaussians_x;
    const double sy = spec.facade_height / spec.gaussians_y;

    GaussianCloud cloud;
    cloud.sh_degree = 0;
    cloud.resize(static_cast<size_t>(spec.gaussians_x) * spec.gaussians_y);
    size_t i = 0;
    for (int gy = 0; gy < spec.gaussians_y; ++gy)
        for (int gx = 0; gx < spec.gaussians_x; ++gx, ++i) {
            double x = (gx + 0.5) * sx, y = (gy + 0.5) * sy;
            cloud.positions[i] = Vec3(x, y, 0.0);
            cloud.log_scales[i] =
                Vec3(std::log(sx / 2), std::log(sy / 2), std::log(std::min(sx, sy) / 20));
            cloud.rotations[i] = Vec4(1, 0, 0, 0);
            cloud.logit_opacities[i] = logit(0.95);
            uint8_t l = f.label_at(x, y);
            cloud.damage_label[i] = l;
            cloud.sh_coeffs[i][0] = (f.composited_color(x, y).array() - 0.5) / kC0;
        }
    return cloud;
}

bool segments_intersect(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& d) {
    auto cross = [](const Vec2& u, const Vec2& v) { return u[0] * v[1] - u[1] * v[0]; };
    double d1 = cross(b - a, c - a), d2 = cross(b - a, d - a);
    double d3 = cross(d - c, a - c), d4 = cross(d - c, b - c);
    return ((d1 > 0) != (d2 > 0)) && ((d3 > 0) != (d4 > 0));
}

bool polygons_overlap(const std::vector<Vec2>& a, const std::vector<Vec2>& b) {
    for (const Vec2& v : a)
        if (point_in_polygon(v, b)) return true;
    for (const Vec2& v : b)
        if (point_in_polygon(v, a)) return true;
    for (size_t i = 0; i < a.size(); ++i)
        for (size_t j = 0; j < b.size(); ++j)
            if (segments_intersect(a[i], a[(i + 1) % a.size()], b[j], b[(j + 1) % b.size()]))
                return true;
    return false;
}

}  // namespace

SynthScene generate_scene(const SynthSpec& spec) {
    spec.validate();
    SynthScene scene;
    scene.spec = spec;

    FacadeModel f = make_facade(scene.spec, scene.spec.damage);
    scene.classes = f.classes;
    scene.cameras = camera_ring(scene.spec, scene.spec.camera_count, 0.0, "img_");

    scene.originals.resize(scene.cameras.size());
    scene.targets.resize(scene.cameras.size());
    scene.masks.resize(scene.cameras.size());
    for (size_t v = 0; v < scene.cameras.size(); ++v)
        render_analytic(f, scene.cameras[v], scene.originals[v], scene.targets[v],
                        scene.masks[v]);

    scene.gt_cloud = facade_cloud(f);

    // sparse stand-in for the SfM point cloud: every other grid point, with
    // the undamaged facade appearance
    const double sx = spec.facade_width / spec.gaussians_x;
    const double sy = spec.facade_height / spec.gaussians_y;
    for (int gy = 0; gy < spec.gaussians_y; gy += 2)
        for (int gx = 0; gx < spec.gaussians_x; gx += 2) {
            double x = (gx + 0.5) * sx, y = (gy + 0.5) * sy;
            scene.points.emplace_back(Vec3(x, y, 0.0), f.base_color(x, y));
        }
    return scene;
}

void add_progression(SynthScene& scene, const std::vector<DamagePolygon>& new_polygons,
                     int new_camera_count) {
    if (new_camera_count < 1) throw InputError("add_progression: need at least one new view");
    SynthSpec extended = scene.spec;
    for (const DamagePolygon& p : new_polygons) {
        for (const DamagePolygon& old : extended.damage)
            if (polygons_overlap(p.vertices, old.vertices))
                throw ConfigError("add_progression: new polygon overlaps existing damage");
        extended.damage.push_back(p);
    }
    extended.validate();

    FacadeModel f = make_facade(extended, extended.damage);
    scene.new_cameras = camera_ring(extended, new_camera_count,
                                    0.5 * extended.arc_degrees * M_PI / 180.0 /
                                        std::max(1, extended.camera_count - 1),
                                    "new_");
    scene.new_originals.resize(scene.new_cameras.size());
    scene.new_targets.resize(scene.new_cameras.size());
    scene.new_masks.resize(scene.new_cameras.size());
    for (size_t v = 0; v < scene.new_cameras.size(); ++v)
        render_analytic(f, scene.new_cameras[v], scene.new_originals[v], scene.new_targets[v],
                        scene.new_masks[v]);

    scene.spec = extended;
}

void emit_dataset(const SynthScene& scene, const std::string& dir) {
    fs::create_directories(fs::path(dir) / "colmap");
    fs::create_directories(fs::path(dir) / "images");
    fs::create_directories(fs::path(dir) / "masks");

    SparseModel model;
    int next_id = 1;
    auto add_view = [&](const Camera& cam) {
        ColmapCamera cc;
        cc.id = next_id;
        cc.width = cam.width;
        cc.height = cam.height;
        cc.fx = cam.fx;
        cc.fy = cam.fy;
        cc.cx = cam.cx;
        cc.cy = cam.cy;
        model.cameras[cc.id] = cc;

        ColmapImage im;
        im.id = next_id;
        im.camera_id = next_id;
        im.name = cam.id + ".png";
        Quat q(cam.world_to_camera_rotation);
        im.rotation = Vec4(q.w(), q.x(), q.y(), q.z());
        im.translation = cam.world_to_camera_translation;
        model.images.push_back(im);
        ++next_id;
    };
    for (const Camera& cam : scene.cameras) add_view(cam);
    for (const Camera& cam : scene.new_cameras) add_view(cam);
    model.points = scene.points;
    write_colmap_text(model, (fs::path(dir) / "colmap").string());

    auto emit_views = [&](const std::vector<Camera>& cams, const std::vector<ImageBuffer>& imgs,
                          const std::vector<MaskBuffer>& msks) {
        for (size_t v = 0; v < cams.size(); ++v) {
            save_image(imgs[v], (fs::path(dir) / "images" / (cams[v].id + ".png")).string());
            save_mask(msks[v], scene.classes,
                      (fs::path(dir) / "masks" / (cams[v].id + ".png")).string());
        }
    };
    emit_views(scene.cameras, scene.originals, scene.masks);
    emit_views(scene.new_cameras, scene.new_originals, scene.new_masks);

    std::ofstream cj(fs::path(dir) / "classes.json");
    cj << scene.classes.to_json() << '\n';

    if (!scene.new_cameras.empty()) {
        json manifest;
        manifest["new_images"] = json::array();
        for (const Camera& cam : scene.new_cameras)
            manifest["new_images"].push_back(cam.id + ".png");
        std::ofstream mj(fs::path(dir) / "new_survey.json");
        mj << manifest.dump(2) << '\n';
    }
}

}  // namespace splat
