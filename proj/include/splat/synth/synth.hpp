#pragma once

#include <string>
#include <vector>

#include "splat/core/camera.hpp"
#include "splat/core/gaussian_cloud.hpp"
#include "splat/damage/damage.hpp"
#include "splat/io/colmap.hpp"

namespace splat {

// Planar polygon on the facade (z = 0 plane, facade-local x/y in world units).
struct DamagePolygon {
    std::string class_name;
    std::vector<Vec2> vertices;
};

struct SynthSpec {
    double facade_width = 4.0;
    double facade_height = 3.0;
    int palette_cells_x = 8;
    int palette_cells_y = 6;
    int gaussians_x = 48;
    int gaussians_y = 36;

    std::vector<DamageClass> classes = {{"spalling", Vec3(1, 0, 0), 0.15},
                                        {"crack", Vec3(0, 0, 1), 0.15}};
    std::vector<DamagePolygon> damage;

    int camera_count = 12;
    double ring_radius = 5.0;
    double ring_height_range = 0.6;
    double arc_degrees = 70.0;
    int image_width = 96;
    int image_height = 96;
    uint64_t seed = 1;

    void validate() const;
    std::string to_json() const;
    static SynthSpec from_json(const std::string& text);

    // a spalling blob plus a thin crack polyline, sized to the facade
    static SynthSpec with_default_damage(uint64_t seed = 1);
};

// Axis-parallel rectangle helper and a polyline swept to a thin polygon.
DamagePolygon rect_polygon(const std::string& class_name, double x0, double y0, double x1,
                           double y1);
DamagePolygon polyline_polygon(const std::string& class_name, const std::vector<Vec2>& points,
                               double width);

struct SynthScene {
    SynthSpec spec;
    DamageClassSet classes;
    std::vector<Camera> cameras;
    std::vector<ImageBuffer> originals;  // facade without damage overlay
    std::vector<ImageBuffer> targets;    // damage-composited training targets
    std::vector<MaskBuffer> masks;       // exact analytic damage masks
    GaussianCloud gt_cloud;              // flat Gaussians with composited colors
    std::vector<std::pair<Vec3, Vec3>> points;  // sparse init points, original colors

    // progression survey (filled by add_progression)
    std::vector<Camera> new_cameras;
    std::vector<ImageBuffer> new_originals;
    std::vector<ImageBuffer> new_targets;
    std::vector<MaskBuffer> new_masks;
};

SynthScene generate_scene(const SynthSpec& spec);

// Emits the "new survey": extra views whose masks contain both the old and
// the newly added damage. New polygons must not overlap existing ones.
void add_progression(SynthScene& scene, const std::vector<DamagePolygon>& new_polygons,
                     int new_camera_count = 8);

// COLMAP text model + images/ + masks/ + classes.json, shaped exactly like
// the ingestion format, so the CLI pipeline runs on synth output unmodified.
void emit_dataset(const SynthScene& scene, const std::string& dir);

bool point_in_polygon(const Vec2& p, const std::vector<Vec2>& poly);

}  // namespace splat
