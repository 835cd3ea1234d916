#pragma once

#include <map>
#include <string>
#include <vector>

#include "splat/hierarchy/hierarchy.hpp"

namespace splat {

// Progression label encoding over K damage classes:
//   0            background
//   k in [1,K]   preexisting damage of class k
//   K+k          newly detected damage of class k
// In rendered "old" masks, kAnyDamage marks damage whose class can no longer
// be told apart (it was recolored by an earlier update pass).
constexpr uint8_t kAnyDamage = 255;

inline bool progression_is_new(uint8_t label, size_t n_classes) {
    return label != 0 && label != kAnyDamage && label > n_classes;
}
inline uint8_t progression_class(uint8_t label, size_t n_classes) {
    return progression_is_new(label, n_classes) ? static_cast<uint8_t>(label - n_classes) : label;
}

struct NewView {
    Camera camera;
    ImageBuffer image;  // new survey photograph
    MaskBuffer mask;    // its segmentation, labels over the damage classes
};

struct UpdatePlan {
    std::vector<NewView> new_views;
    std::map<std::string, MaskBuffer> rendered_masks;     // from the old model
    std::map<std::string, MaskBuffer> progression_masks;  // diff_masks output
    std::map<std::string, size_t> shrinkage_pixels;  // old-only damage, reported never erased
};

struct UpdateConfig {
    int diff_tolerance_px = 3;
    Vec3 preexisting_color = Vec3(0, 0, 1);  // blue
    Vec3 new_color = Vec3(0, 1, 0);          // green
    double recolor_tolerance = 0.15;
    SelectConfig select;
    size_t neighbor_k_min = 50;
    double neighbor_r0_fraction = 0.0;  // of scene extent; 0 = 2x median seed scale
    int hull_dilation_px = 8;
    RenderOptions render;
};

// Render each view from the old model and extract damage masks with the
// existing classes. Cameras must already live in the old model's frame
// (joint registration is external and undetectable here).
std::map<std::string, MaskBuffer> render_segmentation_views(const GaussianCloud& cloud,
                                                            const std::vector<Camera>& cameras,
                                                            const DamageClassSet& classes,
                                                            const RenderOptions& options = {});

// Pixel-wise comparison: a new-mask pixel of class k is `new(k)` unless the
// old mask holds class k (or kAnyDamage) within tolerance_px of it, in which
// case it is `preexisting(k)`. Old-only pixels are counted into
// *shrinkage_pixels and stay uncolored.
MaskBuffer diff_masks(const MaskBuffer& new_mask, const MaskBuffer& rendered_old,
                      size_t n_classes, int tolerance_px = 3, size_t* shrinkage_pixels = nullptr);

// Composite the progression onto the survey image: preexisting damage in one
// color, new damage in another. Colliding colors are a config error.
ImageBuffer recolor_progression(const ImageBuffer& image, const MaskBuffer& progression,
                                size_t n_classes, const Vec3& preexisting_color,
                                const Vec3& new_color);

struct UpdateReport {
    bool no_op = false;
    size_t new_damage_pixels = 0;
    std::map<std::string, size_t> shrinkage_pixels;
    Selection selection;
    TrainReport refine_report;
    std::string to_json() const;
};

// Fills rendered and progression masks for every view that lacks them.
void prepare_plan(UpdatePlan& plan, const GaussianCloud& cloud, const DamageClassSet& classes,
                  const UpdateConfig& cfg);

// The full updating pass: prepare the plan, select the primitives behind both
// preexisting and new damage, build hull masks, and refine against the
// recolored targets. An empty new-damage set returns the cloud untouched.
UpdateReport update_model(GaussianCloud& cloud, UpdatePlan& plan, const DamageClassSet& classes,
                          const TrainConfig& train_cfg, RefineMode mode,
                          const UpdateConfig& cfg = {});

}  // namespace splat
