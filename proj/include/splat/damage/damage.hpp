#pragma once

#include <string>
#include <vector>

#include "splat/core/types.hpp"
#include "splat/train/optimizer.hpp"

namespace splat {

struct DamageClass {
    std::string name;
    Vec3 color;               // solid overlay color
    double tolerance = 0.15;  // per-channel match tolerance for recovery
};

// Validated collection; label k in a MaskBuffer refers to classes()[k-1].
class DamageClassSet {
  public:
    DamageClassSet() = default;
    explicit DamageClassSet(std::vector<DamageClass> classes);

    const std::vector<DamageClass>& classes() const { return classes_; }
    size_t size() const { return classes_.size(); }
    const DamageClass& at_label(uint8_t label) const;
    int label_of(const std::string& name) const;  // -1 if absent

    // JSON: either {"name": [r,g,b], ...} or
    // {"name": {"color":[r,g,b], "tolerance": t}, ...}
    static DamageClassSet from_json(const std::string& text);
    static DamageClassSet load(const std::string& path);
    std::string to_json() const;

  private:
    std::vector<DamageClass> classes_;
};

// Replaces labeled pixels with their class color (fully opaque overlay).
ImageBuffer composite_mask(const ImageBuffer& image, const MaskBuffer& mask,
                           const DamageClassSet& classes);

// Inverse of composite_mask on clean input: pixel gets the nearest class
// whose color is within tolerance (max-channel distance), else background.
MaskBuffer extract_mask(const ImageBuffer& rendered, const DamageClassSet& classes);

// Seeded irregular add/remove blobs (unions of jittered disks) to emulate
// contradictory per-view segmentation errors.
MaskBuffer inject_mask_errors(const MaskBuffer& mask, uint64_t seed, int add_blobs,
                              int remove_blobs, double radius_min_px, double radius_max_px);

// |a ∩ b| / |a ∪ b| for one class label; 1 when both are empty.
double mask_iou(const MaskBuffer& a, const MaskBuffer& b, uint8_t label);

// Identical contract to train; the composited targets carry the damage
// signal, the optimizer is unchanged.
TrainReport train_damage(GaussianCloud& cloud, const std::vector<TrainView>& views,
                         const TrainConfig& cfg);

// Mask files on disk: PNG with class colors over black.
void save_mask(const MaskBuffer& mask, const DamageClassSet& classes, const std::string& path);
MaskBuffer load_mask(const std::string& path, const DamageClassSet& classes);

}  // namespace splat
