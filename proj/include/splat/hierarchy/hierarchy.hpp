#pragma once

#include <map>
#include <string>
#include <vector>

#include "splat/damage/damage.hpp"
#include "splat/train/optimizer.hpp"

namespace splat {

// Box-filter downsample; output uses floor dimensions.
ImageBuffer downsample_image(const ImageBuffer& image, int factor);

// Matching intrinsics for a factor-downsampled view.
Camera downsample_camera(const Camera& cam, int factor);

struct Selection {
    std::vector<size_t> damage_indices;
    std::vector<uint8_t> damage_class_of;  // parallel to damage_indices
    std::vector<size_t> neighbor_indices;  // disjoint from damage_indices
    std::map<std::string, MaskBuffer> hull_masks;  // camera id -> binary mask

    std::vector<size_t> all_indices() const;
};

struct SelectConfig {
    int v_min = 2;             // projection-validated views required
    int mask_dilation_px = 2;  // slack around mask boundaries
    double occlusion_margin_fraction = 0.05;  // of scene extent
};

// Color filter (SH color at the mean training view direction within class
// tolerance) plus projection validation (center inside the class mask,
// unoccluded per the median-depth test, in >= v_min views).
// Returns indices and their class labels; also stamps cloud-independent
// labels into `class_of`.
std::vector<size_t> select_damage_gaussians(const GaussianCloud& cloud,
                                            const DamageClassSet& classes,
                                            const std::vector<MaskBuffer>& masks,
                                            const std::vector<Camera>& cameras,
                                            const SelectConfig& cfg,
                                            std::vector<uint8_t>* class_of = nullptr);

// Radius search around the seeds; the radius starts at r0 and doubles until
// >= k_min non-seed primitives fall inside or it exceeds the scene extent.
std::vector<size_t> expand_neighbors(const GaussianCloud& cloud, const std::vector<size_t>& seeds,
                                     size_t k_min, double r0, double extent);

// Default starting radius: twice the median mean-axis scale of the seeds.
double neighbor_r0(const GaussianCloud& cloud, const std::vector<size_t>& seeds);

// Dilated convex hull (monotone chain) of the selected primitives' projected
// centers plus their 2-sigma ellipse extremal points. Single point -> disk,
// collinear -> capsule, nothing in frame -> empty mask.
MaskBuffer hull_mask(const GaussianCloud& cloud, const std::vector<size_t>& selection,
                     const Camera& camera, int dilation_px);

// Per-pixel median depth: the contributor depth at which accumulated opacity
// crosses one half (infinity where the background shows through).
std::vector<double> render_median_depth(const GaussianCloud& cloud, const Camera& camera,
                                        const RenderOptions& options = {});

enum class RefineMode { finetune, retrain };

// Freeze everything outside the selection, restrict the loss to the per-view
// hull masks, and run the configured budget. finetune keeps the primitive
// count invariant; retrain densifies among the selected primitives only.
// Original frozen flags are restored afterwards.
TrainReport refine(GaussianCloud& cloud, const Selection& selection,
                   const std::vector<TrainView>& views, const TrainConfig& cfg, RefineMode mode);

// Selection round-trip: JSON index lists plus per-view hull mask PNGs
// (white on black) referenced by camera id.
void save_selection(const Selection& sel, const std::string& json_path,
                    const std::string& mask_dir);
Selection load_selection(const std::string& json_path);

}  // namespace splat
