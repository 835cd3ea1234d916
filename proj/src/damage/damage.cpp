#include "splat/damage/damage.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "splat/io/image_io.hpp"

namespace splat {

using nlohmann::json;

DamageClassSet::DamageClassSet(std::vector<DamageClass> classes) : classes_(std::move(classes)) {
    if (classes_.size() > 200) throw ConfigError("DamageClassSet: too many classes");
    for (size_t i = 0; i < classes_.size(); ++i) {
        for (size_t j = i + 1; j < classes_.size(); ++j) {
            double sep = (classes_[i].color - classes_[j].color).cwiseAbs().maxCoeff();
            if (sep <= classes_[i].tolerance + classes_[j].tolerance)
                throw ConfigError("DamageClassSet: colors of '" + classes_[i].name + "' and '" +
                                  classes_[j].name + "' overlap within tolerance");
        }
    }
}

const DamageClass& DamageClassSet::at_label(uint8_t label) const {
    if (label == 0 || label > classes_.size())
        throw InputError("DamageClassSet: unknown label " + std::to_string(label));
    return classes_[label - 1];
}

int DamageClassSet::label_of(const std::string& name) const {
    for (size_t i = 0; i < classes_.size(); ++i)
        if (classes_[i].name == name) return static_cast<int>(i + 1);
    return -1;
}

DamageClassSet DamageClassSet::from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ParseError(std::string("classes JSON: ") + e.what());
    }
    std::vector<DamageClass> out;
    try {
        if (!j.is_object()) throw ParseError("classes JSON: top level must be an object");
        for (auto& [name, val] : j.items()) {
            DamageClass dc;
            dc.name = name;
            const json* color = &val;
            if (val.is_object()) {
                color = &val.at("color");
                if (val.contains("tolerance")) dc.tolerance = val.at("tolerance").get<double>();
            }
            dc.color = Vec3(color->at(0).get<double>(), color->at(1).get<double>(),
                            color->at(2).get<double>());
            out.push_back(dc);
        }
    } catch (const json::exception& e) {
        throw ParseError(std::string("classes JSON: ") + e.what());
    }
    return DamageClassSet(std::move(out));
}

DamageClassSet DamageClassSet::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("classes JSON: cannot open '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return from_json(ss.str());
}

std::string DamageClassSet::to_json() const {
    json j = json::object();
    for (const DamageClass& c : classes_)
        j[c.name] = {{"color", {c.color[0], c.color[1], c.color[2]}},
                     {"tolerance", c.tolerance}};
    return j.dump(2);
}

ImageBuffer composite_mask(const ImageBuffer& image, const MaskBuffer& mask,
                           const DamageClassSet& classes) {
    if (!mask.same_dims(image)) throw InputError("composite_mask: dimension mismatch");
    ImageBuffer out = image;
    for (size_t i = 0; i < out.size(); ++i)
        if (mask.labels[i]) out.pixels[i] = classes.at_label(mask.labels[i]).color;
    return out;
}

MaskBuffer extract_mask(const ImageBuffer& rendered, const DamageClassSet& classes) {
    MaskBuffer out(rendered.width, rendered.height);
    for (size_t i = 0; i < rendered.size(); ++i) {
        double best = 1e300;
        uint8_t best_label = 0;
        for (size_t k = 0; k < classes.size(); ++k) {
            const DamageClass& c = classes.classes()[k];
            double d = (rendered.pixels[i] - c.color).cwiseAbs().maxCoeff();
            if (d <= c.tolerance && d < best) {
                best = d;
                best_label = static_cast<uint8_t>(k + 1);
            }
        }
        out.labels[i] = best_label;
    }
    return out;
}

namespace {

struct Disk {
    double x, y, r;
};

void stamp(MaskBuffer& m, const std::vector<Disk>& disks, uint8_t label) {
    for (const Disk& d : disks) {
        int x0 = std::max(0, static_cast<int>(std::floor(d.x - d.r)));
        int x1 = std::min(m.width - 1, static_cast<int>(std::ceil(d.x + d.r)));
        int y0 = std::max(0, static_cast<int>(std::floor(d.y - d.r)));
        int y1 = std::min(m.height - 1, static_cast<int>(std::ceil(d.y + d.r)));
        for (int y = y0; y <= y1; ++y)
            for (int x = x0; x <= x1; ++x) {
                double dx = x - d.x, dy = y - d.y;
                if (dx * dx + dy * dy <= d.r * d.r) m.at(x, y) = label;
            }
    }
}

std::vector<Disk> random_blob(std::mt19937_64& rng, double cx, double cy, double rmin,
                              double rmax) {
    std::uniform_real_distribution<double> radius(rmin, rmax);
    std::uniform_int_distribution<int> n_disks(3, 6);
    std::vector<Disk> disks;
    double r0 = radius(rng);
    disks.push_back({cx, cy, r0});
    int n = n_disks(rng);
    std::uniform_real_distribution<double> jitter(-r0, r0);
    for (int i = 1; i < n; ++i) disks.push_back({cx + jitter(rng), cy + jitter(rng), radius(rng)});
    return disks;
}

}  // namespace

MaskBuffer inject_mask_errors(const MaskBuffer& mask, uint64_t seed, int add_blobs,
                              int remove_blobs, double radius_min_px, double radius_max_px) {
    MaskBuffer out = mask;
    std::mt19937_64 rng(seed);

    std::vector<std::pair<int, int>> damaged;
    for (int y = 0; y < mask.height; ++y)
        for (int x = 0; x < mask.width; ++x)
            if (mask.at(x, y)) damaged.emplace_back(x, y);

    for (int b = 0; b < add_blobs; ++b) {
        double cx, cy;
        uint8_t label = 1;
        if (damaged.empty()) {
            std::uniform_real_distribution<double> ux(0, mask.width - 1), uy(0, mask.height - 1);
            cx = ux(rng);
            cy = uy(rng);
        } else {
            // near existing damage: within dilation distance 2*radius
            std::uniform_int_distribution<size_t> pick(0, damaged.size() - 1);
            auto [px, py] = damaged[pick(rng)];
            label = mask.at(px, py);
            std::uniform_real_distribution<double> off(-2 * radius_max_px, 2 * radius_max_px);
            cx = std::clamp(px + off(rng), 0.0, mask.width - 1.0);
            cy = std::clamp(py + off(rng), 0.0, mask.height - 1.0);
        }
        stamp(out, random_blob(rng, cx, cy, radius_min_px, radius_max_px), label);
    }

    for (int b = 0; b < remove_blobs; ++b) {
        if (damaged.empty()) break;  // removal on an empty mask is a no-op
        std::uniform_int_distribution<size_t> pick(0, damaged.size() - 1);
        auto [px, py] = damaged[pick(rng)];
        stamp(out, random_blob(rng, px, py, radius_min_px, radius_max_px), 0);
    }
    return out;
}

double mask_iou(const MaskBuffer& a, const MaskBuffer& b, uint8_t label) {
    if (!a.same_dims(b)) throw InputError("mask_iou: dimension mismatch");
    size_t inter = 0, uni = 0;
    for (size_t i = 0; i < a.labels.size(); ++i) {
        bool ia = a.labels[i] == label, ib = b.labels[i] == label;
        inter += (ia && ib);
        uni += (ia || ib);
    }
    return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

TrainReport train_damage(GaussianCloud& cloud, const std::vector<TrainView>& views,
                         const TrainConfig& cfg) {
    // The target substitution is the method; the optimization is unchanged.
    return train(cloud, views, cfg);
}

void save_mask(const MaskBuffer& mask, const DamageClassSet& classes, const std::string& path) {
    ImageBuffer img(mask.width, mask.height);
    for (size_t i = 0; i < mask.labels.size(); ++i)
        if (mask.labels[i]) img.pixels[i] = classes.at_label(mask.labels[i]).color;
    save_image(img, path);
}

MaskBuffer load_mask(const std::string& path, const DamageClassSet& classes) {
    return extract_mask(load_image(path), classes);
}

}  // namespace splat
