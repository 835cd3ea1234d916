#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "splat/util/errors.hpp"

namespace splat {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;
using Mat23 = Eigen::Matrix<double, 2, 3>;
using Quat = Eigen::Quaterniond;

// Row-major RGB float image, channels in [0,1].
struct ImageBuffer {
    int width = 0;
    int height = 0;
    std::vector<Vec3> pixels;  // size width*height

    ImageBuffer() = default;
    ImageBuffer(int w, int h, const Vec3& fill = Vec3::Zero())
        : width(w), height(h), pixels(static_cast<size_t>(w) * h, fill) {
        if (w < 0 || h < 0) throw InputError("ImageBuffer: negative dimensions");
    }

    Vec3& at(int x, int y) { return pixels[static_cast<size_t>(y) * width + x]; }
    const Vec3& at(int x, int y) const { return pixels[static_cast<size_t>(y) * width + x]; }
    size_t size() const { return pixels.size(); }
    bool same_dims(const ImageBuffer& o) const { return width == o.width && height == o.height; }
};

// Per-pixel label: 0 = background, k >= 1 = damage class index k-1.
struct MaskBuffer {
    int width = 0;
    int height = 0;
    std::vector<uint8_t> labels;  // size width*height

    MaskBuffer() = default;
    MaskBuffer(int w, int h, uint8_t fill = 0)
        : width(w), height(h), labels(static_cast<size_t>(w) * h, fill) {
        if (w < 0 || h < 0) throw InputError("MaskBuffer: negative dimensions");
    }

    uint8_t& at(int x, int y) { return labels[static_cast<size_t>(y) * width + x]; }
    uint8_t at(int x, int y) const { return labels[static_cast<size_t>(y) * width + x]; }
    bool same_dims(const MaskBuffer& o) const { return width == o.width && height == o.height; }
    bool same_dims(const ImageBuffer& o) const { return width == o.width && height == o.height; }
    bool empty_mask() const {
        for (uint8_t l : labels)
            if (l) return false;
        return true;
    }
};

// Per-primitive damage tag. 0 = none; k >= 1 indexes damage class k-1.
using DamageLabel = uint8_t;
constexpr DamageLabel kNoDamage = 0;

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
inline double logit(double p) { return std::log(p / (1.0 - p)); }

}  // namespace splat
