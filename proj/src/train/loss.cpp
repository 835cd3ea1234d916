#include "splat/train/loss.hpp"

#include <cmath>
#include <vector>

namespace splat {

namespace {

using Plane = std::vector<double>;

void check_dims(const ImageBuffer& a, const ImageBuffer& b, const MaskBuffer* mask) {
    if (!a.same_dims(b)) throw InputError("loss: image dimensions differ");
    if (mask && !mask->same_dims(a)) throw InputError("loss: mask dimensions differ");
}

struct GaussianKernel {
    int radius;
    std::vector<double> w;  // size 2*radius+1

    GaussianKernel(int window, double sigma) : radius(window / 2), w(window) {
        double sum = 0.0;
        for (int k = -radius; k <= radius; ++k) {
            w[k + radius] = std::exp(-0.5 * k * k / (sigma * sigma));
            sum += w[k + radius];
        }
        for (double& v : w) v /= sum;
    }

    // 1D weight sums over the in-image taps, per coordinate. The normalized
    // 2D window weight factorizes as wx*wy / (Wx(px)*Wy(py)).
    Plane axis_norm(int n) const {
        Plane out(n, 0.0);
        for (int i = 0; i < n; ++i) {
            double s = 0.0;
            for (int k = -radius; k <= radius; ++k) {
                int j = i + k;
                if (j >= 0 && j < n) s += w[k + radius];
            }
            out[i] = s;
        }
        return out;
    }
};

// Separable correlation. If `normalize`, divides by the in-image weight sum
// (kernel renormalization at borders); the adjoint pass uses normalize=false
// on a pre-divided input.
Plane filter2(const Plane& in, int W, int H, const GaussianKernel& k, bool normalize,
              const Plane* norm_x = nullptr, const Plane* norm_y = nullptr) {
    Plane tmp(in.size(), 0.0), out(in.size(), 0.0);
    const int r = k.radius;
    for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
            double s = 0.0;
            for (int d = -r; d <= r; ++d) {
                int j = x + d;
                if (j >= 0 && j < W) s += k.w[d + r] * in[static_cast<size_t>(y) * W + j];
            }
            if (normalize) s /= (*norm_x)[x];
            tmp[static_cast<size_t>(y) * W + x] = s;
        }
    }
    for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
            double s = 0.0;
            for (int d = -r; d <= r; ++d) {
                int j = y + d;
                if (j >= 0 && j < H) s += k.w[d + r] * tmp[static_cast<size_t>(j) * W + x];
            }
            if (normalize) s /= (*norm_y)[y];
            out[static_cast<size_t>(y) * W + x] = s;
        }
    }
    return out;
}

Plane channel_plane(const ImageBuffer& img, int c) {
    Plane p(img.size());
    for (size_t i = 0; i < img.size(); ++i) p[i] = img.pixels[i][c];
    return p;
}

size_t count_centers(const MaskBuffer* mask, size_t n) {
    if (!mask) return n;
    size_t c = 0;
    for (uint8_t l : mask->labels)
        if (l) ++c;
    return c;
}

bool is_center(const MaskBuffer* mask, size_t i) { return !mask || mask->labels[i] != 0; }

struct SsimTerms {
    double a1, a2, b1, b2, s;
};

SsimTerms ssim_terms(double mux, double muy, double mxx, double myy, double mxy,
                     const LossConfig& cfg) {
    SsimTerms t;
    double sx2 = mxx - mux * mux;
    double sy2 = myy - muy * muy;
    double sxy = mxy - mux * muy;
    t.a1 = 2 * mux * muy + cfg.ssim_c1;
    t.a2 = 2 * sxy + cfg.ssim_c2;
    t.b1 = mux * mux + muy * muy + cfg.ssim_c1;
    t.b2 = sx2 + sy2 + cfg.ssim_c2;
    t.s = (t.a1 * t.a2) / (t.b1 * t.b2);
    return t;
}

}  // namespace

double l1_loss(const ImageBuffer& rendered, const ImageBuffer& target, const MaskBuffer* mask) {
    check_dims(rendered, target, mask);
    size_t n = count_centers(mask, rendered.size());
    if (n == 0) return 0.0;
    double sum = 0.0;
    for (size_t i = 0; i < rendered.size(); ++i) {
        if (!is_center(mask, i)) continue;
        sum += (rendered.pixels[i] - target.pixels[i]).cwiseAbs().sum();
    }
    return sum / (3.0 * n);
}

double ssim(const ImageBuffer& rendered, const ImageBuffer& target, const MaskBuffer* mask,
            const LossConfig& cfg) {
    check_dims(rendered, target, mask);
    cfg.validate();
    const int W = rendered.width, H = rendered.height;
    if (W < cfg.ssim_window || H < cfg.ssim_window)
        throw InputError("ssim: image smaller than the window");
    size_t n = count_centers(mask, rendered.size());
    if (n == 0) return 1.0;

    GaussianKernel k(cfg.ssim_window, cfg.ssim_sigma);
    Plane nx = k.axis_norm(W), ny = k.axis_norm(H);

    double acc = 0.0;
    for (int c = 0; c < 3; ++c) {
        Plane x = channel_plane(rendered, c), y = channel_plane(target, c);
        Plane xx(x.size()), yy(x.size()), xy(x.size());
        for (size_t i = 0; i < x.size(); ++i) {
            xx[i] = x[i] * x[i];
            yy[i] = y[i] * y[i];
            xy[i] = x[i] * y[i];
        }
        Plane mux = filter2(x, W, H, k, true, &nx, &ny);
        Plane muy = filter2(y, W, H, k, true, &nx, &ny);
        Plane mxx = filter2(xx, W, H, k, true, &nx, &ny);
        Plane myy = filter2(yy, W, H, k, true, &nx, &ny);
        Plane mxy = filter2(xy, W, H, k, true, &nx, &ny);
        for (size_t i = 0; i < x.size(); ++i) {
            if (!is_center(mask, i)) continue;
            acc += ssim_terms(mux[i], muy[i], mxx[i], myy[i], mxy[i], cfg).s;
        }
    }
    return acc / (3.0 * n);
}

double total_loss(const ImageBuffer& rendered, const ImageBuffer& target, const MaskBuffer* mask,
                  const LossConfig& cfg) {
    cfg.validate();
    double l1 = l1_loss(rendered, target, mask);
    if (cfg.lambda_ssim == 0.0) return l1;
    double s = ssim(rendered, target, mask, cfg);
    return (1.0 - cfg.lambda_ssim) * l1 + cfg.lambda_ssim * (1.0 - s);
}

ImageBuffer total_loss_image_grad(const ImageBuffer& rendered, const ImageBuffer& target,
                                  const MaskBuffer* mask, const LossConfig& cfg) {
    check_dims(rendered, target, mask);
    cfg.validate();
    const int W = rendered.width, H = rendered.height;
    ImageBuffer grad(W, H);
    size_t n = count_centers(mask, rendered.size());
    if (n == 0) return grad;

    // L1 part
    const double l1_w = (1.0 - cfg.lambda_ssim) / (3.0 * n);
    for (size_t i = 0; i < rendered.size(); ++i) {
        if (!is_center(mask, i)) continue;
        for (int c = 0; c < 3; ++c) {
            double d = rendered.pixels[i][c] - target.pixels[i][c];
            grad.pixels[i][c] = l1_w * (d > 0 ? 1.0 : (d < 0 ? -1.0 : 0.0));
        }
    }
    if (cfg.lambda_ssim == 0.0) return grad;

    if (W < cfg.ssim_window || H < cfg.ssim_window)
        throw InputError("ssim: image smaller than the window");

    GaussianKernel k(cfg.ssim_window, cfg.ssim_sigma);
    Plane nx = k.axis_norm(W), ny = k.axis_norm(H);
    // d(total)/d(s_p) = -lambda / (3n) at each center
    const double ssim_w = -cfg.lambda_ssim / (3.0 * n);

    for (int c = 0; c < 3; ++c) {
        Plane x = channel_plane(rendered, c), y = channel_plane(target, c);
        Plane xx(x.size()), yy(x.size()), xy(x.size());
        for (size_t i = 0; i < x.size(); ++i) {
            xx[i] = x[i] * x[i];
            yy[i] = y[i] * y[i];
            xy[i] = x[i] * y[i];
        }
        Plane mux = filter2(x, W, H, k, true, &nx, &ny);
        Plane muy = filter2(y, W, H, k, true, &nx, &ny);
        Plane mxx = filter2(xx, W, H, k, true, &nx, &ny);
        Plane myy = filter2(yy, W, H, k, true, &nx, &ny);
        Plane mxy = filter2(xy, W, H, k, true, &nx, &ny);

        // Per-center coefficients of ds/dx_q = w~ * (alpha + beta*2*x_q + gamma*y_q),
        // pre-divided by the per-center window normalization so the adjoint is a
        // plain (unnormalized) convolution.
        Plane ca(x.size(), 0.0), cb(x.size(), 0.0), cg(x.size(), 0.0);
        for (int py = 0; py < H; ++py) {
            for (int px = 0; px < W; ++px) {
                size_t i = static_cast<size_t>(py) * W + px;
                if (!is_center(mask, i)) continue;
                SsimTerms t = ssim_terms(mux[i], muy[i], mxx[i], myy[i], mxy[i], cfg);
                double P = 1.0 / (t.b1 * t.b2);
                double ds_dmux = 2 * muy[i] * t.a2 * P - 2 * mux[i] * t.s / t.b1 -
                                 2 * muy[i] * t.a1 * P + 2 * mux[i] * t.s / t.b2;
                double ds_dmxx = -t.s / t.b2;
                double ds_dmxy = 2 * t.a1 * P;
                double norm = nx[px] * ny[py];
                ca[i] = ssim_w * ds_dmux / norm;
                cb[i] = ssim_w * ds_dmxx / norm;
                cg[i] = ssim_w * ds_dmxy / norm;
            }
        }
        Plane fa = filter2(ca, W, H, k, false);
        Plane fb = filter2(cb, W, H, k, false);
        Plane fg = filter2(cg, W, H, k, false);
        for (size_t i = 0; i < x.size(); ++i)
            grad.pixels[i][c] += fa[i] + fb[i] * 2.0 * x[i] + fg[i] * y[i];
    }
    return grad;
}

}  // namespace splat
