#pragma once

#include <cmath>
#include <cstdint>

#include "bristolnet/errors.hpp"
#include "bristolnet/image.hpp"
#include "bristolnet/rng.hpp"

namespace bristolnet {

/// Random label-preserving transforms: horizontal flips, rotations, shears
/// ("skews"), rectangle erasing and crop/zoom. Every transform is neutral by
/// default-range trickery: a zero-width range disables it.
struct AugmentationSpec {
    double hflip_prob = 0.5;
    double rot_deg_min = -25.0, rot_deg_max = 25.0;
    double shear_deg_min = -8.0, shear_deg_max = 8.0;
    int erase_count = 1;
    double erase_frac_min = 0.08, erase_frac_max = 0.18;
    double zoom_min = 0.9, zoom_max = 1.15;

    static AugmentationSpec none() {
        AugmentationSpec s;
        s.hflip_prob = 0.0;
        s.rot_deg_min = s.rot_deg_max = 0.0;
        s.shear_deg_min = s.shear_deg_max = 0.0;
        s.erase_count = 0;
        s.zoom_min = s.zoom_max = 1.0;
        return s;
    }

    void validate() const {
        if (hflip_prob < 0.0 || hflip_prob > 1.0) throw ContractViolation("augment: hflip_prob must be in [0,1]");
        if (rot_deg_min > rot_deg_max || shear_deg_min > shear_deg_max || zoom_min > zoom_max ||
            erase_frac_min > erase_frac_max)
            throw ContractViolation("augment: empty parameter range");
        if (erase_count < 0) throw ContractViolation("augment: erase_count must be >= 0");
        if (zoom_min <= 0.0) throw ContractViolation("augment: zoom must be positive");
        if (erase_frac_min < 0.0 || erase_frac_max > 1.0) throw ContractViolation("augment: erase fraction range");
    }
};

struct Augmented {
    ImageF32 image;
    MaskU8 mask;  // empty (h=w=0) when no mask was supplied
};

namespace aug_detail {

inline ImageF32 flip_h(const ImageF32& img) {
    ImageF32 out(img.c, img.h, img.w);
    for (int c = 0; c < img.c; ++c)
        for (int y = 0; y < img.h; ++y)
            for (int x = 0; x < img.w; ++x) out.at(c, y, x) = img.at(c, y, img.w - 1 - x);
    return out;
}

inline MaskU8 flip_h(const MaskU8& m) {
    MaskU8 out(m.h, m.w);
    for (int y = 0; y < m.h; ++y)
        for (int x = 0; x < m.w; ++x) out.at(y, x) = m.at(y, m.w - 1 - x);
    return out;
}

/// Exact quarter-turn rotation (clockwise in screen coordinates), square
/// frames only for odd k.
template <typename Img, typename Get, typename Set>
void rot90_into(const Img& in, Img& out, int k, Get get, Set set) {
    const int h = in.h, w = in.w;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            int sy = y, sx = x;
            switch (k) {
                case 1: sy = h - 1 - x; sx = y; break;
                case 2: sy = h - 1 - y; sx = w - 1 - x; break;
                case 3: sy = x; sx = w - 1 - y; break;
                default: break;
            }
            set(out, y, x, get(in, sy, sx));
        }
}

inline ImageF32 rot90(const ImageF32& img, int k) {
    k = ((k % 4) + 4) % 4;
    if (k == 0) return img;
    BNET_REQUIRE(k == 2 || img.h == img.w, "rot90: quarter turns need a square frame");
    ImageF32 out(img.c, img.h, img.w);
    for (int c = 0; c < img.c; ++c)
        rot90_into(
            img, out, k, [c](const ImageF32& im, int y, int x) { return im.at(c, y, x); },
            [c](ImageF32& im, int y, int x, float v) { im.at(c, y, x) = v; });
    return out;
}

inline MaskU8 rot90(const MaskU8& m, int k) {
    k = ((k % 4) + 4) % 4;
    if (k == 0) return m;
    BNET_REQUIRE(k == 2 || m.h == m.w, "rot90: quarter turns need a square frame");
    MaskU8 out(m.h, m.w);
    rot90_into(
        m, out, k, [](const MaskU8& mm, int y, int x) { return mm.at(y, x); },
        [](MaskU8& mm, int y, int x, uint8_t v) { mm.at(y, x) = v; });
    return out;
}

inline float bilinear_clamped(const ImageF32& img, int c, double sy, double sx) {
    const double cx = std::clamp(sx, 0.0, static_cast<double>(img.w - 1));
    const double cy = std::clamp(sy, 0.0, static_cast<double>(img.h - 1));
    const int x0 = static_cast<int>(cx), y0 = static_cast<int>(cy);
    const int x1 = std::min(x0 + 1, img.w - 1), y1 = std::min(y0 + 1, img.h - 1);
    const float fx = static_cast<float>(cx - x0), fy = static_cast<float>(cy - y0);
    const float a = img.at(c, y0, x0) * (1.0f - fx) + img.at(c, y0, x1) * fx;
    const float b = img.at(c, y1, x0) * (1.0f - fx) + img.at(c, y1, x1) * fx;
    return a * (1.0f - fy) + b * fy;
}

/// Mask sample: bilinear over {0,1} with zero outside the frame, then
/// re-binarized at 0.5. Measurably tighter round-trip IoU than nearest
/// neighbor at 64x64 while keeping the result strictly binary.
inline uint8_t mask_sample(const MaskU8& m, double sy, double sx) {
    const int x0 = static_cast<int>(std::floor(sx)), y0 = static_cast<int>(std::floor(sy));
    const double fx = sx - x0, fy = sy - y0;
    auto at = [&](int y, int x) -> double {
        if (y < 0 || y >= m.h || x < 0 || x >= m.w) return 0.0;
        return static_cast<double>(m.at(y, x));
    };
    const double a = at(y0, x0) * (1 - fx) + at(y0, x0 + 1) * fx;
    const double b = at(y0 + 1, x0) * (1 - fx) + at(y0 + 1, x0 + 1) * fx;
    return (a * (1 - fy) + b * fy) >= 0.5 ? 1 : 0;
}

}  // namespace aug_detail

/// Applies one random draw of the augmentation policy to an image and its
/// optional mask, identically. Order: flip, affine (zoom * rotation * shear
/// about the center), erase. Bilinear image sampling with edge-color fill;
/// the mask is re-binarized and out-of-frame mask regions are 0. Erased
/// rectangles take the image's border mean color and zero the mask.
inline Augmented augment(const ImageF32& image, const MaskU8* mask, const AugmentationSpec& spec, uint64_t seed) {
    using namespace aug_detail;
    spec.validate();
    if (mask) BNET_REQUIRE(mask->h == image.h && mask->w == image.w, "augment: mask/image size mismatch");
    Rng rng(derive_seed(seed, 7));

    const bool flip = rng.bernoulli(spec.hflip_prob);
    const double rot_deg = rng.uniform(spec.rot_deg_min, spec.rot_deg_max);
    const double shear_deg = rng.uniform(spec.shear_deg_min, spec.shear_deg_max);
    const double zoom = rng.uniform(spec.zoom_min, spec.zoom_max);

    Augmented out;
    out.image = flip ? flip_h(image) : image;
    if (mask) out.mask = flip ? flip_h(*mask) : *mask;

    const bool no_shear_zoom = shear_deg == 0.0 && zoom == 1.0;
    const double quarter = rot_deg / 90.0;
    const bool exact_quarter = no_shear_zoom && quarter == std::floor(quarter) &&
                               (image.h == image.w || std::fmod(rot_deg, 180.0) == 0.0);
    if (exact_quarter) {
        const int k = static_cast<int>(std::floor(quarter));
        if (((k % 4) + 4) % 4 != 0) {
            out.image = rot90(out.image, k);
            if (mask) out.mask = rot90(out.mask, k);
        }
    } else if (!(rot_deg == 0.0 && no_shear_zoom)) {
        // inverse-mapped affine: src = A^-1 (dst - c) + c, A = zoom*R*Shear
        const double th = rot_deg * 3.14159265358979323846 / 180.0;
        const double sh = std::tan(shear_deg * 3.14159265358979323846 / 180.0);
        const double ca = std::cos(th), sa = std::sin(th);
        // A = z * [ca, -sa; sa, ca] * [1, sh; 0, 1]
        const double a00 = zoom * ca, a01 = zoom * (ca * sh - sa);
        const double a10 = zoom * sa, a11 = zoom * (sa * sh + ca);
        const double det = a00 * a11 - a01 * a10;
        const double i00 = a11 / det, i01 = -a01 / det;
        const double i10 = -a10 / det, i11 = a00 / det;
        const double cx = (image.w - 1) * 0.5, cy = (image.h - 1) * 0.5;
        const ImageF32 src_img = out.image;
        const MaskU8 src_mask = out.mask;
        for (int y = 0; y < image.h; ++y) {
            for (int x = 0; x < image.w; ++x) {
                const double dx = x - cx, dy = y - cy;
                const double sx = i00 * dx + i01 * dy + cx;
                const double sy = i10 * dx + i11 * dy + cy;
                for (int c = 0; c < image.c; ++c) out.image.at(c, y, x) = bilinear_clamped(src_img, c, sy, sx);
                if (mask) out.mask.at(y, x) = mask_sample(src_mask, sy, sx);
            }
        }
    }

    // erase rectangles: border-mean fill, mask zeroed underneath
    if (spec.erase_count > 0) {
        std::vector<float> fill(static_cast<size_t>(image.c), 0.0f);
        for (int c = 0; c < image.c; ++c) {
            double acc = 0.0;
            size_t cnt = 0;
            for (int x = 0; x < image.w; ++x) {
                acc += out.image.at(c, 0, x) + out.image.at(c, image.h - 1, x);
                cnt += 2;
            }
            for (int y = 1; y < image.h - 1; ++y) {
                acc += out.image.at(c, y, 0) + out.image.at(c, y, image.w - 1);
                cnt += 2;
            }
            fill[static_cast<size_t>(c)] = static_cast<float>(acc / static_cast<double>(cnt));
        }
        for (int i = 0; i < spec.erase_count; ++i) {
            const int ew = std::max(1, static_cast<int>(rng.uniform(spec.erase_frac_min, spec.erase_frac_max) * image.w));
            const int eh = std::max(1, static_cast<int>(rng.uniform(spec.erase_frac_min, spec.erase_frac_max) * image.h));
            const int ex = static_cast<int>(rng.below(static_cast<uint64_t>(std::max(1, image.w - ew))));
            const int ey = static_cast<int>(rng.below(static_cast<uint64_t>(std::max(1, image.h - eh))));
            for (int y = ey; y < ey + eh && y < image.h; ++y)
                for (int x = ex; x < ex + ew && x < image.w; ++x) {
                    for (int c = 0; c < image.c; ++c) out.image.at(c, y, x) = fill[static_cast<size_t>(c)];
                    if (mask) out.mask.at(y, x) = 0;
                }
        }
    }
    return out;
}

}  // namespace bristolnet
