#pragma once

#include <cstdint>
#include <vector>

#include "bristolnet/tensor.hpp"

namespace bristolnet {

/// Interleaved 8-bit image, c = 1 (gray) or 3 (RGB).
struct ImageU8 {
    int h = 0, w = 0, c = 0;
    std::vector<uint8_t> data;

    ImageU8() = default;
    ImageU8(int hh, int ww, int cc, uint8_t fill = 0)
        : h(hh), w(ww), c(cc), data(static_cast<size_t>(hh) * ww * cc, fill) {}

    uint8_t& at(int y, int x, int ch) { return data[(static_cast<size_t>(y) * w + x) * c + ch]; }
    uint8_t at(int y, int x, int ch) const { return data[(static_cast<size_t>(y) * w + x) * c + ch]; }
    size_t pixels() const { return static_cast<size_t>(h) * w; }
};

/// Planar float image, channel-major (CHW), the training-side carrier.
struct ImageF32 {
    int c = 0, h = 0, w = 0;
    std::vector<float> data;

    ImageF32() = default;
    ImageF32(int cc, int hh, int ww, float fill = 0.0f)
        : c(cc), h(hh), w(ww), data(static_cast<size_t>(cc) * hh * ww, fill) {}

    float& at(int ch, int y, int x) { return data[(static_cast<size_t>(ch) * h + y) * w + x]; }
    float at(int ch, int y, int x) const { return data[(static_cast<size_t>(ch) * h + y) * w + x]; }
};

/// Binary mask, values strictly 0/1.
struct MaskU8 {
    int h = 0, w = 0;
    std::vector<uint8_t> data;

    MaskU8() = default;
    MaskU8(int hh, int ww, uint8_t fill = 0) : h(hh), w(ww), data(static_cast<size_t>(hh) * ww, fill) {}

    uint8_t& at(int y, int x) { return data[static_cast<size_t>(y) * w + x]; }
    uint8_t at(int y, int x) const { return data[static_cast<size_t>(y) * w + x]; }
    size_t area() const {
        size_t n = 0;
        for (uint8_t v : data) n += v;
        return n;
    }
};

/// Per-pixel probabilities in [0,1].
struct ProbMap {
    int h = 0, w = 0;
    std::vector<float> data;
};

inline ImageF32 to_float(const ImageU8& img) {
    ImageF32 out(img.c, img.h, img.w);
    constexpr float kInv = 1.0f / 255.0f;
    for (int ch = 0; ch < img.c; ++ch)
        for (int y = 0; y < img.h; ++y)
            for (int x = 0; x < img.w; ++x) out.at(ch, y, x) = static_cast<float>(img.at(y, x, ch)) * kInv;
    return out;
}

inline ImageU8 to_u8(const ImageF32& img) {
    ImageU8 out(img.h, img.w, img.c);
    for (int ch = 0; ch < img.c; ++ch)
        for (int y = 0; y < img.h; ++y)
            for (int x = 0; x < img.w; ++x) {
                float v = img.at(ch, y, x) * 255.0f + 0.5f;
                if (v < 0.0f) v = 0.0f;
                if (v > 255.0f) v = 255.0f;
                out.at(y, x, ch) = static_cast<uint8_t>(v);
            }
    return out;
}

/// Stacks float images into a [N,C,H,W] batch tensor.
inline TensorPtr batch_images(const std::vector<const ImageF32*>& images) {
    BNET_REQUIRE(!images.empty(), "batch_images: empty batch");
    const int c = images[0]->c, h = images[0]->h, w = images[0]->w;
    auto t = make_tensor({static_cast<int>(images.size()), c, h, w});
    const size_t per = static_cast<size_t>(c) * h * w;
    for (size_t i = 0; i < images.size(); ++i) {
        BNET_REQUIRE(images[i]->c == c && images[i]->h == h && images[i]->w == w,
                     "batch_images: inconsistent image sizes in batch");
        std::copy(images[i]->data.begin(), images[i]->data.end(), t->data.begin() + i * per);
    }
    return t;
}

/// Stacks binary masks into a [N,1,H,W] float target tensor.
inline TensorPtr batch_masks(const std::vector<const MaskU8*>& masks) {
    BNET_REQUIRE(!masks.empty(), "batch_masks: empty batch");
    const int h = masks[0]->h, w = masks[0]->w;
    auto t = make_tensor({static_cast<int>(masks.size()), 1, h, w});
    const size_t per = static_cast<size_t>(h) * w;
    for (size_t i = 0; i < masks.size(); ++i) {
        BNET_REQUIRE(masks[i]->h == h && masks[i]->w == w, "batch_masks: inconsistent mask sizes in batch");
        for (size_t p = 0; p < per; ++p) t->data[i * per + p] = static_cast<float>(masks[i]->data[p]);
    }
    return t;
}

}  // namespace bristolnet
