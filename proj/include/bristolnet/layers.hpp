#pragma once

#include <cstdint>
#include <cstring>
#include <optional>
#include <vector>

#include "bristolnet/ops.hpp"

namespace bristolnet {

enum class Mode { train, eval };

/// 2-D convolution parameters. Weight layout [out_ch, in_ch, kh, kw],
/// symmetric zero padding, square kernels.
struct Conv2dLayer {
    TensorPtr weight;
    TensorPtr bias;
    int stride = 1;
    int padding = 0;

    int out_channels() const { return weight->dim(0); }
    int in_channels() const { return weight->dim(1); }
    int kernel() const { return weight->dim(2); }
};

/// He-uniform initialized convolution; bias starts at zero.
inline Conv2dLayer make_conv2d(int in_ch, int out_ch, int k, int stride, int padding, Rng& rng) {
    BNET_REQUIRE(in_ch > 0 && out_ch > 0 && k > 0 && stride > 0 && padding >= 0, "conv2d: bad configuration");
    const float bound = std::sqrt(6.0f / static_cast<float>(in_ch * k * k));
    Conv2dLayer layer;
    layer.weight = make_uniform({out_ch, in_ch, k, k}, bound, rng, true);
    layer.bias = make_tensor({out_ch}, true);
    layer.stride = stride;
    layer.padding = padding;
    return layer;
}

namespace detail {

/// Unrolls one image's padded receptive fields into columns of a shared
/// buffer with row stride `ld`:
/// col[(c*k+ky)*k+kx][col0 + oy*ow+ox] = x[c][oy*stride+ky-p][ox*stride+kx-p].
inline void im2col(const float* x, int ch, int h, int w, int k, int stride, int pad, int oh, int ow, float* col,
                   size_t ld, size_t col0) {
    const int plane = h * w;
    for (int c = 0; c < ch; ++c) {
        const float* src = x + static_cast<size_t>(c) * plane;
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
                float* dst = col + static_cast<size_t>((c * k + ky) * k + kx) * ld + col0;
                for (int oy = 0; oy < oh; ++oy) {
                    const int iy = oy * stride + ky - pad;
                    float* row = dst + static_cast<size_t>(oy) * ow;
                    if (iy < 0 || iy >= h) {
                        std::memset(row, 0, sizeof(float) * static_cast<size_t>(ow));
                        continue;
                    }
                    if (stride == 1 && kx >= pad && w - 1 + pad - kx >= ow - 1) {
                        // interior fast path: contiguous copy
                        std::memcpy(row, src + iy * w + (kx - pad), sizeof(float) * static_cast<size_t>(ow));
                        continue;
                    }
                    for (int ox = 0; ox < ow; ++ox) {
                        const int ix = ox * stride + kx - pad;
                        row[ox] = (ix >= 0 && ix < w) ? src[iy * w + ix] : 0.0f;
                    }
                }
            }
        }
    }
}

/// Scatter-add of one image's column block back onto the input grid.
inline void col2im_add(const float* col, int ch, int h, int w, int k, int stride, int pad, int oh, int ow, size_t ld,
                       size_t col0, float* gx) {
    const int plane = h * w;
    for (int c = 0; c < ch; ++c) {
        float* dst = gx + static_cast<size_t>(c) * plane;
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
                const float* src = col + static_cast<size_t>((c * k + ky) * k + kx) * ld + col0;
                for (int oy = 0; oy < oh; ++oy) {
                    const int iy = oy * stride + ky - pad;
                    if (iy < 0 || iy >= h) continue;
                    const float* row = src + static_cast<size_t>(oy) * ow;
                    for (int ox = 0; ox < ow; ++ox) {
                        const int ix = ox * stride + kx - pad;
                        if (ix >= 0 && ix < w) dst[iy * w + ix] += row[ox];
                    }
                }
            }
        }
    }
}

}  // namespace detail

/// Cross-correlation (no kernel flip) plus bias, differentiable w.r.t. input,
/// weights and bias. Input [N,C,H,W] -> [N,out_ch,H',W'] with
/// H' = floor((H + 2*padding - k)/stride) + 1.
inline TensorPtr conv2d(const Conv2dLayer& layer, const TensorPtr& x, Tape* tape = nullptr) {
    BNET_REQUIRE(x->rank() == 4, "conv2d: input must be [N,C,H,W]");
    const int n = x->dim(0), c = x->dim(1), h = x->dim(2), w = x->dim(3);
    const int k = layer.kernel(), stride = layer.stride, pad = layer.padding;
    const int out_ch = layer.out_channels();
    BNET_REQUIRE(c == layer.in_channels(), "conv2d: input has " + std::to_string(c) + " channels, layer expects " +
                                               std::to_string(layer.in_channels()));
    BNET_REQUIRE(h + 2 * pad >= k && w + 2 * pad >= k, "conv2d: spatial size smaller than kernel");
    const int oh = (h + 2 * pad - k) / stride + 1;
    const int ow = (w + 2 * pad - k) / stride + 1;
    const size_t ocols = static_cast<size_t>(oh) * ow;
    const size_t cols = ocols * n;
    const int ck2 = c * k * k;

    // One column buffer for the whole batch -> a single sgemm per direction.
    auto col = std::make_shared<std::vector<float>>(static_cast<size_t>(ck2) * cols);
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i)
        detail::im2col(x->data.data() + static_cast<size_t>(i) * c * h * w, c, h, w, k, stride, pad, oh, ow,
                       col->data(), cols, static_cast<size_t>(i) * ocols);

    std::vector<float> out_mat(static_cast<size_t>(out_ch) * cols);
    detail::gemm(false, false, out_ch, static_cast<int>(cols), ck2, 1.0f, layer.weight->data.data(), ck2, col->data(),
                 static_cast<int>(cols), 0.0f, out_mat.data(), static_cast<int>(cols));

    const TensorPtr weight = layer.weight, bias = layer.bias;
    const bool track = tape && (x->requires_grad || weight->requires_grad || bias->requires_grad);
    auto out = detail::result_like({n, out_ch, oh, ow}, track);

    // out[i][o][:] = out_mat[o][i*ocols ..] + bias[o]
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) {
        for (int o = 0; o < out_ch; ++o) {
            const float* src = out_mat.data() + static_cast<size_t>(o) * cols + static_cast<size_t>(i) * ocols;
            float* dst = out->data.data() + (static_cast<size_t>(i) * out_ch + o) * ocols;
            const float b = bias->data[static_cast<size_t>(o)];
            for (size_t p = 0; p < ocols; ++p) dst[p] = src[p] + b;
        }
    }
    ensure_finite(*out, "conv2d");

    if (track) {
        tape->record(out, [x, weight, bias, out, col, n, c, h, w, k, stride, pad, oh, ow, out_ch, ck2, ocols, cols]() {
            // Re-pack grad to [out_ch, n*ocols]
            std::vector<float> gmat(static_cast<size_t>(out_ch) * cols);
#pragma omp parallel for schedule(static)
            for (int i = 0; i < n; ++i)
                for (int o = 0; o < out_ch; ++o)
                    std::memcpy(gmat.data() + static_cast<size_t>(o) * cols + static_cast<size_t>(i) * ocols,
                                out->grad.data() + (static_cast<size_t>(i) * out_ch + o) * ocols,
                                sizeof(float) * ocols);
            if (bias->requires_grad) {
                for (int o = 0; o < out_ch; ++o) {
                    double acc = 0.0;
                    const float* row = gmat.data() + static_cast<size_t>(o) * cols;
                    for (size_t p = 0; p < cols; ++p) acc += row[p];
                    bias->grad[static_cast<size_t>(o)] += static_cast<float>(acc);
                }
            }
            if (weight->requires_grad)  // dW = G * col^T
                detail::gemm(false, true, out_ch, ck2, static_cast<int>(cols), 1.0f, gmat.data(),
                             static_cast<int>(cols), col->data(), static_cast<int>(cols), 1.0f, weight->grad.data(),
                             ck2);
            if (x->requires_grad) {  // dcol = W^T * G, then scatter
                std::vector<float> gcol(static_cast<size_t>(ck2) * cols);
                detail::gemm(true, false, ck2, static_cast<int>(cols), out_ch, 1.0f, weight->data.data(), ck2,
                             gmat.data(), static_cast<int>(cols), 0.0f, gcol.data(), static_cast<int>(cols));
#pragma omp parallel for schedule(static)
                for (int i = 0; i < n; ++i)
                    detail::col2im_add(gcol.data(), c, h, w, k, stride, pad, oh, ow, cols,
                                       static_cast<size_t>(i) * ocols,
                                       x->grad.data() + static_cast<size_t>(i) * c * h * w);
            }
        });
    }
    return out;
}

/// Per-channel batch normalization state. Running statistics are buffers,
/// not trainable parameters.
struct BatchNorm2d {
    TensorPtr gamma;
    TensorPtr beta;
    TensorPtr running_mean;
    TensorPtr running_var;
    float eps = 1e-5f;
    float momentum = 0.1f;

    int channels() const { return gamma->dim(0); }
};

inline BatchNorm2d make_batchnorm2d(int channels, float eps = 1e-5f, float momentum = 0.1f) {
    BNET_REQUIRE(channels > 0, "batchnorm: channels must be positive");
    BNET_REQUIRE(eps > 0.0f && momentum > 0.0f && momentum < 1.0f, "batchnorm: bad eps/momentum");
    BatchNorm2d bn;
    bn.gamma = make_tensor({channels}, std::vector<float>(static_cast<size_t>(channels), 1.0f), true);
    bn.beta = make_tensor({channels}, true);
    bn.running_mean = make_tensor({channels});
    bn.running_var = make_tensor({channels}, std::vector<float>(static_cast<size_t>(channels), 1.0f));
    bn.eps = eps;
    bn.momentum = momentum;
    return bn;
}

/// Train mode normalizes with biased batch statistics and updates running
/// stats as running <- (1-momentum)*running + momentum*batch. Eval mode only
/// reads running stats.
inline TensorPtr batchnorm2d(BatchNorm2d& bn, const TensorPtr& x, Mode mode, Tape* tape = nullptr) {
    BNET_REQUIRE(x->rank() == 4, "batchnorm2d: input must be [N,C,H,W]");
    const int n = x->dim(0), c = x->dim(1), h = x->dim(2), w = x->dim(3);
    BNET_REQUIRE(c == bn.channels(), "batchnorm2d: channel mismatch");
    const size_t plane = static_cast<size_t>(h) * w;
    const size_t per_ch = static_cast<size_t>(n) * plane;
    BNET_REQUIRE(mode == Mode::eval || per_ch >= 2, "batchnorm2d: train mode needs at least 2 elements per channel");

    const TensorPtr gamma = bn.gamma, beta = bn.beta;
    const bool track = tape && (x->requires_grad || gamma->requires_grad || beta->requires_grad);
    auto out = detail::result_like(x->shape, track);

    auto mean_c = std::make_shared<std::vector<float>>(static_cast<size_t>(c));
    auto inv_std_c = std::make_shared<std::vector<float>>(static_cast<size_t>(c));

    if (mode == Mode::train) {
#pragma omp parallel for schedule(static)
        for (int ch = 0; ch < c; ++ch) {
            double s = 0.0, s2 = 0.0;
            for (int i = 0; i < n; ++i) {
                const float* src = x->data.data() + (static_cast<size_t>(i) * c + ch) * plane;
                for (size_t p = 0; p < plane; ++p) {
                    const double v = src[p];
                    s += v;
                    s2 += v * v;
                }
            }
            const double mu = s / static_cast<double>(per_ch);
            double var = s2 / static_cast<double>(per_ch) - mu * mu;
            if (var < 0.0) var = 0.0;  // numeric guard
            (*mean_c)[static_cast<size_t>(ch)] = static_cast<float>(mu);
            (*inv_std_c)[static_cast<size_t>(ch)] = static_cast<float>(1.0 / std::sqrt(var + bn.eps));
            bn.running_mean->data[static_cast<size_t>(ch)] =
                (1.0f - bn.momentum) * bn.running_mean->data[static_cast<size_t>(ch)] +
                bn.momentum * static_cast<float>(mu);
            bn.running_var->data[static_cast<size_t>(ch)] =
                (1.0f - bn.momentum) * bn.running_var->data[static_cast<size_t>(ch)] +
                bn.momentum * static_cast<float>(var);
        }
    } else {
        for (int ch = 0; ch < c; ++ch) {
            (*mean_c)[static_cast<size_t>(ch)] = bn.running_mean->data[static_cast<size_t>(ch)];
            (*inv_std_c)[static_cast<size_t>(ch)] =
                1.0f / std::sqrt(bn.running_var->data[static_cast<size_t>(ch)] + bn.eps);
        }
    }

#pragma omp parallel for schedule(static) collapse(2)
    for (int i = 0; i < n; ++i) {
        for (int ch = 0; ch < c; ++ch) {
            const float mu = (*mean_c)[static_cast<size_t>(ch)];
            const float is = (*inv_std_c)[static_cast<size_t>(ch)];
            const float g = gamma->data[static_cast<size_t>(ch)];
            const float b = beta->data[static_cast<size_t>(ch)];
            const float* src = x->data.data() + (static_cast<size_t>(i) * c + ch) * plane;
            float* dst = out->data.data() + (static_cast<size_t>(i) * c + ch) * plane;
            for (size_t p = 0; p < plane; ++p) dst[p] = (src[p] - mu) * is * g + b;
        }
    }
    ensure_finite(*out, "batchnorm2d");

    if (track) {
        const bool train_stats = (mode == Mode::train);
        tape->record(out, [x, gamma, beta, out, mean_c, inv_std_c, n, c, plane, per_ch, train_stats]() {
#pragma omp parallel for schedule(static)
            for (int ch = 0; ch < c; ++ch) {
                const float mu = (*mean_c)[static_cast<size_t>(ch)];
                const float is = (*inv_std_c)[static_cast<size_t>(ch)];
                const float g = gamma->data[static_cast<size_t>(ch)];
                double sum_g = 0.0, sum_gx = 0.0;  // sums of grad and grad*xhat
                for (int i = 0; i < n; ++i) {
                    const size_t base = (static_cast<size_t>(i) * c + ch) * plane;
                    const float* go = out->grad.data() + base;
                    const float* src = x->data.data() + base;
                    for (size_t p = 0; p < plane; ++p) {
                        sum_g += go[p];
                        sum_gx += static_cast<double>(go[p]) * ((src[p] - mu) * is);
                    }
                }
                if (gamma->requires_grad) gamma->grad[static_cast<size_t>(ch)] += static_cast<float>(sum_gx);
                if (beta->requires_grad) beta->grad[static_cast<size_t>(ch)] += static_cast<float>(sum_g);
                if (x->requires_grad) {
                    const float m = static_cast<float>(per_ch);
                    const float mean_g = static_cast<float>(sum_g) / m;
                    const float mean_gx = static_cast<float>(sum_gx) / m;
                    for (int i = 0; i < n; ++i) {
                        const size_t base = (static_cast<size_t>(i) * c + ch) * plane;
                        const float* go = out->grad.data() + base;
                        const float* src = x->data.data() + base;
                        float* gx = x->grad.data() + base;
                        if (train_stats) {
                            for (size_t p = 0; p < plane; ++p) {
                                const float xhat = (src[p] - mu) * is;
                                gx[p] += g * is * (go[p] - mean_g - xhat * mean_gx);
                            }
                        } else {
                            for (size_t p = 0; p < plane; ++p) gx[p] += g * is * go[p];
                        }
                    }
                }
            }
        });
    }
    return out;
}

/// Argmax bookkeeping of 2x2 max pooling: one flat index (row-major within
/// the input H x W plane) per output cell.
struct PoolIndices {
    std::vector<int> shape;                    // [N,C,OH,OW]
    std::shared_ptr<std::vector<int32_t>> idx;  // winning input position per output cell

    size_t count() const { return idx ? idx->size() : 0; }
};

struct PoolResult {
    TensorPtr out;
    PoolIndices indices;
};

/// Non-overlapping 2x2 / stride-2 max pooling. Ties break to the smallest
/// flat index. Requires even H and W.
inline PoolResult maxpool2d_with_indices(const TensorPtr& x, Tape* tape = nullptr) {
    BNET_REQUIRE(x->rank() == 4, "maxpool2d: input must be [N,C,H,W]");
    const int n = x->dim(0), c = x->dim(1), h = x->dim(2), w = x->dim(3);
    BNET_REQUIRE(h % 2 == 0 && w % 2 == 0, "maxpool2d: spatial dims must be even");
    const int oh = h / 2, ow = w / 2;
    const bool track = detail::want_grad(x, tape);
    auto out = detail::result_like({n, c, oh, ow}, track);
    auto indices = std::make_shared<std::vector<int32_t>>(static_cast<size_t>(n) * c * oh * ow);

#pragma omp parallel for schedule(static)
    for (int ic = 0; ic < n * c; ++ic) {
        const float* src = x->data.data() + static_cast<size_t>(ic) * h * w;
        float* dst = out->data.data() + static_cast<size_t>(ic) * oh * ow;
        int32_t* ind = indices->data() + static_cast<size_t>(ic) * oh * ow;
        for (int oy = 0; oy < oh; ++oy) {
            for (int ox = 0; ox < ow; ++ox) {
                const int y0 = 2 * oy, x0 = 2 * ox;
                int best = y0 * w + x0;
                float bv = src[best];
                const int cand[3] = {y0 * w + x0 + 1, (y0 + 1) * w + x0, (y0 + 1) * w + x0 + 1};
                for (int t = 0; t < 3; ++t)
                    if (src[cand[t]] > bv) {
                        bv = src[cand[t]];
                        best = cand[t];
                    }
                dst[oy * ow + ox] = bv;
                ind[oy * ow + ox] = best;
            }
        }
    }
    if (track) {
        tape->record(out, [x, out, indices, n, c, h, w, oh, ow]() {
            const size_t per_out = static_cast<size_t>(oh) * ow;
            for (int ic = 0; ic < n * c; ++ic) {
                const float* go = out->grad.data() + static_cast<size_t>(ic) * per_out;
                const int32_t* ind = indices->data() + static_cast<size_t>(ic) * per_out;
                float* gx = x->grad.data() + static_cast<size_t>(ic) * h * w;
                for (size_t p = 0; p < per_out; ++p) gx[ind[p]] += go[p];
            }
        });
    }
    PoolResult res;
    res.out = out;
    res.indices.shape = {n, c, oh, ow};
    res.indices.idx = indices;
    return res;
}

/// Scatters pooled values back through their recorded argmax positions;
/// everything else is zero. [N,C,h,w] -> [N,C,2h,2w].
inline TensorPtr maxunpool2d(const TensorPtr& x, const PoolIndices& indices, Tape* tape = nullptr) {
    BNET_REQUIRE(x->rank() == 4, "maxunpool2d: input must be [N,C,h,w]");
    BNET_REQUIRE(indices.shape == x->shape, "maxunpool2d: indices shape does not match input");
    BNET_REQUIRE(indices.idx && indices.count() == x->numel(), "maxunpool2d: indices size mismatch");
    const int n = x->dim(0), c = x->dim(1), h = x->dim(2), w = x->dim(3);
    const int uh = 2 * h, uw = 2 * w;
    const bool track = detail::want_grad(x, tape);
    auto out = detail::result_like({n, c, uh, uw}, track);
    auto idx = indices.idx;

    const size_t per_in = static_cast<size_t>(h) * w;
    const size_t per_out = static_cast<size_t>(uh) * uw;
    // Validate before the parallel scatter: every index must stay inside the
    // 2x2 window it was pooled from.
    for (size_t p = 0; p < per_in * static_cast<size_t>(n) * c; ++p) {
        const size_t cell = p % per_in;
        const int oy = static_cast<int>(cell) / w, ox = static_cast<int>(cell) % w;
        const int32_t flat = (*idx)[p];
        const int iy = flat / uw, ix = flat % uw;
        if (flat < 0 || iy < 2 * oy || iy > 2 * oy + 1 || ix < 2 * ox || ix > 2 * ox + 1)
            throw ContractViolation("maxunpool2d: index escapes its originating 2x2 window");
    }
#pragma omp parallel for schedule(static)
    for (int ic = 0; ic < n * c; ++ic) {
        const float* src = x->data.data() + static_cast<size_t>(ic) * per_in;
        const int32_t* ind = idx->data() + static_cast<size_t>(ic) * per_in;
        float* dst = out->data.data() + static_cast<size_t>(ic) * per_out;
        for (size_t p = 0; p < per_in; ++p) dst[ind[p]] = src[p];
    }
    if (track) {
        tape->record(out, [x, out, idx, n, c, per_in]() {
            for (int ic = 0; ic < n * c; ++ic) {
                const int32_t* ind = idx->data() + static_cast<size_t>(ic) * per_in;
                const float* go = out->grad.data() + static_cast<size_t>(ic) * 4 * per_in;
                float* gx = x->grad.data() + static_cast<size_t>(ic) * per_in;
                for (size_t p = 0; p < per_in; ++p) gx[p] += go[ind[p]];
            }
        });
    }
    return out;
}

/// Per-channel spatial mean, [N,C,H,W] -> [N,C].
inline TensorPtr global_avg_pool(const TensorPtr& x, Tape* tape = nullptr) {
    BNET_REQUIRE(x->rank() == 4, "global_avg_pool: input must be [N,C,H,W]");
    const int n = x->dim(0), c = x->dim(1);
    const size_t plane = static_cast<size_t>(x->dim(2)) * x->dim(3);
    const bool track = detail::want_grad(x, tape);
    auto out = detail::result_like({n, c}, track);
    for (int i = 0; i < n * c; ++i) {
        const float* src = x->data.data() + static_cast<size_t>(i) * plane;
        double acc = 0.0;
        for (size_t p = 0; p < plane; ++p) acc += src[p];
        out->data[static_cast<size_t>(i)] = static_cast<float>(acc / static_cast<double>(plane));
    }
    ensure_finite(*out, "global_avg_pool");
    if (track) {
        tape->record(out, [x, out, n, c, plane]() {
            const float inv = 1.0f / static_cast<float>(plane);
            for (int i = 0; i < n * c; ++i) {
                const float g = out->grad[static_cast<size_t>(i)] * inv;
                float* gx = x->grad.data() + static_cast<size_t>(i) * plane;
                for (size_t p = 0; p < plane; ++p) gx[p] += g;
            }
        });
    }
    return out;
}

/// Basic residual block: conv-BN-relu-conv-BN plus identity (or 1x1
/// projection) shortcut, relu on the sum. conv1 carries the stride.
struct ResidualBlock {
    Conv2dLayer conv1;
    BatchNorm2d bn1;
    Conv2dLayer conv2;
    BatchNorm2d bn2;
    std::optional<Conv2dLayer> proj;  // present iff stride != 1 or channels change
};

inline ResidualBlock make_residual_block(int in_ch, int out_ch, int stride, Rng& rng) {
    ResidualBlock blk;
    blk.conv1 = make_conv2d(in_ch, out_ch, 3, stride, 1, rng);
    blk.bn1 = make_batchnorm2d(out_ch);
    blk.conv2 = make_conv2d(out_ch, out_ch, 3, 1, 1, rng);
    blk.bn2 = make_batchnorm2d(out_ch);
    if (stride != 1 || in_ch != out_ch) blk.proj = make_conv2d(in_ch, out_ch, 1, stride, 0, rng);
    return blk;
}

inline TensorPtr residual_block(ResidualBlock& blk, const TensorPtr& x, Mode mode, Tape* tape = nullptr) {
    auto h = conv2d(blk.conv1, x, tape);
    h = batchnorm2d(blk.bn1, h, mode, tape);
    h = relu(h, tape);
    h = conv2d(blk.conv2, h, tape);
    h = batchnorm2d(blk.bn2, h, mode, tape);
    TensorPtr shortcut = blk.proj ? conv2d(*blk.proj, x, tape) : x;
    return relu(add(h, shortcut, tape), tape);
}

}  // namespace bristolnet
