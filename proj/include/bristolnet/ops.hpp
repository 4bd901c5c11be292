#pragma once

#include <cblas.h>

#include <cmath>
#include <cstddef>

#include "bristolnet/tensor.hpp"

namespace bristolnet {

enum class EwKind { add, sub, mul };
enum class ActKind { relu, sigmoid };
enum class ReduceKind { sum, mean };

namespace detail {

/// Row-major sgemm: C = alpha * op(A) * op(B) + beta * C.
inline void gemm(bool trans_a, bool trans_b, int m, int n, int k, float alpha, const float* a, int lda, const float* b,
                 int ldb, float beta, float* c, int ldc) {
    cblas_sgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans, trans_b ? CblasTrans : CblasNoTrans, m, n, k,
                alpha, a, lda, b, ldb, beta, c, ldc);
}

inline bool want_grad(const TensorPtr& t, const Tape* tape) { return tape != nullptr && t->requires_grad; }

inline TensorPtr result_like(std::vector<int> shape, bool track) {
    auto out = make_tensor(std::move(shape));
    if (track) out->set_requires_grad(true);
    return out;
}

}  // namespace detail

/// Elementwise add/sub/mul. Shapes must match, or `b` may be a single-element
/// scalar applied to every element of `a`.
inline TensorPtr elementwise(EwKind kind, const TensorPtr& a, const TensorPtr& b, Tape* tape = nullptr) {
    const bool scalar_b = b->is_scalar() && a->numel() != 1;
    BNET_REQUIRE(scalar_b || a->shape == b->shape, "elementwise: shapes must match or b must be scalar, got " +
                                                       a->shape_str() + " vs " + b->shape_str());
    const size_t n = a->numel();
    const bool track = tape && (a->requires_grad || b->requires_grad);
    auto out = detail::result_like(a->shape, track);
    const float* pa = a->data.data();
    const float* pb = b->data.data();
    float* po = out->data.data();
    switch (kind) {
        case EwKind::add:
            for (size_t i = 0; i < n; ++i) po[i] = pa[i] + (scalar_b ? pb[0] : pb[i]);
            break;
        case EwKind::sub:
            for (size_t i = 0; i < n; ++i) po[i] = pa[i] - (scalar_b ? pb[0] : pb[i]);
            break;
        case EwKind::mul:
            for (size_t i = 0; i < n; ++i) po[i] = pa[i] * (scalar_b ? pb[0] : pb[i]);
            break;
    }
    ensure_finite(*out, "elementwise");
    if (track) {
        tape->record(out, [kind, a, b, out, scalar_b, n]() {
            const float* g = out->grad.data();
            if (a->requires_grad) {
                float* ga = a->grad.data();
                if (kind == EwKind::mul) {
                    const float* pb2 = b->data.data();
                    for (size_t i = 0; i < n; ++i) ga[i] += g[i] * (scalar_b ? pb2[0] : pb2[i]);
                } else {
                    for (size_t i = 0; i < n; ++i) ga[i] += g[i];
                }
            }
            if (b->requires_grad) {
                float* gb = b->grad.data();
                const float* pa2 = a->data.data();
                const float sign = (kind == EwKind::sub) ? -1.0f : 1.0f;
                if (scalar_b) {
                    double acc = 0.0;
                    for (size_t i = 0; i < n; ++i)
                        acc += (kind == EwKind::mul) ? static_cast<double>(g[i]) * pa2[i] : static_cast<double>(g[i]);
                    gb[0] += static_cast<float>(sign * acc);
                } else {
                    if (kind == EwKind::mul)
                        for (size_t i = 0; i < n; ++i) gb[i] += g[i] * pa2[i];
                    else
                        for (size_t i = 0; i < n; ++i) gb[i] += sign * g[i];
                }
            }
        });
    }
    return out;
}

inline TensorPtr add(const TensorPtr& a, const TensorPtr& b, Tape* tape = nullptr) {
    return elementwise(EwKind::add, a, b, tape);
}
inline TensorPtr sub(const TensorPtr& a, const TensorPtr& b, Tape* tape = nullptr) {
    return elementwise(EwKind::sub, a, b, tape);
}
inline TensorPtr mul(const TensorPtr& a, const TensorPtr& b, Tape* tape = nullptr) {
    return elementwise(EwKind::mul, a, b, tape);
}

/// Rank-2 matrix product [m,k] x [k,n] -> [m,n].
inline TensorPtr matmul(const TensorPtr& a, const TensorPtr& b, Tape* tape = nullptr) {
    BNET_REQUIRE(a->rank() == 2 && b->rank() == 2, "matmul: both operands must be rank-2");
    const int m = a->dim(0), k = a->dim(1), n = b->dim(1);
    BNET_REQUIRE(b->dim(0) == k, "matmul: inner dimensions mismatch, " + a->shape_str() + " x " + b->shape_str());
    const bool track = tape && (a->requires_grad || b->requires_grad);
    auto out = detail::result_like({m, n}, track);
    detail::gemm(false, false, m, n, k, 1.0f, a->data.data(), k, b->data.data(), n, 0.0f, out->data.data(), n);
    ensure_finite(*out, "matmul");
    if (track) {
        tape->record(out, [a, b, out, m, n, k]() {
            const float* g = out->grad.data();
            if (a->requires_grad)  // dA = G * B^T
                detail::gemm(false, true, m, k, n, 1.0f, g, n, b->data.data(), n, 1.0f, a->grad.data(), k);
            if (b->requires_grad)  // dB = A^T * G
                detail::gemm(true, false, k, n, m, 1.0f, a->data.data(), k, g, n, 1.0f, b->grad.data(), n);
        });
    }
    return out;
}

/// relu or numerically-stable sigmoid, elementwise.
inline TensorPtr activation(ActKind kind, const TensorPtr& x, Tape* tape = nullptr) {
    const size_t n = x->numel();
    const bool track = detail::want_grad(x, tape);
    auto out = detail::result_like(x->shape, track);
    const float* px = x->data.data();
    float* po = out->data.data();
    if (kind == ActKind::relu) {
        for (size_t i = 0; i < n; ++i) po[i] = px[i] > 0.0f ? px[i] : 0.0f;
    } else {
        for (size_t i = 0; i < n; ++i) {
            const float v = px[i];
            if (v >= 0.0f) {
                po[i] = 1.0f / (1.0f + std::exp(-v));
            } else {
                const float e = std::exp(v);
                po[i] = e / (1.0f + e);
            }
        }
    }
    ensure_finite(*out, "activation");
    if (track) {
        tape->record(out, [kind, x, out, n]() {
            const float* g = out->grad.data();
            float* gx = x->grad.data();
            if (kind == ActKind::relu) {
                const float* px2 = x->data.data();
                for (size_t i = 0; i < n; ++i) gx[i] += px2[i] > 0.0f ? g[i] : 0.0f;
            } else {
                const float* y = out->data.data();
                for (size_t i = 0; i < n; ++i) gx[i] += g[i] * y[i] * (1.0f - y[i]);
            }
        });
    }
    return out;
}

inline TensorPtr relu(const TensorPtr& x, Tape* tape = nullptr) { return activation(ActKind::relu, x, tape); }
inline TensorPtr sigmoid(const TensorPtr& x, Tape* tape = nullptr) { return activation(ActKind::sigmoid, x, tape); }

/// Full reduction to a scalar; accumulates in 64-bit.
inline TensorPtr reduce(ReduceKind kind, const TensorPtr& x, Tape* tape = nullptr) {
    const size_t n = x->numel();
    BNET_REQUIRE(n > 0, "reduce: empty tensor");
    double acc = 0.0;
    for (float v : x->data) acc += v;
    if (kind == ReduceKind::mean) acc /= static_cast<double>(n);
    const bool track = detail::want_grad(x, tape);
    auto out = detail::result_like({1}, track);
    out->data[0] = static_cast<float>(acc);
    ensure_finite(*out, "reduce");
    if (track) {
        tape->record(out, [kind, x, out, n]() {
            const float g = out->grad[0];
            const float scale = kind == ReduceKind::mean ? g / static_cast<float>(n) : g;
            float* gx = x->grad.data();
            for (size_t i = 0; i < n; ++i) gx[i] += scale;
        });
    }
    return out;
}

inline TensorPtr sum(const TensorPtr& x, Tape* tape = nullptr) { return reduce(ReduceKind::sum, x, tape); }
inline TensorPtr mean(const TensorPtr& x, Tape* tape = nullptr) { return reduce(ReduceKind::mean, x, tape); }

/// Affine map y = x * W^T + b for x [n, in], W [out, in], b [out].
inline TensorPtr linear(const TensorPtr& x, const TensorPtr& w, const TensorPtr& b, Tape* tape = nullptr) {
    BNET_REQUIRE(x->rank() == 2 && w->rank() == 2, "linear: x and w must be rank-2");
    const int n = x->dim(0), in = x->dim(1), out_f = w->dim(0);
    BNET_REQUIRE(w->dim(1) == in, "linear: weight shape " + w->shape_str() + " incompatible with input " + x->shape_str());
    BNET_REQUIRE(b->rank() == 1 && b->dim(0) == out_f, "linear: bias shape mismatch");
    const bool track = tape && (x->requires_grad || w->requires_grad || b->requires_grad);
    auto out = detail::result_like({n, out_f}, track);
    float* po = out->data.data();
    for (int i = 0; i < n; ++i)
        for (int o = 0; o < out_f; ++o) po[static_cast<size_t>(i) * out_f + o] = b->data[static_cast<size_t>(o)];
    detail::gemm(false, true, n, out_f, in, 1.0f, x->data.data(), in, w->data.data(), in, 1.0f, po, out_f);
    ensure_finite(*out, "linear");
    if (track) {
        tape->record(out, [x, w, b, out, n, in, out_f]() {
            const float* g = out->grad.data();
            if (x->requires_grad)  // dX = G * W
                detail::gemm(false, false, n, in, out_f, 1.0f, g, out_f, w->data.data(), in, 1.0f, x->grad.data(), in);
            if (w->requires_grad)  // dW = G^T * X
                detail::gemm(true, false, out_f, in, n, 1.0f, g, out_f, x->data.data(), in, 1.0f, w->grad.data(), in);
            if (b->requires_grad) {
                float* gb = b->grad.data();
                for (int o = 0; o < out_f; ++o) {
                    double acc = 0.0;
                    for (int i = 0; i < n; ++i) acc += g[static_cast<size_t>(i) * out_f + o];
                    gb[o] += static_cast<float>(acc);
                }
            }
        });
    }
    return out;
}

}  // namespace bristolnet
