#pragma once

#include <vector>

#include "bristolnet/ops.hpp"

namespace bristolnet {

/// Mean binary cross entropy. Predictions are clamped to
/// [1e-7, 1-1e-7] before the logs; targets must be exactly 0 or 1.
inline TensorPtr bce_loss(const TensorPtr& pred, const TensorPtr& target, Tape* tape = nullptr) {
    BNET_REQUIRE(pred->shape == target->shape,
                 "bce_loss: shape mismatch " + pred->shape_str() + " vs " + target->shape_str());
    constexpr double kLo = 1e-7, kHi = 1.0 - 1e-7;
    const size_t n = pred->numel();
    double acc = 0.0;
    for (size_t i = 0; i < n; ++i) {
        const float t = target->data[i];
        BNET_REQUIRE(t == 0.0f || t == 1.0f, "bce_loss: target values must be exactly 0 or 1");
        double p = pred->data[i];
        if (p < kLo) p = kLo;
        if (p > kHi) p = kHi;
        acc -= t * std::log(p) + (1.0 - t) * std::log(1.0 - p);
    }
    const bool track = detail::want_grad(pred, tape);
    auto out = make_tensor({1}, {static_cast<float>(acc / static_cast<double>(n))});
    if (track) out->set_requires_grad(true);
    ensure_finite(*out, "bce_loss");
    if (track) {
        tape->record(out, [pred, target, out, n]() {
            constexpr double kLo2 = 1e-7, kHi2 = 1.0 - 1e-7;
            const float g = out->grad[0] / static_cast<float>(n);
            float* gp = pred->grad.data();
            for (size_t i = 0; i < n; ++i) {
                const double p = pred->data[i];
                if (p <= kLo2 || p >= kHi2) continue;  // clamp plateau: zero slope
                const double t = target->data[i];
                gp[i] += static_cast<float>(g * (p - t) / (p * (1.0 - p)));
            }
        });
    }
    return out;
}

/// Mean softmax cross entropy over [N,K] logits with integer labels,
/// stabilized by max subtraction.
inline TensorPtr cross_entropy_loss(const TensorPtr& logits, const std::vector<int>& labels, Tape* tape = nullptr) {
    BNET_REQUIRE(logits->rank() == 2, "cross_entropy: logits must be [N,K]");
    const int n = logits->dim(0), k = logits->dim(1);
    BNET_REQUIRE(static_cast<int>(labels.size()) == n, "cross_entropy: one label per row required");
    for (int label : labels) BNET_REQUIRE(label >= 0 && label < k, "cross_entropy: label out of range [0,K)");

    auto softmax = std::make_shared<std::vector<float>>(logits->numel());
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
        const float* row = logits->data.data() + static_cast<size_t>(i) * k;
        float* srow = softmax->data() + static_cast<size_t>(i) * k;
        double mx = row[0];
        for (int j = 1; j < k; ++j) mx = std::max(mx, static_cast<double>(row[j]));
        double z = 0.0;
        for (int j = 0; j < k; ++j) z += std::exp(row[j] - mx);
        const double lse = mx + std::log(z);
        acc += lse - row[labels[static_cast<size_t>(i)]];
        for (int j = 0; j < k; ++j) srow[j] = static_cast<float>(std::exp(row[j] - lse));
    }
    const bool track = detail::want_grad(logits, tape);
    auto out = make_tensor({1}, {static_cast<float>(acc / n)});
    if (track) out->set_requires_grad(true);
    ensure_finite(*out, "cross_entropy_loss");
    if (track) {
        tape->record(out, [logits, labels, softmax, out, n, k]() {
            const float g = out->grad[0] / static_cast<float>(n);
            float* gl = logits->grad.data();
            for (int i = 0; i < n; ++i) {
                const float* srow = softmax->data() + static_cast<size_t>(i) * k;
                for (int j = 0; j < k; ++j) {
                    const float onehot = (j == labels[static_cast<size_t>(i)]) ? 1.0f : 0.0f;
                    gl[static_cast<size_t>(i) * k + j] += g * (srow[j] - onehot);
                }
            }
        });
    }
    return out;
}

/// Softmax probabilities of one logit row (inference convenience).
inline std::vector<float> softmax_row(const std::vector<float>& logits) {
    double mx = logits.empty() ? 0.0 : logits[0];
    for (float v : logits) mx = std::max(mx, static_cast<double>(v));
    double z = 0.0;
    for (float v : logits) z += std::exp(v - mx);
    std::vector<float> out(logits.size());
    for (size_t i = 0; i < logits.size(); ++i) out[i] = static_cast<float>(std::exp(logits[i] - mx) / z);
    return out;
}

}  // namespace bristolnet
