#pragma once

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "bristolnet/nets.hpp"

namespace bristolnet {

/// Step decay: lr(e) = initial_lr * gamma^floor(e / step_epochs).
struct LrSchedule {
    double initial_lr = 0.001;
    double gamma = 0.5;
    int step_epochs = 10;

    void validate() const {
        if (initial_lr <= 0.0) throw ConfigError("lr schedule: initial_lr must be > 0");
        if (gamma <= 0.0 || gamma > 1.0) throw ConfigError("lr schedule: gamma must be in (0,1]");
        if (step_epochs < 1) throw ConfigError("lr schedule: step_epochs must be >= 1");
    }
};

inline double lr_at_epoch(const LrSchedule& s, int epoch) {
    BNET_REQUIRE(epoch >= 0, "lr_at_epoch: epoch must be >= 0");
    return s.initial_lr * std::pow(s.gamma, static_cast<double>(epoch / s.step_epochs));
}

/// Splits `params` into (trainable, frozen) by comma-separated name prefixes.
inline std::vector<NamedTensor> filter_unfrozen(const std::vector<NamedTensor>& params,
                                                const std::string& freeze_prefixes) {
    if (freeze_prefixes.empty()) return params;
    std::vector<std::string> prefixes;
    std::stringstream ss(freeze_prefixes);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (!tok.empty()) prefixes.push_back(tok);
    }
    std::vector<NamedTensor> kept;
    for (const auto& p : params) {
        bool frozen = false;
        for (const auto& pre : prefixes)
            if (p.name.rfind(pre, 0) == 0) frozen = true;
        if (!frozen) kept.push_back(p);
    }
    return kept;
}

/// SGD with classical momentum: v <- momentum*v + g, w <- w - lr*v.
/// One zero-initialized velocity buffer per trainable, unfrozen parameter.
class SgdMomentum {
public:
    SgdMomentum(std::vector<NamedTensor> params, double momentum) : params_(std::move(params)), momentum_(momentum) {
        BNET_REQUIRE(momentum >= 0.0 && momentum < 1.0, "sgd: momentum must be in [0,1)");
        velocity_.reserve(params_.size());
        for (const auto& p : params_) velocity_.emplace_back(p.tensor->numel(), 0.0f);
    }

    void step(double lr) {
        const float flr = static_cast<float>(lr);
        const float mom = static_cast<float>(momentum_);
        for (size_t i = 0; i < params_.size(); ++i) {
            Tensor& t = *params_[i].tensor;
            BNET_REQUIRE(t.requires_grad && t.grad.size() == t.data.size(),
                         "sgd: parameter '" + params_[i].name + "' has no gradient");
            float* v = velocity_[i].data();
            const float* g = t.grad.data();
            float* w = t.data.data();
            const size_t n = t.data.size();
            for (size_t j = 0; j < n; ++j) {
                v[j] = mom * v[j] + g[j];
                w[j] -= flr * v[j];
            }
        }
    }

    void zero_grads() {
        for (auto& p : params_) p.tensor->zero_grad();
    }

    const std::vector<NamedTensor>& params() const { return params_; }
    double momentum() const { return momentum_; }
    const std::vector<std::vector<float>>& velocity() const { return velocity_; }

private:
    std::vector<NamedTensor> params_;
    double momentum_;
    std::vector<std::vector<float>> velocity_;
};

}  // namespace bristolnet
