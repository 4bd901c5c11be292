#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include "bristolnet/errors.hpp"
#include "bristolnet/rng.hpp"

namespace bristolnet {

class Tensor;
using TensorPtr = std::shared_ptr<Tensor>;

/// Dense row-major float32 tensor. Optionally carries a same-shape gradient
/// buffer; gradients accumulate (+=) until explicitly zeroed.
class Tensor {
public:
    std::vector<int> shape;
    std::vector<float> data;
    std::vector<float> grad;  // empty unless requires_grad
    bool requires_grad = false;

    Tensor() = default;

    explicit Tensor(std::vector<int> shp, bool req_grad = false) : shape(std::move(shp)), requires_grad(req_grad) {
        size_t n = checked_numel(shape);
        data.assign(n, 0.0f);
        if (requires_grad) grad.assign(n, 0.0f);
    }

    Tensor(std::vector<int> shp, std::vector<float> values, bool req_grad = false)
        : shape(std::move(shp)), data(std::move(values)), requires_grad(req_grad) {
        BNET_REQUIRE(data.size() == checked_numel(shape), "tensor: data length must equal product of dims");
        if (requires_grad) grad.assign(data.size(), 0.0f);
    }

    size_t numel() const { return data.size(); }
    int rank() const { return static_cast<int>(shape.size()); }

    int dim(int i) const {
        BNET_REQUIRE(i >= 0 && i < rank(), "tensor: dim index out of range");
        return shape[static_cast<size_t>(i)];
    }

    bool is_scalar() const { return numel() == 1; }

    /// Enables gradient accumulation for an existing tensor.
    void set_requires_grad(bool on) {
        requires_grad = on;
        if (on)
            grad.assign(data.size(), 0.0f);
        else
            grad.clear();
    }

    void zero_grad() {
        if (requires_grad) std::fill(grad.begin(), grad.end(), 0.0f);
    }

    std::string shape_str() const {
        std::ostringstream os;
        os << '[';
        for (size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
        os << ']';
        return os.str();
    }

    static size_t checked_numel(const std::vector<int>& shp) {
        BNET_REQUIRE(!shp.empty(), "tensor: rank-0 shapes not supported, use [1]");
        size_t n = 1;
        for (int d : shp) {
            BNET_REQUIRE(d > 0, "tensor: dimensions must be positive");
            n *= static_cast<size_t>(d);
        }
        return n;
    }
};

inline TensorPtr make_tensor(std::vector<int> shape, bool requires_grad = false) {
    return std::make_shared<Tensor>(std::move(shape), requires_grad);
}

inline TensorPtr make_tensor(std::vector<int> shape, std::vector<float> values, bool requires_grad = false) {
    return std::make_shared<Tensor>(std::move(shape), std::move(values), requires_grad);
}

inline TensorPtr make_scalar(float v, bool requires_grad = false) {
    return make_tensor({1}, {v}, requires_grad);
}

inline TensorPtr full_like(const Tensor& t, float v) {
    return make_tensor(t.shape, std::vector<float>(t.numel(), v));
}

/// Uniform fill in [-bound, bound] from the shared PRNG.
inline TensorPtr make_uniform(std::vector<int> shape, float bound, Rng& rng, bool requires_grad = false) {
    auto t = make_tensor(std::move(shape), requires_grad);
    for (auto& v : t->data) v = static_cast<float>(rng.uniform(-bound, bound));
    return t;
}

inline void ensure_finite(const Tensor& t, const char* where) {
    for (float v : t.data)
        if (!std::isfinite(v)) throw NumericError(std::string("non-finite value produced by ") + where);
}

/// Recorded reverse-mode operations for one forward pass. Nodes are appended
/// in execution order, which is a topological order of the data flow; the
/// backward sweep walks them once, in reverse.
class Tape {
public:
    /// Registers a backward rule. The closure owns (shared_ptr) everything it
    /// needs; it must add into input .grad buffers, never overwrite.
    void record(const TensorPtr& output, std::function<void()> backward) {
        outputs_.insert(output.get());
        nodes_.push_back(std::move(backward));
    }

    bool produced(const Tensor& t) const { return outputs_.count(const_cast<Tensor*>(&t)) != 0; }

    size_t size() const { return nodes_.size(); }

    /// Seeds d(loss)/d(loss) = 1 and propagates through the recorded nodes.
    /// Every requires_grad tensor reachable from `loss` ends up holding
    /// d(loss)/d(tensor); contributions from multiple consumers are summed.
    void backward(const TensorPtr& loss) {
        BNET_REQUIRE(loss && loss->is_scalar(), "backward: loss must be a scalar tensor");
        BNET_REQUIRE(produced(*loss), "backward: loss does not lie on this tape");
        if (!loss->requires_grad) loss->set_requires_grad(true);
        loss->grad[0] += 1.0f;
        for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
    }

    void clear() {
        nodes_.clear();
        outputs_.clear();
    }

private:
    std::vector<std::function<void()>> nodes_;
    std::unordered_set<Tensor*> outputs_;
};

}  // namespace bristolnet
