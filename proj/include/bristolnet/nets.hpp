#pragma once

#include <memory>
#include <string>
#include <vector>

#include "bristolnet/layers.hpp"

namespace bristolnet {

struct NamedTensor {
    std::string name;
    TensorPtr tensor;
};

/// Mirrored encoder-decoder segmentation network configuration. Input sides
/// must be divisible by 2^stages so unpooling exactly mirrors pooling.
struct SegNetConfig {
    int stages = 3;
    int base_channels = 16;
    int input_h = 64;
    int input_w = 64;
    int convs_per_stage = 2;

    void validate() const {
        if (stages < 1) throw ConfigError("segnet: stages must be >= 1");
        if (base_channels < 4) throw ConfigError("segnet: base_channels must be >= 4");
        if (convs_per_stage < 1) throw ConfigError("segnet: convs_per_stage must be >= 1");
        const int div = 1 << stages;
        if (input_h < div || input_w < div || input_h % div != 0 || input_w % div != 0)
            throw ConfigError("segnet: input size " + std::to_string(input_h) + "x" + std::to_string(input_w) +
                              " not divisible by 2^stages = " + std::to_string(div));
    }
};

/// Residual classifier configuration. stages=4, blocks_per_stage=2,
/// base_channels=64 reproduces the classic 18-weighted-layer topology.
struct ResNetConfig {
    int stages = 3;
    int blocks_per_stage = 2;
    int base_channels = 16;
    int num_classes = 3;
    int input_h = 64;
    int input_w = 64;

    void validate() const {
        if (stages < 1) throw ConfigError("resnet: stages must be >= 1");
        if (blocks_per_stage < 1) throw ConfigError("resnet: blocks_per_stage must be >= 1");
        if (base_channels < 1) throw ConfigError("resnet: base_channels must be >= 1");
        if (num_classes < 2) throw ConfigError("resnet: num_classes must be >= 2");
        const int div = 1 << (stages - 1);
        if (input_h < div || input_w < div) throw ConfigError("resnet: input smaller than total stride");
    }
};

/// Common surface of both networks: forward pass plus the named-tensor
/// registry used by the optimizer, freeze masks and checkpoints.
class Network {
public:
    virtual ~Network() = default;
    virtual TensorPtr forward(const TensorPtr& x, Mode mode, Tape* tape = nullptr) = 0;
    /// Trainable parameters, in construction order.
    virtual const std::vector<NamedTensor>& parameters() const = 0;
    /// Parameters plus buffers (running statistics); the checkpoint order.
    virtual const std::vector<NamedTensor>& state() const = 0;
    virtual std::string kind() const = 0;

    void zero_grads() {
        for (auto& p : parameters()) p.tensor->zero_grad();
    }
    size_t parameter_count() const {
        size_t n = 0;
        for (const auto& p : state()) n += p.tensor->numel();
        return n;
    }
};

using NetworkPtr = std::shared_ptr<Network>;

namespace detail {

struct Registry {
    std::vector<NamedTensor> params;
    std::vector<NamedTensor> state;

    void add_param(const std::string& name, const TensorPtr& t) {
        params.push_back({name, t});
        state.push_back({name, t});
    }
    void add_buffer(const std::string& name, const TensorPtr& t) { state.push_back({name, t}); }

    void add_conv(const std::string& prefix, const Conv2dLayer& c) {
        add_param(prefix + ".weight", c.weight);
        add_param(prefix + ".bias", c.bias);
    }
    void add_bn(const std::string& prefix, const BatchNorm2d& bn) {
        add_param(prefix + ".gamma", bn.gamma);
        add_param(prefix + ".beta", bn.beta);
        add_buffer(prefix + ".running_mean", bn.running_mean);
        add_buffer(prefix + ".running_var", bn.running_var);
    }
};

}  // namespace detail

/// Encoder-decoder binary segmentation net. Each encoder stage is
/// (conv3x3 -> BN -> relu) x convs_per_stage followed by 2x2 max pooling with
/// retained indices; the decoder unpools through the matching stage's indices
/// in exact reverse order. A final 1x1 convolution and sigmoid produce a
/// per-pixel foreground probability.
class MiniSegNet : public Network {
public:
    MiniSegNet(const SegNetConfig& cfg, uint64_t seed) : cfg_(cfg) {
        cfg.validate();
        Rng rng(derive_seed(seed, 0x5e97e7));
        int in_ch = 3;
        for (int s = 1; s <= cfg.stages; ++s) {
            const int out_ch = cfg.base_channels << (s - 1);
            Stage enc;
            for (int j = 0; j < cfg.convs_per_stage; ++j) {
                const int ci = (j == 0) ? in_ch : out_ch;
                enc.convs.push_back(make_conv2d(ci, out_ch, 3, 1, 1, rng));
                enc.bns.push_back(make_batchnorm2d(out_ch));
            }
            encoder_.push_back(std::move(enc));
            in_ch = out_ch;
        }
        for (int s = cfg.stages; s >= 1; --s) {
            const int ch = cfg.base_channels << (s - 1);
            const int ch_next = (s > 1) ? (cfg.base_channels << (s - 2)) : cfg.base_channels;
            Stage dec;
            for (int j = 0; j < cfg.convs_per_stage; ++j) {
                const bool last = (j == cfg.convs_per_stage - 1);
                dec.convs.push_back(make_conv2d(ch, last ? ch_next : ch, 3, 1, 1, rng));
                dec.bns.push_back(make_batchnorm2d(last ? ch_next : ch));
            }
            decoder_.push_back(std::move(dec));
        }
        head_ = make_conv2d(cfg.base_channels, 1, 1, 1, 0, rng);

        for (int s = 1; s <= cfg.stages; ++s) register_stage("enc" + std::to_string(s), encoder_[s - 1]);
        for (int s = cfg.stages; s >= 1; --s) register_stage("dec" + std::to_string(s), decoder_[cfg.stages - s]);
        reg_.add_conv("head.conv", head_);
    }

    TensorPtr forward(const TensorPtr& x, Mode mode, Tape* tape = nullptr) override {
        BNET_REQUIRE(x->rank() == 4 && x->dim(1) == 3, "segnet: input must be [N,3,H,W]");
        const int div = 1 << cfg_.stages;
        BNET_REQUIRE(x->dim(2) % div == 0 && x->dim(3) % div == 0,
                     "segnet: input spatial size must be divisible by " + std::to_string(div));
        TensorPtr h = x;
        std::vector<PoolIndices> stack;
        for (auto& stage : encoder_) {
            for (size_t j = 0; j < stage.convs.size(); ++j) {
                h = conv2d(stage.convs[j], h, tape);
                h = batchnorm2d(stage.bns[j], h, mode, tape);
                h = relu(h, tape);
            }
            auto pooled = maxpool2d_with_indices(h, tape);
            h = pooled.out;
            stack.push_back(std::move(pooled.indices));
        }
        for (size_t d = 0; d < decoder_.size(); ++d) {
            h = maxunpool2d(h, stack[stack.size() - 1 - d], tape);
            auto& stage = decoder_[d];
            for (size_t j = 0; j < stage.convs.size(); ++j) {
                h = conv2d(stage.convs[j], h, tape);
                h = batchnorm2d(stage.bns[j], h, mode, tape);
                h = relu(h, tape);
            }
        }
        h = conv2d(head_, h, tape);
        return sigmoid(h, tape);
    }

    const std::vector<NamedTensor>& parameters() const override { return reg_.params; }
    const std::vector<NamedTensor>& state() const override { return reg_.state; }
    std::string kind() const override { return "segnet"; }
    const SegNetConfig& config() const { return cfg_; }

private:
    struct Stage {
        std::vector<Conv2dLayer> convs;
        std::vector<BatchNorm2d> bns;
    };

    void register_stage(const std::string& prefix, Stage& st) {
        for (size_t j = 0; j < st.convs.size(); ++j) {
            reg_.add_conv(prefix + ".conv" + std::to_string(j + 1), st.convs[j]);
            reg_.add_bn(prefix + ".bn" + std::to_string(j + 1), st.bns[j]);
        }
    }

    SegNetConfig cfg_;
    std::vector<Stage> encoder_;
    std::vector<Stage> decoder_;
    Conv2dLayer head_;
    detail::Registry reg_;
};

/// Residual classifier: 3x3 stem, stages of residual blocks (the first block
/// of every stage after the first downsamples by stride 2 and doubles
/// channels through a 1x1 projection), global average pooling and a linear
/// head producing raw logits.
class MiniResNet : public Network {
public:
    MiniResNet(const ResNetConfig& cfg, uint64_t seed) : cfg_(cfg) {
        cfg.validate();
        Rng rng(derive_seed(seed, 0x2e57e7));
        stem_conv_ = make_conv2d(3, cfg.base_channels, 3, 1, 1, rng);
        stem_bn_ = make_batchnorm2d(cfg.base_channels);
        int in_ch = cfg.base_channels;
        for (int s = 1; s <= cfg.stages; ++s) {
            const int out_ch = cfg.base_channels << (s - 1);
            std::vector<ResidualBlock> blocks;
            for (int b = 0; b < cfg.blocks_per_stage; ++b) {
                const int stride = (s > 1 && b == 0) ? 2 : 1;
                blocks.push_back(make_residual_block(b == 0 ? in_ch : out_ch, out_ch, stride, rng));
            }
            stages_.push_back(std::move(blocks));
            in_ch = out_ch;
        }
        const float bound = std::sqrt(6.0f / static_cast<float>(in_ch));
        fc_weight_ = make_uniform({cfg.num_classes, in_ch}, bound, rng, true);
        fc_bias_ = make_tensor({cfg.num_classes}, true);

        reg_.add_conv("stem.conv", stem_conv_);
        reg_.add_bn("stem.bn", stem_bn_);
        for (int s = 1; s <= cfg.stages; ++s) {
            for (int b = 0; b < cfg.blocks_per_stage; ++b) {
                const std::string prefix = "stage" + std::to_string(s) + ".block" + std::to_string(b + 1);
                auto& blk = stages_[s - 1][b];
                reg_.add_conv(prefix + ".conv1", blk.conv1);
                reg_.add_bn(prefix + ".bn1", blk.bn1);
                reg_.add_conv(prefix + ".conv2", blk.conv2);
                reg_.add_bn(prefix + ".bn2", blk.bn2);
                if (blk.proj) reg_.add_conv(prefix + ".proj", *blk.proj);
            }
        }
        reg_.add_param("fc.weight", fc_weight_);
        reg_.add_param("fc.bias", fc_bias_);
    }

    TensorPtr forward(const TensorPtr& x, Mode mode, Tape* tape = nullptr) override {
        BNET_REQUIRE(x->rank() == 4 && x->dim(1) == 3, "resnet: input must be [N,3,H,W]");
        TensorPtr h = conv2d(stem_conv_, x, tape);
        h = batchnorm2d(stem_bn_, h, mode, tape);
        h = relu(h, tape);
        for (auto& blocks : stages_)
            for (auto& blk : blocks) h = residual_block(blk, h, mode, tape);
        h = global_avg_pool(h, tape);
        return linear(h, fc_weight_, fc_bias_, tape);
    }

    const std::vector<NamedTensor>& parameters() const override { return reg_.params; }
    const std::vector<NamedTensor>& state() const override { return reg_.state; }
    std::string kind() const override { return "resnet"; }
    const ResNetConfig& config() const { return cfg_; }

private:
    ResNetConfig cfg_;
    Conv2dLayer stem_conv_;
    BatchNorm2d stem_bn_;
    std::vector<std::vector<ResidualBlock>> stages_;
    TensorPtr fc_weight_;
    TensorPtr fc_bias_;
    detail::Registry reg_;
};

inline std::shared_ptr<MiniSegNet> build_minisegnet(const SegNetConfig& cfg, uint64_t seed) {
    return std::make_shared<MiniSegNet>(cfg, seed);
}

inline std::shared_ptr<MiniResNet> build_miniresnet(const ResNetConfig& cfg, uint64_t seed) {
    return std::make_shared<MiniResNet>(cfg, seed);
}

inline TensorPtr network_forward(Network& net, const TensorPtr& x, Mode mode, Tape* tape = nullptr) {
    return net.forward(x, mode, tape);
}

}  // namespace bristolnet
