#pragma once

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <string>
#include <vector>

#include "bristolnet/augment.hpp"
#include "bristolnet/checkpoint.hpp"
#include "bristolnet/dataset.hpp"
#include "bristolnet/losses.hpp"
#include "bristolnet/optim.hpp"

namespace bristolnet {

/// Full training recipe shared by both tasks.
struct TrainConfig {
    int epochs = 30;
    int batch_size = 8;
    uint64_t seed = 42;
    LrSchedule schedule;
    double momentum = 0.9;
    std::string freeze_prefix;  // comma-separated name prefixes, empty = none
    bool augment = true;
    AugmentationSpec aug;

    void validate() const {
        if (epochs < 0) throw ConfigError("train: epochs must be >= 0");
        if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
        if (momentum < 0.0 || momentum >= 1.0) throw ConfigError("train: momentum must be in [0,1)");
        schedule.validate();
        aug.validate();
    }
};

struct EpochRow {
    int epoch;
    double train_loss;
    double test_loss;
    double lr;
};

using History = std::vector<EpochRow>;

inline void write_history_csv(const History& hist, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw IoError("history: cannot open for writing: " + path);
    os << "epoch,train_loss,test_loss,lr\n" << std::setprecision(8) << std::fixed;
    for (const auto& row : hist) os << row.epoch << "," << row.train_loss << "," << row.test_loss << "," << row.lr << "\n";
    if (!os) throw IoError("history: write failed: " + path);
}

/// In-memory dataset: decoded images plus whatever supervision each task
/// needs, split into train and test in manifest order.
struct LoadedData {
    std::vector<ImageF32> images;
    std::vector<MaskU8> masks;    // empty when not required
    std::vector<int> labels;      // -1 when absent
    std::vector<size_t> train_idx;
    std::vector<size_t> test_idx;
    std::vector<std::string> names;
};

/// Loads every record; `need_mask`/`need_label` make the corresponding field
/// mandatory, naming the offending row otherwise.
inline LoadedData load_samples(const DatasetManifest& manifest, bool need_mask, bool need_label) {
    namespace fs = std::filesystem;
    LoadedData data;
    for (size_t i = 0; i < manifest.records.size(); ++i) {
        const auto& rec = manifest.records[i];
        if (need_mask && !rec.has_mask())
            throw DataError("record " + std::to_string(i) + " (" + rec.image + ") has no mask");
        if (need_label && !rec.has_class())
            throw DataError("record " + std::to_string(i) + " (" + rec.image + ") has no class label");
        const ImageU8 img = read_ppm((fs::path(manifest.dir) / rec.image).string());
        data.images.push_back(to_float(img));
        if (rec.has_mask()) {
            MaskU8 m = read_mask((fs::path(manifest.dir) / rec.mask).string());
            if (m.h != img.h || m.w != img.w)
                throw DataError("record " + std::to_string(i) + ": mask size differs from image");
            data.masks.push_back(std::move(m));
        } else {
            data.masks.emplace_back();
        }
        data.labels.push_back(rec.cls);
        data.names.push_back(rec.image);
        (rec.split == Split::train ? data.train_idx : data.test_idx).push_back(i);
    }
    return data;
}

namespace detail {

inline double eval_bce(Network& net, const LoadedData& data, const std::vector<size_t>& idx, int batch_size) {
    if (idx.empty()) return 0.0;
    double acc = 0.0;
    for (size_t start = 0; start < idx.size(); start += static_cast<size_t>(batch_size)) {
        const size_t stop = std::min(idx.size(), start + static_cast<size_t>(batch_size));
        std::vector<const ImageF32*> imgs;
        std::vector<const MaskU8*> msks;
        for (size_t i = start; i < stop; ++i) {
            imgs.push_back(&data.images[idx[i]]);
            msks.push_back(&data.masks[idx[i]]);
        }
        auto pred = net.forward(batch_images(imgs), Mode::eval);
        auto loss = bce_loss(pred, batch_masks(msks));
        acc += static_cast<double>(loss->data[0]) * static_cast<double>(stop - start);
    }
    return acc / static_cast<double>(idx.size());
}

inline double eval_ce(Network& net, const LoadedData& data, const std::vector<size_t>& idx, int batch_size) {
    if (idx.empty()) return 0.0;
    double acc = 0.0;
    for (size_t start = 0; start < idx.size(); start += static_cast<size_t>(batch_size)) {
        const size_t stop = std::min(idx.size(), start + static_cast<size_t>(batch_size));
        std::vector<const ImageF32*> imgs;
        std::vector<int> labels;
        for (size_t i = start; i < stop; ++i) {
            imgs.push_back(&data.images[idx[i]]);
            labels.push_back(data.labels[idx[i]]);
        }
        auto logits = net.forward(batch_images(imgs), Mode::eval);
        auto loss = cross_entropy_loss(logits, labels);
        acc += static_cast<double>(loss->data[0]) * static_cast<double>(stop - start);
    }
    return acc / static_cast<double>(idx.size());
}

}  // namespace detail

struct TrainResult {
    NetworkPtr net;
    History history;
};

/// Trains the segmentation net: per-epoch seeded shuffling, optional joint
/// image+mask augmentation, BCE minimization, per-epoch train/test loss rows.
/// The final-epoch model is returned.
inline TrainResult train_segmentation(const DatasetManifest& manifest, const TrainConfig& cfg,
                                      const SegNetConfig& net_cfg) {
    cfg.validate();
    net_cfg.validate();
    auto net = build_minisegnet(net_cfg, cfg.seed);
    LoadedData data = load_samples(manifest, /*need_mask=*/true, /*need_label=*/false);
    TrainResult result{net, {}};
    if (cfg.epochs == 0) return result;

    SgdMomentum opt(filter_unfrozen(net->parameters(), cfg.freeze_prefix), cfg.momentum);
    Rng loop_rng(derive_seed(cfg.seed, 0x10a9));
    std::vector<size_t> order = data.train_idx;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const double lr = lr_at_epoch(cfg.schedule, epoch);
        loop_rng.shuffle(order);
        double epoch_loss = 0.0;
        size_t seen = 0;
        for (size_t start = 0; start < order.size(); start += static_cast<size_t>(cfg.batch_size)) {
            const size_t stop = std::min(order.size(), start + static_cast<size_t>(cfg.batch_size));
            std::vector<Augmented> hold;  // keeps augmented buffers alive
            std::vector<const ImageF32*> imgs;
            std::vector<const MaskU8*> msks;
            for (size_t i = start; i < stop; ++i) {
                const size_t id = order[i];
                if (cfg.augment) {
                    hold.push_back(augment(data.images[id], &data.masks[id], cfg.aug, loop_rng.next_u64()));
                    imgs.push_back(&hold.back().image);
                    msks.push_back(&hold.back().mask);
                } else {
                    imgs.push_back(&data.images[id]);
                    msks.push_back(&data.masks[id]);
                }
            }
            Tape tape;
            auto pred = net->forward(batch_images(imgs), Mode::train, &tape);
            auto loss = bce_loss(pred, batch_masks(msks), &tape);
            const double lv = loss->data[0];
            if (!std::isfinite(lv))
                throw NumericError("train-seg: non-finite loss at epoch " + std::to_string(epoch));
            tape.backward(loss);
            opt.step(lr);
            net->zero_grads();
            epoch_loss += lv * static_cast<double>(stop - start);
            seen += stop - start;
        }
        EpochRow row;
        row.epoch = epoch;
        row.train_loss = seen ? epoch_loss / static_cast<double>(seen) : 0.0;
        row.test_loss = detail::eval_bce(*net, data, data.test_idx, cfg.batch_size);
        row.lr = lr;
        result.history.push_back(row);
    }
    return result;
}

/// Trains the classifier over the consolidated classes; honors freeze
/// prefixes for partial fine-tuning.
inline TrainResult train_classifier(const DatasetManifest& manifest, const TrainConfig& cfg,
                                    const ResNetConfig& net_cfg) {
    cfg.validate();
    net_cfg.validate();
    auto net = build_miniresnet(net_cfg, cfg.seed);
    LoadedData data = load_samples(manifest, /*need_mask=*/false, /*need_label=*/true);
    TrainResult result{net, {}};
    if (cfg.epochs == 0) return result;

    SgdMomentum opt(filter_unfrozen(net->parameters(), cfg.freeze_prefix), cfg.momentum);
    Rng loop_rng(derive_seed(cfg.seed, 0x10a9));
    std::vector<size_t> order = data.train_idx;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const double lr = lr_at_epoch(cfg.schedule, epoch);
        loop_rng.shuffle(order);
        double epoch_loss = 0.0;
        size_t seen = 0;
        for (size_t start = 0; start < order.size(); start += static_cast<size_t>(cfg.batch_size)) {
            const size_t stop = std::min(order.size(), start + static_cast<size_t>(cfg.batch_size));
            std::vector<Augmented> hold;
            std::vector<const ImageF32*> imgs;
            std::vector<int> labels;
            for (size_t i = start; i < stop; ++i) {
                const size_t id = order[i];
                if (cfg.augment) {
                    hold.push_back(augment(data.images[id], nullptr, cfg.aug, loop_rng.next_u64()));
                    imgs.push_back(&hold.back().image);
                } else {
                    imgs.push_back(&data.images[id]);
                }
                labels.push_back(data.labels[id]);
            }
            Tape tape;
            auto logits = net->forward(batch_images(imgs), Mode::train, &tape);
            auto loss = cross_entropy_loss(logits, labels, &tape);
            const double lv = loss->data[0];
            if (!std::isfinite(lv))
                throw NumericError("train-cls: non-finite loss at epoch " + std::to_string(epoch));
            tape.backward(loss);
            opt.step(lr);
            net->zero_grads();
            epoch_loss += lv * static_cast<double>(stop - start);
            seen += stop - start;
        }
        EpochRow row;
        row.epoch = epoch;
        row.train_loss = seen ? epoch_loss / static_cast<double>(seen) : 0.0;
        row.test_loss = detail::eval_ce(*net, data, data.test_idx, cfg.batch_size);
        row.lr = lr;
        result.history.push_back(row);
    }
    return result;
}

/// Per-image probability map of one image.
inline ProbMap segment_image(Network& net, const ImageF32& image) {
    auto out = net.forward(batch_images({&image}), Mode::eval);
    ProbMap pm;
    pm.h = out->dim(2);
    pm.w = out->dim(3);
    pm.data = out->data;
    return pm;
}

struct ClassPrediction {
    StoolClass cls;
    std::vector<float> probs;
};

inline ClassPrediction classify_image(Network& net, const ImageF32& image) {
    auto logits = net.forward(batch_images({&image}), Mode::eval);
    std::vector<float> row(logits->data.begin(), logits->data.end());
    ClassPrediction pred;
    pred.probs = softmax_row(row);
    int best = 0;
    for (size_t i = 1; i < pred.probs.size(); ++i)
        if (pred.probs[i] > pred.probs[static_cast<size_t>(best)]) best = static_cast<int>(i);
    pred.cls = static_cast<StoolClass>(best);
    return pred;
}

struct SegEval {
    IoUReport report;
    std::vector<std::string> names;
    double foreground_fraction = 0.0;  // mean predicted foreground share
};

/// Per-image IoU over the given subset (batched eval-mode forward, merged in
/// dataset order).
inline SegEval eval_segmentation(Network& net, const LoadedData& data, const std::vector<size_t>& idx,
                                 float threshold, int batch_size = 8) {
    BNET_REQUIRE(!idx.empty(), "eval_segmentation: empty evaluation set");
    SegEval ev;
    std::vector<double> per;
    double fg = 0.0;
    for (size_t start = 0; start < idx.size(); start += static_cast<size_t>(batch_size)) {
        const size_t stop = std::min(idx.size(), start + static_cast<size_t>(batch_size));
        std::vector<const ImageF32*> imgs;
        for (size_t i = start; i < stop; ++i) imgs.push_back(&data.images[idx[i]]);
        auto out = net.forward(batch_images(imgs), Mode::eval);
        const int h = out->dim(2), w = out->dim(3);
        const size_t plane = static_cast<size_t>(h) * w;
        for (size_t i = start; i < stop; ++i) {
            ProbMap pm;
            pm.h = h;
            pm.w = w;
            pm.data.assign(out->data.begin() + static_cast<long>((i - start) * plane),
                           out->data.begin() + static_cast<long>((i - start + 1) * plane));
            const MaskU8 pred = binarize(pm, threshold);
            per.push_back(iou(pred, data.masks[idx[i]]));
            fg += static_cast<double>(pred.area()) / static_cast<double>(plane);
            ev.names.push_back(data.names[idx[i]]);
        }
    }
    ev.report = make_iou_report(std::move(per));
    ev.foreground_fraction = fg / static_cast<double>(idx.size());
    return ev;
}

struct ClsEval {
    ConfusionMatrix cm;
    std::vector<int> preds;
};

inline ClsEval eval_classifier(Network& net, const LoadedData& data, const std::vector<size_t>& idx,
                               int batch_size = 8) {
    BNET_REQUIRE(!idx.empty(), "eval_classifier: empty evaluation set");
    std::vector<int> preds, truths;
    for (size_t start = 0; start < idx.size(); start += static_cast<size_t>(batch_size)) {
        const size_t stop = std::min(idx.size(), start + static_cast<size_t>(batch_size));
        std::vector<const ImageF32*> imgs;
        for (size_t i = start; i < stop; ++i) imgs.push_back(&data.images[idx[i]]);
        auto logits = net.forward(batch_images(imgs), Mode::eval);
        const int k = logits->dim(1);
        for (size_t i = start; i < stop; ++i) {
            const float* row = logits->data.data() + (i - start) * static_cast<size_t>(k);
            int best = 0;
            for (int j = 1; j < k; ++j)
                if (row[j] > row[best]) best = j;
            preds.push_back(best);
            truths.push_back(data.labels[idx[i]]);
        }
    }
    ClsEval ev;
    ev.preds = preds;
    ev.cm = confusion_matrix(preds, truths, 3, stool_class_names());
    return ev;
}

}  // namespace bristolnet
