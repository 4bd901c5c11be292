#pragma once

#include <cstdint>
#include <fstream>
#include <iomanip>
#include <string>
#include <vector>

#include "bristolnet/errors.hpp"
#include "bristolnet/image.hpp"

namespace bristolnet {

/// The consolidated 3-way grouping of the 7-level Bristol scale.
enum class StoolClass : int { constipation = 0, normal = 1, loose = 2 };

inline const std::vector<std::string>& stool_class_names() {
    static const std::vector<std::string> names = {"constipation", "normal", "loose"};
    return names;
}

inline const std::string& class_name(StoolClass c) { return stool_class_names()[static_cast<size_t>(c)]; }

/// Bristol level 1-7 -> consolidated class: 1,2 constipation; 3,4,5 normal;
/// 6,7 loose.
inline StoolClass consolidate(int bss) {
    BNET_REQUIRE(bss >= 1 && bss <= 7, "consolidate: Bristol level must be in [1,7], got " + std::to_string(bss));
    if (bss <= 2) return StoolClass::constipation;
    if (bss <= 5) return StoolClass::normal;
    return StoolClass::loose;
}

inline StoolClass class_from_name(const std::string& name) {
    const auto& names = stool_class_names();
    for (size_t i = 0; i < names.size(); ++i)
        if (names[i] == name) return static_cast<StoolClass>(i);
    throw ContractViolation("unknown class name '" + name + "'");
}

/// Threshold a probability map: pixel >= threshold -> 1.
inline MaskU8 binarize(const ProbMap& pm, float threshold = 0.5f) {
    MaskU8 mask(pm.h, pm.w);
    for (size_t i = 0; i < pm.data.size(); ++i) mask.data[i] = pm.data[i] >= threshold ? 1 : 0;
    return mask;
}

/// Jaccard index |a AND b| / |a OR b|; 1.0 when both masks are empty (a
/// clean prediction on a negative image is correct).
inline double iou(const MaskU8& a, const MaskU8& b) {
    BNET_REQUIRE(a.h == b.h && a.w == b.w, "iou: mask shapes must match");
    size_t inter = 0, uni = 0;
    for (size_t i = 0; i < a.data.size(); ++i) {
        const bool fa = a.data[i] != 0, fb = b.data[i] != 0;
        inter += (fa && fb) ? 1 : 0;
        uni += (fa || fb) ? 1 : 0;
    }
    if (uni == 0) return 1.0;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

/// Per-image IoU list plus its unweighted mean.
struct IoUReport {
    std::vector<double> per_image;
    double miou = 0.0;
};

inline IoUReport make_iou_report(std::vector<double> per_image) {
    BNET_REQUIRE(!per_image.empty(), "iou report: empty list");
    double acc = 0.0;
    for (double v : per_image) acc += v;
    IoUReport rep;
    rep.miou = acc / static_cast<double>(per_image.size());
    rep.per_image = std::move(per_image);
    return rep;
}

inline IoUReport miou(const std::vector<std::pair<ProbMap, MaskU8>>& pairs, float threshold = 0.5f) {
    BNET_REQUIRE(!pairs.empty(), "miou: empty pair list");
    std::vector<double> per;
    per.reserve(pairs.size());
    for (const auto& [prob, truth] : pairs) per.push_back(iou(binarize(prob, threshold), truth));
    return make_iou_report(std::move(per));
}

/// k x k counts, rows = ground truth, columns = predicted.
struct ConfusionMatrix {
    int k = 0;
    std::vector<std::string> names;
    std::vector<int64_t> counts;

    ConfusionMatrix() = default;
    ConfusionMatrix(int kk, std::vector<std::string> nm) : k(kk), names(std::move(nm)), counts(static_cast<size_t>(kk) * kk, 0) {
        BNET_REQUIRE(k > 0 && static_cast<int>(names.size()) == k, "confusion matrix: k and names must agree");
    }

    int64_t& at(int truth, int pred) { return counts[static_cast<size_t>(truth) * k + pred]; }
    int64_t at(int truth, int pred) const { return counts[static_cast<size_t>(truth) * k + pred]; }

    int64_t total() const {
        int64_t t = 0;
        for (int64_t v : counts) t += v;
        return t;
    }
    int64_t trace() const {
        int64_t t = 0;
        for (int i = 0; i < k; ++i) t += at(i, i);
        return t;
    }
};

inline ConfusionMatrix confusion_matrix(const std::vector<int>& preds, const std::vector<int>& truths, int k,
                                        std::vector<std::string> names = {}) {
    BNET_REQUIRE(preds.size() == truths.size(), "confusion_matrix: preds/truths length mismatch");
    if (names.empty())
        for (int i = 0; i < k; ++i) names.push_back("class" + std::to_string(i));
    ConfusionMatrix cm(k, std::move(names));
    for (size_t i = 0; i < preds.size(); ++i) {
        BNET_REQUIRE(preds[i] >= 0 && preds[i] < k && truths[i] >= 0 && truths[i] < k,
                     "confusion_matrix: class index out of range");
        ++cm.at(truths[i], preds[i]);
    }
    return cm;
}

/// trace / total.
inline double accuracy(const ConfusionMatrix& cm) {
    const int64_t total = cm.total();
    BNET_REQUIRE(total > 0, "accuracy: empty confusion matrix");
    return static_cast<double>(cm.trace()) / static_cast<double>(total);
}

/// Chance-corrected inter-rater agreement.
struct KappaResult {
    double p_o = 0.0;  // observed agreement
    double p_e = 0.0;  // expected (chance) agreement
    double kappa = 0.0;
};

/// Degenerate marginals (p_e = 1) make kappa undefined.
struct UndefinedKappaError : std::runtime_error {
    UndefinedKappaError() : std::runtime_error("cohens_kappa: undefined, expected agreement is 1") {}
};

inline KappaResult cohens_kappa(const std::vector<int>& rater_a, const std::vector<int>& rater_b, int k) {
    BNET_REQUIRE(!rater_a.empty() && rater_a.size() == rater_b.size(),
                 "cohens_kappa: ratings must be equal-length and non-empty");
    const double n = static_cast<double>(rater_a.size());
    std::vector<int64_t> ma(static_cast<size_t>(k), 0), mb(static_cast<size_t>(k), 0);
    int64_t agree = 0;
    for (size_t i = 0; i < rater_a.size(); ++i) {
        BNET_REQUIRE(rater_a[i] >= 0 && rater_a[i] < k && rater_b[i] >= 0 && rater_b[i] < k,
                     "cohens_kappa: rating out of range [0,k)");
        ++ma[static_cast<size_t>(rater_a[i])];
        ++mb[static_cast<size_t>(rater_b[i])];
        agree += rater_a[i] == rater_b[i] ? 1 : 0;
    }
    KappaResult r;
    r.p_o = static_cast<double>(agree) / n;
    for (int c = 0; c < k; ++c) r.p_e += (static_cast<double>(ma[static_cast<size_t>(c)]) / n) * (static_cast<double>(mb[static_cast<size_t>(c)]) / n);
    if (r.p_e >= 1.0) throw UndefinedKappaError();
    r.kappa = (r.p_o - r.p_e) / (1.0 - r.p_e);
    return r;
}

/// CSV row per image: index,name,iou. Last line carries the mean.
inline void write_iou_csv(const IoUReport& rep, const std::vector<std::string>& names, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw IoError("write_iou_csv: cannot open " + path);
    os << "index,image,iou\n";
    os << std::setprecision(6) << std::fixed;
    for (size_t i = 0; i < rep.per_image.size(); ++i)
        os << i << "," << (i < names.size() ? names[i] : "-") << "," << rep.per_image[i] << "\n";
    os << "mean,-," << rep.miou << "\n";
    if (!os) throw IoError("write_iou_csv: write failed " + path);
}

/// (k+1) x (k+1) labeled grid: header row of predicted names, one row per
/// ground-truth class.
inline void write_confusion_csv(const ConfusionMatrix& cm, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw IoError("write_confusion_csv: cannot open " + path);
    os << "truth\\pred";
    for (const auto& n : cm.names) os << "," << n;
    os << "\n";
    for (int t = 0; t < cm.k; ++t) {
        os << cm.names[static_cast<size_t>(t)];
        for (int p = 0; p < cm.k; ++p) os << "," << cm.at(t, p);
        os << "\n";
    }
    if (!os) throw IoError("write_confusion_csv: write failed " + path);
}

}  // namespace bristolnet
