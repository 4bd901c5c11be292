#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "bristolnet/metrics.hpp"
#include "bristolnet/netpbm.hpp"
#include "bristolnet/synth.hpp"

namespace bristolnet {

enum class Split { train, test };

/// One dataset example. Paths are relative to the manifest's directory;
/// absent fields are stored as "-". Negatives carry an all-zero mask and no
/// Bristol level or class.
struct SampleRecord {
    std::string image;
    std::string mask;        // empty = none
    int bss = 0;             // 0 = none
    int cls = -1;            // -1 = none, else StoolClass
    Split split = Split::train;

    bool has_mask() const { return !mask.empty(); }
    bool has_class() const { return cls >= 0; }
};

struct DatasetManifest {
    std::string dir;  // directory the relative paths resolve against
    std::vector<SampleRecord> records;

    size_t count(Split s) const {
        size_t n = 0;
        for (const auto& r : records) n += r.split == s ? 1 : 0;
        return n;
    }
};

inline std::string split_name(Split s) { return s == Split::train ? "train" : "test"; }

inline void write_manifest(const DatasetManifest& m, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw IoError("manifest: cannot open for writing: " + path);
    os << "image,mask,bss,class,split\n";
    for (const auto& r : m.records) {
        os << r.image << "," << (r.has_mask() ? r.mask : "-") << ",";
        if (r.bss > 0)
            os << r.bss;
        else
            os << "-";
        os << "," << (r.has_class() ? class_name(static_cast<StoolClass>(r.cls)) : "-") << "," << split_name(r.split)
           << "\n";
    }
    if (!os) throw IoError("manifest: write failed: " + path);
}

inline DatasetManifest read_manifest(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("manifest: cannot open: " + path);
    DatasetManifest m;
    m.dir = std::filesystem::path(path).parent_path().string();
    std::string line;
    if (!std::getline(is, line)) throw FormatError("manifest: empty file: " + path);
    if (line != "image,mask,bss,class,split")
        throw FormatError("manifest: unexpected header '" + line + "' in " + path);
    size_t lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::stringstream ss(line);
        std::string tok;
        while (std::getline(ss, tok, ',')) f.push_back(tok);
        if (f.size() != 5)
            throw FormatError("manifest: line " + std::to_string(lineno) + " has " + std::to_string(f.size()) +
                              " fields, expected 5");
        SampleRecord r;
        r.image = f[0];
        r.mask = f[1] == "-" ? "" : f[1];
        r.bss = f[2] == "-" ? 0 : std::stoi(f[2]);
        r.cls = f[3] == "-" ? -1 : static_cast<int>(class_from_name(f[3]));
        if (f[4] == "train")
            r.split = Split::train;
        else if (f[4] == "test")
            r.split = Split::test;
        else
            throw FormatError("manifest: line " + std::to_string(lineno) + " has unknown split '" + f[4] + "'");
        m.records.push_back(std::move(r));
    }
    return m;
}

/// Dataset generation request. `mix` is a distribution over the 3
/// consolidated classes (3 entries), Bristol levels 1-5 (5 entries) or all 7
/// levels (7 entries). `negatives` of the `n` records are specimen-free
/// scenes.
struct GenOptions {
    int n = 100;
    std::vector<double> mix = {1.0 / 3, 1.0 / 3, 1.0 / 3};
    double train_frac = 0.7;
    std::string out_dir;
    uint64_t seed = 42;
    int negatives = 0;
    int image_h = 64;
    int image_w = 64;
    double coverage = 0.15;
    SceneParams::Background background = SceneParams::Background::ceramic_ellipse;
    double lighting_gradient = 0.25;

    void validate() const {
        if (n < 1) throw ConfigError("gen-data: n must be >= 1");
        if (negatives < 0 || negatives > n) throw ConfigError("gen-data: negatives must be in [0, n]");
        if (train_frac < 0.0 || train_frac > 1.0) throw ConfigError("gen-data: train_frac must be in [0,1]");
        if (mix.size() != 3 && mix.size() != 5 && mix.size() != 7)
            throw ConfigError("gen-data: mix must have 3, 5 or 7 entries");
        double s = 0.0;
        for (double v : mix) {
            if (v < 0.0) throw ConfigError("gen-data: mix entries must be >= 0");
            s += v;
        }
        if (std::abs(s - 1.0) > 1e-6) throw ConfigError("gen-data: mix must sum to 1");
        if (!(coverage > 0.0 && coverage <= 0.6)) throw ConfigError("gen-data: coverage must be in (0, 0.6]");
    }
};

namespace detail {

/// Largest-remainder apportionment of n into the given proportions.
inline std::vector<int> apportion(int n, const std::vector<double>& mix) {
    std::vector<int> counts(mix.size(), 0);
    std::vector<std::pair<double, size_t>> rema;
    int assigned = 0;
    for (size_t i = 0; i < mix.size(); ++i) {
        const double exact = mix[i] * n;
        counts[i] = static_cast<int>(exact);
        assigned += counts[i];
        rema.push_back({exact - counts[i], i});
    }
    std::stable_sort(rema.begin(), rema.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    for (int i = 0; i < n - assigned; ++i) ++counts[rema[static_cast<size_t>(i) % rema.size()].second];
    return counts;
}

inline const std::vector<int>& class_levels(StoolClass c) {
    static const std::vector<int> lv[3] = {{1, 2}, {3, 4, 5}, {6, 7}};
    return lv[static_cast<size_t>(c)];
}

}  // namespace detail

/// Writes images/, masks/ and manifest.csv under out_dir. Per-class (or
/// per-level) counts follow the mix within rounding; split sizes are exact;
/// everything is a pure function of the seed.
inline DatasetManifest generate_dataset(const GenOptions& opt) {
    opt.validate();
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(fs::path(opt.out_dir) / "images", ec);
    fs::create_directories(fs::path(opt.out_dir) / "masks", ec);
    if (ec) throw IoError("gen-data: cannot create output directories under " + opt.out_dir);

    Rng rng(derive_seed(opt.seed, 5));
    const int n_pos = opt.n - opt.negatives;

    // plan levels
    std::vector<int> levels;  // 0 = negative
    if (n_pos > 0) {
        const auto counts = detail::apportion(n_pos, opt.mix);
        for (size_t i = 0; i < counts.size(); ++i) {
            for (int j = 0; j < counts[i]; ++j) {
                if (opt.mix.size() == 3) {
                    const auto& lv = detail::class_levels(static_cast<StoolClass>(i));
                    levels.push_back(lv[static_cast<size_t>(rng.below(lv.size()))]);
                } else {
                    levels.push_back(static_cast<int>(i) + 1);
                }
            }
        }
    }
    for (int i = 0; i < opt.negatives; ++i) levels.push_back(0);
    rng.shuffle(levels);

    // exact split sizes over a second shuffle
    std::vector<size_t> order(levels.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng.shuffle(order);
    const size_t n_train = static_cast<size_t>(std::lround(opt.train_frac * opt.n));
    std::vector<Split> split(levels.size(), Split::test);
    for (size_t i = 0; i < n_train && i < order.size(); ++i) split[order[i]] = Split::train;

    DatasetManifest manifest;
    manifest.dir = opt.out_dir;
    char buf[64];
    for (size_t i = 0; i < levels.size(); ++i) {
        const uint64_t sample_seed = derive_seed(opt.seed, i);
        Rng srng(derive_seed(sample_seed, 6));
        SceneParams scene;
        scene.image_h = opt.image_h;
        scene.image_w = opt.image_w;
        scene.background = opt.background;
        scene.lighting_gradient = opt.lighting_gradient;
        scene.occluder_count = srng.bernoulli(0.22) ? 1 : 0;
        const double rr = srng.uniform();
        scene.reflection_count = rr < 0.71 ? 0 : (rr < 0.9 ? 1 : 2);

        Sample sample;
        if (levels[i] == 0) {
            sample = generate_negative(scene, sample_seed);
        } else {
            const double cov = std::clamp(opt.coverage + srng.uniform(-0.05, 0.07), 0.03, 0.6);
            const SpecimenSpec spec = sample_specimen_spec(levels[i], cov, sample_seed);
            sample = generate_specimen(spec, scene);
        }

        std::snprintf(buf, sizeof buf, "images/img_%05zu.ppm", i);
        const std::string img_rel = buf;
        std::snprintf(buf, sizeof buf, "masks/msk_%05zu.pgm", i);
        const std::string mask_rel = buf;
        write_ppm(sample.image, (fs::path(opt.out_dir) / img_rel).string());
        write_mask(sample.mask, (fs::path(opt.out_dir) / mask_rel).string());

        SampleRecord rec;
        rec.image = img_rel;
        rec.mask = mask_rel;
        rec.bss = levels[i];
        rec.cls = levels[i] > 0 ? static_cast<int>(consolidate(levels[i])) : -1;
        rec.split = split[i];
        manifest.records.push_back(std::move(rec));
    }
    write_manifest(manifest, (fs::path(opt.out_dir) / "manifest.csv").string());
    return manifest;
}

}  // namespace bristolnet
