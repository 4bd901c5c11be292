#pragma once

#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "bristolnet/dataset.hpp"
#include "bristolnet/training.hpp"

namespace bristolnet {

enum class Task { seg, cls };

/// Flat key=value run configuration ('#' comments, UTF-8). Unknown keys are
/// a hard error; command-line flags override file values.
class RunConfig {
public:
    static const std::set<std::string>& known_keys() {
        static const std::set<std::string> keys = {
            "train.epochs",     "train.batch_size",  "train.seed",       "train.lr",         "train.lr_gamma",
            "train.lr_step_epochs", "train.momentum", "train.freeze_prefix", "train.augment",
            "seg.stages",       "seg.base_channels", "seg.input_h",      "seg.input_w",      "seg.convs_per_stage",
            "cls.stages",       "cls.blocks_per_stage", "cls.base_channels", "cls.num_classes", "cls.input_h",
            "cls.input_w",      "aug.hflip_prob",    "aug.rot_deg_min",  "aug.rot_deg_max",  "aug.shear_deg_min",
            "aug.shear_deg_max", "aug.erase_count",  "aug.erase_frac_min", "aug.erase_frac_max", "aug.zoom_min",
            "aug.zoom_max",     "gen.n",             "gen.mix",          "gen.train_frac",   "gen.negatives",
            "gen.image_h",      "gen.image_w",       "gen.coverage",     "gen.background",   "gen.lighting_gradient",
            "gen.seed",         "eval.threshold"};
        return keys;
    }

    void set(const std::string& key, const std::string& value) {
        if (known_keys().count(key) == 0) throw ConfigError("unknown config key '" + key + "'");
        kv_[key] = value;
    }

    bool has(const std::string& key) const { return kv_.count(key) != 0; }

    void load_file(const std::string& path) {
        std::ifstream is(path);
        if (!is) throw IoError("config: cannot open " + path);
        std::string line;
        size_t lineno = 0;
        while (std::getline(is, line)) {
            ++lineno;
            const size_t hash = line.find('#');
            if (hash != std::string::npos) line = line.substr(0, hash);
            const auto trim = [](std::string s) {
                const auto b = s.find_first_not_of(" \t\r");
                const auto e = s.find_last_not_of(" \t\r");
                return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
            };
            line = trim(line);
            if (line.empty()) continue;
            const size_t eq = line.find('=');
            if (eq == std::string::npos)
                throw ConfigError("config: line " + std::to_string(lineno) + " is not key=value");
            set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
        }
    }

    std::string get_string(const std::string& key, const std::string& fallback) const {
        auto it = kv_.find(key);
        return it == kv_.end() ? fallback : it->second;
    }

    int get_int(const std::string& key, int fallback) const {
        auto it = kv_.find(key);
        if (it == kv_.end()) return fallback;
        return parse_int(key, it->second);
    }

    uint64_t get_u64(const std::string& key, uint64_t fallback) const {
        auto it = kv_.find(key);
        if (it == kv_.end()) return fallback;
        try {
            size_t pos = 0;
            const uint64_t v = std::stoull(it->second, &pos);
            if (pos != it->second.size()) throw std::invalid_argument("");
            return v;
        } catch (const std::exception&) {
            throw ConfigError("config: '" + key + "' must be an unsigned integer, got '" + it->second + "'");
        }
    }

    double get_double(const std::string& key, double fallback) const {
        auto it = kv_.find(key);
        if (it == kv_.end()) return fallback;
        return parse_double(key, it->second);
    }

    bool get_bool(const std::string& key, bool fallback) const {
        auto it = kv_.find(key);
        if (it == kv_.end()) return fallback;
        const std::string& v = it->second;
        if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
        if (v == "0" || v == "false" || v == "no" || v == "off") return false;
        throw ConfigError("config: '" + key + "' must be a boolean, got '" + v + "'");
    }

    static int parse_int(const std::string& key, const std::string& v) {
        try {
            size_t pos = 0;
            const int r = std::stoi(v, &pos);
            if (pos != v.size()) throw std::invalid_argument("");
            return r;
        } catch (const std::exception&) {
            throw ConfigError("config: '" + key + "' must be an integer, got '" + v + "'");
        }
    }

    static double parse_double(const std::string& key, const std::string& v) {
        try {
            size_t pos = 0;
            const double r = std::stod(v, &pos);
            if (pos != v.size()) throw std::invalid_argument("");
            return r;
        } catch (const std::exception&) {
            throw ConfigError("config: '" + key + "' must be a number, got '" + v + "'");
        }
    }

    /// "uniform3" / "uniform5" / "uniform7" or an explicit comma list of 3,
    /// 5 or 7 weights.
    static std::vector<double> parse_mix(const std::string& s) {
        if (s == "uniform3") return {1.0 / 3, 1.0 / 3, 1.0 / 3};
        if (s == "uniform5") return std::vector<double>(5, 0.2);
        if (s == "uniform7") return std::vector<double>(7, 1.0 / 7);
        std::vector<double> mix;
        std::stringstream ss(s);
        std::string tok;
        while (std::getline(ss, tok, ',')) mix.push_back(parse_double("gen.mix", tok));
        if (mix.size() != 3 && mix.size() != 5 && mix.size() != 7)
            throw ConfigError("gen.mix: expected uniform3/uniform5/uniform7 or 3/5/7 comma-separated weights");
        return mix;
    }

    /// Default seed: BSS_SEED from the environment, else 42; config and
    /// flags take precedence in that order.
    static uint64_t env_seed() {
        const char* env = std::getenv("BSS_SEED");
        if (!env) return 42;
        try {
            size_t pos = 0;
            const uint64_t v = std::stoull(env, &pos);
            if (pos != std::string(env).size()) throw std::invalid_argument("");
            return v;
        } catch (const std::exception&) {
            throw ConfigError("BSS_SEED must be an unsigned integer");
        }
    }

    TrainConfig train_config(Task task) const {
        TrainConfig cfg;
        cfg.epochs = get_int("train.epochs", task == Task::seg ? 100 : 30);
        cfg.batch_size = get_int("train.batch_size", 8);
        cfg.seed = get_u64("train.seed", env_seed());
        cfg.schedule.initial_lr = get_double("train.lr", task == Task::seg ? 0.05 : 0.001);
        cfg.schedule.gamma = get_double("train.lr_gamma", 0.5);
        cfg.schedule.step_epochs = get_int("train.lr_step_epochs", 10);
        cfg.momentum = get_double("train.momentum", 0.9);
        cfg.freeze_prefix = get_string("train.freeze_prefix", "");
        cfg.augment = get_bool("train.augment", true);
        cfg.aug = aug_spec();
        cfg.validate();
        return cfg;
    }

    SegNetConfig seg_config() const {
        SegNetConfig cfg;
        cfg.stages = get_int("seg.stages", 3);
        cfg.base_channels = get_int("seg.base_channels", 16);
        cfg.input_h = get_int("seg.input_h", 64);
        cfg.input_w = get_int("seg.input_w", 64);
        cfg.convs_per_stage = get_int("seg.convs_per_stage", 2);
        cfg.validate();
        return cfg;
    }

    ResNetConfig cls_config() const {
        ResNetConfig cfg;
        cfg.stages = get_int("cls.stages", 3);
        cfg.blocks_per_stage = get_int("cls.blocks_per_stage", 2);
        cfg.base_channels = get_int("cls.base_channels", 16);
        cfg.num_classes = get_int("cls.num_classes", 3);
        cfg.input_h = get_int("cls.input_h", 64);
        cfg.input_w = get_int("cls.input_w", 64);
        cfg.validate();
        return cfg;
    }

    AugmentationSpec aug_spec() const {
        AugmentationSpec s;
        s.hflip_prob = get_double("aug.hflip_prob", s.hflip_prob);
        s.rot_deg_min = get_double("aug.rot_deg_min", s.rot_deg_min);
        s.rot_deg_max = get_double("aug.rot_deg_max", s.rot_deg_max);
        s.shear_deg_min = get_double("aug.shear_deg_min", s.shear_deg_min);
        s.shear_deg_max = get_double("aug.shear_deg_max", s.shear_deg_max);
        s.erase_count = get_int("aug.erase_count", s.erase_count);
        s.erase_frac_min = get_double("aug.erase_frac_min", s.erase_frac_min);
        s.erase_frac_max = get_double("aug.erase_frac_max", s.erase_frac_max);
        s.zoom_min = get_double("aug.zoom_min", s.zoom_min);
        s.zoom_max = get_double("aug.zoom_max", s.zoom_max);
        s.validate();
        return s;
    }

    GenOptions gen_options() const {
        GenOptions opt;
        opt.n = get_int("gen.n", opt.n);
        opt.mix = parse_mix(get_string("gen.mix", "uniform3"));
        opt.train_frac = get_double("gen.train_frac", opt.train_frac);
        opt.negatives = get_int("gen.negatives", opt.negatives);
        opt.image_h = get_int("gen.image_h", opt.image_h);
        opt.image_w = get_int("gen.image_w", opt.image_w);
        opt.coverage = get_double("gen.coverage", opt.coverage);
        const std::string bg = get_string("gen.background", "ceramic-ellipse");
        if (bg == "ceramic-ellipse")
            opt.background = SceneParams::Background::ceramic_ellipse;
        else if (bg == "flat")
            opt.background = SceneParams::Background::flat;
        else
            throw ConfigError("gen.background must be ceramic-ellipse or flat");
        opt.lighting_gradient = get_double("gen.lighting_gradient", opt.lighting_gradient);
        opt.seed = get_u64("gen.seed", env_seed());
        return opt;
    }

    double eval_threshold() const { return get_double("eval.threshold", 0.5); }

private:
    std::map<std::string, std::string> kv_;
};

}  // namespace bristolnet
