// bristolnet command line: synthetic dataset generation, training,
// evaluation and single-image prediction for the two-stage stool-image
// pipeline (binary segmentation + Bristol-scale classification).

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>

#include "bristolnet/config.hpp"

namespace bn = bristolnet;
namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitIo = 3;
constexpr int kExitNumeric = 4;

struct CommonFlags {
    std::string config_path;
    uint64_t seed = 0;
    bool seed_set = false;
};

bn::RunConfig load_config(const CommonFlags& flags) {
    bn::RunConfig cfg;
    if (!flags.config_path.empty()) cfg.load_file(flags.config_path);
    return cfg;
}

int run_guarded(const std::function<int()>& fn) {
    try {
        return fn();
    } catch (const bn::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const bn::ContractViolation& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const bn::DataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const bn::GenerationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const bn::UndefinedKappaError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const bn::IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIo;
    } catch (const bn::FormatError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIo;
    } catch (const bn::NumericError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const std::exception& e) {
        std::cerr << "unexpected error: " << e.what() << "\n";
        return 1;
    }
}

void print_gen_summary(const bn::DatasetManifest& manifest) {
    long counts[2][4] = {};  // split x {3 classes + negative}
    for (const auto& r : manifest.records) {
        const int s = r.split == bn::Split::train ? 0 : 1;
        const int c = r.has_class() ? r.cls : 3;
        ++counts[s][c];
    }
    const char* names[4] = {"constipation", "normal", "loose", "negative"};
    for (int s = 0; s < 2; ++s) {
        std::printf("%s:", s == 0 ? "train" : "test");
        long total = 0;
        for (int c = 0; c < 4; ++c) {
            std::printf(" %s=%ld", names[c], counts[s][c]);
            total += counts[s][c];
        }
        std::printf(" total=%ld\n", total);
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"bristolnet: synthetic stool-image segmentation and Bristol-scale classification"};
    app.require_subcommand(1);
    int rc = kExitOk;

    // ----------------------------------------------------------------- gen-data
    auto* gen = app.add_subcommand("gen-data", "generate a synthetic dataset with masks and manifest");
    CommonFlags gen_flags;
    int gen_n = -1, gen_negatives = -1;
    double gen_train_frac = -1.0;
    std::string gen_mix, gen_out;
    gen->add_option("--config", gen_flags.config_path, "key=value config file");
    gen->add_option("--n", gen_n, "total number of records (including negatives)");
    gen->add_option("--mix", gen_mix, "uniform3|uniform5|uniform7 or comma weights");
    gen->add_option("--train-frac", gen_train_frac, "train split fraction");
    gen->add_option("--negatives", gen_negatives, "how many of the n records are specimen-free");
    gen->add_option("--out", gen_out, "output directory")->required();
    gen->add_option("--seed", gen_flags.seed, "PRNG seed")->each([&](const std::string&) { gen_flags.seed_set = true; });
    gen->callback([&]() {
        rc = run_guarded([&]() {
            bn::RunConfig cfg = load_config(gen_flags);
            if (gen_n >= 0) cfg.set("gen.n", std::to_string(gen_n));
            if (!gen_mix.empty()) cfg.set("gen.mix", gen_mix);
            if (gen_train_frac >= 0.0) cfg.set("gen.train_frac", std::to_string(gen_train_frac));
            if (gen_negatives >= 0) cfg.set("gen.negatives", std::to_string(gen_negatives));
            if (gen_flags.seed_set) cfg.set("gen.seed", std::to_string(gen_flags.seed));
            bn::GenOptions opt = cfg.gen_options();
            opt.out_dir = gen_out;
            const bn::DatasetManifest manifest = bn::generate_dataset(opt);
            print_gen_summary(manifest);
            std::printf("manifest: %s\n", (fs::path(gen_out) / "manifest.csv").string().c_str());
            return kExitOk;
        });
    });

    // ------------------------------------------------------------- train-seg/cls
    struct TrainFlags {
        CommonFlags common;
        std::string manifest, out_ckpt, history;
        int epochs = -1, batch_size = -1;
        double lr = -1.0;
        int augment = -1;
        std::string freeze_prefix{"\x01"};  // sentinel: not set
    };
    auto add_train_cmd = [&](const char* name, const char* help, bn::Task task, TrainFlags& tf) {
        auto* cmd = app.add_subcommand(name, help);
        cmd->add_option("--config", tf.common.config_path, "key=value config file");
        cmd->add_option("--manifest", tf.manifest, "dataset manifest csv")->required();
        cmd->add_option("--out", tf.out_ckpt, "output checkpoint path")->required();
        cmd->add_option("--history", tf.history, "per-epoch loss csv path");
        cmd->add_option("--seed", tf.common.seed, "PRNG seed")->each([&tf](const std::string&) { tf.common.seed_set = true; });
        cmd->add_option("--epochs", tf.epochs, "training epochs");
        cmd->add_option("--batch-size", tf.batch_size, "minibatch size");
        cmd->add_option("--lr", tf.lr, "initial learning rate");
        cmd->add_option("--augment", tf.augment, "1/0: apply data augmentation");
        cmd->add_option("--freeze-prefix", tf.freeze_prefix, "comma-separated parameter-name prefixes to freeze");
        cmd->callback([&, task]() {
            rc = run_guarded([&]() {
                bn::RunConfig cfg = load_config(tf.common);
                if (tf.common.seed_set) cfg.set("train.seed", std::to_string(tf.common.seed));
                if (tf.epochs >= 0) cfg.set("train.epochs", std::to_string(tf.epochs));
                if (tf.batch_size >= 0) cfg.set("train.batch_size", std::to_string(tf.batch_size));
                if (tf.lr > 0.0) cfg.set("train.lr", std::to_string(tf.lr));
                if (tf.augment >= 0) cfg.set("train.augment", tf.augment ? "1" : "0");
                if (tf.freeze_prefix != "\x01") cfg.set("train.freeze_prefix", tf.freeze_prefix);
                const bn::TrainConfig tc = cfg.train_config(task);
                const bn::DatasetManifest manifest = bn::read_manifest(tf.manifest);

                bn::TrainResult result;
                if (task == bn::Task::seg)
                    result = bn::train_segmentation(manifest, tc, cfg.seg_config());
                else
                    result = bn::train_classifier(manifest, tc, cfg.cls_config());

                bn::save_checkpoint(*result.net, tf.out_ckpt);
                if (!tf.history.empty()) bn::write_history_csv(result.history, tf.history);

                const double train_loss = result.history.empty() ? 0.0 : result.history.back().train_loss;
                const double test_loss = result.history.empty() ? 0.0 : result.history.back().test_loss;
                bn::LoadedData data = bn::load_samples(manifest, task == bn::Task::seg, task == bn::Task::cls);
                const auto& eval_idx = data.test_idx.empty() ? data.train_idx : data.test_idx;
                if (task == bn::Task::seg) {
                    const auto ev = bn::eval_segmentation(*result.net, data, eval_idx,
                                                          static_cast<float>(cfg.eval_threshold()), tc.batch_size);
                    std::printf("RESULT task=seg train_loss=%.6f test_loss=%.6f metric=miou value=%.6f\n", train_loss,
                                test_loss, ev.report.miou);
                } else {
                    const auto ev = bn::eval_classifier(*result.net, data, eval_idx, tc.batch_size);
                    std::printf("RESULT task=cls train_loss=%.6f test_loss=%.6f metric=accuracy value=%.6f\n",
                                train_loss, test_loss, bn::accuracy(ev.cm));
                }
                return kExitOk;
            });
        });
        return cmd;
    };
    TrainFlags seg_tf, cls_tf;
    add_train_cmd("train-seg", "train the segmentation network", bn::Task::seg, seg_tf);
    add_train_cmd("train-cls", "train the consistency classifier", bn::Task::cls, cls_tf);

    // ------------------------------------------------------------------ eval-*
    struct EvalFlags {
        CommonFlags common;
        std::string checkpoint, manifest, report, split = "all";
        double threshold = -1.0;
    };
    auto add_eval_cmd = [&](const char* name, const char* help, bn::Task task, EvalFlags& ef) {
        auto* cmd = app.add_subcommand(name, help);
        cmd->add_option("--config", ef.common.config_path, "key=value config file");
        cmd->add_option("--checkpoint", ef.checkpoint, "trained checkpoint")->required();
        cmd->add_option("--manifest", ef.manifest, "dataset manifest csv")->required();
        cmd->add_option("--report", ef.report, "output csv (per-image IoU / confusion matrix)");
        cmd->add_option("--split", ef.split, "train|test|all records to evaluate");
        if (task == bn::Task::seg) cmd->add_option("--threshold", ef.threshold, "binarization threshold");
        cmd->callback([&, task]() {
            rc = run_guarded([&]() {
                bn::RunConfig cfg = load_config(ef.common);
                const bn::DatasetManifest manifest = bn::read_manifest(ef.manifest);
                bn::LoadedData data = bn::load_samples(manifest, task == bn::Task::seg, task == bn::Task::cls);
                std::vector<size_t> idx;
                for (size_t i = 0; i < manifest.records.size(); ++i) {
                    const bool is_train = manifest.records[i].split == bn::Split::train;
                    if (ef.split == "all" || (ef.split == "train" && is_train) || (ef.split == "test" && !is_train))
                        idx.push_back(i);
                }
                BNET_REQUIRE(!idx.empty(), "eval: no records selected from manifest");
                if (task == bn::Task::seg) {
                    auto net = bn::build_minisegnet(cfg.seg_config(), 0);
                    bn::load_checkpoint(ef.checkpoint, *net);
                    const float thr = static_cast<float>(ef.threshold > 0.0 ? ef.threshold : cfg.eval_threshold());
                    const auto ev = bn::eval_segmentation(*net, data, idx, thr);
                    if (!ef.report.empty()) bn::write_iou_csv(ev.report, ev.names, ef.report);
                    std::printf("RESULT task=seg metric=miou value=%.6f n=%zu\n", ev.report.miou, idx.size());
                } else {
                    auto net = bn::build_miniresnet(cfg.cls_config(), 0);
                    bn::load_checkpoint(ef.checkpoint, *net);
                    const auto ev = bn::eval_classifier(*net, data, idx);
                    if (!ef.report.empty()) bn::write_confusion_csv(ev.cm, ef.report);
                    std::printf("RESULT task=cls metric=accuracy value=%.6f n=%zu\n", bn::accuracy(ev.cm), idx.size());
                }
                return kExitOk;
            });
        });
    };
    EvalFlags seg_ef, cls_ef;
    add_eval_cmd("eval-seg", "evaluate a segmentation checkpoint (per-image IoU + mIoU)", bn::Task::seg, seg_ef);
    add_eval_cmd("eval-cls", "evaluate a classifier checkpoint (confusion matrix + accuracy)", bn::Task::cls, cls_ef);

    // ---------------------------------------------------------------- predict-*
    struct PredictFlags {
        CommonFlags common;
        std::string checkpoint, image, out_prob, out_mask;
        double threshold = -1.0;
    };
    PredictFlags seg_pf, cls_pf;
    {
        auto* cmd = app.add_subcommand("predict-seg", "segment one PPM image (raw probability map + mask)");
        cmd->add_option("--config", seg_pf.common.config_path, "key=value config file");
        cmd->add_option("--checkpoint", seg_pf.checkpoint, "trained checkpoint")->required();
        cmd->add_option("--image", seg_pf.image, "input PPM")->required();
        cmd->add_option("--out-prob", seg_pf.out_prob, "raw probability PGM (default <image>_prob.pgm)");
        cmd->add_option("--out-mask", seg_pf.out_mask, "thresholded mask PGM (default <image>_mask.pgm)");
        cmd->add_option("--threshold", seg_pf.threshold, "binarization threshold");
        cmd->callback([&]() {
            rc = run_guarded([&]() {
                bn::RunConfig cfg = load_config(seg_pf.common);
                auto net = bn::build_minisegnet(cfg.seg_config(), 0);
                bn::load_checkpoint(seg_pf.checkpoint, *net);
                const bn::ImageF32 img = bn::to_float(bn::read_ppm(seg_pf.image));
                const bn::ProbMap pm = bn::segment_image(*net, img);
                const float thr = static_cast<float>(seg_pf.threshold > 0.0 ? seg_pf.threshold : cfg.eval_threshold());
                const std::string stem = fs::path(seg_pf.image).replace_extension("").string();
                const std::string prob_path = seg_pf.out_prob.empty() ? stem + "_prob.pgm" : seg_pf.out_prob;
                const std::string mask_path = seg_pf.out_mask.empty() ? stem + "_mask.pgm" : seg_pf.out_mask;
                bn::write_probmap_pgm(pm, prob_path);
                bn::write_mask(bn::binarize(pm, thr), mask_path);
                std::printf("wrote %s and %s\n", prob_path.c_str(), mask_path.c_str());
                return kExitOk;
            });
        });
    }
    {
        auto* cmd = app.add_subcommand("predict-cls", "classify one PPM image (class + softmax probabilities)");
        cmd->add_option("--config", cls_pf.common.config_path, "key=value config file");
        cmd->add_option("--checkpoint", cls_pf.checkpoint, "trained checkpoint")->required();
        cmd->add_option("--image", cls_pf.image, "input PPM")->required();
        cmd->callback([&]() {
            rc = run_guarded([&]() {
                bn::RunConfig cfg = load_config(cls_pf.common);
                auto net = bn::build_miniresnet(cfg.cls_config(), 0);
                bn::load_checkpoint(cls_pf.checkpoint, *net);
                const bn::ImageF32 img = bn::to_float(bn::read_ppm(cls_pf.image));
                const auto pred = bn::classify_image(*net, img);
                std::printf("class=%s", bn::class_name(pred.cls).c_str());
                for (size_t i = 0; i < pred.probs.size(); ++i)
                    std::printf(" p_%s=%.6f", i < 3 ? bn::stool_class_names()[i].c_str() : std::to_string(i).c_str(),
                                pred.probs[i]);
                std::printf("\n");
                return kExitOk;
            });
        });
    }

    // ------------------------------------------------------------------- kappa
    {
        static std::string file_a, file_b;
        auto* cmd = app.add_subcommand("kappa", "Cohen's kappa between two one-label-per-line rating files");
        cmd->add_option("fileA", file_a, "first rater's labels")->required();
        cmd->add_option("fileB", file_b, "second rater's labels")->required();
        cmd->callback([&]() {
            rc = run_guarded([&]() {
                auto read_labels = [](const std::string& path) {
                    std::ifstream is(path);
                    if (!is) throw bn::IoError("kappa: cannot open " + path);
                    std::vector<std::string> lines;
                    std::string line;
                    while (std::getline(is, line)) {
                        while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
                        if (!line.empty()) lines.push_back(line);
                    }
                    return lines;
                };
                const auto la = read_labels(file_a), lb = read_labels(file_b);
                if (la.size() != lb.size())
                    throw bn::ContractViolation("kappa: files disagree in length (" + std::to_string(la.size()) +
                                                " vs " + std::to_string(lb.size()) + ")");
                auto all_levels = [](const std::vector<std::string>& v) {
                    for (const auto& s : v)
                        if (s.size() != 1 || s[0] < '1' || s[0] > '7') return false;
                    return true;
                };
                std::vector<int> a, b;
                int k = 3;
                if (all_levels(la) && all_levels(lb)) {
                    k = 7;  // raw Bristol levels
                    for (const auto& s : la) a.push_back(s[0] - '1');
                    for (const auto& s : lb) b.push_back(s[0] - '1');
                } else {
                    for (const auto& s : la) a.push_back(static_cast<int>(bn::class_from_name(s)));
                    for (const auto& s : lb) b.push_back(static_cast<int>(bn::class_from_name(s)));
                }
                const bn::KappaResult r = bn::cohens_kappa(a, b, k);
                std::printf("p_o=%.6f p_e=%.6f kappa=%.6f\n", r.p_o, r.p_e, r.kappa);
                std::printf("RESULT task=kappa metric=kappa value=%.6f\n", r.kappa);
                return kExitOk;
            });
        });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }
    return rc;
}
