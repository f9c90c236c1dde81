// uct.cpp - command line front end: synth | train | translate | evaluate.

#include <CLI11.hpp>
#include <algorithm>
#include <fstream>
#include <iostream>
#include <map>

#include "uct/config.hpp"
#include "uct/dataset.hpp"
#include "uct/image_io.hpp"
#include "uct/metrics.hpp"
#include "uct/trainer.hpp"

namespace fs = std::filesystem;
using namespace uct;

namespace {

struct CommonArgs {
    std::string config_file;
    std::string preset = "desk";
    std::string out;
    std::int64_t seed = -1;
};

void add_common(CLI::App* app, CommonArgs* args) {
    app->add_option("--config", args->config_file, "config file overlaying the preset");
    app->add_option("--preset", args->preset, "base preset: desk or paper")
        ->check(CLI::IsMember({"desk", "paper"}));
    app->add_option("--out", args->out, "run output directory");
    app->add_option("--seed", args->seed, "override the run seed");
}

RunConfig resolve_config(const CommonArgs& args) {
    RunConfig cfg = preset_config(args.preset);
    if (!args.config_file.empty()) cfg = load_config_file(args.config_file, cfg);
    if (args.seed >= 0) cfg.seed = static_cast<std::uint64_t>(args.seed);
    if (!args.out.empty()) cfg.out = args.out;
    cfg.validate();
    return cfg;
}

void write_snapshot(const RunConfig& cfg) {
    fs::create_directories(cfg.out);
    std::ofstream os(fs::path(cfg.out) / "config.txt");
    if (!os) throw IoError("cannot write config snapshot under " + cfg.out);
    os << cfg.to_text();
}

std::vector<fs::path> png_files(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir.string());
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".png") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    if (files.empty()) throw IoError("no .png files in " + dir.string());
    return files;
}

int cmd_synth(const CommonArgs& args) {
    RunConfig cfg = resolve_config(args);
    if (cfg.synth_n <= 0) throw InvalidArgument("synth: [synth] n must be positive");
    write_snapshot(cfg);
    fs::path images = fs::path(cfg.out) / "images";
    fs::create_directories(images);

    std::ofstream manifest(fs::path(cfg.out) / "manifest.tsv");
    if (!manifest) throw IoError("cannot write manifest under " + cfg.out);
    int n_opacity = static_cast<int>(std::lround(cfg.synth_n * cfg.synth_opacity_fraction));
    for (int i = 0; i < cfg.synth_n; ++i) {
        bool opaque = i < n_opacity;
        int blobs = 0;
        if (opaque) {
            Rng rng = make_rng(mix_seed(cfg.seed, 0x5000ULL + i));
            blobs = uniform_int(rng, 1, cfg.phantom_max_blobs);
        }
        PhantomSample s = synth_phantom(mix_seed(cfg.seed, 0x1000ULL + i), cfg.image_size, blobs);
        char name[64], mask_name[64];
        std::snprintf(name, sizeof(name), "phantom_%05d.png", i);
        std::snprintf(mask_name, sizeof(mask_name), "phantom_%05d_mask.png", i);
        write_gray_png(images / name, s.image);
        write_mask_png(images / mask_name, s.gt_opacity_mask);
        manifest << name << "\t" << to_string(s.domain_label) << "\t" << mask_name << "\n";
    }
    if (!manifest) throw IoError("manifest write failed under " + cfg.out);
    return 0;
}

int cmd_train(const CommonArgs& args, const std::string& resume) {
    std::unique_ptr<Trainer> trainer;
    RunConfig cfg;
    if (resume.empty()) {
        cfg = resolve_config(args);
        trainer = std::make_unique<Trainer>(cfg);
    } else {
        trainer = Trainer::load_checkpoint(resume);
        cfg = trainer->config();
        if (!args.out.empty()) cfg.out = args.out;
    }
    write_snapshot(cfg);

    DatasetHandle opacity = [&] {
        if (!cfg.opacity_dir.empty())
            return DatasetHandle::from_directory(cfg.opacity_dir, DomainLabel::Opacity);
        std::vector<PhantomSample> samples;
        for (int i = 0; i < cfg.phantom_train_count; ++i) {
            Rng rng = make_rng(mix_seed(cfg.seed, 0x15000ULL + i));
            samples.push_back(synth_phantom(mix_seed(cfg.seed, 0x11000ULL + i), cfg.image_size,
                                            uniform_int(rng, 1, cfg.phantom_max_blobs)));
        }
        return DatasetHandle::from_samples(std::move(samples), DomainLabel::Opacity);
    }();
    DatasetHandle nonopacity = [&] {
        if (!cfg.nonopacity_dir.empty())
            return DatasetHandle::from_directory(cfg.nonopacity_dir, DomainLabel::NonOpacity);
        std::vector<PhantomSample> samples;
        for (int i = 0; i < cfg.phantom_train_count; ++i)
            samples.push_back(
                synth_phantom(mix_seed(cfg.seed, 0x12000ULL + i), cfg.image_size, 0));
        return DatasetHandle::from_samples(std::move(samples), DomainLabel::NonOpacity);
    }();

    std::ofstream metrics_log(fs::path(cfg.out) / "metrics.log",
                              resume.empty() ? std::ios::trunc : std::ios::app);
    if (!metrics_log) throw IoError("cannot write metrics.log under " + cfg.out);
    trainer->run(opacity, nonopacity, &metrics_log, fs::path(cfg.out) / "checkpoints");
    return 0;
}

int cmd_translate(const CommonArgs& args, const std::string& checkpoint,
                  const std::string& input_dir, const std::string& direction) {
    auto trainer = Trainer::load_checkpoint(checkpoint);
    fs::path out = args.out.empty() ? fs::path(trainer->config().out) : fs::path(args.out);
    fs::path images = out / "images";
    fs::create_directories(images);

    GeneratorNet& gen =
        direction_from_string(direction) == Direction::A ? trainer->gen_a() : trainer->gen_b();
    for (const fs::path& f : png_files(input_dir)) {
        Tensor img = read_gray_png(f);
        TranslateResult r = translate(gen, img);
        std::string stem = f.stem().string();
        write_gray_png(images / (stem + "_translated.png"), r.translated);
        write_mask_png(images / (stem + "_mask.png"), r.mask01);
    }
    return 0;
}

Tensor resize_to(const Tensor& image, int size) {
    // full-frame "crop" so augment degenerates to a plain bilinear resize
    return augment(image, 0, size, {1.0, 1.0});
}

int cmd_evaluate(const CommonArgs& args, const std::string& dir_a, const std::string& dir_b,
                 const std::string& pred_dir, const std::string& gt_dir) {
    RunConfig cfg = resolve_config(args);
    if (dir_a.empty() != dir_b.empty())
        throw InvalidArgument("evaluate: --dir-a and --dir-b must be given together");
    if (pred_dir.empty() != gt_dir.empty())
        throw InvalidArgument("evaluate: --pred-masks and --gt-masks must be given together");
    if (dir_a.empty() && pred_dir.empty())
        throw InvalidArgument("evaluate: nothing to do; pass image dirs and/or mask dirs");
    write_snapshot(cfg);

    std::ofstream report(fs::path(cfg.out) / "report.txt");
    if (!report) throw IoError("cannot write report.txt under " + cfg.out);
    report.precision(10);

    if (!dir_a.empty()) {
        auto load_dir = [&](const fs::path& dir) {
            std::vector<Tensor> out;
            for (const fs::path& f : png_files(dir))
                out.push_back(resize_to(read_gray_png(f), cfg.image_size));
            return out;
        };
        std::vector<Tensor> a = load_dir(dir_a), b = load_dir(dir_b);
        RandomProjectionEmbedder embedder(a.front().numel(), cfg.embed_dim, cfg.seed);
        EmbeddingSet ea = embedder.embed(a), eb = embedder.embed(b);
        report << "fid=" << fid(ea, eb) << "\n";
        int subset = std::min({cfg.kid_subset_size, ea.n, eb.n});
        if (subset >= 2) {
            KidResult k = kid(ea, eb, subset, cfg.kid_n_subsets, cfg.seed);
            report << "kid_mean=" << k.mean << "\n";
            report << "kid_std=" << k.std << "\n";
        } else {
            report << "kid=undefined (fewer than 2 images per side)\n";
        }
    }

    if (!pred_dir.empty()) {
        std::vector<fs::path> preds = png_files(pred_dir);
        double miou_sum = 0.0, sens_sum = 0.0, auc_sum = 0.0;
        long sens_n = 0, auc_n = 0, skipped_sens = 0, skipped_auc = 0;
        for (const fs::path& p : preds) {
            fs::path g = fs::path(gt_dir) / p.filename();
            if (!fs::exists(g)) throw IoError("missing mask file: " + g.string());
            // PNGs decode to [-1,1]; masks live in [0,1]
            Tensor pred = read_gray_png(p), gt = read_gray_png(g);
            for (auto& v : pred.data) v = (v + 1.0) / 2.0;
            for (auto& v : gt.data) v = (v + 1.0) / 2.0;
            miou_sum += miou(pred, gt);
            try {
                sens_sum += sensitivity(pred, gt);
                ++sens_n;
            } catch (const UndefinedError&) {
                ++skipped_sens;
            }
            try {
                auc_sum += mask_localization_auc(pred, gt);
                ++auc_n;
            } catch (const UndefinedError&) {
                ++skipped_auc;
            }
        }
        report << "miou=" << miou_sum / preds.size() << "\n";
        if (sens_n > 0)
            report << "sensitivity=" << sens_sum / sens_n << "\n";
        else
            report << "sensitivity=undefined (no gt foreground)\n";
        if (skipped_sens > 0) report << "sensitivity_skipped=" << skipped_sens << "\n";
        if (auc_n > 0)
            report << "mask_auc=" << auc_sum / auc_n << "\n";
        else
            report << "mask_auc=undefined (single-class gt masks)\n";
        if (skipped_auc > 0) report << "mask_auc_skipped=" << skipped_auc << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"unpaired translation with activation masks"};
    app.require_subcommand(1);

    CommonArgs synth_args, train_args, translate_args, eval_args;
    std::string resume, checkpoint, input_dir, direction = "A";
    std::string dir_a, dir_b, pred_dir, gt_dir;

    CLI::App* synth = app.add_subcommand("synth", "write a phantom dataset with masks");
    add_common(synth, &synth_args);

    CLI::App* train = app.add_subcommand("train", "train the translation model");
    add_common(train, &train_args);
    train->add_option("--resume", resume, "checkpoint to continue from");

    CLI::App* trans = app.add_subcommand("translate", "run a generator over an image directory");
    add_common(trans, &translate_args);
    trans->add_option("--checkpoint", checkpoint, "trained checkpoint")->required();
    trans->add_option("--input", input_dir, "directory of input PNGs")->required();
    trans->add_option("--direction", direction, "generator to apply: A or B")
        ->check(CLI::IsMember({"A", "B"}));

    CLI::App* eval = app.add_subcommand("evaluate", "compute metrics and write report.txt");
    add_common(eval, &eval_args);
    eval->add_option("--dir-a", dir_a, "first image directory (FID/KID)");
    eval->add_option("--dir-b", dir_b, "second image directory (FID/KID)");
    eval->add_option("--pred-masks", pred_dir, "predicted mask directory");
    eval->add_option("--gt-masks", gt_dir, "ground-truth mask directory, matched by filename");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (synth->parsed()) return cmd_synth(synth_args);
        if (train->parsed()) return cmd_train(train_args, resume);
        if (trans->parsed())
            return cmd_translate(translate_args, checkpoint, input_dir, direction);
        if (eval->parsed()) return cmd_evaluate(eval_args, dir_a, dir_b, pred_dir, gt_dir);
    } catch (const InvalidArgument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return 3;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 4;
    } catch (const UndefinedError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 4;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
