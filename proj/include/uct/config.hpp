#pragma once
// config.hpp - sectioned key=value run configuration with presets, strict
// unknown-key rejection, and resolved-snapshot serialization.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "uct/adversarial.hpp"
#include "uct/cdam.hpp"

namespace uct {

struct LossWeights {
    double lambda_penalties = 0.01;
    double lambda_bam = 0.1;
    double lambda_feature = 0.5;
    double lambda_classifier = 0.5;
    double lambda_adv = 2.0;
    double lambda_rec = 1.0;

    void validate() const;
};

struct AblationFlags {
    bool aaspm = true;
    bool fa = true;
    bool lca = true;
    bool baml = true;
};

struct RunConfig {
    // [run]
    std::uint64_t seed = 1;
    std::string out = "run";

    // [data]
    std::string opacity_dir;     // empty -> procedural phantoms
    std::string nonopacity_dir;
    int phantom_train_count = 400;
    int phantom_max_blobs = 3;

    // [model]
    int width = 12;
    int depth = 2;
    int n_res = 1;
    int disc_width = 12;
    int disc_blocks = 3;

    // [train]
    int image_size = 64;
    int iters = 2000;
    int batch = 8;
    double lr = 1e-3;
    double rho = 0.25;
    int checkpoint_every = 500;
    int log_every = 10;
    bool augment = true;
    double crop_min = 0.8;
    double crop_max = 1.0;

    AblationFlags ablation;
    MaskPenaltyConfig aaspm;

    // [cdam]
    double lambda_style = 0.5;
    LabelFilter filter{{1, 0}, 0.5};
    bool hard_inversion = false;
    int classifier_width = 8;
    double classifier_target_accuracy = 0.95;

    // [adv]
    AdvLossForm adv_loss_form = AdvLossForm::LeastSquares;

    LossWeights weights;

    // [synth]
    int synth_n = 100;
    double synth_opacity_fraction = 0.5;

    // [eval]
    int kid_subset_size = 100;
    int kid_n_subsets = 100;
    int embed_dim = 32;

    void validate() const;
    std::string to_text() const;  // resolved snapshot, parseable by parse()
};

// Built-in presets: "desk" (the defaults above) and "paper" (512x512, batch 2,
// 2.5e5 iterations, lr 1e-4).
RunConfig preset_config(const std::string& name);

// Parses a sectioned key=value file over a base config; unknown sections or
// keys throw InvalidArgument.
RunConfig parse_config_text(const std::string& text, RunConfig base);
RunConfig load_config_file(const std::filesystem::path& path, RunConfig base);

}  // namespace uct
