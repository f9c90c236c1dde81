#pragma once
// cdam.hpp - cross-domain alignment: frozen classifier prior, feature-level
// alignment (instance-norm structural + gram style terms), and label
// consistency alignment.

#include <memory>

#include "uct/aaspm.hpp"
#include "uct/nn.hpp"

namespace uct {

struct LabelFilter {
    std::vector<int> q;    // binary selection over L labels
    double threshold_p = 0.5;

    int active_count() const;
    void validate_enabled() const;  // at least one selected label, 0 < p < 1
};

// Frozen feature extractor + prediction head. Gradients flow through the
// activations to the generator; parameters are never updated here.
class ClassifierPrior {
public:
    virtual ~ClassifierPrior() = default;
    virtual ad::Var features(const ad::Var& images) const = 0;      // [N,C,h,w]
    virtual ad::Var probabilities(const ad::Var& features) const = 0;  // [N,L]
    virtual int num_labels() const = 0;
};

// Desk-scale prior: a small conv net over 64x64 phantoms with two labels
// (opacity present / absent), trained by pretrain_phantom_classifier and
// frozen afterwards.
class PhantomClassifier : public ClassifierPrior {
public:
    struct Config {
        int width = 8;
        int num_labels = 2;
        std::uint64_t seed = 0;
    };

    explicit PhantomClassifier(const Config& cfg);

    ad::Var features(const ad::Var& images) const override;
    ad::Var probabilities(const ad::Var& features) const override;
    int num_labels() const override { return cfg_.num_labels; }

    nn::ParamStore& params() { return params_; }
    const nn::ParamStore& params() const { return params_; }
    void freeze() { params_.set_trainable(false); }
    bool frozen() const;
    const Config& config() const { return cfg_; }

private:
    Config cfg_;
    nn::ParamStore params_;
    std::vector<nn::Conv2d> blocks_;
    ad::Var head_w_, head_b_;
};

struct ClassifierPretrainReport {
    int iterations = 0;
    double val_accuracy = 0.0;
};

// Trains on synthesized phantoms until validation accuracy reaches the target
// (default 0.95), then freezes the classifier. Throws NumericError if the
// target is not reached within max_iters.
ClassifierPretrainReport pretrain_phantom_classifier(PhantomClassifier& clf, int image_size,
                                                     std::uint64_t seed, double lr = 1e-3,
                                                     int batch = 16, int max_iters = 2000,
                                                     double target_accuracy = 0.95);

// lambda_style * ||GM(a)-GM(b)||^2 + ||IN(a)-IN(b)||^2, with ||.||^2 the mean
// of squared elementwise differences.
ad::Var feature_alignment_loss(const ad::Var& feat_translated, const ad::Var& feat_source,
                               double lambda_style);

// BCE between inverted translated predictions and thresholded source labels,
// averaged over the selected labels. hard_inversion reproduces the literal
// threshold-then-invert form (gradient-free through the translated branch).
ad::Var label_consistency_loss(const ad::Var& probs_translated, const Tensor& probs_source,
                               const LabelFilter& filter, bool lca_enabled = true,
                               bool hard_inversion = false);

}  // namespace uct
