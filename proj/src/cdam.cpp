// cdam.cpp

#include "uct/cdam.hpp"

#include <cmath>

#include "uct/phantom.hpp"

namespace uct {

int LabelFilter::active_count() const {
    int n = 0;
    for (int v : q) {
        if (v != 0 && v != 1) throw InvalidArgument("LabelFilter: q entries must be 0 or 1");
        n += v;
    }
    return n;
}

void LabelFilter::validate_enabled() const {
    if (active_count() == 0) throw InvalidArgument("LabelFilter: q must select at least one label");
    if (threshold_p <= 0.0 || threshold_p >= 1.0)
        throw InvalidArgument("LabelFilter: threshold p must be in (0,1)");
}

PhantomClassifier::PhantomClassifier(const Config& cfg) : cfg_(cfg) {
    if (cfg.width < 2) throw InvalidArgument("classifier width must be >= 2");
    if (cfg.num_labels < 1) throw InvalidArgument("classifier num_labels must be >= 1");
    Rng rng = make_rng(mix_seed(cfg.seed, 31));
    int cin = 1, c = cfg.width;
    for (int i = 0; i < 3; ++i) {
        blocks_.emplace_back(params_, "block" + std::to_string(i), cin, c, 3, 2, 1, rng);
        cin = c;
        c = std::min(2 * c, 4 * cfg.width);
    }
    head_w_ = params_.add("head.w", nn::init_linear_weight(cfg.num_labels, cin, rng));
    head_b_ = params_.add("head.b", Tensor({cfg.num_labels}));
}

ad::Var PhantomClassifier::features(const ad::Var& images) const {
    ad::Var h = images;
    for (const auto& conv : blocks_) h = ad::leaky_relu(conv(h), 0.1);
    return h;
}

ad::Var PhantomClassifier::probabilities(const ad::Var& features) const {
    ad::Var pooled = ad::global_avg_pool(features);
    return ad::sigmoid_op(ad::linear(pooled, head_w_, head_b_));
}

bool PhantomClassifier::frozen() const {
    for (const auto& [name, v] : params_.entries())
        if (v->trainable) return false;
    return true;
}

ClassifierPretrainReport pretrain_phantom_classifier(PhantomClassifier& clf, int image_size,
                                                     std::uint64_t seed, double lr, int batch,
                                                     int max_iters, double target_accuracy) {
    nn::Adam opt(&clf.params(), {});
    Rng rng = make_rng(mix_seed(seed, 41));

    const int n_val = 64;
    std::vector<PhantomSample> val;
    for (int i = 0; i < n_val; ++i)
        val.push_back(synth_phantom(mix_seed(seed, 50000 + static_cast<std::uint64_t>(i)),
                                    image_size, i % 2 == 0 ? uniform_int(rng, 1, 3) : 0));

    auto validate = [&]() {
        int correct = 0;
        for (const auto& s : val) {
            Tensor in = s.image;
            in.shape = {1, 1, image_size, image_size};
            ad::Var probs = clf.probabilities(clf.features(ad::constant(in)));
            bool pred_opacity = probs->value[0] > 0.5;
            if (pred_opacity == (s.domain_label == DomainLabel::Opacity)) ++correct;
        }
        return static_cast<double>(correct) / n_val;
    };

    ClassifierPretrainReport report;
    std::uint64_t sample_counter = 0;
    for (int it = 0; it < max_iters; ++it) {
        Tensor images({batch, 1, image_size, image_size});
        Tensor targets({batch, clf.num_labels()});
        for (int b = 0; b < batch; ++b) {
            int n_blobs = b % 2 == 0 ? uniform_int(rng, 1, 3) : 0;
            PhantomSample s = synth_phantom(mix_seed(seed, 60000 + sample_counter++), image_size,
                                            n_blobs);
            std::copy(s.image.data.begin(), s.image.data.end(),
                      images.data.begin() + static_cast<long>(b) * image_size * image_size);
            // label 0: opacity present, label 1: opacity absent
            targets[static_cast<long>(b) * clf.num_labels()] = n_blobs > 0 ? 1.0 : 0.0;
            if (clf.num_labels() > 1)
                targets[static_cast<long>(b) * clf.num_labels() + 1] = n_blobs > 0 ? 0.0 : 1.0;
        }
        ad::Var probs = clf.probabilities(clf.features(ad::constant(images)));
        ad::Var p = ad::clamp(probs, 1e-6, 1.0 - 1e-6);
        ad::Var t = ad::constant(targets);
        ad::Var one_minus_t = ad::constant([&] {
            Tensor u(targets.shape);
            for (long i = 0; i < u.numel(); ++i) u[i] = 1.0 - targets[i];
            return u;
        }());
        ad::Var bce = ad::neg(ad::mean(ad::add(ad::mul(t, ad::log_op(p)),
                                               ad::mul(one_minus_t,
                                                       ad::log_op(ad::add_scalar(ad::neg(p), 1.0))))));
        ad::backward(bce);
        opt.step(lr);
        report.iterations = it + 1;
        if ((it + 1) % 25 == 0) {
            report.val_accuracy = validate();
            if (report.val_accuracy >= target_accuracy) break;
        }
    }
    if (report.val_accuracy < target_accuracy) {
        report.val_accuracy = validate();
        if (report.val_accuracy < target_accuracy)
            throw NumericError("classifier pretraining did not reach target accuracy");
    }
    clf.freeze();
    return report;
}

ad::Var feature_alignment_loss(const ad::Var& feat_translated, const ad::Var& feat_source,
                               double lambda_style) {
    if (!feat_translated->value.same_shape(feat_source->value))
        throw ShapeError("feature_alignment_loss: shape mismatch");
    constexpr double kInEps = 1e-5;
    ad::Var structural = ad::mse(ad::instance_norm(feat_translated, kInEps),
                                 ad::instance_norm(feat_source, kInEps));
    ad::Var style = ad::mse(ad::gram(feat_translated), ad::gram(feat_source));
    return ad::add(structural, ad::scale(style, lambda_style));
}

ad::Var label_consistency_loss(const ad::Var& probs_translated, const Tensor& probs_source,
                               const LabelFilter& filter, bool lca_enabled, bool hard_inversion) {
    if (!lca_enabled && filter.active_count() == 0) return ad::constant(Tensor::scalar(0.0));
    filter.validate_enabled();
    const Tensor& pt = probs_translated->value;
    if (!pt.same_shape(probs_source)) throw ShapeError("label_consistency_loss: shape mismatch");
    if (pt.rank() != 2) throw ShapeError("label_consistency_loss: probabilities must be [N,L]");
    int N = pt.dim(0), L = pt.dim(1);
    if (L != static_cast<int>(filter.q.size()))
        throw ShapeError("label_consistency_loss: filter length mismatch");
    for (long i = 0; i < pt.numel(); ++i)
        if (pt[i] < 0.0 || pt[i] > 1.0 || probs_source[i] < 0.0 || probs_source[i] > 1.0)
            throw InvalidArgument("label_consistency_loss: probabilities outside [0,1]");

    // Targets: labels positive on the source image, restricted by q.
    Tensor target({N, L});
    Tensor qmask({N, L});
    for (int n = 0; n < N; ++n)
        for (int l = 0; l < L; ++l) {
            long i = static_cast<long>(n) * L + l;
            qmask[i] = static_cast<double>(filter.q[static_cast<std::size_t>(l)]);
            target[i] = (probs_source[i] > filter.threshold_p) ? qmask[i] : 0.0;
        }

    ad::Var inv;
    if (hard_inversion) {
        // Literal form: threshold the translated predictions, then invert.
        Tensor hard({N, L});
        for (long i = 0; i < pt.numel(); ++i)
            hard[i] = pt[i] > filter.threshold_p ? 0.0 : 1.0;
        inv = ad::constant(hard);
    } else {
        inv = ad::add_scalar(ad::neg(probs_translated), 1.0);
    }
    ad::Var r = ad::clamp(inv, 1e-6, 1.0 - 1e-6);
    ad::Var t = ad::constant(target);
    ad::Var one_minus_t = ad::constant([&] {
        Tensor u(target.shape);
        for (long i = 0; i < u.numel(); ++i) u[i] = 1.0 - target[i];
        return u;
    }());
    ad::Var per_coord = ad::neg(ad::add(
        ad::mul(t, ad::log_op(r)),
        ad::mul(one_minus_t, ad::log_op(ad::add_scalar(ad::neg(r), 1.0)))));
    ad::Var selected = ad::mul(per_coord, ad::constant(qmask));
    double denom = static_cast<double>(N) * filter.active_count();
    return ad::scale(ad::sum(selected), 1.0 / denom);
}

}  // namespace uct
