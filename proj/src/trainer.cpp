// trainer.cpp

#include "uct/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <json.hpp>
#include <ostream>

#include "uct/adversarial.hpp"

namespace uct {

using json = nlohmann::ordered_json;

double lr_schedule(long iteration, double base_lr) {
    if (iteration < 0) throw InvalidArgument("lr_schedule: iteration must be >= 0");
    long decays = iteration / 100000;
    return base_lr * std::pow(0.1, static_cast<double>(decays));
}

double total_generator_loss(const GeneratorLossParts& parts, const LossWeights& w) {
    auto check = [](double v, const char* name) {
        if (!std::isfinite(v))
            throw NumericError(std::string("total_generator_loss: non-finite term ") + name);
        return v;
    };
    double penalties = check(parts.upper_penalty, "upper_penalty") +
                       check(parts.central_penalty, "central_penalty");
    return w.lambda_penalties * penalties + w.lambda_bam * check(parts.bam, "bam") +
           w.lambda_feature * check(parts.feature, "feature") +
           w.lambda_classifier * check(parts.classifier, "classifier") +
           w.lambda_adv * check(parts.adv, "adv") + w.lambda_rec * check(parts.rec, "rec");
}

Trainer::Trainer(RunConfig cfg, bool pretrain_classifier) : cfg_(std::move(cfg)) {
    cfg_.validate();
    GeneratorConfig g{cfg_.width, cfg_.depth, cfg_.n_res, cfg_.seed};
    gen_a_ = std::make_unique<GeneratorNet>(g, Direction::A);
    gen_b_ = std::make_unique<GeneratorNet>(g, Direction::B);
    DiscriminatorConfig d{cfg_.disc_width, cfg_.disc_blocks, cfg_.seed};
    disc_nonop_ = std::make_unique<DiscriminatorNet>(d, DomainLabel::NonOpacity);
    disc_op_ = std::make_unique<DiscriminatorNet>(d, DomainLabel::Opacity);
    if (cfg_.ablation.fa || cfg_.ablation.lca) {
        PhantomClassifier::Config cc{cfg_.classifier_width,
                                     static_cast<int>(cfg_.filter.q.size()), cfg_.seed};
        classifier_ = std::make_unique<PhantomClassifier>(cc);
        if (pretrain_classifier) {
            pretrain_phantom_classifier(*classifier_, cfg_.image_size, cfg_.seed, 1e-3, 16, 2000,
                                        cfg_.classifier_target_accuracy);
        } else {
            classifier_->freeze();
        }
    }
    opt_gen_a_ = std::make_unique<nn::Adam>(&gen_a_->params(), nn::AdamConfig{});
    opt_gen_b_ = std::make_unique<nn::Adam>(&gen_b_->params(), nn::AdamConfig{});
    opt_disc_nonop_ = std::make_unique<nn::Adam>(&disc_nonop_->params(), nn::AdamConfig{});
    opt_disc_op_ = std::make_unique<nn::Adam>(&disc_op_->params(), nn::AdamConfig{});
}

namespace {

Tensor stack_batch(const std::vector<BatchItem>& batch) {
    if (batch.empty()) throw InvalidArgument("train_step: empty batch");
    const Tensor& first = batch.front().image;
    if (first.rank() != 3 || first.dim(0) != 1)
        throw ShapeError("train_step: batch images must be [1,H,W]");
    int H = first.dim(1), W = first.dim(2);
    Tensor out({static_cast<int>(batch.size()), 1, H, W});
    long stride = static_cast<long>(H) * W;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        if (!batch[i].image.same_shape(first)) throw ShapeError("train_step: ragged batch shapes");
        std::copy(batch[i].image.data.begin(), batch[i].image.data.end(),
                  out.data.begin() + static_cast<long>(i) * stride);
    }
    return out;
}

DomainLabel output_domain(const GeneratorNet& gen) {
    return gen.direction() == Direction::A ? DomainLabel::NonOpacity : DomainLabel::Opacity;
}

}  // namespace

struct Trainer::DirectionLosses {
    ad::Var mask01;           // full batch
    ad::Var blended_inter;    // may be null when no inter items
    Tensor inter_sources;     // original images of the inter items
    std::vector<int> inter_idx, intra_idx;
    // loss graph nodes (null when ablated / empty selection)
    ad::Var adv, rec, upper, central, bam, feature, classifier;
};

Trainer::DirectionLosses Trainer::direction_losses(GeneratorNet& gen, GeneratorNet& gen_back,
                                                   DiscriminatorNet& disc,
                                                   const std::vector<BatchItem>& batch,
                                                   const Tensor& images) {
    DirectionLosses out;
    DomainLabel target = output_domain(gen);
    for (std::size_t i = 0; i < batch.size(); ++i) {
        if (batch[i].domain_label == target)
            out.intra_idx.push_back(static_cast<int>(i));
        else
            out.inter_idx.push_back(static_cast<int>(i));
    }

    ad::Var x = ad::constant(images, "batch");
    GeneratorOutputVars fwd = gen.forward(x);
    out.mask01 = normalize_mask(fwd.raw_mask);
    ad::Var blended = blend(fwd.synth_image, out.mask01, x);

    if (cfg_.ablation.aaspm && !out.inter_idx.empty()) {
        // The coverage and repulsion penalties shape the translation-pass
        // masks only; intra-domain masks answer to the minimisation term
        // alone, otherwise the repulsion barrier at f_central pins them
        // above zero and fights the gating.
        ad::Var upper_sum;
        for (int i : out.inter_idx) {
            ad::Var item = ad::select_items(out.mask01, {i});
            ad::Var p = upper_bound_penalty(item, cfg_.aaspm.f_upper, cfg_.aaspm.normalize);
            upper_sum = upper_sum ? ad::add(upper_sum, p) : p;
        }
        out.upper = ad::scale(upper_sum, 1.0 / static_cast<double>(out.inter_idx.size()));
        out.central = central_repulsion_penalty(ad::select_items(out.mask01, out.inter_idx),
                                                cfg_.aaspm.f_central, cfg_.aaspm.f_height,
                                                cfg_.aaspm.epsilon, cfg_.aaspm.normalize);
    }
    if (cfg_.ablation.baml && !out.intra_idx.empty()) {
        // Pixel-sum per item, normalized over active items and
        // pixels so lambda_bam keeps resolution-independent meaning.
        out.bam = ad::mean(ad::abs_op(ad::select_items(out.mask01, out.intra_idx)));
    }

    if (!out.inter_idx.empty()) {
        out.blended_inter = ad::select_items(blended, out.inter_idx);
        out.inter_sources = ad::select_items(ad::constant(images), out.inter_idx)->value;

        out.adv = adv_loss_generator(disc.forward(out.blended_inter), cfg_.adv_loss_form);

        // cycle: translate back with the opposite generator, then blend
        GeneratorOutputVars back = gen_back.forward(out.blended_inter);
        ad::Var back_mask = normalize_mask(back.raw_mask);
        ad::Var cycled = blend(back.synth_image, back_mask, out.blended_inter);
        out.rec = cycle_reconstruction_loss(ad::constant(out.inter_sources), cycled);

        if (classifier_ && (cfg_.ablation.fa || cfg_.ablation.lca)) {
            ad::Var feat_t = classifier_->features(out.blended_inter);
            ad::Var feat_s = classifier_->features(ad::constant(out.inter_sources));
            if (cfg_.ablation.fa)
                out.feature = feature_alignment_loss(feat_t, feat_s, cfg_.lambda_style);
            if (cfg_.ablation.lca) {
                ad::Var probs_t = classifier_->probabilities(feat_t);
                Tensor probs_s = classifier_->probabilities(feat_s)->value;
                out.classifier = label_consistency_loss(probs_t, probs_s, cfg_.filter, true,
                                                        cfg_.hard_inversion);
            }
        }
    }
    return out;
}

StepMetrics Trainer::train_step(const std::vector<BatchItem>& batch_a,
                                const std::vector<BatchItem>& batch_b) {
    auto t0 = std::chrono::steady_clock::now();
    Tensor images_a = stack_batch(batch_a);
    Tensor images_b = stack_batch(batch_b);
    if (!images_a.same_shape(images_b)) throw ShapeError("train_step: batch shape mismatch");

    double lr = lr_schedule(iteration_, cfg_.lr);

    // Generator graph first, with the critics frozen so their weights collect
    // no gradient from the generator objective.
    disc_nonop_->params().set_trainable(false);
    disc_op_->params().set_trainable(false);
    DirectionLosses la = direction_losses(*gen_a_, *gen_b_, *disc_nonop_, batch_a, images_a);
    DirectionLosses lb = direction_losses(*gen_b_, *gen_a_, *disc_op_, batch_b, images_b);

    GeneratorLossParts parts;
    StepMetrics m;
    ad::Var total;
    auto add_term = [&](const ad::Var& va, const ad::Var& vb, double weight, double* part,
                        const char* name) {
        ad::Var term;
        double value = 0.0;
        if (va && vb) {
            term = ad::add(va, vb);
            value = va->scalar_value() + vb->scalar_value();
        } else if (va || vb) {
            term = va ? va : vb;
            value = term->scalar_value();
        } else {
            return;
        }
        *part += value;
        if (va) m.sub_losses[std::string(name) + "_a"] = va->scalar_value();
        if (vb) m.sub_losses[std::string(name) + "_b"] = vb->scalar_value();
        if (weight != 0.0) total = total ? ad::add(total, ad::scale(term, weight))
                                         : ad::scale(term, weight);
    };
    add_term(la.upper, lb.upper, cfg_.weights.lambda_penalties, &parts.upper_penalty, "upper");
    add_term(la.central, lb.central, cfg_.weights.lambda_penalties, &parts.central_penalty,
             "central");
    add_term(la.bam, lb.bam, cfg_.weights.lambda_bam, &parts.bam, "bam");
    add_term(la.feature, lb.feature, cfg_.weights.lambda_feature, &parts.feature, "feature");
    add_term(la.classifier, lb.classifier, cfg_.weights.lambda_classifier, &parts.classifier,
             "classifier");
    add_term(la.adv, lb.adv, cfg_.weights.lambda_adv, &parts.adv, "adv");
    add_term(la.rec, lb.rec, cfg_.weights.lambda_rec, &parts.rec, "rec");
    m.total = total_generator_loss(parts, cfg_.weights);  // also validates finiteness
    // Backward while the critics are still frozen; their parameters must keep
    // only the gradients of their own objective.
    if (total) ad::backward(total);
    disc_nonop_->params().set_trainable(true);
    disc_op_->params().set_trainable(true);

    // Discriminator graph; generator outputs enter detached.
    ad::Var d_total;
    auto disc_loss = [&](DiscriminatorNet& disc, const DirectionLosses& fake_side,
                         const std::vector<const Tensor*>& reals) -> ad::Var {
        if (!fake_side.blended_inter || reals.empty()) return nullptr;
        Tensor real_stack({static_cast<int>(reals.size()), 1, images_a.dim(2), images_a.dim(3)});
        long stride = static_cast<long>(images_a.dim(2)) * images_a.dim(3);
        for (std::size_t i = 0; i < reals.size(); ++i)
            std::copy(reals[i]->data.begin(), reals[i]->data.end(),
                      real_stack.data.begin() + static_cast<long>(i) * stride);
        ad::Var scores_real = disc.forward(ad::constant(real_stack));
        ad::Var scores_fake = disc.forward(ad::constant(fake_side.blended_inter->value));
        return adv_loss_discriminator(scores_real, scores_fake, cfg_.adv_loss_form);
    };
    // Genuine images of each domain, regardless of which stream they arrived in.
    std::vector<const Tensor*> real_nonop, real_op;
    for (const auto& it : batch_b)
        if (it.domain_label == DomainLabel::NonOpacity) real_nonop.push_back(&it.image);
    for (const auto& it : batch_a) {
        if (it.domain_label == DomainLabel::NonOpacity) real_nonop.push_back(&it.image);
        else real_op.push_back(&it.image);
    }
    for (const auto& it : batch_b)
        if (it.domain_label == DomainLabel::Opacity) real_op.push_back(&it.image);

    ad::Var d_nonop = disc_loss(*disc_nonop_, la, real_nonop);
    ad::Var d_op = disc_loss(*disc_op_, lb, real_op);
    if (d_nonop) d_total = d_nonop;
    if (d_op) d_total = d_total ? ad::add(d_total, d_op) : d_op;
    if (d_total) {
        m.disc_loss = d_total->scalar_value();
        if (!std::isfinite(m.disc_loss))
            throw NumericError("train_step: non-finite discriminator loss");
    }

    // All values verified finite; every gradient was taken at the pre-update
    // point. Apply the discriminator update, then the generator update.
    if (d_total) ad::backward(d_total);
    if (d_total) {
        opt_disc_nonop_->step(lr);
        opt_disc_op_->step(lr);
    }
    if (total) {
        opt_gen_a_->step(lr);
        opt_gen_b_->step(lr);
    }

    ++iteration_;
    m.iteration = iteration_;
    m.lr = lr;
    auto t1 = std::chrono::steady_clock::now();
    m.walltime = std::chrono::duration_cast<std::chrono::microseconds>(t1 - t0).count() * 1e-6;
    return m;
}

std::uint64_t Trainer::batch_seed(long iteration, int direction) const {
    return mix_seed(cfg_.seed, 0x20000ULL + static_cast<std::uint64_t>(iteration) * 2 +
                                   static_cast<std::uint64_t>(direction));
}

void Trainer::run(const DatasetHandle& opacity, const DatasetHandle& nonopacity,
                  std::ostream* metrics_log, const std::filesystem::path& ckpt_dir) {
    namespace fs = std::filesystem;
    auto draw = [&](const DatasetHandle& src, const DatasetHandle& tgt, int dir) {
        std::uint64_t seed = batch_seed(iteration_, dir);
        auto batch = sample_batch(src, tgt, cfg_.batch, cfg_.rho, seed);
        if (cfg_.augment) {
            for (std::size_t i = 0; i < batch.size(); ++i) {
                batch[i].image = augment(batch[i].image, mix_seed(seed, 1000 + i),
                                         cfg_.image_size, {cfg_.crop_min, cfg_.crop_max});
                batch[i].gt_opacity_mask.reset();  // crop invalidates the pixel mask
            }
        }
        return batch;
    };
    auto emit = [&](const StepMetrics& m) {
        if (!metrics_log) return;
        auto& os = *metrics_log;
        os.precision(10);
        os << "iter=" << m.iteration;
        for (const auto& [k, v] : m.sub_losses) os << " " << k << "=" << v;
        os << " disc=" << m.disc_loss << " total=" << m.total << " lr=" << m.lr
           << " walltime=" << m.walltime << "\n";
        os.flush();
    };
    auto checkpoint = [&]() {
        if (ckpt_dir.empty()) return;
        fs::create_directories(ckpt_dir);
        save_checkpoint(ckpt_dir / ("ckpt_" + std::to_string(iteration_) + ".bin"));
    };

    while (iteration_ < cfg_.iters) {
        auto batch_a = draw(opacity, nonopacity, 0);
        auto batch_b = draw(nonopacity, opacity, 1);
        StepMetrics m = train_step(batch_a, batch_b);
        if (m.iteration % cfg_.log_every == 0 || m.iteration == 1 || m.iteration == cfg_.iters)
            emit(m);
        if (cfg_.checkpoint_every > 0 && m.iteration % cfg_.checkpoint_every == 0) checkpoint();
    }
    checkpoint();  // final state, overwriting the periodic file if it exists
}

namespace {

constexpr char kMagic[8] = {'U', 'C', 'T', 'C', 'K', 'P', 'T', '1'};

void write_doubles(std::ostream& os, const std::vector<double>& v) {
    os.write(reinterpret_cast<const char*>(v.data()),
             static_cast<std::streamsize>(v.size() * sizeof(double)));
}

std::vector<double> read_doubles(std::istream& is, std::size_t n) {
    std::vector<double> v(n);
    is.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(double)));
    if (!is) throw IoError("checkpoint: truncated parameter block");
    return v;
}

std::vector<double> moments_flat(std::vector<Tensor>& ms) {
    std::vector<double> out;
    for (const Tensor& t : ms) out.insert(out.end(), t.data.begin(), t.data.end());
    return out;
}

void load_moments(std::vector<Tensor>& ms, const std::vector<double>& flat) {
    std::size_t off = 0;
    for (Tensor& t : ms) {
        if (off + t.data.size() > flat.size()) throw IoError("checkpoint: moment block too short");
        std::copy_n(flat.begin() + static_cast<long>(off), t.data.size(), t.data.begin());
        off += t.data.size();
    }
    if (off != flat.size()) throw IoError("checkpoint: moment block size mismatch");
}

}  // namespace

void Trainer::save_checkpoint(const std::filesystem::path& path) const {
    json header;
    header["version"] = 1;
    header["config"] = cfg_.to_text();
    header["iteration"] = iteration_;
    header["has_classifier"] = classifier_ != nullptr;
    json counts = json::object();
    json adam_t = json::object();
    struct Entry {
        const char* name;
        const nn::ParamStore* store;
        nn::Adam* opt;
    };
    std::vector<Entry> entries = {
        {"gen_a", &gen_a_->params(), opt_gen_a_.get()},
        {"gen_b", &gen_b_->params(), opt_gen_b_.get()},
        {"disc_nonop", &disc_nonop_->params(), opt_disc_nonop_.get()},
        {"disc_op", &disc_op_->params(), opt_disc_op_.get()},
    };
    for (const auto& e : entries) {
        counts[e.name] = e.store->total_count();
        adam_t[e.name] = e.opt->t();
    }
    if (classifier_) counts["classifier"] = classifier_->params().total_count();
    header["counts"] = counts;
    header["adam_t"] = adam_t;

    std::string hs = header.dump();
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot write checkpoint: " + path.string());
    os.write(kMagic, sizeof(kMagic));
    std::uint64_t hl = hs.size();
    os.write(reinterpret_cast<const char*>(&hl), sizeof(hl));
    os.write(hs.data(), static_cast<std::streamsize>(hs.size()));
    for (const auto& e : entries) {
        write_doubles(os, e.store->flat_values());
        write_doubles(os, moments_flat(e.opt->m()));
        write_doubles(os, moments_flat(e.opt->v()));
    }
    if (classifier_) write_doubles(os, classifier_->params().flat_values());
    if (!os) throw IoError("checkpoint write failed: " + path.string());
}

std::unique_ptr<Trainer> Trainer::load_checkpoint(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open checkpoint: " + path.string());
    char magic[8];
    is.read(magic, sizeof(magic));
    if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw IoError("checkpoint: bad magic in " + path.string() +
                      " (expected UCTCKPT1)");
    std::uint64_t hl = 0;
    is.read(reinterpret_cast<char*>(&hl), sizeof(hl));
    if (!is || hl > (1ULL << 24)) throw IoError("checkpoint: implausible header length");
    std::string hs(hl, '\0');
    is.read(hs.data(), static_cast<std::streamsize>(hl));
    if (!is) throw IoError("checkpoint: truncated header");
    json header;
    try {
        header = json::parse(hs);
    } catch (const std::exception& e) {
        throw IoError(std::string("checkpoint: unparseable header: ") + e.what());
    }
    if (header.value("version", -1) != 1)
        throw IoError("checkpoint: unsupported version " +
                      std::to_string(header.value("version", -1)));

    RunConfig cfg = parse_config_text(header.at("config").get<std::string>(), RunConfig{});
    auto trainer = std::make_unique<Trainer>(cfg, /*pretrain_classifier=*/false);
    trainer->iteration_ = header.at("iteration").get<long>();

    struct Entry {
        const char* name;
        nn::ParamStore* store;
        nn::Adam* opt;
    };
    std::vector<Entry> entries = {
        {"gen_a", &trainer->gen_a_->params(), trainer->opt_gen_a_.get()},
        {"gen_b", &trainer->gen_b_->params(), trainer->opt_gen_b_.get()},
        {"disc_nonop", &trainer->disc_nonop_->params(), trainer->opt_disc_nonop_.get()},
        {"disc_op", &trainer->disc_op_->params(), trainer->opt_disc_op_.get()},
    };
    for (const auto& e : entries) {
        long count = header.at("counts").at(e.name).get<long>();
        if (count != e.store->total_count())
            throw IoError(std::string("checkpoint: parameter count mismatch for ") + e.name);
        e.store->load_flat_values(read_doubles(is, static_cast<std::size_t>(count)));
        load_moments(e.opt->m(), read_doubles(is, static_cast<std::size_t>(count)));
        load_moments(e.opt->v(), read_doubles(is, static_cast<std::size_t>(count)));
        e.opt->t() = header.at("adam_t").at(e.name).get<long>();
    }
    bool has_clf = header.value("has_classifier", false);
    if (has_clf != (trainer->classifier_ != nullptr))
        throw IoError("checkpoint: classifier presence mismatch with config");
    if (trainer->classifier_) {
        long count = header.at("counts").at("classifier").get<long>();
        if (count != trainer->classifier_->params().total_count())
            throw IoError("checkpoint: classifier parameter count mismatch");
        trainer->classifier_->params().load_flat_values(
            read_doubles(is, static_cast<std::size_t>(count)));
        trainer->classifier_->freeze();
    }
    return trainer;
}

}  // namespace uct
