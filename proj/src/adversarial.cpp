// adversarial.cpp

#include "uct/adversarial.hpp"

namespace uct {

AdvLossForm adv_loss_form_from_string(const std::string& s) {
    if (s == "least_squares") return AdvLossForm::LeastSquares;
    if (s == "hinge") return AdvLossForm::Hinge;
    throw InvalidArgument("adv.loss_form must be least_squares or hinge, got " + s);
}

DiscriminatorNet::DiscriminatorNet(const DiscriminatorConfig& cfg, DomainLabel domain)
    : cfg_(cfg), domain_(domain) {
    if (cfg.width < 4) throw InvalidArgument("discriminator width must be >= 4");
    if (cfg.n_blocks < 1) throw InvalidArgument("discriminator n_blocks must be >= 1");
    Rng rng = make_rng(mix_seed(cfg.seed, domain == DomainLabel::Opacity ? 21 : 22));
    int cin = 1, c = cfg.width;
    for (int i = 0; i < cfg.n_blocks; ++i) {
        blocks_.emplace_back(params_, "block" + std::to_string(i), cin, c, 3, 2, 1, rng);
        cin = c;
        c *= 2;
    }
    head_ = nn::Conv2d(params_, "head", cin, 1, 3, 1, 1, rng);
}

ad::Var DiscriminatorNet::forward(const ad::Var& image) const {
    const Tensor& v = image->value;
    if (v.rank() != 4 || v.dim(1) != 1) throw ShapeError("discriminator: input must be [N,1,H,W]");
    int div = 1 << cfg_.n_blocks;
    if (v.dim(2) % div != 0 || v.dim(3) % div != 0)
        throw ShapeError("discriminator: H,W must be divisible by 2^n_blocks");
    ad::Var h = image;
    for (const auto& conv : blocks_) h = ad::leaky_relu(conv(h), 0.2);
    return head_(h);
}

ad::Var adv_loss_generator(const ad::Var& scores_fake, AdvLossForm form) {
    if (form == AdvLossForm::LeastSquares)
        return ad::mean(ad::square(ad::add_scalar(scores_fake, -1.0)));
    // hinge generator term: -mean(s_fake)
    return ad::neg(ad::mean(scores_fake));
}

ad::Var adv_loss_discriminator(const ad::Var& scores_real, const ad::Var& scores_fake,
                               AdvLossForm form) {
    if (form == AdvLossForm::LeastSquares) {
        ad::Var real_term = ad::mean(ad::square(ad::add_scalar(scores_real, -1.0)));
        ad::Var fake_term = ad::mean(ad::square(scores_fake));
        return ad::scale(ad::add(real_term, fake_term), 0.5);
    }
    ad::Var real_term = ad::mean(ad::relu(ad::neg(ad::add_scalar(scores_real, -1.0))));
    ad::Var fake_term = ad::mean(ad::relu(ad::add_scalar(scores_fake, 1.0)));
    return ad::scale(ad::add(real_term, fake_term), 0.5);
}

ad::Var cycle_reconstruction_loss(const ad::Var& original, const ad::Var& cycled) {
    if (!original->value.same_shape(cycled->value))
        throw ShapeError("cycle_reconstruction_loss: shape mismatch");
    return ad::l1_mean(original, cycled);
}

double cycle_reconstruction_loss(const Tensor& original, const Tensor& cycled) {
    if (!original.same_shape(cycled))
        throw ShapeError("cycle_reconstruction_loss: shape mismatch");
    double s = 0.0;
    for (long i = 0; i < original.numel(); ++i) s += std::abs(original[i] - cycled[i]);
    return s / static_cast<double>(original.numel());
}

}  // namespace uct
