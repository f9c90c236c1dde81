#pragma once
// adversarial.hpp - patch discriminator, adversarial losses, cycle loss.

#include "uct/aaspm.hpp"
#include "uct/nn.hpp"

namespace uct {

enum class AdvLossForm { LeastSquares, Hinge };

AdvLossForm adv_loss_form_from_string(const std::string& s);

struct DiscriminatorConfig {
    int width = 12;       // channels of the first block; doubled per block
    int n_blocks = 3;     // stride-2 conv blocks
    std::uint64_t seed = 0;
};

// Stride-2 convolutional patch critic; 64x64 input with 3 blocks yields an
// 8x8 score map.
class DiscriminatorNet {
public:
    DiscriminatorNet(const DiscriminatorConfig& cfg, DomainLabel domain);

    ad::Var forward(const ad::Var& image) const;  // [N,1,H,W] -> [N,1,H/2^b,W/2^b]

    nn::ParamStore& params() { return params_; }
    const nn::ParamStore& params() const { return params_; }
    const DiscriminatorConfig& config() const { return cfg_; }
    DomainLabel domain() const { return domain_; }

private:
    DiscriminatorConfig cfg_;
    DomainLabel domain_;
    nn::ParamStore params_;
    std::vector<nn::Conv2d> blocks_;
    nn::Conv2d head_;
};

ad::Var adv_loss_generator(const ad::Var& scores_fake,
                           AdvLossForm form = AdvLossForm::LeastSquares);
ad::Var adv_loss_discriminator(const ad::Var& scores_real, const ad::Var& scores_fake,
                               AdvLossForm form = AdvLossForm::LeastSquares);

// Mean absolute elementwise difference.
ad::Var cycle_reconstruction_loss(const ad::Var& original, const ad::Var& cycled);
double cycle_reconstruction_loss(const Tensor& original, const Tensor& cycled);

}  // namespace uct
