// generator.cpp

#include "uct/generator.hpp"

namespace uct {

Direction direction_from_string(const std::string& s) {
    if (s == "A") return Direction::A;
    if (s == "B") return Direction::B;
    throw InvalidArgument("direction must be A or B, got " + s);
}

GeneratorNet::GeneratorNet(const GeneratorConfig& cfg, Direction dir) : cfg_(cfg), dir_(dir) {
    if (cfg.width < 8) throw InvalidArgument("generator width must be >= 8");
    if (cfg.depth < 1) throw InvalidArgument("generator depth must be >= 1");
    if (cfg.n_res < 0) throw InvalidArgument("generator n_res must be >= 0");
    Rng rng = make_rng(mix_seed(cfg.seed, dir == Direction::A ? 11 : 12));

    int c = cfg.width;
    down_.emplace_back(params_, "stem", 1, c, 3, 1, 1, rng);
    for (int i = 0; i < cfg.depth; ++i) {
        down_.emplace_back(params_, "down" + std::to_string(i), c, 2 * c, 3, 2, 1, rng);
        c *= 2;
    }
    for (int i = 0; i < cfg.n_res; ++i) {
        res_.emplace_back(params_, "res" + std::to_string(i) + ".0", c, c, 3, 1, 1, rng);
        res_.emplace_back(params_, "res" + std::to_string(i) + ".1", c, c, 3, 1, 1, rng);
    }
    for (int i = 0; i < cfg.depth; ++i) {
        up_.emplace_back(params_, "up" + std::to_string(i), c, c / 2, 3, 1, 1, rng);
        c /= 2;
    }
    image_head_ = nn::Conv2d(params_, "image_head", c, 1, 3, 1, 1, rng);
    mask_head_ = nn::Conv2d(params_, "mask_head", c, 1, 3, 1, 1, rng);
}

GeneratorOutputVars GeneratorNet::forward(const ad::Var& image) const {
    const Tensor& v = image->value;
    if (v.rank() != 4 || v.dim(1) != 1) throw ShapeError("generator: input must be [N,1,H,W]");
    int div = 1 << cfg_.depth;
    if (v.dim(2) % div != 0 || v.dim(3) % div != 0)
        throw ShapeError("generator: H,W must be divisible by 2^depth");

    constexpr double kInEps = 1e-5;
    ad::Var h = image;
    for (const auto& conv : down_) h = ad::relu(ad::instance_norm(conv(h), kInEps));
    for (std::size_t i = 0; i + 1 < res_.size(); i += 2) {
        ad::Var r = ad::relu(ad::instance_norm(res_[i](h), kInEps));
        r = ad::instance_norm(res_[i + 1](r), kInEps);
        h = ad::relu(ad::add(h, r));
    }
    for (const auto& conv : up_) h = ad::upsample2x(ad::relu(ad::instance_norm(conv(h), kInEps)));
    GeneratorOutputVars out;
    out.synth_image = ad::tanh_op(image_head_(h));
    out.raw_mask = ad::tanh_op(mask_head_(h));
    return out;
}

ad::Var normalize_mask(const ad::Var& raw_mask) {
    for (double v : raw_mask->value.data)
        if (v < -1.0 || v > 1.0) throw InvalidArgument("normalize_mask: values outside [-1,1]");
    return ad::scale(ad::add_scalar(raw_mask, 1.0), 0.5);
}

Tensor normalize_mask(const Tensor& raw_mask) {
    Tensor out(raw_mask.shape);
    for (long i = 0; i < raw_mask.numel(); ++i) {
        double v = raw_mask[i];
        if (v < -1.0 || v > 1.0) throw InvalidArgument("normalize_mask: values outside [-1,1]");
        out[i] = (v + 1.0) * 0.5;
    }
    return out;
}

ad::Var blend(const ad::Var& synth_image, const ad::Var& mask01, const ad::Var& source_image) {
    if (!synth_image->value.same_shape(mask01->value) ||
        !synth_image->value.same_shape(source_image->value))
        throw ShapeError("blend: shape mismatch");
    ad::Var keep = ad::add_scalar(ad::neg(mask01), 1.0);  // 1 - mask
    return ad::add(ad::mul(synth_image, mask01), ad::mul(keep, source_image));
}

Tensor blend(const Tensor& synth_image, const Tensor& mask01, const Tensor& source_image) {
    if (!synth_image.same_shape(mask01) || !synth_image.same_shape(source_image))
        throw ShapeError("blend: shape mismatch");
    Tensor out(synth_image.shape);
    for (long i = 0; i < out.numel(); ++i)
        out[i] = synth_image[i] * mask01[i] + (1.0 - mask01[i]) * source_image[i];
    return out;
}

TranslateResult translate(const GeneratorNet& gen, const Tensor& image) {
    Tensor in = image;
    if (in.rank() == 3) in.shape = {1, in.dim(0), in.dim(1), in.dim(2)};
    ad::Var x = ad::constant(in, "input");
    GeneratorOutputVars out = gen.forward(x);
    ad::Var mask01 = normalize_mask(out.raw_mask);
    ad::Var blended = blend(out.synth_image, mask01, x);
    TranslateResult r;
    r.translated = blended->value;
    r.mask01 = mask01->value;
    r.synth_image = out.synth_image->value;
    if (image.rank() == 3) {
        r.translated.shape = image.shape;
        r.mask01.shape = image.shape;
        r.synth_image.shape = image.shape;
    }
    return r;
}

}  // namespace uct
