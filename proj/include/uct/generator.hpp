#pragma once
// generator.hpp - dual-head translation generator: residual encoder-decoder
// trunk with sibling tanh-bounded image and mask heads, plus the mask
// normalization and blending that assemble the final translated image.

#include <string>

#include "uct/nn.hpp"

namespace uct {

enum class Direction { A, B };  // A: Opacity -> NonOpacity, B: the reverse

inline const char* to_string(Direction d) { return d == Direction::A ? "A" : "B"; }
Direction direction_from_string(const std::string& s);

struct GeneratorConfig {
    int width = 12;   // stem channels; doubled at each downsample
    int depth = 2;    // number of stride-2 downsamples
    int n_res = 1;    // residual blocks at the bottleneck
    std::uint64_t seed = 0;
};

struct GeneratorOutputVars {
    ad::Var synth_image;  // [N,1,H,W] in [-1,1]
    ad::Var raw_mask;     // [N,1,H,W] in [-1,1]
};

class GeneratorNet {
public:
    GeneratorNet(const GeneratorConfig& cfg, Direction dir);

    // Input [N,1,H,W] with H,W divisible by 2^depth; throws ShapeError otherwise.
    GeneratorOutputVars forward(const ad::Var& image) const;

    nn::ParamStore& params() { return params_; }
    const nn::ParamStore& params() const { return params_; }
    const GeneratorConfig& config() const { return cfg_; }
    Direction direction() const { return dir_; }

private:
    GeneratorConfig cfg_;
    Direction dir_;
    nn::ParamStore params_;
    std::vector<nn::Conv2d> down_;            // stem + depth stride-2 convs
    std::vector<nn::Conv2d> res_;             // 2 convs per residual block
    std::vector<nn::Conv2d> up_;              // conv before each 2x upsample
    nn::Conv2d image_head_, mask_head_;
};

// (raw + 1) / 2 elementwise; input must lie in [-1,1].
ad::Var normalize_mask(const ad::Var& raw_mask);
Tensor normalize_mask(const Tensor& raw_mask);

// synth * mask01 + (1 - mask01) * source, elementwise.
ad::Var blend(const ad::Var& synth_image, const ad::Var& mask01, const ad::Var& source_image);
Tensor blend(const Tensor& synth_image, const Tensor& mask01, const Tensor& source_image);

struct TranslateResult {
    Tensor translated;  // blended output
    Tensor mask01;
    Tensor synth_image;
};

// Inference composition: forward + normalize + blend, no gradient bookkeeping.
TranslateResult translate(const GeneratorNet& gen, const Tensor& image);

}  // namespace uct
