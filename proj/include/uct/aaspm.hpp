#pragma once
// aaspm.hpp - activation-mask penalty suite: coverage upper bound, central
// point repulsion, and the bidirectional activation minimisation loss.

#include "uct/autodiff.hpp"

namespace uct {

enum class DomainLabel { Opacity, NonOpacity };

inline const char* to_string(DomainLabel l) {
    return l == DomainLabel::Opacity ? "Opacity" : "NonOpacity";
}

struct MaskPenaltyConfig {
    double f_upper = 0.75;
    double f_central = 0.1;
    double f_height = 0.2;
    double epsilon = 0.01;
    // Pixel terms are averaged by default so the bounds stay resolution
    // independent; set false to restore raw per-pixel sums.
    bool normalize = true;

    void validate() const;
};

// ReLU(agg(mask01) - f_upper)^2 where agg is mean (normalize) or sum.
ad::Var upper_bound_penalty(const ad::Var& mask01, double f_upper, bool normalize = true);

// agg over pixels of (1 / (|m - f_central| + eps))^f_height.
ad::Var central_repulsion_penalty(const ad::Var& mask01, double f_central, double f_height,
                                  double epsilon, bool normalize = true);

// Sum of |mask01| when the input already belongs to the generator's output
// domain (intra-domain pass), else exactly 0 with no gradient.
ad::Var bam_loss(const ad::Var& mask01, DomainLabel domain_label);

void check_mask01(const Tensor& mask01, const char* op);

}  // namespace uct
