// aaspm.cpp

#include "uct/aaspm.hpp"

namespace uct {

void MaskPenaltyConfig::validate() const {
    if (epsilon <= 0.0) throw InvalidArgument("aaspm.epsilon must be > 0");
    if (f_upper <= 0.0 || f_upper > 1.0) throw InvalidArgument("aaspm.f_upper must be in (0,1]");
    if (f_central < 0.0 || f_central > 1.0) throw InvalidArgument("aaspm.f_central must be in [0,1]");
    if (f_height <= 0.0) throw InvalidArgument("aaspm.f_height must be > 0");
}

void check_mask01(const Tensor& mask01, const char* op) {
    if (mask01.numel() == 0) throw InvalidArgument(std::string(op) + ": empty mask");
    for (double v : mask01.data)
        if (v < 0.0 || v > 1.0) throw InvalidArgument(std::string(op) + ": mask values outside [0,1]");
}

ad::Var upper_bound_penalty(const ad::Var& mask01, double f_upper, bool normalize) {
    check_mask01(mask01->value, "upper_bound_penalty");
    ad::Var coverage = normalize ? ad::mean(mask01) : ad::sum(mask01);
    return ad::square(ad::relu(ad::add_scalar(coverage, -f_upper)));
}

ad::Var central_repulsion_penalty(const ad::Var& mask01, double f_central, double f_height,
                                  double epsilon, bool normalize) {
    check_mask01(mask01->value, "central_repulsion_penalty");
    if (epsilon <= 0.0) throw InvalidArgument("central_repulsion_penalty: epsilon must be > 0");
    // (1/(|m-c|+eps))^h  ==  (|m-c|+eps)^(-h), base strictly positive
    ad::Var dist = ad::add_scalar(ad::abs_op(ad::add_scalar(mask01, -f_central)), epsilon);
    ad::Var terms = ad::pow_scalar(dist, -f_height);
    return normalize ? ad::mean(terms) : ad::sum(terms);
}

ad::Var bam_loss(const ad::Var& mask01, DomainLabel domain_label) {
    check_mask01(mask01->value, "bam_loss");
    if (domain_label != DomainLabel::NonOpacity)
        return ad::constant(Tensor::scalar(0.0));  // indicator gates off, no gradient
    return ad::sum(ad::abs_op(mask01));
}

}  // namespace uct
