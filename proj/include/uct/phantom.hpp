#pragma once
// phantom.hpp - seeded synthetic two-domain dataset: elliptical thorax with
// two darker lung fields, plus bright gaussian blobs with pixel-exact
// ground-truth opacity masks.

#include "uct/aaspm.hpp"
#include "uct/tensor.hpp"

namespace uct {

struct PhantomSample {
    Tensor image;            // [1,H,W] in [-1,1]
    Tensor gt_opacity_mask;  // [H,W], values 0/1
    DomainLabel domain_label = DomainLabel::NonOpacity;
};

// Deterministic in (seed, size, n_opacities). size >= 16 required.
PhantomSample synth_phantom(std::uint64_t seed, int size, int n_opacities);

}  // namespace uct
