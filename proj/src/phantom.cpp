// phantom.cpp

#include "uct/phantom.hpp"

#include <cmath>

#include "uct/rng.hpp"

namespace uct {

namespace {

struct Ellipse {
    double cx, cy, rx, ry;
    bool contains(double x, double y, double margin = 1.0) const {
        double dx = (x - cx) / (rx * margin);
        double dy = (y - cy) / (ry * margin);
        return dx * dx + dy * dy <= 1.0;
    }
};

constexpr double kBackground = -0.85;
constexpr double kThorax = 0.25;
constexpr double kLungField = -0.45;
constexpr double kBlobAmplitude = 1.1;

}  // namespace

PhantomSample synth_phantom(std::uint64_t seed, int size, int n_opacities) {
    if (size < 16) throw InvalidArgument("synth_phantom: size must be >= 16");
    if (n_opacities < 0) throw InvalidArgument("synth_phantom: n_opacities must be >= 0");

    Rng rng = make_rng(mix_seed(seed, 101));
    const double s = static_cast<double>(size);

    // Mild per-sample anatomical jitter keeps the domains non-trivial.
    Ellipse thorax{s * 0.5 + uniform(rng, -0.02, 0.02) * s,
                   s * 0.52 + uniform(rng, -0.02, 0.02) * s,
                   s * uniform(rng, 0.38, 0.44), s * uniform(rng, 0.42, 0.48)};
    Ellipse lungs[2];
    for (int k = 0; k < 2; ++k) {
        double side = k == 0 ? -1.0 : 1.0;
        lungs[k] = Ellipse{thorax.cx + side * s * uniform(rng, 0.17, 0.21),
                           thorax.cy + s * uniform(rng, -0.02, 0.02),
                           s * uniform(rng, 0.12, 0.15), s * uniform(rng, 0.26, 0.32)};
    }

    struct Blob {
        double cx, cy, sigma;
    };
    std::vector<Blob> blobs;
    for (int b = 0; b < n_opacities; ++b) {
        const Ellipse& lung = lungs[uniform_int(rng, 0, 1)];
        // Place the centre well inside the lung field so the half-peak
        // footprint stays on lung tissue.
        double ang = uniform(rng, 0.0, 2.0 * M_PI);
        double rad = std::sqrt(uniform(rng, 0.0, 1.0)) * 0.6;
        blobs.push_back({lung.cx + std::cos(ang) * rad * lung.rx,
                         lung.cy + std::sin(ang) * rad * lung.ry,
                         s * uniform(rng, 0.047, 0.085)});
    }

    // Smooth low-amplitude texture so the discriminator cannot key on a
    // perfectly flat background.
    double tex_phase_x = uniform(rng, 0.0, 2.0 * M_PI);
    double tex_phase_y = uniform(rng, 0.0, 2.0 * M_PI);
    double tex_freq = uniform(rng, 2.0, 4.0);

    PhantomSample sample;
    sample.image = Tensor({1, size, size});
    sample.gt_opacity_mask = Tensor({size, size});
    const double half_peak = 0.5 * kBlobAmplitude;

    for (int i = 0; i < size; ++i) {
        for (int j = 0; j < size; ++j) {
            double y = i + 0.5, x = j + 0.5;
            double v = kBackground;
            if (thorax.contains(x, y)) {
                v = kThorax;
                for (const Ellipse& lung : lungs)
                    if (lung.contains(x, y)) v = kLungField;
            }
            v += 0.05 * std::sin(tex_freq * 2.0 * M_PI * x / s + tex_phase_x) *
                 std::sin(tex_freq * 2.0 * M_PI * y / s + tex_phase_y);
            double blob_sum = 0.0;
            for (const Blob& b : blobs) {
                double dx = x - b.cx, dy = y - b.cy;
                blob_sum += kBlobAmplitude * std::exp(-(dx * dx + dy * dy) / (2.0 * b.sigma * b.sigma));
            }
            v += blob_sum;
            long idx = static_cast<long>(i) * size + j;
            sample.image[idx] = std::min(1.0, std::max(-1.0, v));
            sample.gt_opacity_mask[idx] = blob_sum > half_peak ? 1.0 : 0.0;
        }
    }
    sample.domain_label = n_opacities > 0 ? DomainLabel::Opacity : DomainLabel::NonOpacity;
    return sample;
}

}  // namespace uct
