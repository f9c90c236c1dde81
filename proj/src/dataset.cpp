// dataset.cpp

#include "uct/dataset.hpp"

#include <algorithm>
#include <iostream>

#include "uct/image_io.hpp"
#include "uct/rng.hpp"

namespace uct {

namespace fs = std::filesystem;

DatasetHandle DatasetHandle::from_directory(const fs::path& dir, DomainLabel domain) {
    if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir.string());
    DatasetHandle h;
    h.domain_ = domain;
    std::vector<fs::path> candidates;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file()) candidates.push_back(e.path());
    std::sort(candidates.begin(), candidates.end());
    for (const auto& p : candidates) {
        try {
            (void)read_gray_png(p);  // probe decodability once at construction
            h.files_.push_back(p);
        } catch (const IoError&) {
            std::cerr << "warning: skipping undecodable file " << p << "\n";
            ++h.skipped_;
        }
    }
    if (h.files_.empty()) throw IoError("no decodable images in directory: " + dir.string());
    return h;
}

DatasetHandle DatasetHandle::from_samples(std::vector<PhantomSample> samples, DomainLabel domain) {
    if (samples.empty()) throw InvalidArgument("DatasetHandle: empty sample list");
    DatasetHandle h;
    h.domain_ = domain;
    h.samples_ = std::make_shared<const std::vector<PhantomSample>>(std::move(samples));
    return h;
}

std::size_t DatasetHandle::size() const {
    return samples_ ? samples_->size() : files_.size();
}

Tensor DatasetHandle::image(std::size_t i) const {
    if (i >= size()) throw InvalidArgument("DatasetHandle: index out of range");
    return samples_ ? (*samples_)[i].image : read_gray_png(files_[i]);
}

std::optional<Tensor> DatasetHandle::gt_mask(std::size_t i) const {
    if (i >= size()) throw InvalidArgument("DatasetHandle: index out of range");
    if (samples_) return (*samples_)[i].gt_opacity_mask;
    return std::nullopt;
}

Tensor augment(const Tensor& image, std::uint64_t seed, int out_size,
               std::pair<double, double> crop_fraction_range) {
    auto [flo, fhi] = crop_fraction_range;
    if (flo <= 0.0 || fhi > 1.0 || flo > fhi)
        throw InvalidArgument("augment: crop_fraction_range must be within (0,1]");
    if (out_size < 8) throw InvalidArgument("augment: out_size must be >= 8");
    if (image.rank() != 3 || image.dim(0) != 1) throw ShapeError("augment: expected [1,H,W]");
    int H = image.dim(1), W = image.dim(2);
    int short_side = std::min(H, W);

    Rng rng = make_rng(mix_seed(seed, 201));
    double fraction = uniform(rng, flo, fhi);
    int side = std::max(1, static_cast<int>(std::lround(fraction * short_side)));
    side = std::min(side, short_side);
    int off_i = uniform_int(rng, 0, H - side);
    int off_j = uniform_int(rng, 0, W - side);

    // Bilinear resample of the crop to out_size x out_size. The half-pixel
    // mapping makes a full-frame same-size crop an exact identity.
    Tensor out({1, out_size, out_size});
    double sc = static_cast<double>(side) / out_size;
    for (int i = 0; i < out_size; ++i) {
        double sy = (i + 0.5) * sc - 0.5;
        int y0 = static_cast<int>(std::floor(sy));
        double wy = sy - y0;
        int ya = std::clamp(y0, 0, side - 1), yb = std::clamp(y0 + 1, 0, side - 1);
        for (int j = 0; j < out_size; ++j) {
            double sx = (j + 0.5) * sc - 0.5;
            int x0 = static_cast<int>(std::floor(sx));
            double wx = sx - x0;
            int xa = std::clamp(x0, 0, side - 1), xb = std::clamp(x0 + 1, 0, side - 1);
            auto px = [&](int y, int x) {
                return image[static_cast<long>(off_i + y) * W + (off_j + x)];
            };
            out[static_cast<long>(i) * out_size + j] =
                (1.0 - wy) * ((1.0 - wx) * px(ya, xa) + wx * px(ya, xb)) +
                wy * ((1.0 - wx) * px(yb, xa) + wx * px(yb, xb));
        }
    }
    return out;
}

std::vector<BatchItem> sample_batch(const DatasetHandle& source, const DatasetHandle& target,
                                    int batch_size, double rho, std::uint64_t seed) {
    if (rho < 0.0 || rho > 1.0) throw InvalidArgument("sample_batch: rho must be in [0,1]");
    if (source.size() == 0 || target.size() == 0)
        throw InvalidArgument("sample_batch: empty dataset handle");
    if (batch_size < 1) throw InvalidArgument("sample_batch: batch_size must be >= 1");

    Rng rng = make_rng(mix_seed(seed, 301));
    std::vector<BatchItem> batch;
    batch.reserve(static_cast<std::size_t>(batch_size));
    for (int b = 0; b < batch_size; ++b) {
        bool from_target = uniform(rng, 0.0, 1.0) < rho;
        const DatasetHandle& h = from_target ? target : source;
        std::size_t i = static_cast<std::size_t>(
            uniform_int(rng, 0, static_cast<int>(h.size()) - 1));
        BatchItem item;
        item.image = h.image(i);
        item.domain_label = h.domain();
        item.gt_opacity_mask = h.gt_mask(i);
        batch.push_back(std::move(item));
    }
    return batch;
}

}  // namespace uct
