#pragma once
// dataset.hpp - dataset handles over image directories or in-memory phantom
// samples, random crop/resize augmentation, and the mixed-domain batch stream
// feeding each generator.

#include <filesystem>
#include <memory>
#include <optional>
#include <vector>

#include "uct/phantom.hpp"

namespace uct {

struct BatchItem {
    Tensor image;  // [1,H,W] in [-1,1]
    DomainLabel domain_label = DomainLabel::Opacity;
    std::optional<Tensor> gt_opacity_mask;  // [H,W] binary when known
};

// Read-only after construction; shareable across threads. Directory-backed
// handles decode lazily; phantom-backed handles hold samples in memory.
class DatasetHandle {
public:
    static DatasetHandle from_directory(const std::filesystem::path& dir, DomainLabel domain);
    static DatasetHandle from_samples(std::vector<PhantomSample> samples, DomainLabel domain);

    std::size_t size() const;
    int skipped_files() const { return skipped_; }
    DomainLabel domain() const { return domain_; }

    Tensor image(std::size_t i) const;
    std::optional<Tensor> gt_mask(std::size_t i) const;

private:
    DomainLabel domain_ = DomainLabel::Opacity;
    std::vector<std::filesystem::path> files_;
    std::shared_ptr<const std::vector<PhantomSample>> samples_;
    int skipped_ = 0;
};

// Random square crop (side = fraction * min(H,W), fraction uniform in range)
// followed by bilinear resize to out_size x out_size.
Tensor augment(const Tensor& image, std::uint64_t seed, int out_size,
               std::pair<double, double> crop_fraction_range);

// Each item comes from `target` with probability rho (labeled NonOpacity) and
// from `source` otherwise (labeled Opacity); deterministic in seed.
std::vector<BatchItem> sample_batch(const DatasetHandle& source, const DatasetHandle& target,
                                    int batch_size, double rho, std::uint64_t seed);

}  // namespace uct
