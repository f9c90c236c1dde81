#pragma once
// metrics.hpp - evaluation apparatus: FID, KID with subset statistics,
// segmentation overlap scores, classification scores, and the per-pixel mask
// localization AUC.

#include <optional>
#include <string>
#include <vector>

#include "uct/tensor.hpp"

namespace uct {

struct EmbeddingSet {
    // n x d, row-major
    int n = 0, d = 0;
    std::vector<double> data;
    std::string provenance;

    double* row(int i) { return data.data() + static_cast<long>(i) * d; }
    const double* row(int i) const { return data.data() + static_cast<long>(i) * d; }
};

// Frechet distance between Gaussian fits (1/(N-1) covariances); matrix square
// root via symmetric eigendecomposition with negative eigenvalues clipped.
double fid(const EmbeddingSet& a, const EmbeddingSet& b);

struct KidResult {
    double mean = 0.0;
    double std = 0.0;
};

// Unbiased MMD^2 with polynomial kernel (x.y/d + 1)^3 over seeded subsets.
KidResult kid(const EmbeddingSet& a, const EmbeddingSet& b, int subset_size, int n_subsets,
              std::uint64_t seed);

// Mean IoU over {foreground, background}; soft predictions are binarized at
// 0.5. Masks must share shape.
double miou(const Tensor& pred, const Tensor& gt);

// TP / (TP + FN) on foreground; throws UndefinedError for empty gt foreground.
double sensitivity(const Tensor& pred, const Tensor& gt);

struct ClassificationMetrics {
    double accuracy = 0.0;
    std::optional<double> precision;  // empty when denominator is 0
    std::optional<double> recall;
    std::optional<double> f1;
};

ClassificationMetrics classification_metrics(const std::vector<int>& pred_labels,
                                             const std::vector<int>& true_labels);

// ROC AUC of mask01 as a per-pixel score for gt foreground; ties receive
// average ranks so a constant mask scores exactly 0.5.
double mask_localization_auc(const Tensor& mask01, const Tensor& gt_opacity_mask);

// Seeded gaussian random-projection embedding of [1,H,W] images; the
// desk-scale stand-in for an external inception-style embedding network.
class RandomProjectionEmbedder {
public:
    RandomProjectionEmbedder(int input_numel, int out_dim, std::uint64_t seed);
    EmbeddingSet embed(const std::vector<Tensor>& images) const;
    int out_dim() const { return out_dim_; }

private:
    int input_numel_, out_dim_;
    std::vector<double> proj_;  // out_dim x input_numel
};

}  // namespace uct
