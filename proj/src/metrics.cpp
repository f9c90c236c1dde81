// metrics.cpp

#include "uct/metrics.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>

#include "uct/common.hpp"
#include "uct/rng.hpp"

namespace uct {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

MatrixXd as_matrix(const EmbeddingSet& s) {
    MatrixXd m(s.n, s.d);
    for (int i = 0; i < s.n; ++i)
        for (int j = 0; j < s.d; ++j) m(i, j) = s.row(i)[j];
    return m;
}

// Symmetric PSD square root with negative eigenvalues clipped at 0.
MatrixXd psd_sqrt(const MatrixXd& m) {
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (m + m.transpose()));
    VectorXd ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace

double fid(const EmbeddingSet& a, const EmbeddingSet& b) {
    if (a.d != b.d) throw InvalidArgument("fid: embedding dimension mismatch");
    if (a.n < 2 || b.n < 2) throw InvalidArgument("fid: need at least 2 samples per set");
    MatrixXd A = as_matrix(a), B = as_matrix(b);
    VectorXd mu_a = A.colwise().mean(), mu_b = B.colwise().mean();
    MatrixXd Ca = (A.rowwise() - mu_a.transpose()).transpose() *
                  (A.rowwise() - mu_a.transpose()) / (a.n - 1.0);
    MatrixXd Cb = (B.rowwise() - mu_b.transpose()).transpose() *
                  (B.rowwise() - mu_b.transpose()) / (b.n - 1.0);
    // Tr((Ca Cb)^{1/2}) computed as Tr((Ca^{1/2} Cb Ca^{1/2})^{1/2}).
    MatrixXd sa = psd_sqrt(Ca);
    MatrixXd inner = psd_sqrt(sa * Cb * sa);
    double tr_cross = inner.trace();
    double mean_term = (mu_a - mu_b).squaredNorm();
    double val = mean_term + Ca.trace() + Cb.trace() - 2.0 * tr_cross;
    return std::max(0.0, val);
}

namespace {

double poly_kernel(const double* x, const double* y, int d) {
    double dot = 0.0;
    for (int i = 0; i < d; ++i) dot += x[i] * y[i];
    double base = dot / d + 1.0;
    return base * base * base;
}

// Unbiased MMD^2 between two equal-size vector subsets.
double mmd2_unbiased(const std::vector<const double*>& xs, const std::vector<const double*>& ys,
                     int d) {
    const int m = static_cast<int>(xs.size());
    double kxx = 0.0, kyy = 0.0, kxy = 0.0;
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) {
            if (i != j) {
                kxx += poly_kernel(xs[i], xs[j], d);
                kyy += poly_kernel(ys[i], ys[j], d);
            }
            kxy += poly_kernel(xs[i], ys[j], d);
        }
    double mm = static_cast<double>(m);
    return kxx / (mm * (mm - 1.0)) + kyy / (mm * (mm - 1.0)) - 2.0 * kxy / (mm * mm);
}

}  // namespace

KidResult kid(const EmbeddingSet& a, const EmbeddingSet& b, int subset_size, int n_subsets,
              std::uint64_t seed) {
    if (a.d != b.d) throw InvalidArgument("kid: embedding dimension mismatch");
    if (subset_size < 2) throw InvalidArgument("kid: subset_size must be >= 2");
    if (n_subsets < 1) throw InvalidArgument("kid: n_subsets must be >= 1");
    if (subset_size > a.n || subset_size > b.n)
        throw InvalidArgument("kid: subset_size exceeds set size");

    Rng rng = make_rng(mix_seed(seed, 401));
    std::vector<int> ia(a.n), ib(b.n);
    std::iota(ia.begin(), ia.end(), 0);
    std::iota(ib.begin(), ib.end(), 0);

    std::vector<double> vals;
    vals.reserve(static_cast<std::size_t>(n_subsets));
    for (int s = 0; s < n_subsets; ++s) {
        std::shuffle(ia.begin(), ia.end(), rng);
        std::shuffle(ib.begin(), ib.end(), rng);
        std::vector<const double*> xs, ys;
        for (int i = 0; i < subset_size; ++i) {
            xs.push_back(a.row(ia[static_cast<std::size_t>(i)]));
            ys.push_back(b.row(ib[static_cast<std::size_t>(i)]));
        }
        vals.push_back(mmd2_unbiased(xs, ys, a.d));
    }
    KidResult r;
    for (double v : vals) r.mean += v;
    r.mean /= vals.size();
    double var = 0.0;
    for (double v : vals) var += (v - r.mean) * (v - r.mean);
    r.std = vals.size() > 1 ? std::sqrt(var / (vals.size() - 1.0)) : 0.0;
    return r;
}

namespace {

struct Confusion {
    long tp = 0, fp = 0, fn = 0, tn = 0;
};

Confusion pixel_confusion(const Tensor& pred, const Tensor& gt) {
    if (!pred.same_shape(gt)) throw InvalidArgument("segmentation metrics: shape mismatch");
    Confusion c;
    for (long i = 0; i < pred.numel(); ++i) {
        bool p = pred[i] > 0.5;
        bool g = gt[i] > 0.5;
        if (p && g)
            ++c.tp;
        else if (p && !g)
            ++c.fp;
        else if (!p && g)
            ++c.fn;
        else
            ++c.tn;
    }
    return c;
}

}  // namespace

double miou(const Tensor& pred, const Tensor& gt) {
    Confusion c = pixel_confusion(pred, gt);
    // IoU of an absent class in both pred and gt counts as 1.
    double fg_union = static_cast<double>(c.tp + c.fp + c.fn);
    double fg = fg_union > 0.0 ? c.tp / fg_union : 1.0;
    double bg_union = static_cast<double>(c.tn + c.fp + c.fn);
    double bg = bg_union > 0.0 ? c.tn / bg_union : 1.0;
    return 0.5 * (fg + bg);
}

double sensitivity(const Tensor& pred, const Tensor& gt) {
    Confusion c = pixel_confusion(pred, gt);
    if (c.tp + c.fn == 0) throw UndefinedError("sensitivity: gt foreground is empty");
    return static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
}

ClassificationMetrics classification_metrics(const std::vector<int>& pred_labels,
                                             const std::vector<int>& true_labels) {
    if (pred_labels.size() != true_labels.size() || pred_labels.empty())
        throw InvalidArgument("classification_metrics: label vectors must match and be non-empty");
    long tp = 0, fp = 0, fn = 0, tn = 0;
    for (std::size_t i = 0; i < pred_labels.size(); ++i) {
        bool p = pred_labels[i] != 0, t = true_labels[i] != 0;
        if (p && t)
            ++tp;
        else if (p && !t)
            ++fp;
        else if (!p && t)
            ++fn;
        else
            ++tn;
    }
    ClassificationMetrics m;
    m.accuracy = static_cast<double>(tp + tn) / static_cast<double>(pred_labels.size());
    if (tp + fp > 0) m.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    if (tp + fn > 0) m.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
    if (m.precision && m.recall && (*m.precision + *m.recall) > 0.0)
        m.f1 = 2.0 * *m.precision * *m.recall / (*m.precision + *m.recall);
    return m;
}

double mask_localization_auc(const Tensor& mask01, const Tensor& gt_opacity_mask) {
    if (!mask01.same_shape(gt_opacity_mask) &&
        !(mask01.numel() == gt_opacity_mask.numel()))
        throw InvalidArgument("mask_localization_auc: shape mismatch");
    long n = mask01.numel();
    long n_pos = 0;
    for (long i = 0; i < n; ++i)
        if (gt_opacity_mask[i] > 0.5) ++n_pos;
    long n_neg = n - n_pos;
    if (n_pos == 0 || n_neg == 0)
        throw UndefinedError("mask_localization_auc: gt must contain both classes");

    // Mann-Whitney with average ranks for ties.
    std::vector<long> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](long a, long b) { return mask01[a] < mask01[b]; });
    double rank_sum_pos = 0.0;
    long i = 0;
    while (i < n) {
        long j = i;
        while (j < n && mask01[idx[static_cast<std::size_t>(j)]] ==
                            mask01[idx[static_cast<std::size_t>(i)]])
            ++j;
        double avg_rank = 0.5 * (i + j - 1) + 1.0;  // 1-based average rank of the tie block
        for (long k = i; k < j; ++k)
            if (gt_opacity_mask[idx[static_cast<std::size_t>(k)]] > 0.5) rank_sum_pos += avg_rank;
        i = j;
    }
    double u = rank_sum_pos - 0.5 * n_pos * (n_pos + 1.0);
    return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

RandomProjectionEmbedder::RandomProjectionEmbedder(int input_numel, int out_dim,
                                                   std::uint64_t seed)
    : input_numel_(input_numel), out_dim_(out_dim) {
    if (input_numel < 1 || out_dim < 1)
        throw InvalidArgument("RandomProjectionEmbedder: dimensions must be positive");
    Rng rng = make_rng(mix_seed(seed, 501));
    proj_.resize(static_cast<std::size_t>(out_dim) * input_numel);
    double sc = 1.0 / std::sqrt(static_cast<double>(input_numel));
    for (auto& v : proj_) v = normal(rng) * sc;
}

EmbeddingSet RandomProjectionEmbedder::embed(const std::vector<Tensor>& images) const {
    EmbeddingSet s;
    s.n = static_cast<int>(images.size());
    s.d = out_dim_;
    s.provenance = "random-projection";
    s.data.resize(static_cast<std::size_t>(s.n) * s.d);
    for (int i = 0; i < s.n; ++i) {
        const Tensor& img = images[static_cast<std::size_t>(i)];
        if (img.numel() != input_numel_)
            throw InvalidArgument("RandomProjectionEmbedder: image size mismatch");
        for (int o = 0; o < out_dim_; ++o) {
            const double* p = proj_.data() + static_cast<long>(o) * input_numel_;
            double acc = 0.0;
            for (long k = 0; k < input_numel_; ++k) acc += p[k] * img[k];
            s.row(i)[o] = acc;
        }
    }
    return s;
}

}  // namespace uct
