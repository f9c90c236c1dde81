#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "uct/metrics.hpp"
#include "uct/rng.hpp"
#include "uct/common.hpp"

using namespace uct;

namespace {

EmbeddingSet gaussian_set(int n, int d, std::uint64_t seed, double mean = 0.0) {
    EmbeddingSet s;
    s.n = n;
    s.d = d;
    s.data.resize(static_cast<std::size_t>(n) * d);
    Rng rng = make_rng(seed);
    for (auto& v : s.data) v = normal(rng, mean, 1.0);
    return s;
}

}  // namespace

TEST_CASE("fid identical sets and symmetry") {
    EmbeddingSet a = gaussian_set(200, 4, 1);
    CHECK(fid(a, a) <= 1e-6);
    EmbeddingSet b = gaussian_set(200, 4, 2, 0.5);
    double ab = fid(a, b), ba = fid(b, a);
    CHECK(ab >= 0.0);
    CHECK(ab == doctest::Approx(ba).epsilon(1e-8));
}

TEST_CASE("fid of unit gaussians with means 0 and 1 is close to 1") {
    EmbeddingSet a = gaussian_set(10000, 1, 11, 0.0);
    EmbeddingSet b = gaussian_set(10000, 1, 12, 1.0);
    CHECK(fid(a, b) == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("fid is invariant under orthogonal rotation of the embedding space") {
    EmbeddingSet a = gaussian_set(300, 2, 21, 0.0);
    EmbeddingSet b = gaussian_set(300, 2, 22, 0.4);
    double before = fid(a, b);
    double c = std::cos(0.7), s = std::sin(0.7);
    auto rotate = [&](EmbeddingSet& e) {
        for (int i = 0; i < e.n; ++i) {
            double x = e.row(i)[0], y = e.row(i)[1];
            e.row(i)[0] = c * x - s * y;
            e.row(i)[1] = s * x + c * y;
        }
    };
    rotate(a);
    rotate(b);
    CHECK(fid(a, b) == doctest::Approx(before).epsilon(1e-6));
}

TEST_CASE("fid input validation") {
    EmbeddingSet a = gaussian_set(10, 2, 1);
    CHECK_THROWS_AS(fid(a, gaussian_set(10, 3, 1)), InvalidArgument);
    CHECK_THROWS_AS(fid(gaussian_set(1, 2, 1), a), InvalidArgument);
}

TEST_CASE("kid null hypothesis and determinism") {
    EmbeddingSet a = gaussian_set(300, 3, 31);
    EmbeddingSet b = gaussian_set(300, 3, 32);
    KidResult r = kid(a, b, 100, 100, 5);
    CHECK(std::abs(r.mean) <= 3.0 * r.std);
    KidResult r2 = kid(a, b, 100, 100, 5);
    CHECK(r.mean == r2.mean);
    CHECK(r.std == r2.std);
    KidResult r3 = kid(a, b, 100, 100, 6);
    CHECK(r.mean != r3.mean);
    CHECK_THROWS_AS(kid(a, b, 500, 10, 1), InvalidArgument);
}

TEST_CASE("kid 2-vs-2 equals brute force mmd2") {
    // hand-sized case in d=2, subset covers both sets fully
    EmbeddingSet a, b;
    a.n = b.n = 2;
    a.d = b.d = 2;
    a.data = {1.0, 0.0, 0.0, 1.0};
    b.data = {1.0, 1.0, -1.0, 0.5};
    auto k = [](const double* x, const double* y) {
        double dot = x[0] * y[0] + x[1] * y[1];
        double base = dot / 2.0 + 1.0;
        return base * base * base;
    };
    const double* x0 = a.row(0);
    const double* x1 = a.row(1);
    const double* y0 = b.row(0);
    const double* y1 = b.row(1);
    double kxx = (k(x0, x1) + k(x1, x0)) / 2.0;
    double kyy = (k(y0, y1) + k(y1, y0)) / 2.0;
    double kxy = (k(x0, y0) + k(x0, y1) + k(x1, y0) + k(x1, y1)) / 4.0;
    double expect = kxx + kyy - 2.0 * kxy;

    KidResult r = kid(a, b, 2, 4, 9);
    CHECK(r.mean == doctest::Approx(expect).epsilon(1e-12));
    CHECK(r.std == doctest::Approx(0.0));
}

TEST_CASE("miou and sensitivity pixel cases") {
    Tensor gt({8, 8});
    Tensor pred({8, 8});
    // gt: left half; pred: left three quarters
    for (int i = 0; i < 8; ++i)
        for (int j = 0; j < 8; ++j) {
            gt[i * 8 + j] = j < 4 ? 1.0 : 0.0;
            pred[i * 8 + j] = j < 6 ? 1.0 : 0.0;
        }
    // fg IoU 32/48, bg IoU 16/32
    CHECK(miou(pred, gt) == doctest::Approx(0.5 * (32.0 / 48.0 + 16.0 / 32.0)));
    CHECK(sensitivity(pred, gt) == doctest::Approx(1.0));

    CHECK(miou(gt, gt) == doctest::Approx(1.0));
    CHECK(sensitivity(gt, gt) == doctest::Approx(1.0));
    CHECK(miou(pred, gt) == doctest::Approx(miou(gt, pred)));

    // disjoint foregrounds
    Tensor left({4, 4}), right({4, 4});
    left[0] = 1.0;
    right[15] = 1.0;
    CHECK(sensitivity(left, right) == 0.0);

    CHECK_THROWS_AS(miou(pred, Tensor({2, 2})), InvalidArgument);
    CHECK_THROWS_AS(sensitivity(Tensor({2, 2}), Tensor({2, 2})), UndefinedError);
}

TEST_CASE("classification metrics") {
    ClassificationMetrics perfect = classification_metrics({1, 0, 1, 0}, {1, 0, 1, 0});
    CHECK(perfect.accuracy == 1.0);
    CHECK(*perfect.precision == 1.0);
    CHECK(*perfect.recall == 1.0);
    CHECK(*perfect.f1 == 1.0);

    ClassificationMetrics none = classification_metrics({0, 0, 0}, {1, 0, 1});
    CHECK(*none.recall == 0.0);
    CHECK_FALSE(none.precision.has_value());

    // TP=2, FP=1, FN=1, TN=6
    std::vector<int> truth = {1, 1, 1, 0, 0, 0, 0, 0, 0, 0};
    std::vector<int> pred = {1, 1, 0, 1, 0, 0, 0, 0, 0, 0};
    ClassificationMetrics m = classification_metrics(pred, truth);
    CHECK(m.accuracy == doctest::Approx(0.8));
    CHECK(*m.precision == doctest::Approx(2.0 / 3.0));
    CHECK(*m.recall == doctest::Approx(2.0 / 3.0));
    CHECK(*m.f1 == doctest::Approx(2.0 / 3.0));

    CHECK_THROWS_AS(classification_metrics({1}, {1, 0}), InvalidArgument);
}

TEST_CASE("mask localization auc") {
    Tensor gt({4, 4});
    for (int i = 0; i < 4; ++i) gt[i] = 1.0;  // first row positive
    CHECK(mask_localization_auc(gt, gt) == doctest::Approx(1.0));
    CHECK(mask_localization_auc(Tensor::full({4, 4}, 0.3), gt) == doctest::Approx(0.5));
    Tensor anti({4, 4});
    for (long i = 0; i < 16; ++i) anti[i] = 1.0 - gt[i];
    CHECK(mask_localization_auc(anti, gt) == doctest::Approx(0.0));

    // invariance under strictly monotone transforms
    Rng rng = make_rng(55);
    Tensor score({4, 4});
    for (auto& v : score.data) v = uniform(rng, 0.0, 1.0);
    double base = mask_localization_auc(score, gt);
    Tensor warped({4, 4});
    for (long i = 0; i < 16; ++i) warped[i] = std::tanh(3.0 * score[i]) + 2.0;
    CHECK(mask_localization_auc(warped, gt) == doctest::Approx(base).epsilon(1e-12));

    CHECK_THROWS_AS(mask_localization_auc(score, Tensor::zeros({4, 4})), UndefinedError);
    CHECK_THROWS_AS(mask_localization_auc(score, Tensor::full({4, 4}, 1.0)), UndefinedError);
}

TEST_CASE("random projection embedder is seeded and shape checked") {
    RandomProjectionEmbedder e(16, 4, 3);
    std::vector<Tensor> imgs;
    Rng rng = make_rng(77);
    for (int i = 0; i < 3; ++i) {
        Tensor t({1, 4, 4});
        for (auto& v : t.data) v = uniform(rng, -1.0, 1.0);
        imgs.push_back(t);
    }
    EmbeddingSet s1 = e.embed(imgs);
    CHECK(s1.n == 3);
    CHECK(s1.d == 4);
    RandomProjectionEmbedder e2(16, 4, 3);
    EmbeddingSet s2 = e2.embed(imgs);
    CHECK(s1.data == s2.data);
    RandomProjectionEmbedder other(16, 4, 4);
    CHECK(other.embed(imgs).data != s1.data);
    CHECK_THROWS_AS(e.embed({Tensor({1, 2, 2})}), InvalidArgument);
}
