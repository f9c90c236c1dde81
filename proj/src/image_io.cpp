// image_io.cpp

#include "uct/image_io.hpp"

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "uct/common.hpp"

namespace uct {

Tensor read_gray_png(const std::filesystem::path& path) {
    cv::Mat img = cv::imread(path.string(), cv::IMREAD_UNCHANGED | cv::IMREAD_ANYDEPTH);
    if (img.empty()) throw IoError("cannot decode image: " + path.string());
    if (img.channels() > 1) {
        cv::Mat gray;
        cv::cvtColor(img, gray, img.channels() == 4 ? cv::COLOR_BGRA2GRAY : cv::COLOR_BGR2GRAY);
        img = gray;
    }
    double maxval;
    if (img.depth() == CV_8U)
        maxval = 255.0;
    else if (img.depth() == CV_16U)
        maxval = 65535.0;
    else
        throw IoError("unsupported bit depth in " + path.string());

    Tensor out({1, img.rows, img.cols});
    for (int i = 0; i < img.rows; ++i)
        for (int j = 0; j < img.cols; ++j) {
            double v = img.depth() == CV_8U ? img.at<std::uint8_t>(i, j)
                                            : img.at<std::uint16_t>(i, j);
            out[static_cast<long>(i) * img.cols + j] = v / maxval * 2.0 - 1.0;
        }
    return out;
}

namespace {

cv::Mat to_u8(const Tensor& t, double lo, double hi) {
    int H, W;
    if (t.rank() == 3 && t.dim(0) == 1) {
        H = t.dim(1);
        W = t.dim(2);
    } else if (t.rank() == 2) {
        H = t.dim(0);
        W = t.dim(1);
    } else {
        throw ShapeError("png write: expected [1,H,W] or [H,W]");
    }
    cv::Mat img(H, W, CV_8U);
    for (int i = 0; i < H; ++i)
        for (int j = 0; j < W; ++j) {
            double v = (t[static_cast<long>(i) * W + j] - lo) / (hi - lo) * 255.0;
            v = std::floor(v + 0.5);  // round half-up, bit-stable contract
            img.at<std::uint8_t>(i, j) = static_cast<std::uint8_t>(std::min(255.0, std::max(0.0, v)));
        }
    return img;
}

void write_png(const std::filesystem::path& path, const cv::Mat& img) {
    if (!cv::imwrite(path.string(), img)) throw IoError("cannot write image: " + path.string());
}

}  // namespace

void write_gray_png(const std::filesystem::path& path, const Tensor& image) {
    write_png(path, to_u8(image, -1.0, 1.0));
}

void write_mask_png(const std::filesystem::path& path, const Tensor& mask01) {
    write_png(path, to_u8(mask01, 0.0, 1.0));
}

}  // namespace uct
