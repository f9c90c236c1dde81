#pragma once
// image_io.hpp - grayscale PNG in/out; 8- and 16-bit inputs are rescaled
// linearly to [-1,1].

#include <filesystem>

#include "uct/tensor.hpp"

namespace uct {

// Returns [1,H,W] in [-1,1]. Throws IoError on unreadable/undecodable files.
Tensor read_gray_png(const std::filesystem::path& path);

// image: [1,H,W] or [H,W] in [-1,1]; written as 8-bit gray, (v+1)/2*255
// rounded half-up.
void write_gray_png(const std::filesystem::path& path, const Tensor& image);

// mask: values in [0,1]; written as mask*255 rounded half-up.
void write_mask_png(const std::filesystem::path& path, const Tensor& mask01);

}  // namespace uct
