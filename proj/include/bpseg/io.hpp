#pragma once

#include <filesystem>

#include "bpseg/grid.hpp"

namespace bpseg {

// Reads a grayscale image (TIFF or PNG) as float intensities in [0, 255].
Image read_image_gray(const std::filesystem::path& path);

// Reads a mask file and normalizes it to {0, 1}. Accepts files stored as
// {0, 255} or already binary; any other value is an error.
Mask read_mask(const std::filesystem::path& path);

// Writes intensities clamped to [0, 255] as an 8-bit grayscale file.
// Format follows the extension (.tif/.tiff/.png).
void write_image_gray(const std::filesystem::path& path, const Image& image);

// Writes a binary mask as an 8-bit file with values {0, 255}.
void write_mask(const std::filesystem::path& path, const Mask& mask);

}  // namespace bpseg
