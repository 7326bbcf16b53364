#include "bpseg/io.hpp"

#include <algorithm>
#include <stdexcept>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

namespace bpseg {

namespace {

cv::Mat read_gray_u8(const std::filesystem::path& path) {
  cv::Mat m = cv::imread(path.string(), cv::IMREAD_GRAYSCALE);
  if (m.empty()) throw std::runtime_error("cannot read image file: " + path.string());
  return m;
}

}  // namespace

Image read_image_gray(const std::filesystem::path& path) {
  cv::Mat m = read_gray_u8(path);
  Image img(m.rows, m.cols);
  for (int y = 0; y < m.rows; ++y)
    for (int x = 0; x < m.cols; ++x) img.at(y, x) = static_cast<float>(m.at<std::uint8_t>(y, x));
  return img;
}

Mask read_mask(const std::filesystem::path& path) {
  cv::Mat m = read_gray_u8(path);
  Mask mask(m.rows, m.cols);
  for (int y = 0; y < m.rows; ++y) {
    for (int x = 0; x < m.cols; ++x) {
      const std::uint8_t v = m.at<std::uint8_t>(y, x);
      if (v == 0)
        mask.at(y, x) = 0;
      else if (v == 1 || v == 255)
        mask.at(y, x) = 1;
      else
        throw std::runtime_error("mask file has non-binary value " + std::to_string(v) + ": " +
                                 path.string());
    }
  }
  return mask;
}

void write_image_gray(const std::filesystem::path& path, const Image& image) {
  cv::Mat m(image.rows, image.cols, CV_8UC1);
  for (int y = 0; y < image.rows; ++y)
    for (int x = 0; x < image.cols; ++x)
      m.at<std::uint8_t>(y, x) =
          static_cast<std::uint8_t>(std::clamp(std::lround(image.at(y, x)), 0l, 255l));
  if (!cv::imwrite(path.string(), m))
    throw std::runtime_error("cannot write image file: " + path.string());
}

void write_mask(const std::filesystem::path& path, const Mask& mask) {
  cv::Mat m(mask.rows, mask.cols, CV_8UC1);
  for (int y = 0; y < mask.rows; ++y)
    for (int x = 0; x < mask.cols; ++x) m.at<std::uint8_t>(y, x) = mask.at(y, x) ? 255 : 0;
  if (!cv::imwrite(path.string(), m))
    throw std::runtime_error("cannot write mask file: " + path.string());
}

}  // namespace bpseg
