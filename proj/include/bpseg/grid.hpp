#ifndef BPSEG_GRID_HPP
#define BPSEG_GRID_HPP

#include <cstdint>
#include <string>
#include <vector>

namespace bpseg {

/** Dense row-major 2-D float grid holding grayscale intensities.
 *
 * Intensities stay in their source range (0..255 for 8-bit files) until a
 * preprocessing step standardizes them.
 */
struct Image {
  int rows = 0;
  int cols = 0;
  std::vector<float> data;  // rows * cols, row-major

  Image() = default;
  Image(int r, int c, float fill = 0.0f) : rows(r), cols(c), data(static_cast<size_t>(r) * c, fill) {}

  float& at(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
  float at(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }
  size_t size() const { return data.size(); }

  bool same_shape(const Image& other) const { return rows == other.rows && cols == other.cols; }
};

/** Dense row-major 2-D binary grid. Values are exactly 0 or 1. */
struct Mask {
  int rows = 0;
  int cols = 0;
  std::vector<std::uint8_t> data;

  Mask() = default;
  Mask(int r, int c, std::uint8_t fill = 0) : rows(r), cols(c), data(static_cast<size_t>(r) * c, fill) {}

  std::uint8_t& at(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
  std::uint8_t at(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }
  size_t size() const { return data.size(); }

  /** Number of set pixels. */
  long long count() const;
  bool is_empty_mask() const { return count() == 0; }
  /** True if every value is 0 or 1. */
  bool is_binary() const;

  bool same_shape(const Mask& other) const { return rows == other.rows && cols == other.cols; }
  bool operator==(const Mask& other) const {
    return rows == other.rows && cols == other.cols && data == other.data;
  }
};

/** BP/no-BP class of an ultrasound frame, derived from mask emptiness. */
enum class Label { NO_BP = 0, BP = 1 };

std::string to_string(Label label);
Label label_from_string(const std::string& s);

/** 2x3 affine matrix mapping source pixel coordinates (x=col, y=row) to
 * destination coordinates: dst = A * [x, y, 1]^T. */
struct AffineMatrix {
  // Row-major: [a b tx; c d ty]
  double a = 1, b = 0, tx = 0;
  double c = 0, d = 1, ty = 0;

  static AffineMatrix identity() { return {}; }
  AffineMatrix compose(const AffineMatrix& rhs) const;  // this ∘ rhs
  AffineMatrix inverse() const;
};

/** Resize with bilinear interpolation (half-pixel center alignment). */
Image resize_bilinear(const Image& src, int out_rows, int out_cols);

/** Resize with nearest-neighbor sampling; keeps binary grids binary. */
Mask resize_nearest(const Mask& src, int out_rows, int out_cols);

/** Warp by the forward map `fwd` with bilinear sampling, constant-0 border. */
Image warp_affine_bilinear(const Image& src, const AffineMatrix& fwd);

/** Warp by the forward map `fwd` with nearest-neighbor sampling, constant-0 border. */
Mask warp_affine_nearest(const Mask& src, const AffineMatrix& fwd);

}  // namespace bpseg

#endif
