#include "bpseg/grid.hpp"

#include <cmath>
#include <stdexcept>

namespace bpseg {

long long Mask::count() const {
  long long n = 0;
  for (std::uint8_t v : data) n += v;
  return n;
}

bool Mask::is_binary() const {
  for (std::uint8_t v : data)
    if (v > 1) return false;
  return true;
}

std::string to_string(Label label) { return label == Label::BP ? "BP" : "NO_BP"; }

Label label_from_string(const std::string& s) {
  if (s == "BP") return Label::BP;
  if (s == "NO_BP") return Label::NO_BP;
  throw std::invalid_argument("unknown label: " + s);
}

AffineMatrix AffineMatrix::compose(const AffineMatrix& r) const {
  AffineMatrix m;
  m.a = a * r.a + b * r.c;
  m.b = a * r.b + b * r.d;
  m.tx = a * r.tx + b * r.ty + tx;
  m.c = c * r.a + d * r.c;
  m.d = c * r.b + d * r.d;
  m.ty = c * r.tx + d * r.ty + ty;
  return m;
}

AffineMatrix AffineMatrix::inverse() const {
  const double det = a * d - b * c;
  if (det == 0.0) throw std::invalid_argument("affine matrix is singular");
  AffineMatrix m;
  m.a = d / det;
  m.b = -b / det;
  m.c = -c / det;
  m.d = a / det;
  m.tx = -(m.a * tx + m.b * ty);
  m.ty = -(m.c * tx + m.d * ty);
  return m;
}

Image resize_bilinear(const Image& src, int out_rows, int out_cols) {
  if (out_rows <= 0 || out_cols <= 0) throw std::invalid_argument("resize target must be positive");
  if (src.rows == out_rows && src.cols == out_cols) return src;
  Image dst(out_rows, out_cols);
  const double sr = static_cast<double>(src.rows) / out_rows;
  const double sc = static_cast<double>(src.cols) / out_cols;
  for (int r = 0; r < out_rows; ++r) {
    // Half-pixel centers: output center maps into source coordinates.
    double y = (r + 0.5) * sr - 0.5;
    if (y < 0) y = 0;
    if (y > src.rows - 1) y = src.rows - 1;
    const int y0 = static_cast<int>(y);
    const int y1 = y0 + 1 < src.rows ? y0 + 1 : y0;
    const float wy = static_cast<float>(y - y0);
    for (int col = 0; col < out_cols; ++col) {
      double x = (col + 0.5) * sc - 0.5;
      if (x < 0) x = 0;
      if (x > src.cols - 1) x = src.cols - 1;
      const int x0 = static_cast<int>(x);
      const int x1 = x0 + 1 < src.cols ? x0 + 1 : x0;
      const float wx = static_cast<float>(x - x0);
      const float top = src.at(y0, x0) * (1.0f - wx) + src.at(y0, x1) * wx;
      const float bot = src.at(y1, x0) * (1.0f - wx) + src.at(y1, x1) * wx;
      dst.at(r, col) = top * (1.0f - wy) + bot * wy;
    }
  }
  return dst;
}

Mask resize_nearest(const Mask& src, int out_rows, int out_cols) {
  if (out_rows <= 0 || out_cols <= 0) throw std::invalid_argument("resize target must be positive");
  if (src.rows == out_rows && src.cols == out_cols) return src;
  Mask dst(out_rows, out_cols);
  const double sr = static_cast<double>(src.rows) / out_rows;
  const double sc = static_cast<double>(src.cols) / out_cols;
  for (int r = 0; r < out_rows; ++r) {
    int y = static_cast<int>((r + 0.5) * sr);
    if (y > src.rows - 1) y = src.rows - 1;
    for (int col = 0; col < out_cols; ++col) {
      int x = static_cast<int>((col + 0.5) * sc);
      if (x > src.cols - 1) x = src.cols - 1;
      dst.at(r, col) = src.at(y, x);
    }
  }
  return dst;
}

Image warp_affine_bilinear(const Image& src, const AffineMatrix& fwd) {
  const AffineMatrix inv = fwd.inverse();
  Image dst(src.rows, src.cols);
  for (int r = 0; r < src.rows; ++r) {
    for (int col = 0; col < src.cols; ++col) {
      const double x = inv.a * col + inv.b * r + inv.tx;
      const double y = inv.c * col + inv.d * r + inv.ty;
      if (x < 0 || y < 0 || x > src.cols - 1 || y > src.rows - 1) continue;  // border stays 0
      const int x0 = static_cast<int>(x);
      const int y0 = static_cast<int>(y);
      const int x1 = x0 + 1 < src.cols ? x0 + 1 : x0;
      const int y1 = y0 + 1 < src.rows ? y0 + 1 : y0;
      const float wx = static_cast<float>(x - x0);
      const float wy = static_cast<float>(y - y0);
      const float top = src.at(y0, x0) * (1.0f - wx) + src.at(y0, x1) * wx;
      const float bot = src.at(y1, x0) * (1.0f - wx) + src.at(y1, x1) * wx;
      dst.at(r, col) = top * (1.0f - wy) + bot * wy;
    }
  }
  return dst;
}

Mask warp_affine_nearest(const Mask& src, const AffineMatrix& fwd) {
  const AffineMatrix inv = fwd.inverse();
  Mask dst(src.rows, src.cols);
  for (int r = 0; r < src.rows; ++r) {
    for (int col = 0; col < src.cols; ++col) {
      const double x = inv.a * col + inv.b * r + inv.tx;
      const double y = inv.c * col + inv.d * r + inv.ty;
      const long xi = std::lround(x);
      const long yi = std::lround(y);
      if (xi < 0 || yi < 0 || xi >= src.cols || yi >= src.rows) continue;
      dst.at(r, col) = src.at(static_cast<int>(yi), static_cast<int>(xi));
    }
  }
  return dst;
}

}  // namespace bpseg
