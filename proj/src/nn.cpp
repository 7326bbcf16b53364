#include "bpseg/nn.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

namespace bpseg::nn {

namespace {

using RowMat = RowMatF;

// (C, N*H*W) matrix view of an NCHW tensor; column index is ((n*h+y)*w+x).
// Row segments per sample are contiguous in both layouts, so rows move with
// one memcpy per (sample, channel).
void tensor_to_mat(const Tensor& t, RowMat& m) {
  const long hw = static_cast<long>(t.h) * t.w;
  m.resize(t.c, static_cast<long>(t.n) * hw);
  for (int in = 0; in < t.n; ++in)
    for (int ic = 0; ic < t.c; ++ic)
      std::memcpy(m.row(ic).data() + in * hw, t.data.data() + t.index(in, ic, 0, 0),
                  hw * sizeof(float));
}

void mat_to_tensor(const RowMat& m, Tensor& t) {
  const long hw = static_cast<long>(t.h) * t.w;
  for (int in = 0; in < t.n; ++in)
    for (int ic = 0; ic < t.c; ++ic)
      std::memcpy(t.data.data() + t.index(in, ic, 0, 0), m.row(ic).data() + in * hw,
                  hw * sizeof(float));
}

}  // namespace

void fill_he_normal(Param& p, long fan_in, Rng& rng) {
  const double std_dev = std::sqrt(2.0 / static_cast<double>(fan_in));
  for (long i = 0; i < p.value.size(); ++i)
    p.value[i] = static_cast<float>(std_dev * rng.normal());
}

// ---------------------------------------------------------------------------
// Conv2d

Conv2d::Conv2d(int in_c, int out_c, int kernel, Rng& rng)
    : in_c_(in_c), out_c_(out_c), k_(kernel), pad_(kernel / 2) {
  if (kernel != 1 && kernel != 3) throw std::invalid_argument("Conv2d: kernel must be 1 or 3");
  weight_.init(static_cast<long>(out_c) * in_c * kernel * kernel);
  bias_.init(out_c);
  fill_he_normal(weight_, static_cast<long>(in_c) * kernel * kernel, rng);
}

Tensor Conv2d::forward(const Tensor& x, bool) {
  if (x.c != in_c_) throw std::invalid_argument("Conv2d: channel mismatch");
  n_ = x.n;
  h_ = x.h;
  w_ = x.w;
  const long hw = static_cast<long>(h_) * w_;
  const long ncols = n_ * hw;
  const int rows = in_c_ * k_ * k_;
  cols_.resize(rows, ncols);

  // im2col with rows fixed to one (channel, ky, kx) offset each; the interior
  // of every image row is one contiguous copy.
  float* cdata = cols_.data();
  for (int ic = 0; ic < in_c_; ++ic) {
    for (int ky = 0; ky < k_; ++ky) {
      for (int kx = 0; kx < k_; ++kx) {
        const int r = (ic * k_ + ky) * k_ + kx;
        float* row = cdata + static_cast<long>(r) * ncols;
        for (int in = 0; in < n_; ++in) {
          for (int y = 0; y < h_; ++y) {
            float* dst = row + (static_cast<long>(in) * h_ + y) * w_;
            const int iy = y + ky - pad_;
            if (iy < 0 || iy >= h_) {
              std::memset(dst, 0, w_ * sizeof(float));
              continue;
            }
            const int x0 = std::max(0, pad_ - kx);           // first valid output x
            const int x1 = std::min(w_, w_ + pad_ - kx);     // one past last valid
            if (x0 > 0) std::memset(dst, 0, x0 * sizeof(float));
            if (x1 < w_) std::memset(dst + x1, 0, (w_ - x1) * sizeof(float));
            if (x1 > x0)
              std::memcpy(dst + x0, x.data.data() + x.index(in, ic, iy, x0 + kx - pad_),
                          (x1 - x0) * sizeof(float));
          }
        }
      }
    }
  }

  Eigen::Map<const RowMat> wmap(weight_.value.data(), out_c_, rows);
  RowMat y = wmap * cols_;
  y.colwise() += Eigen::Map<const Eigen::VectorXf>(bias_.value.data(), out_c_);

  Tensor out(n_, out_c_, h_, w_);
  mat_to_tensor(y, out);
  return out;
}

Tensor Conv2d::backward(const Tensor& dy) {
  const long hw = static_cast<long>(h_) * w_;
  const long ncols = n_ * hw;
  const int rows = in_c_ * k_ * k_;

  RowMat dy_mat;
  tensor_to_mat(dy, dy_mat);

  Eigen::Map<RowMat> dw(weight_.grad.data(), out_c_, rows);
  dw.noalias() += dy_mat * cols_.transpose();
  Eigen::Map<Eigen::VectorXf>(bias_.grad.data(), out_c_) += dy_mat.rowwise().sum();

  Eigen::Map<const RowMat> wmap(weight_.value.data(), out_c_, rows);
  RowMat dcols = wmap.transpose() * dy_mat;

  Tensor dx(n_, in_c_, h_, w_);
  const float* ddata = dcols.data();
  for (int ic = 0; ic < in_c_; ++ic) {
    for (int ky = 0; ky < k_; ++ky) {
      for (int kx = 0; kx < k_; ++kx) {
        const int r = (ic * k_ + ky) * k_ + kx;
        const float* row = ddata + static_cast<long>(r) * ncols;
        for (int in = 0; in < n_; ++in) {
          for (int y = 0; y < h_; ++y) {
            const int iy = y + ky - pad_;
            if (iy < 0 || iy >= h_) continue;
            const float* src = row + (static_cast<long>(in) * h_ + y) * w_;
            const int x0 = std::max(0, pad_ - kx);
            const int x1 = std::min(w_, w_ + pad_ - kx);
            float* dst = dx.data.data() + dx.index(in, ic, iy, x0 + kx - pad_);
            for (int x = x0; x < x1; ++x) *dst++ += src[x];
          }
        }
      }
    }
  }
  return dx;
}

void Conv2d::collect_params(std::vector<Param*>& out) {
  out.push_back(&weight_);
  out.push_back(&bias_);
}

// ---------------------------------------------------------------------------
// ConvTranspose2d (kernel 2, stride 2)

ConvTranspose2d::ConvTranspose2d(int in_c, int out_c, Rng& rng) : in_c_(in_c), out_c_(out_c) {
  weight_.init(static_cast<long>(in_c) * out_c * 4);
  bias_.init(out_c);
  fill_he_normal(weight_, in_c, rng);
}

Tensor ConvTranspose2d::forward(const Tensor& x, bool) {
  if (x.c != in_c_) throw std::invalid_argument("ConvTranspose2d: channel mismatch");
  n_ = x.n;
  h_ = x.h;
  w_ = x.w;
  tensor_to_mat(x, x_mat_);  // (in_c, n*h*w)

  Eigen::Map<const RowMat> wmap(weight_.value.data(), in_c_, out_c_ * 4);
  RowMat y = wmap.transpose() * x_mat_;  // (out_c*4, n*h*w)

  Tensor out(n_, out_c_, h_ * 2, w_ * 2);
  for (int in = 0; in < n_; ++in) {
    for (int oc = 0; oc < out_c_; ++oc) {
      const float b = bias_.value[oc];
      for (int y0 = 0; y0 < h_; ++y0) {
        for (int x0 = 0; x0 < w_; ++x0) {
          const long col = (static_cast<long>(in) * h_ + y0) * w_ + x0;
          for (int ky = 0; ky < 2; ++ky)
            for (int kx = 0; kx < 2; ++kx)
              out.at(in, oc, 2 * y0 + ky, 2 * x0 + kx) = y(oc * 4 + ky * 2 + kx, col) + b;
        }
      }
    }
  }
  return out;
}

Tensor ConvTranspose2d::backward(const Tensor& dy) {
  RowMat dy_mat(out_c_ * 4, static_cast<long>(n_) * h_ * w_);
  for (int in = 0; in < n_; ++in) {
    for (int oc = 0; oc < out_c_; ++oc) {
      double bsum = 0;
      for (int y0 = 0; y0 < h_; ++y0) {
        for (int x0 = 0; x0 < w_; ++x0) {
          const long col = (static_cast<long>(in) * h_ + y0) * w_ + x0;
          for (int ky = 0; ky < 2; ++ky) {
            for (int kx = 0; kx < 2; ++kx) {
              const float g = dy.at(in, oc, 2 * y0 + ky, 2 * x0 + kx);
              dy_mat(oc * 4 + ky * 2 + kx, col) = g;
              bsum += g;
            }
          }
        }
      }
      bias_.grad[oc] += static_cast<float>(bsum);
    }
  }

  Eigen::Map<RowMat> dw(weight_.grad.data(), in_c_, out_c_ * 4);
  dw.noalias() += x_mat_ * dy_mat.transpose();

  Eigen::Map<const RowMat> wmap(weight_.value.data(), in_c_, out_c_ * 4);
  RowMat dx_mat = wmap * dy_mat;
  Tensor dx(n_, in_c_, h_, w_);
  mat_to_tensor(dx_mat, dx);
  return dx;
}

void ConvTranspose2d::collect_params(std::vector<Param*>& out) {
  out.push_back(&weight_);
  out.push_back(&bias_);
}

// ---------------------------------------------------------------------------
// BatchNorm2d

BatchNorm2d::BatchNorm2d(int channels, double momentum, double eps)
    : c_(channels), momentum_(static_cast<float>(momentum)), eps_(static_cast<float>(eps)) {
  gamma_.init(channels);
  beta_.init(channels);
  gamma_.value.setOnes();
  running_mean_ = Eigen::VectorXf::Zero(channels);
  running_var_ = Eigen::VectorXf::Ones(channels);
}

Tensor BatchNorm2d::forward(const Tensor& x, bool train) {
  if (x.c != c_) throw std::invalid_argument("BatchNorm2d: channel mismatch");
  const long hw = static_cast<long>(x.h) * x.w;
  const long m = static_cast<long>(x.n) * hw;
  Tensor out(x.n, x.c, x.h, x.w);
  last_was_train_ = train;

  if (!train) {
    for (int ic = 0; ic < c_; ++ic) {
      const float scale = gamma_.value[ic] / std::sqrt(running_var_[ic] + eps_);
      const float shift = beta_.value[ic] - scale * running_mean_[ic];
      for (int in = 0; in < x.n; ++in) {
        const float* src = x.data.data() + x.index(in, ic, 0, 0);
        float* dst = out.data.data() + out.index(in, ic, 0, 0);
        for (long i = 0; i < hw; ++i) dst[i] = scale * src[i] + shift;
      }
    }
    return out;
  }

  if (m < 2) throw std::invalid_argument("BatchNorm2d: training batch needs more than one value");
  xhat_ = Tensor(x.n, x.c, x.h, x.w);
  inv_std_.resize(c_);
  for (int ic = 0; ic < c_; ++ic) {
    double sum = 0;
    for (int in = 0; in < x.n; ++in) {
      const float* src = x.data.data() + x.index(in, ic, 0, 0);
      for (long i = 0; i < hw; ++i) sum += src[i];
    }
    const double mean = sum / m;
    double rss = 0;
    for (int in = 0; in < x.n; ++in) {
      const float* src = x.data.data() + x.index(in, ic, 0, 0);
      for (long i = 0; i < hw; ++i) {
        const double d = src[i] - mean;
        rss += d * d;
      }
    }
    const double var = rss / m;  // biased, used for the normalization itself
    const float is = static_cast<float>(1.0 / std::sqrt(var + eps_));
    inv_std_[ic] = is;
    const float fmean = static_cast<float>(mean);
    const float g = gamma_.value[ic], b = beta_.value[ic];
    for (int in = 0; in < x.n; ++in) {
      const float* src = x.data.data() + x.index(in, ic, 0, 0);
      float* xh = xhat_.data.data() + xhat_.index(in, ic, 0, 0);
      float* dst = out.data.data() + out.index(in, ic, 0, 0);
      for (long i = 0; i < hw; ++i) {
        xh[i] = (src[i] - fmean) * is;
        dst[i] = g * xh[i] + b;
      }
    }
    running_mean_[ic] = (1 - momentum_) * running_mean_[ic] + momentum_ * fmean;
    running_var_[ic] = (1 - momentum_) * running_var_[ic] +
                       momentum_ * static_cast<float>(var * m / (m - 1));
  }
  return out;
}

Tensor BatchNorm2d::backward(const Tensor& dy) {
  if (!last_was_train_)
    throw std::logic_error("BatchNorm2d: backward after an eval-mode forward");
  const long hw = static_cast<long>(dy.h) * dy.w;
  const long m = static_cast<long>(dy.n) * hw;
  Tensor dx(dy.n, dy.c, dy.h, dy.w);
  for (int ic = 0; ic < c_; ++ic) {
    double sum_dy = 0, sum_dy_xhat = 0;
    for (int in = 0; in < dy.n; ++in) {
      const float* g = dy.data.data() + dy.index(in, ic, 0, 0);
      const float* xh = xhat_.data.data() + xhat_.index(in, ic, 0, 0);
      for (long i = 0; i < hw; ++i) {
        sum_dy += g[i];
        sum_dy_xhat += static_cast<double>(g[i]) * xh[i];
      }
    }
    gamma_.grad[ic] += static_cast<float>(sum_dy_xhat);
    beta_.grad[ic] += static_cast<float>(sum_dy);
    const float k = gamma_.value[ic] * inv_std_[ic] / m;
    const float sdy = static_cast<float>(sum_dy);
    const float sdyx = static_cast<float>(sum_dy_xhat);
    for (int in = 0; in < dy.n; ++in) {
      const float* g = dy.data.data() + dy.index(in, ic, 0, 0);
      const float* xh = xhat_.data.data() + xhat_.index(in, ic, 0, 0);
      float* d = dx.data.data() + dx.index(in, ic, 0, 0);
      for (long i = 0; i < hw; ++i) d[i] = k * (m * g[i] - sdy - xh[i] * sdyx);
    }
  }
  return dx;
}

void BatchNorm2d::collect_params(std::vector<Param*>& out) {
  out.push_back(&gamma_);
  out.push_back(&beta_);
}

void BatchNorm2d::collect_buffers(std::vector<Eigen::VectorXf*>& out) {
  out.push_back(&running_mean_);
  out.push_back(&running_var_);
}

// ---------------------------------------------------------------------------
// ReLU, pooling, upsample, GAP

Tensor ReLU::forward(const Tensor& x, bool) {
  out_ = x;
  out_.data = out_.data.cwiseMax(0.0f);
  return out_;
}

Tensor ReLU::backward(const Tensor& dy) {
  Tensor dx = dy;
  for (long i = 0; i < dx.size(); ++i)
    if (out_.data[i] <= 0.0f) dx.data[i] = 0.0f;
  return dx;
}

Tensor MaxPool2x2::forward(const Tensor& x, bool) {
  if (x.h % 2 || x.w % 2) throw std::invalid_argument("MaxPool2x2: odd spatial size");
  n_ = x.n;
  c_ = x.c;
  h_ = x.h;
  w_ = x.w;
  Tensor out(x.n, x.c, x.h / 2, x.w / 2);
  argmax_.assign(out.size(), 0);
  long o = 0;
  for (int in = 0; in < x.n; ++in) {
    for (int ic = 0; ic < x.c; ++ic) {
      for (int y = 0; y < out.h; ++y) {
        for (int xo = 0; xo < out.w; ++xo, ++o) {
          long best = x.index(in, ic, 2 * y, 2 * xo);
          float bv = x.data[best];
          for (int ky = 0; ky < 2; ++ky) {
            for (int kx = 0; kx < 2; ++kx) {
              const long idx = x.index(in, ic, 2 * y + ky, 2 * xo + kx);
              if (x.data[idx] > bv) {
                bv = x.data[idx];
                best = idx;
              }
            }
          }
          out.data[o] = bv;
          argmax_[o] = best;
        }
      }
    }
  }
  return out;
}

Tensor MaxPool2x2::backward(const Tensor& dy) {
  Tensor dx(n_, c_, h_, w_);
  for (long o = 0; o < dy.size(); ++o) dx.data[argmax_[o]] += dy.data[o];
  return dx;
}

Tensor AvgPool2x2::forward(const Tensor& x, bool) {
  if (x.h % 2 || x.w % 2) throw std::invalid_argument("AvgPool2x2: odd spatial size");
  n_ = x.n;
  c_ = x.c;
  h_ = x.h;
  w_ = x.w;
  Tensor out(x.n, x.c, x.h / 2, x.w / 2);
  for (int in = 0; in < x.n; ++in)
    for (int ic = 0; ic < x.c; ++ic)
      for (int y = 0; y < out.h; ++y)
        for (int xo = 0; xo < out.w; ++xo)
          out.at(in, ic, y, xo) =
              0.25f * (x.at(in, ic, 2 * y, 2 * xo) + x.at(in, ic, 2 * y, 2 * xo + 1) +
                       x.at(in, ic, 2 * y + 1, 2 * xo) + x.at(in, ic, 2 * y + 1, 2 * xo + 1));
  return out;
}

Tensor AvgPool2x2::backward(const Tensor& dy) {
  Tensor dx(n_, c_, h_, w_);
  for (int in = 0; in < n_; ++in)
    for (int ic = 0; ic < c_; ++ic)
      for (int y = 0; y < dy.h; ++y)
        for (int xo = 0; xo < dy.w; ++xo) {
          const float g = 0.25f * dy.at(in, ic, y, xo);
          dx.at(in, ic, 2 * y, 2 * xo) = g;
          dx.at(in, ic, 2 * y, 2 * xo + 1) = g;
          dx.at(in, ic, 2 * y + 1, 2 * xo) = g;
          dx.at(in, ic, 2 * y + 1, 2 * xo + 1) = g;
        }
  return dx;
}

Tensor NearestUpsample::forward(const Tensor& x, bool) {
  Tensor out(x.n, x.c, x.h * factor_, x.w * factor_);
  for (int in = 0; in < x.n; ++in)
    for (int ic = 0; ic < x.c; ++ic)
      for (int y = 0; y < out.h; ++y)
        for (int xo = 0; xo < out.w; ++xo)
          out.at(in, ic, y, xo) = x.at(in, ic, y / factor_, xo / factor_);
  return out;
}

Tensor NearestUpsample::backward(const Tensor& dy) {
  Tensor dx(dy.n, dy.c, dy.h / factor_, dy.w / factor_);
  for (int in = 0; in < dy.n; ++in)
    for (int ic = 0; ic < dy.c; ++ic)
      for (int y = 0; y < dy.h; ++y)
        for (int xo = 0; xo < dy.w; ++xo)
          dx.at(in, ic, y / factor_, xo / factor_) += dy.at(in, ic, y, xo);
  return dx;
}

Tensor GlobalAvgPool::forward(const Tensor& x, bool) {
  h_ = x.h;
  w_ = x.w;
  const long hw = static_cast<long>(x.h) * x.w;
  Tensor out(x.n, x.c, 1, 1);
  for (int in = 0; in < x.n; ++in) {
    for (int ic = 0; ic < x.c; ++ic) {
      double sum = 0;
      const float* src = x.data.data() + x.index(in, ic, 0, 0);
      for (long i = 0; i < hw; ++i) sum += src[i];
      out.at(in, ic, 0, 0) = static_cast<float>(sum / hw);
    }
  }
  return out;
}

Tensor GlobalAvgPool::backward(const Tensor& dy) {
  const long hw = static_cast<long>(h_) * w_;
  Tensor dx(dy.n, dy.c, h_, w_);
  for (int in = 0; in < dy.n; ++in) {
    for (int ic = 0; ic < dy.c; ++ic) {
      const float g = dy.at(in, ic, 0, 0) / hw;
      float* dst = dx.data.data() + dx.index(in, ic, 0, 0);
      for (long i = 0; i < hw; ++i) dst[i] = g;
    }
  }
  return dx;
}

// ---------------------------------------------------------------------------
// Dense

Dense::Dense(int in_features, int out_features, Rng& rng)
    : in_f_(in_features), out_f_(out_features) {
  weight_.init(static_cast<long>(out_features) * in_features);
  bias_.init(out_features);
  fill_he_normal(weight_, in_features, rng);
}

Tensor Dense::forward(const Tensor& x, bool) {
  if (x.c != in_f_ || x.h != 1 || x.w != 1)
    throw std::invalid_argument("Dense: expects (N, in_features, 1, 1)");
  // The NCHW layout of an (N, C, 1, 1) tensor is exactly a column-major
  // (C, N) matrix.
  x_mat_ = Eigen::Map<const Eigen::MatrixXf>(x.data.data(), in_f_, x.n);
  Eigen::Map<const RowMat> wmap(weight_.value.data(), out_f_, in_f_);
  Eigen::MatrixXf y = wmap * x_mat_;
  y.colwise() += Eigen::Map<const Eigen::VectorXf>(bias_.value.data(), out_f_);
  Tensor out(x.n, out_f_, 1, 1);
  Eigen::Map<Eigen::MatrixXf>(out.data.data(), out_f_, x.n) = y;
  return out;
}

Tensor Dense::backward(const Tensor& dy) {
  Eigen::Map<const Eigen::MatrixXf> dy_mat(dy.data.data(), out_f_, dy.n);
  Eigen::Map<RowMat> dw(weight_.grad.data(), out_f_, in_f_);
  dw.noalias() += dy_mat * x_mat_.transpose();
  Eigen::Map<Eigen::VectorXf>(bias_.grad.data(), out_f_) += dy_mat.rowwise().sum();
  Eigen::Map<const RowMat> wmap(weight_.value.data(), out_f_, in_f_);
  Tensor dx(dy.n, in_f_, 1, 1);
  Eigen::Map<Eigen::MatrixXf>(dx.data.data(), in_f_, dy.n) = wmap.transpose() * dy_mat;
  return dx;
}

void Dense::collect_params(std::vector<Param*>& out) {
  out.push_back(&weight_);
  out.push_back(&bias_);
}

// ---------------------------------------------------------------------------
// Channel concat / split

Tensor concat_channels(const Tensor& a, const Tensor& b) {
  if (a.n != b.n || a.h != b.h || a.w != b.w)
    throw std::invalid_argument("concat_channels: incompatible shapes");
  Tensor out(a.n, a.c + b.c, a.h, a.w);
  const long hw = static_cast<long>(a.h) * a.w;
  for (int in = 0; in < a.n; ++in) {
    std::memcpy(out.data.data() + out.index(in, 0, 0, 0), a.data.data() + a.index(in, 0, 0, 0),
                static_cast<size_t>(a.c) * hw * sizeof(float));
    std::memcpy(out.data.data() + out.index(in, a.c, 0, 0), b.data.data() + b.index(in, 0, 0, 0),
                static_cast<size_t>(b.c) * hw * sizeof(float));
  }
  return out;
}

void split_channels(const Tensor& d, int c_a, Tensor& da, Tensor& db) {
  da = Tensor(d.n, c_a, d.h, d.w);
  db = Tensor(d.n, d.c - c_a, d.h, d.w);
  const long hw = static_cast<long>(d.h) * d.w;
  for (int in = 0; in < d.n; ++in) {
    std::memcpy(da.data.data() + da.index(in, 0, 0, 0), d.data.data() + d.index(in, 0, 0, 0),
                static_cast<size_t>(c_a) * hw * sizeof(float));
    std::memcpy(db.data.data() + db.index(in, 0, 0, 0), d.data.data() + d.index(in, c_a, 0, 0),
                static_cast<size_t>(db.c) * hw * sizeof(float));
  }
}

// ---------------------------------------------------------------------------
// Sigmoid head combiner and losses

Tensor SigmoidAverage::forward(const std::vector<Tensor>& logits) {
  if (logits.empty()) throw std::invalid_argument("SigmoidAverage: no heads");
  sigmoids_.clear();
  Tensor probs(logits[0].n, logits[0].c, logits[0].h, logits[0].w);
  for (const Tensor& z : logits) {
    if (!z.same_shape(probs)) throw std::invalid_argument("SigmoidAverage: head shape mismatch");
    Tensor s = z;
    for (long i = 0; i < s.size(); ++i) s.data[i] = 1.0f / (1.0f + std::exp(-s.data[i]));
    probs.data += s.data;
    sigmoids_.push_back(std::move(s));
  }
  probs.data /= static_cast<float>(logits.size());
  return probs;
}

std::vector<Tensor> SigmoidAverage::backward(const Tensor& dprob) const {
  std::vector<Tensor> grads;
  const float inv_k = 1.0f / static_cast<float>(sigmoids_.size());
  for (const Tensor& s : sigmoids_) {
    Tensor dz(s.n, s.c, s.h, s.w);
    for (long i = 0; i < s.size(); ++i)
      dz.data[i] = dprob.data[i] * s.data[i] * (1.0f - s.data[i]) * inv_k;
    grads.push_back(std::move(dz));
  }
  return grads;
}

LossResult bce_loss(const Tensor& prob, const Tensor& target) {
  if (!prob.same_shape(target)) throw std::invalid_argument("bce_loss: shape mismatch");
  const long m = prob.size();
  LossResult r;
  r.dprob = Tensor(prob.n, prob.c, prob.h, prob.w);
  double loss = 0;
  for (long i = 0; i < m; ++i) {
    const double p = std::clamp(static_cast<double>(prob.data[i]), 1e-7, 1.0 - 1e-7);
    const double g = target.data[i];
    loss -= g * std::log(p) + (1.0 - g) * std::log(1.0 - p);
    r.dprob.data[i] = static_cast<float>((p - g) / (p * (1.0 - p) * m));
  }
  r.value = loss / m;
  return r;
}

LossResult soft_dice_loss(const Tensor& prob, const Tensor& target) {
  if (!prob.same_shape(target)) throw std::invalid_argument("soft_dice_loss: shape mismatch");
  const long per = static_cast<long>(prob.c) * prob.h * prob.w;
  const double smooth = 1.0;
  LossResult r;
  r.dprob = Tensor(prob.n, prob.c, prob.h, prob.w);
  double loss = 0;
  for (int in = 0; in < prob.n; ++in) {
    const float* p = prob.data.data() + static_cast<long>(in) * per;
    const float* g = target.data.data() + static_cast<long>(in) * per;
    double sum_pg = 0, sum_p = 0, sum_g = 0;
    for (long i = 0; i < per; ++i) {
      sum_pg += static_cast<double>(p[i]) * g[i];
      sum_p += p[i];
      sum_g += g[i];
    }
    const double num = 2.0 * sum_pg + smooth;
    const double den = sum_p + sum_g + smooth;
    loss += 1.0 - num / den;
    float* d = r.dprob.data.data() + static_cast<long>(in) * per;
    for (long i = 0; i < per; ++i)
      d[i] = static_cast<float>(-(2.0 * g[i] * den - num) / (den * den) / prob.n);
  }
  r.value = loss / prob.n;
  return r;
}

// ---------------------------------------------------------------------------
// Adam

Adam::Adam(std::vector<Param*> params, double lr, double beta1, double beta2, double eps)
    : params_(std::move(params)),
      lr_(static_cast<float>(lr)),
      beta1_(static_cast<float>(beta1)),
      beta2_(static_cast<float>(beta2)),
      eps_(static_cast<float>(eps)) {}

void Adam::zero_grad() {
  for (Param* p : params_) p->grad.setZero();
}

void Adam::step() {
  ++t_;
  const float bc1 = 1.0f - std::pow(beta1_, static_cast<float>(t_));
  const float bc2 = 1.0f - std::pow(beta2_, static_cast<float>(t_));
  for (Param* p : params_) {
    p->m = beta1_ * p->m + (1.0f - beta1_) * p->grad;
    p->v = beta2_ * p->v.array() + (1.0f - beta2_) * p->grad.array().square();
    p->value.array() -=
        lr_ * (p->m.array() / bc1) / ((p->v.array() / bc2).sqrt() + eps_);
  }
}

}  // namespace bpseg::nn
