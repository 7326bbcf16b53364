#ifndef BPSEG_NN_HPP
#define BPSEG_NN_HPP

#include <Eigen/Core>
#include <cstdint>
#include <vector>

#include "bpseg/rng.hpp"

namespace bpseg::nn {

using RowMatF = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/** Dense NCHW float tensor. */
struct Tensor {
  int n = 0, c = 0, h = 0, w = 0;
  Eigen::VectorXf data;

  Tensor() = default;
  Tensor(int n_, int c_, int h_, int w_)
      : n(n_), c(c_), h(h_), w(w_),
        data(Eigen::VectorXf::Zero(static_cast<long>(n_) * c_ * h_ * w_)) {}

  long size() const { return static_cast<long>(n) * c * h * w; }
  long index(int in, int ic, int iy, int ix) const {
    return ((static_cast<long>(in) * c + ic) * h + iy) * w + ix;
  }
  float& at(int in, int ic, int iy, int ix) { return data[index(in, ic, iy, ix)]; }
  float at(int in, int ic, int iy, int ix) const { return data[index(in, ic, iy, ix)]; }
  bool same_shape(const Tensor& o) const {
    return n == o.n && c == o.c && h == o.h && w == o.w;
  }
};

/** Trainable parameter with gradient and Adam moment buffers. */
struct Param {
  Eigen::VectorXf value, grad, m, v;

  void init(long size) {
    value = Eigen::VectorXf::Zero(size);
    grad = Eigen::VectorXf::Zero(size);
    m = Eigen::VectorXf::Zero(size);
    v = Eigen::VectorXf::Zero(size);
  }
};

void fill_he_normal(Param& p, long fan_in, Rng& rng);

class Layer {
 public:
  virtual ~Layer() = default;
  // Forward must precede backward within a step; layers cache what backward
  // needs, sized to the most recent batch.
  virtual Tensor forward(const Tensor& x, bool train) = 0;
  virtual Tensor backward(const Tensor& dy) = 0;
  virtual void collect_params(std::vector<Param*>&) {}
  virtual void collect_buffers(std::vector<Eigen::VectorXf*>&) {}
};

/** 3x3 or 1x1 convolution, stride 1, same padding, via im2col + GEMM. */
class Conv2d : public Layer {
 public:
  Conv2d(int in_c, int out_c, int kernel, Rng& rng);
  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& dy) override;
  void collect_params(std::vector<Param*>& out) override;

 private:
  int in_c_, out_c_, k_, pad_;
  Param weight_;  // row-major (out_c, in_c*k*k)
  Param bias_;    // (out_c)
  RowMatF cols_;
  int n_ = 0, h_ = 0, w_ = 0;
};

/** 2x2 stride-2 transposed convolution (non-overlapping upsampling). */
class ConvTranspose2d : public Layer {
 public:
  ConvTranspose2d(int in_c, int out_c, Rng& rng);
  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& dy) override;
  void collect_params(std::vector<Param*>& out) override;

 private:
  int in_c_, out_c_;
  Param weight_;  // row-major (in_c, out_c*4)
  Param bias_;    // (out_c)
  RowMatF x_mat_;
  int n_ = 0, h_ = 0, w_ = 0;
};

class BatchNorm2d : public Layer {
 public:
  explicit BatchNorm2d(int channels, double momentum = 0.1, double eps = 1e-5);
  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& dy) override;
  void collect_params(std::vector<Param*>& out) override;
  void collect_buffers(std::vector<Eigen::VectorXf*>& out) override;

 private:
  int c_;
  float momentum_, eps_;
  Param gamma_, beta_;
  Eigen::VectorXf running_mean_, running_var_;
  // Caches from the last training-mode forward.
  Tensor xhat_;
  Eigen::VectorXf inv_std_;
  bool last_was_train_ = false;
};

class ReLU : public Layer {
 public:
  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& dy) override;

 private:
  Tensor out_;
};

class MaxPool2x2 : public Layer {
 public:
  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& dy) override;

 private:
  std::vector<long> argmax_;
  int n_ = 0, c_ = 0, h_ = 0, w_ = 0;
};

class AvgPool2x2 : public Layer {
 public:
  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& dy) override;

 private:
  int n_ = 0, c_ = 0, h_ = 0, w_ = 0;
};

/** Nearest-neighbor upsampling by an integer factor. */
class NearestUpsample : public Layer {
 public:
  explicit NearestUpsample(int factor) : factor_(factor) {}
  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& dy) override;

 private:
  int factor_;
};

/** Global average pooling to (N, C, 1, 1). */
class GlobalAvgPool : public Layer {
 public:
  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& dy) override;

 private:
  int h_ = 0, w_ = 0;
};

/** Fully connected layer on (N, C, 1, 1) tensors. */
class Dense : public Layer {
 public:
  Dense(int in_features, int out_features, Rng& rng);
  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& dy) override;
  void collect_params(std::vector<Param*>& out) override;

 private:
  int in_f_, out_f_;
  Param weight_;  // row-major (out, in)
  Param bias_;
  Eigen::MatrixXf x_mat_;
};

Tensor concat_channels(const Tensor& a, const Tensor& b);
void split_channels(const Tensor& d, int c_a, Tensor& da, Tensor& db);

/** Averages the sigmoids of one or more logit heads into a probability map
 * and routes the probability gradient back to each head. */
class SigmoidAverage {
 public:
  Tensor forward(const std::vector<Tensor>& logits);
  std::vector<Tensor> backward(const Tensor& dprob) const;

 private:
  std::vector<Tensor> sigmoids_;
};

struct LossResult {
  double value = 0.0;
  Tensor dprob;  // gradient with respect to the probability tensor
};

/** Binary cross-entropy on probabilities, mean over all elements.
 * Probabilities are clamped to [1e-7, 1 - 1e-7] inside. */
LossResult bce_loss(const Tensor& prob, const Tensor& target);

/** 1 - mean over samples of (2*sum(p*g)+1)/(sum(p)+sum(g)+1), the smooth
 * overlap surrogate of the evaluation DSC. */
LossResult soft_dice_loss(const Tensor& prob, const Tensor& target);

class Adam {
 public:
  Adam(std::vector<Param*> params, double lr, double beta1 = 0.9, double beta2 = 0.999,
       double eps = 1e-8);
  void zero_grad();
  void step();

 private:
  std::vector<Param*> params_;
  float lr_, beta1_, beta2_, eps_;
  long t_ = 0;
};

}  // namespace bpseg::nn

#endif
