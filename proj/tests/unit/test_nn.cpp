#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include "bpseg/nn.hpp"
#include "bpseg/rng.hpp"

using namespace bpseg;
using nn::Tensor;

namespace {

Tensor rand_tensor(int n, int c, int h, int w, std::uint64_t seed) {
  Tensor t(n, c, h, w);
  Rng rng(seed);
  for (long i = 0; i < t.size(); ++i) t.data[i] = static_cast<float>(rng.normal());
  return t;
}

// Central-difference gradient check on loss = sum(forward(x) * R).
// Returns the worst relative error over sampled input and parameter entries.
std::pair<double, double> check_layer(nn::Layer& layer, Tensor x, int checks = 20) {
  Rng rng(99);
  Tensor y = layer.forward(x, true);
  Tensor R(y.n, y.c, y.h, y.w);
  for (long i = 0; i < R.size(); ++i) R.data[i] = static_cast<float>(rng.normal());

  std::vector<nn::Param*> params;
  layer.collect_params(params);
  for (auto* p : params) p->grad.setZero();
  const Tensor dx = layer.backward(R);

  auto loss = [&]() {
    Tensor yy = layer.forward(x, true);
    double s = 0;
    for (long i = 0; i < yy.size(); ++i) s += static_cast<double>(yy.data[i]) * R.data[i];
    return s;
  };

  double worst_x = 0, worst_p = 0;
  Rng pick(7);
  const float eps = 1e-2f;
  for (int c = 0; c < checks; ++c) {
    const long idx = static_cast<long>(pick.uniform_int(static_cast<std::uint64_t>(x.size())));
    const float orig = x.data[idx];
    x.data[idx] = orig + eps;
    const double lp = loss();
    x.data[idx] = orig - eps;
    const double lm = loss();
    x.data[idx] = orig;
    const double num = (lp - lm) / (2.0 * eps), ana = dx.data[idx];
    const double rel = std::fabs(num - ana) / std::max({std::fabs(num), std::fabs(ana), 1e-5});
    worst_x = std::max(worst_x, rel);
  }
  for (auto* p : params) {
    for (int c = 0; c < checks; ++c) {
      const long idx =
          static_cast<long>(pick.uniform_int(static_cast<std::uint64_t>(p->value.size())));
      const float orig = p->value[idx];
      p->value[idx] = orig + eps;
      const double lp = loss();
      p->value[idx] = orig - eps;
      const double lm = loss();
      p->value[idx] = orig;
      const double num = (lp - lm) / (2.0 * eps), ana = p->grad[idx];
      const double rel = std::fabs(num - ana) / std::max({std::fabs(num), std::fabs(ana), 1e-5});
      worst_p = std::max(worst_p, rel);
    }
  }
  return {worst_x, worst_p};
}

}  // namespace

TEST_CASE("tensor indexing is NCHW row-major") {
  Tensor t(2, 3, 4, 5);
  CHECK(t.size() == 120);
  t.at(1, 2, 3, 4) = 9.0f;
  CHECK(t.data[119] == 9.0f);
  t.at(0, 0, 0, 1) = 5.0f;
  CHECK(t.data[1] == 5.0f);
  CHECK(t.index(0, 1, 0, 0) == 20);
  CHECK(t.same_shape(Tensor(2, 3, 4, 5)));
  CHECK_FALSE(t.same_shape(Tensor(2, 3, 5, 4)));
}

// Finite-difference float32 noise keeps these from reaching 1e-6; the bounds
// below are far beyond what a wrong gradient (typically O(1) off) could meet.
TEST_CASE("convolution gradients") {
  Rng rng(1);
  nn::Conv2d conv3(3, 4, 3, rng);
  auto [dx3, dp3] = check_layer(conv3, rand_tensor(2, 3, 6, 5, 2));
  CHECK(dx3 < 5e-3);
  CHECK(dp3 < 2e-3);

  nn::Conv2d conv1(3, 2, 1, rng);
  auto [dx1, dp1] = check_layer(conv1, rand_tensor(2, 3, 5, 4, 3));
  CHECK(dx1 < 5e-3);
  CHECK(dp1 < 2e-3);
}

TEST_CASE("transposed convolution gradients") {
  Rng rng(1);
  nn::ConvTranspose2d up(3, 2, rng);
  auto [dx, dp] = check_layer(up, rand_tensor(2, 3, 4, 3, 4));
  CHECK(dx < 5e-3);
  CHECK(dp < 2e-3);
}

TEST_CASE("batchnorm gradients") {
  nn::BatchNorm2d bn(3);
  auto [dx, dp] = check_layer(bn, rand_tensor(2, 3, 4, 4, 5));
  CHECK(dx < 5e-3);
  CHECK(dp < 2e-3);
}

TEST_CASE("activation and pooling gradients") {
  nn::ReLU relu;
  auto [dxr, dpr] = check_layer(relu, rand_tensor(2, 3, 4, 4, 6));
  CHECK(dxr < 5e-3);

  nn::MaxPool2x2 mp;
  auto [dxm, dpm] = check_layer(mp, rand_tensor(2, 3, 6, 4, 7));
  CHECK(dxm < 5e-3);

  nn::AvgPool2x2 ap;
  auto [dxa, dpa] = check_layer(ap, rand_tensor(2, 3, 6, 4, 8));
  CHECK(dxa < 5e-3);

  nn::NearestUpsample nu(2);
  auto [dxu, dpu] = check_layer(nu, rand_tensor(2, 3, 3, 4, 9));
  CHECK(dxu < 5e-3);

  nn::GlobalAvgPool gap;
  auto [dxg, dpg] = check_layer(gap, rand_tensor(2, 5, 4, 4, 10));
  CHECK(dxg < 5e-3);
  (void)dpr, (void)dpm, (void)dpa, (void)dpu, (void)dpg;
}

TEST_CASE("dense gradients") {
  Rng rng(1);
  nn::Dense d(5, 3, rng);
  auto [dx, dp] = check_layer(d, rand_tensor(4, 5, 1, 1, 11));
  CHECK(dx < 5e-3);
  CHECK(dp < 2e-3);
}

TEST_CASE("losses backpropagate correctly through sigmoid averaging and a conv") {
  Rng r2(21);
  nn::Conv2d conv(2, 1, 3, r2);
  nn::SigmoidAverage avg;
  Tensor x = rand_tensor(2, 2, 5, 5, 12);
  Tensor g(2, 1, 5, 5);
  Rng r3(13);
  for (long i = 0; i < g.size(); ++i) g.data[i] = r3.bernoulli(0.5) ? 1.f : 0.f;

  auto fwd = [&]() {
    Tensor z = conv.forward(x, true);
    return avg.forward({z, z});  // two identical heads share the conv
  };

  for (int which = 0; which < 2; ++which) {
    CAPTURE(which);
    Tensor p = fwd();
    const auto lr = which ? nn::soft_dice_loss(p, g) : nn::bce_loss(p, g);
    std::vector<nn::Param*> params;
    conv.collect_params(params);
    for (auto* q : params) q->grad.setZero();
    auto dz = avg.backward(lr.dprob);
    Tensor dsum = dz[0];
    dsum.data += dz[1].data;
    conv.backward(dsum);

    double worst = 0;
    Rng pick(31);
    for (int c = 0; c < 20; ++c) {
      auto* prm = params[pick.uniform_int(params.size())];
      const long idx =
          static_cast<long>(pick.uniform_int(static_cast<std::uint64_t>(prm->value.size())));
      const float eps = 1e-2f;
      const float orig = prm->value[idx];
      prm->value[idx] = orig + eps;
      Tensor pp = fwd();
      const double lp = which ? nn::soft_dice_loss(pp, g).value : nn::bce_loss(pp, g).value;
      prm->value[idx] = orig - eps;
      pp = fwd();
      const double lm = which ? nn::soft_dice_loss(pp, g).value : nn::bce_loss(pp, g).value;
      prm->value[idx] = orig;
      const double num = (lp - lm) / (2.0 * eps), ana = prm->grad[idx];
      const double rel = std::fabs(num - ana) / std::max({std::fabs(num), std::fabs(ana), 1e-5});
      worst = std::max(worst, rel);
    }
    CHECK(worst < 5e-3);
  }
}

TEST_CASE("channel concat and split are inverse operations") {
  const Tensor a = rand_tensor(2, 3, 4, 4, 14);
  const Tensor b = rand_tensor(2, 2, 4, 4, 15);
  const Tensor cat = nn::concat_channels(a, b);
  REQUIRE(cat.c == 5);
  CHECK(cat.at(1, 0, 2, 2) == a.at(1, 0, 2, 2));
  CHECK(cat.at(1, 3, 2, 2) == b.at(1, 0, 2, 2));
  Tensor da, db;
  nn::split_channels(cat, 3, da, db);
  CHECK(da.data == a.data);
  CHECK(db.data == b.data);
}

TEST_CASE("sigmoid averaging of identical heads equals a single sigmoid") {
  nn::SigmoidAverage avg;
  Tensor z = rand_tensor(1, 1, 3, 3, 16);
  const Tensor p = avg.forward({z, z});
  for (long i = 0; i < z.size(); ++i) {
    const double expect = 1.0 / (1.0 + std::exp(-static_cast<double>(z.data[i])));
    CHECK(p.data[i] == doctest::Approx(expect).epsilon(1e-5));
    CHECK(p.data[i] > 0.0f);
    CHECK(p.data[i] < 1.0f);
  }
}

TEST_CASE("loss values at the optimum and away from it") {
  Tensor target(1, 1, 2, 2);
  target.data << 1, 0, 1, 1;
  Tensor perfect = target;
  // Clamping keeps BCE finite; at the hard labels it is ~1e-7.
  CHECK(nn::bce_loss(perfect, target).value < 1e-5);
  CHECK(nn::soft_dice_loss(perfect, target).value == doctest::Approx(0.0).epsilon(1e-6));

  Tensor wrong(1, 1, 2, 2);
  wrong.data << 0, 1, 0, 0;
  CHECK(nn::bce_loss(wrong, target).value > 1.0);
  CHECK(nn::soft_dice_loss(wrong, target).value > 0.5);

  Tensor half(1, 1, 2, 2);
  half.data << 0.5f, 0.5f, 0.5f, 0.5f;
  CHECK(nn::bce_loss(half, target).value == doctest::Approx(std::log(2.0)).epsilon(1e-5));
}

TEST_CASE("adam drives a quadratic toward its minimum") {
  nn::Param p;
  p.init(3);
  p.value << 5.0f, -4.0f, 2.0f;
  nn::Adam opt({&p}, 0.1);
  for (int step = 0; step < 400; ++step) {
    opt.zero_grad();
    for (int i = 0; i < 3; ++i) p.grad[i] = 2.0f * p.value[i];  // d/dx of x^2
    opt.step();
  }
  for (int i = 0; i < 3; ++i) CHECK(std::abs(p.value[i]) < 1e-2);
}

TEST_CASE("he initialization is seeded and non-degenerate") {
  nn::Param a, b, c;
  a.init(256);
  b.init(256);
  c.init(256);
  Rng r1(5), r2(5), r3(6);
  nn::fill_he_normal(a, 64, r1);
  nn::fill_he_normal(b, 64, r2);
  nn::fill_he_normal(c, 64, r3);
  CHECK(a.value == b.value);
  CHECK(a.value != c.value);
  double sumsq = 0;
  for (long i = 0; i < a.value.size(); ++i) sumsq += static_cast<double>(a.value[i]) * a.value[i];
  const double std_emp = std::sqrt(sumsq / 256.0);
  const double std_expected = std::sqrt(2.0 / 64.0);
  CHECK(std_emp == doctest::Approx(std_expected).epsilon(0.25));
}

TEST_CASE("batchnorm eval mode uses running statistics") {
  nn::BatchNorm2d bn(2);
  // Train on a few batches so running stats move off their init.
  for (int i = 0; i < 10; ++i) bn.forward(rand_tensor(4, 2, 3, 3, 20 + i), true);
  const Tensor x = rand_tensor(4, 2, 3, 3, 40);
  const Tensor e1 = bn.forward(x, false);
  const Tensor e2 = bn.forward(x, false);
  CHECK(e1.data == e2.data);  // eval mode is a pure function of input and buffers

  // Train mode on the same input differs because batch stats are used.
  const Tensor t1 = bn.forward(x, true);
  bool any_diff = false;
  for (long i = 0; i < t1.size(); ++i) any_diff = any_diff || t1.data[i] != e1.data[i];
  CHECK(any_diff);
}

TEST_CASE("pool shapes halve and upsample doubles") {
  nn::MaxPool2x2 mp;
  nn::AvgPool2x2 ap;
  nn::NearestUpsample up(2);
  const Tensor x = rand_tensor(1, 2, 8, 6, 50);
  auto y = mp.forward(x, false);
  CHECK(y.h == 4);
  CHECK(y.w == 3);
  y = ap.forward(x, false);
  CHECK(y.h == 4);
  CHECK(y.w == 3);
  y = up.forward(x, false);
  CHECK(y.h == 16);
  CHECK(y.w == 12);

  // Average pooling of a constant grid is that constant.
  const Tensor c = Tensor(1, 1, 4, 4);
  Tensor cc = c;
  cc.data.setConstant(3.5f);
  const Tensor avg = ap.forward(cc, false);
  for (long i = 0; i < avg.size(); ++i) CHECK(avg.data[i] == doctest::Approx(3.5f));
}
