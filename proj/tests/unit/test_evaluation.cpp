#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <stdexcept>
#include <vector>

#include <json.hpp>

#include "bpseg/evaluation.hpp"
#include "bpseg/rng.hpp"

using namespace bpseg;
using nlohmann::json;

namespace {

std::vector<Label> labels(std::initializer_list<int> v) {
  std::vector<Label> out;
  for (int x : v) out.push_back(x ? Label::BP : Label::NO_BP);
  return out;
}

Mask random_mask(Rng& rng, int rows, int cols, double fill) {
  Mask m(rows, cols, 0);
  for (auto& px : m.data) px = rng.bernoulli(fill) ? 1 : 0;
  return m;
}

// Set-arithmetic reference implementation used as the oracle for dsc().
double dice_by_sets(const Mask& a, const Mask& b) {
  long long inter = 0, na = 0, nb = 0;
  for (size_t i = 0; i < a.data.size(); ++i) {
    na += a.data[i];
    nb += b.data[i];
    inter += (a.data[i] != 0 && b.data[i] != 0) ? 1 : 0;
  }
  if (na + nb == 0) return 1.0;
  return 2.0 * static_cast<double>(inter) / static_cast<double>(na + nb);
}

json load_fixtures() {
  const std::string path = std::string(BPSEG_FIXTURE_DIR) + "/stats_fixtures.json";
  std::ifstream in(path);
  REQUIRE_MESSAGE(in.good(), "missing fixture file: " << path);
  json j;
  in >> j;
  return j;
}

}  // namespace

TEST_CASE("confusion tallies the four cells with BP as positive") {
  // All correct: 6 positives and 4 negatives.
  auto truth = labels({1, 1, 1, 1, 1, 1, 0, 0, 0, 0});
  auto c = confusion(truth, truth);
  CHECK(c.tp == 6);
  CHECK(c.tn == 4);
  CHECK(c.fp == 0);
  CHECK(c.fn == 0);

  // All wrong: every label flipped.
  auto flipped = truth;
  for (auto& l : flipped) l = (l == Label::BP) ? Label::NO_BP : Label::BP;
  c = confusion(flipped, truth);
  CHECK(c.tp == 0);
  CHECK(c.tn == 0);
  CHECK(c.fp == 4);
  CHECK(c.fn == 6);

  // Mixed case.
  c = confusion(labels({1, 1, 0, 0, 1}), labels({1, 0, 0, 1, 1}));
  CHECK(c.tp == 2);
  CHECK(c.fp == 1);
  CHECK(c.tn == 1);
  CHECK(c.fn == 1);

  CHECK_THROWS_AS(confusion(labels({1, 0}), labels({1})), std::invalid_argument);
}

TEST_CASE("confusion matches a brute-force tally on random label vectors") {
  Rng rng(101);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + static_cast<int>(rng.uniform_int(60));
    std::vector<Label> pred, truth;
    for (int i = 0; i < n; ++i) {
      pred.push_back(rng.bernoulli(0.5) ? Label::BP : Label::NO_BP);
      truth.push_back(rng.bernoulli(0.5) ? Label::BP : Label::NO_BP);
    }
    long long tp = 0, fp = 0, tn = 0, fn = 0;
    for (int i = 0; i < n; ++i) {
      if (pred[i] == Label::BP && truth[i] == Label::BP) ++tp;
      if (pred[i] == Label::BP && truth[i] == Label::NO_BP) ++fp;
      if (pred[i] == Label::NO_BP && truth[i] == Label::NO_BP) ++tn;
      if (pred[i] == Label::NO_BP && truth[i] == Label::BP) ++fn;
    }
    const auto c = confusion(pred, truth);
    REQUIRE(c.tp == tp);
    REQUIRE(c.fp == fp);
    REQUIRE(c.tn == tn);
    REQUIRE(c.fn == fn);
    REQUIRE(c.total() == n);
  }
}

TEST_CASE("accuracy over the confusion cells") {
  CHECK(accuracy({6, 0, 4, 0}) == doctest::Approx(1.0));
  CHECK(accuracy({2, 1, 3, 4}) == doctest::Approx(0.5));
  CHECK(accuracy({0, 5, 0, 5}) == doctest::Approx(0.0));
  CHECK_THROWS_AS(accuracy(ConfusionCounts{}), std::invalid_argument);
}

TEST_CASE("f1 handles perfect, mixed, zero, and no-positive cases") {
  auto r = f1({2, 1, 0, 1});
  CHECK(r.value == doctest::Approx(4.0 / 6.0));
  CHECK_FALSE(r.degenerate);

  r = f1({5, 0, 3, 0});
  CHECK(r.value == doctest::Approx(1.0));
  CHECK_FALSE(r.degenerate);

  r = f1({0, 3, 0, 2});
  CHECK(r.value == doctest::Approx(0.0));
  CHECK_FALSE(r.degenerate);

  // No positives anywhere: define F1 = 1 and flag it.
  r = f1({0, 0, 7, 0});
  CHECK(r.value == doctest::Approx(1.0));
  CHECK(r.degenerate);
}

TEST_CASE("dsc frozen cases") {
  Mask a(4, 4, 0);
  a.at(0, 0) = a.at(0, 1) = a.at(1, 0) = a.at(1, 1) = 1;  // |M| = 4
  Mask b(4, 4, 0);
  b.at(0, 0) = b.at(0, 1) = b.at(1, 0) = 1;  // overlap of 3
  b.at(2, 2) = b.at(2, 3) = b.at(3, 3) = 1;  // |GT| = 6
  auto r = dsc(a, b);
  CHECK(r.value == doctest::Approx(0.6));
  CHECK_FALSE(r.empty_both);

  CHECK(dsc(a, a).value == doctest::Approx(1.0));

  Mask disjoint(4, 4, 0);
  disjoint.at(3, 0) = 1;
  CHECK(dsc(a, disjoint).value == doctest::Approx(0.0));

  r = dsc(Mask(4, 4, 0), Mask(4, 4, 0));
  CHECK(r.value == doctest::Approx(1.0));
  CHECK(r.empty_both);

  CHECK_THROWS_AS(dsc(Mask(4, 4, 0), Mask(4, 5, 0)), std::invalid_argument);
  Mask bad(4, 4, 0);
  bad.at(0, 0) = 2;
  CHECK_THROWS_AS(dsc(bad, Mask(4, 4, 0)), std::invalid_argument);
}

TEST_CASE("dsc agrees with a set-arithmetic oracle, is symmetric, and equals pixel F1") {
  Rng rng(202);
  for (int trial = 0; trial < 400; ++trial) {
    const int rows = 1 + static_cast<int>(rng.uniform_int(32));
    const int cols = 1 + static_cast<int>(rng.uniform_int(32));
    const double fill = rng.uniform();
    const Mask m = random_mask(rng, rows, cols, fill);
    const Mask g = random_mask(rng, rows, cols, fill * rng.uniform());

    const auto d1 = dsc(m, g);
    const auto d2 = dsc(g, m);
    REQUIRE(std::abs(d1.value - dice_by_sets(m, g)) < 1e-12);
    REQUIRE(d1.value == d2.value);  // symmetry must be exact
    REQUIRE(d1.empty_both == d2.empty_both);

    // Pixel-level F1 with BP-pixel as positive is the same number.
    std::vector<Label> pm, pg;
    for (size_t i = 0; i < m.data.size(); ++i) {
      pm.push_back(m.data[i] ? Label::BP : Label::NO_BP);
      pg.push_back(g.data[i] ? Label::BP : Label::NO_BP);
    }
    const auto pf = f1(confusion(pm, pg));
    REQUIRE(std::abs(d1.value - pf.value) < 1e-15);
    REQUIRE(d1.empty_both == pf.degenerate);
  }
}

TEST_CASE("shapiro-wilk matches reference values on frozen fixtures") {
  const json fx = load_fixtures();
  int checked = 0;
  for (const auto& f : fx.at("shapiro_wilk")) {
    const std::vector<double> samples = f.at("samples").get<std::vector<double>>();
    const auto r = shapiro_wilk(samples);
    CHECK(std::abs(r.statistic - (f.at("w").get<double>())) <= 1e-6);
    CHECK(std::abs(r.p_value - (f.at("p").get<double>())) <= 1e-6);
    CHECK(r.test == StatTest::SHAPIRO_WILK);
    REQUIRE(r.n.size() == 1);
    CHECK(r.n[0] == static_cast<int>(samples.size()));
    ++checked;
  }
  CHECK(checked >= 50);
}

TEST_CASE("shapiro-wilk properties: affine invariance, bimodal rejection, bounds, domain") {
  std::vector<double> x = {0.3, -1.2, 0.7, 2.1, -0.4, 0.9, 1.5, -0.8, 0.1, 0.6};
  std::vector<double> y;
  for (double v : x) y.push_back(5.0 * v + 3.0);
  const auto rx = shapiro_wilk(x);
  const auto ry = shapiro_wilk(y);
  CHECK(std::abs(rx.statistic - (ry.statistic)) <= 1e-9);
  CHECK(std::abs(rx.p_value - (ry.p_value)) <= 1e-9);

  // Two tight clusters far apart are decisively non-normal.
  std::vector<double> bimodal;
  for (int i = 0; i < 10; ++i) bimodal.push_back(0.01 * i);
  for (int i = 0; i < 10; ++i) bimodal.push_back(100.0 + 0.01 * i);
  CHECK(shapiro_wilk(bimodal).p_value < 0.05);

  CHECK_THROWS_AS(shapiro_wilk(std::vector<double>{2.0, 2.0, 2.0, 2.0}), std::invalid_argument);
  CHECK_THROWS_AS(shapiro_wilk(std::vector<double>{1.0, 2.0}), std::invalid_argument);
  std::vector<double> too_big(51);
  for (size_t i = 0; i < too_big.size(); ++i) too_big[i] = static_cast<double>(i);
  CHECK_THROWS_AS(shapiro_wilk(too_big), std::invalid_argument);

  Rng rng(303);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 3 + static_cast<int>(rng.uniform_int(48));
    std::vector<double> s;
    for (int i = 0; i < n; ++i) s.push_back(rng.normal());
    const auto r = shapiro_wilk(s);
    CHECK(r.statistic <= 1.0 + 1e-9);
    CHECK(r.statistic > 0.0);
    CHECK(r.p_value >= 0.0);
    CHECK(r.p_value <= 1.0);
  }
}

TEST_CASE("t-test matches reference values on frozen fixtures") {
  const json fx = load_fixtures();
  int checked = 0;
  for (const auto& f : fx.at("t_two_sided")) {
    const auto a = f.at("a").get<std::vector<double>>();
    const auto b = f.at("b").get<std::vector<double>>();
    const TTestKind kind =
        f.at("kind").get<std::string>() == "welch" ? TTestKind::WELCH : TTestKind::STUDENT_POOLED;
    const auto r = t_test_two_sided(a, b, kind);
    CHECK(std::abs(r.statistic - (f.at("t").get<double>())) <= 1e-6);
    CHECK(std::abs(r.p_value - (f.at("p").get<double>())) <= 1e-6);
    REQUIRE(r.n.size() == 2);
    CHECK(r.n[0] == static_cast<int>(a.size()));
    CHECK(r.n[1] == static_cast<int>(b.size()));
    ++checked;
  }
  CHECK(checked >= 10);
}

TEST_CASE("t-test properties: identical groups, swap antisymmetry, pooled closed form, domain") {
  std::vector<double> a = {1.0, 2.0, 3.0, 4.0};
  auto r = t_test_two_sided(a, a);
  CHECK(r.statistic == doctest::Approx(0.0));
  CHECK(r.p_value == doctest::Approx(1.0));

  std::vector<double> b = {2.5, 3.5, 1.5, 5.0, 0.5};
  const auto ab = t_test_two_sided(a, b);
  const auto ba = t_test_two_sided(b, a);
  CHECK(std::abs(ab.statistic - (-ba.statistic)) <= 1e-12);
  CHECK(std::abs(ab.p_value - (ba.p_value)) <= 1e-12);

  // Student pooled statistic against the textbook formula.
  const auto pooled = t_test_two_sided(a, b, TTestKind::STUDENT_POOLED);
  const auto mean = [](const std::vector<double>& v) {
    double s = 0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
  };
  const auto var = [&](const std::vector<double>& v) {
    const double m = mean(v);
    double s = 0;
    for (double x : v) s += (x - m) * (x - m);
    return s / static_cast<double>(v.size() - 1);
  };
  const double na = 4, nb = 5;
  const double sp2 = ((na - 1) * var(a) + (nb - 1) * var(b)) / (na + nb - 2);
  const double t_ref = (mean(a) - mean(b)) / std::sqrt(sp2 * (1 / na + 1 / nb));
  CHECK(std::abs(pooled.statistic - (t_ref)) <= 1e-12);

  CHECK_THROWS_AS(t_test_two_sided(std::vector<double>{3, 3, 3}, std::vector<double>{3, 3, 3}),
                  std::invalid_argument);
  CHECK_THROWS_AS(t_test_two_sided(std::vector<double>{1}, a), std::invalid_argument);
  // One constant group is fine as long as the other varies.
  CHECK_NOTHROW(t_test_two_sided(std::vector<double>{2, 2, 2}, b));
}

TEST_CASE("fold aggregation uses the sample standard deviation") {
  auto r = aggregate_folds(std::vector<double>{0.5, 0.5, 0.5});
  CHECK(r.mean == doctest::Approx(0.5));
  CHECK(r.stddev == doctest::Approx(0.0));
  CHECK_FALSE(r.degenerate);

  r = aggregate_folds(std::vector<double>{0.4, 0.6});
  CHECK(r.mean == doctest::Approx(0.5));
  CHECK(r.stddev == doctest::Approx(0.1414213562).epsilon(1e-6));

  r = aggregate_folds(std::vector<double>{0.7});
  CHECK(r.mean == doctest::Approx(0.7));
  CHECK(r.stddev == doctest::Approx(0.0));
  CHECK(r.degenerate);
  REQUIRE(r.per_fold.size() == 1);

  CHECK_THROWS_AS(aggregate_folds(std::vector<double>{}), std::invalid_argument);
}
