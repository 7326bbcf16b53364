#include "bpseg/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <boost/math/distributions/students_t.hpp>

namespace bpseg {

ConfusionCounts confusion(std::span<const Label> predicted, std::span<const Label> truth) {
  if (predicted.size() != truth.size())
    throw std::invalid_argument("confusion: label lists differ in length");
  ConfusionCounts c;
  for (size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] == Label::BP)
      (predicted[i] == Label::BP ? c.tp : c.fn)++;
    else
      (predicted[i] == Label::BP ? c.fp : c.tn)++;
  }
  return c;
}

double accuracy(const ConfusionCounts& c) {
  const long long total = c.total();
  if (total <= 0) throw std::invalid_argument("accuracy: empty confusion counts");
  return static_cast<double>(c.tp + c.tn) / static_cast<double>(total);
}

F1Result f1(const ConfusionCounts& c) {
  const long long denom = 2 * c.tp + c.fp + c.fn;
  if (denom == 0) return {1.0, true};  // no positives anywhere
  return {static_cast<double>(2 * c.tp) / static_cast<double>(denom), false};
}

DscResult dsc(const Mask& predicted, const Mask& ground_truth) {
  if (!predicted.same_shape(ground_truth))
    throw std::invalid_argument("dsc: mask shapes differ");
  long long inter = 0, np = 0, ng = 0;
  for (size_t i = 0; i < predicted.data.size(); ++i) {
    const std::uint8_t p = predicted.data[i];
    const std::uint8_t g = ground_truth.data[i];
    if (p > 1 || g > 1) throw std::invalid_argument("dsc: masks must be binary");
    np += p;
    ng += g;
    inter += static_cast<long long>(p) * g;
  }
  if (np + ng == 0) return {1.0, true};
  return {2.0 * static_cast<double>(inter) / static_cast<double>(np + ng), false};
}

namespace {

// AS 111 normal quantile (Beasley & Springer 1977), the companion routine of
// the AS R94 Shapiro-Wilk algorithm.
double ppnd_as111(double p) {
  const double q = p - 0.5;
  if (std::abs(q) <= 0.42) {
    const double r = q * q;
    return q * (((-25.44106049637 * r + 41.39119773534) * r - 18.61500062529) * r + 2.50662823884) /
           ((((3.13082909833 * r - 21.06224101826) * r + 23.08336743743) * r - 8.47351093090) * r + 1.0);
  }
  double r = q > 0 ? 1.0 - p : p;
  if (r <= 0) throw std::domain_error("ppnd: p out of range");
  r = std::sqrt(-std::log(r));
  double v = (((2.32121276858 * r + 4.85014127135) * r - 2.29796479134) * r - 2.78718931138) /
             ((1.63706781897 * r + 3.54388924762) * r + 1.0);
  return q < 0 ? -v : v;
}

// AS 66 normal tail probability (Hill 1973).
double alnorm_as66(double x, bool upper) {
  const double ltone = 7.0, utzero = 18.66, con = 1.28;
  bool up = upper;
  double z = x;
  if (z < 0) {
    up = !up;
    z = -z;
  }
  double result;
  if (z <= ltone || (up && z <= utzero)) {
    const double y = 0.5 * z * z;
    if (z > con) {
      result = 0.398942280385 * std::exp(-y) /
               (z - 3.8052e-8 +
                1.00000615302 / (z + 3.98064794e-4 +
                1.98615381364 / (z - 0.151679116635 +
                5.29330324926 / (z + 4.8385912808 -
                15.1508972451 / (z + 0.742380924027 +
                30.789933034 / (z + 3.99019417011))))));
    } else {
      result = 0.5 - z * (0.398942280444 -
                          0.39990348504 * y / (y + 5.75885480458 -
                          29.8213557807 / (y + 2.62433121679 +
                          48.6959930692 / (y + 5.92885724438))));
    }
  } else {
    result = 0.0;
  }
  return up ? result : 1.0 - result;
}

double poly(const double* coef, int order, double x) {
  double value = coef[0];
  double xp = 1.0;
  for (int i = 1; i < order; ++i) {
    xp *= x;
    value += coef[i] * xp;
  }
  return value;
}

}  // namespace

StatTestResult shapiro_wilk(std::span<const double> samples) {
  const int n = static_cast<int>(samples.size());
  if (n < 3 || n > 50)
    throw std::invalid_argument("shapiro_wilk: sample size must be in [3, 50]");
  std::vector<double> x(samples.begin(), samples.end());
  std::sort(x.begin(), x.end());
  const double range = x.back() - x.front();
  if (range < 1e-19) throw std::invalid_argument("shapiro_wilk: sample has zero range");

  // Blom-score based coefficients, normalized per Royston's AS R94.
  const int nn2 = n / 2;
  std::vector<double> a(nn2);
  if (n == 3) {
    a[0] = std::sqrt(0.5);
  } else {
    const double an = n;
    const double an25 = an + 0.25;
    double summ2 = 0.0;
    for (int i = 0; i < nn2; ++i) {
      a[i] = ppnd_as111((i + 1 - 0.375) / an25);
      summ2 += a[i] * a[i];
    }
    summ2 *= 2.0;
    const double ssumm2 = std::sqrt(summ2);
    const double rsn = 1.0 / std::sqrt(an);
    static const double c1[6] = {0.0, 0.221157, -0.147981, -2.071190, 4.434685, -2.706056};
    static const double c2[6] = {0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633};
    const double a1 = poly(c1, 6, rsn) - a[0] / ssumm2;
    int start;
    double fac;
    if (n > 5) {
      const double a2 = poly(c2, 6, rsn) - a[1] / ssumm2;
      fac = std::sqrt((summ2 - 2.0 * a[0] * a[0] - 2.0 * a[1] * a[1]) /
                      (1.0 - 2.0 * a1 * a1 - 2.0 * a2 * a2));
      a[0] = a1;
      a[1] = a2;
      start = 2;
    } else {
      fac = std::sqrt((summ2 - 2.0 * a[0] * a[0]) / (1.0 - 2.0 * a1 * a1));
      a[0] = a1;
      start = 1;
    }
    for (int i = start; i < nn2; ++i) a[i] = -a[i] / fac;
  }

  // W as the squared correlation between the sorted sample and the
  // antisymmetric coefficient vector.
  double sa = 0.0, sx = 0.0;
  for (int i = 0; i < n; ++i) {
    const int j = n - 1 - i;
    if (i != j) sa += (i > j ? 1.0 : -1.0) * a[std::min(i, j)];
    sx += x[i] / range;
  }
  sa /= n;
  sx /= n;
  double ssa = 0.0, ssx = 0.0, sax = 0.0;
  for (int i = 0; i < n; ++i) {
    const int j = n - 1 - i;
    const double asa = (i == j ? 0.0 : (i > j ? 1.0 : -1.0) * a[std::min(i, j)]) - sa;
    const double xsx = x[i] / range - sx;
    ssa += asa * asa;
    ssx += xsx * xsx;
    sax += asa * xsx;
  }
  const double ssassx = std::sqrt(ssa * ssx);
  const double w1 = (ssassx - sax) * (ssassx + sax) / (ssa * ssx);
  const double w = 1.0 - w1;

  StatTestResult result;
  result.test = StatTest::SHAPIRO_WILK;
  result.statistic = w;
  result.n = {n};
  if (n == 3) {
    const double pi6 = 1.90985931710274;  // 6/pi
    const double stqr = 1.04719755119660;  // asin(sqrt(3/4))
    double pw = pi6 * (std::asin(std::sqrt(w)) - stqr);
    result.p_value = std::clamp(pw, 0.0, 1.0);
    return result;
  }
  double y = std::log(w1);
  double m, s;
  if (n <= 11) {
    const double an = n;
    const double gamma = -2.273 + 0.459 * an;
    if (y >= gamma) {
      result.p_value = 1e-19;  // W in the extreme tail of the approximation
      return result;
    }
    y = -std::log(gamma - y);
    static const double c3[4] = {0.5440, -0.39978, 0.025054, -6.714e-4};
    static const double c4[4] = {1.3822, -0.77857, 0.062767, -2.0322e-3};
    m = poly(c3, 4, an);
    s = std::exp(poly(c4, 4, an));
  } else {
    const double ln_n = std::log(static_cast<double>(n));
    static const double c5[4] = {-1.5861, -0.31082, -0.083751, 3.8915e-3};
    static const double c6[3] = {-0.4803, -0.082676, 0.0030302};
    m = poly(c5, 4, ln_n);
    s = std::exp(poly(c6, 3, ln_n));
  }
  result.p_value = alnorm_as66((y - m) / s, /*upper=*/true);
  return result;
}

namespace {

struct GroupStats {
  double mean = 0.0;
  double var = 0.0;  // sample variance (n-1)
  int n = 0;
};

GroupStats group_stats(std::span<const double> v) {
  GroupStats g;
  g.n = static_cast<int>(v.size());
  double sum = 0.0;
  for (double x : v) sum += x;
  g.mean = sum / g.n;
  double rss = 0.0;
  for (double x : v) {
    const double d = x - g.mean;
    rss += d * d;
  }
  g.var = rss / (g.n - 1);
  return g;
}

}  // namespace

StatTestResult t_test_two_sided(std::span<const double> a, std::span<const double> b, TTestKind kind) {
  if (a.size() < 2 || b.size() < 2)
    throw std::invalid_argument("t_test_two_sided: each group needs n >= 2");
  const GroupStats ga = group_stats(a);
  const GroupStats gb = group_stats(b);
  if (ga.var == 0.0 && gb.var == 0.0)
    throw std::invalid_argument("t_test_two_sided: both groups have zero variance");

  double t, dof;
  if (kind == TTestKind::WELCH) {
    const double ra = ga.var / ga.n;
    const double rb = gb.var / gb.n;
    const double denom = std::sqrt(ra + rb);
    t = (ga.mean - gb.mean) / denom;
    dof = (ra + rb) * (ra + rb) / (ra * ra / (ga.n - 1) + rb * rb / (gb.n - 1));
  } else {
    dof = ga.n + gb.n - 2;
    const double pooled = ((ga.n - 1) * ga.var + (gb.n - 1) * gb.var) / dof;
    t = (ga.mean - gb.mean) / (std::sqrt(pooled) * std::sqrt(1.0 / ga.n + 1.0 / gb.n));
  }

  StatTestResult result;
  result.test = StatTest::T_TWO_SIDED;
  result.statistic = t;
  result.n = {ga.n, gb.n};
  if (t == 0.0) {
    result.p_value = 1.0;
  } else {
    boost::math::students_t_distribution<double> dist(dof);
    result.p_value = 2.0 * boost::math::cdf(dist, -std::abs(t));
  }
  return result;
}

FoldAggregate aggregate_folds(std::span<const double> per_fold) {
  if (per_fold.empty()) throw std::invalid_argument("aggregate_folds: no folds");
  FoldAggregate agg;
  agg.per_fold.assign(per_fold.begin(), per_fold.end());
  double sum = 0.0;
  for (double v : per_fold) sum += v;
  agg.mean = sum / per_fold.size();
  if (per_fold.size() < 2) {
    agg.stddev = 0.0;
    agg.degenerate = true;
    return agg;
  }
  double rss = 0.0;
  for (double v : per_fold) {
    const double d = v - agg.mean;
    rss += d * d;
  }
  agg.stddev = std::sqrt(rss / (per_fold.size() - 1));
  return agg;
}

}  // namespace bpseg
