#pragma once

#include <cmath>
#include <limits>

#include "chunkchain/ledger/bytes.hpp"

namespace chunkchain::analytics {

class StatsError : public Error {
 public:
  using Error::Error;
};

namespace detail {

// Continued fraction for I_x(a, b), modified Lentz evaluation.
inline double beta_continued_fraction(double a, double b, double x) {
  constexpr int kMaxIter = 10'000;
  constexpr double kEps = 1e-16;
  constexpr double kTiny = 1e-300;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) return h;
  }
  throw StatsError("incomplete beta continued fraction did not converge");
}

}  // namespace detail

/// Regularized incomplete beta function I_x(a, b).
inline double incomplete_beta(double a, double b, double x) {
  if (!(a > 0) || !(b > 0)) throw StatsError("incomplete beta needs a > 0 and b > 0");
  if (!(x >= 0.0 && x <= 1.0)) throw StatsError("incomplete beta needs 0 <= x <= 1");
  if (x == 0.0 || x == 1.0) return x;
  const double log_front =
      std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * detail::beta_continued_fraction(a, b, x) / a;
  return 1.0 - front * detail::beta_continued_fraction(b, a, 1.0 - x) / b;
}

/// Two-sided p-value of Student's t with `df` degrees of freedom.
inline double student_t_two_sided_p(double t, double df) {
  if (!(df > 0)) throw StatsError("degrees of freedom must be positive");
  if (std::isinf(t)) return 0.0;
  if (std::isnan(t)) throw StatsError("t statistic is NaN");
  return incomplete_beta(df / 2.0, 0.5, df / (df + t * t));
}

/// Upper tail P(F > f) of the F distribution with (d1, d2) degrees of freedom.
inline double f_upper_tail(double f, double d1, double d2) {
  if (!(d1 > 0) || !(d2 > 0)) throw StatsError("degrees of freedom must be positive");
  if (std::isnan(f)) throw StatsError("F statistic is NaN");
  if (f <= 0) return 1.0;
  if (std::isinf(f)) return 0.0;
  return incomplete_beta(d2 / 2.0, d1 / 2.0, d2 / (d2 + d1 * f));
}

}  // namespace chunkchain::analytics
