#pragma once

#include <span>

namespace vsel::stats {

double normal_cdf(double x);

/// Standard normal quantile Z(p) for p in (0, 1). Rational initial guess
/// refined by Halley steps on erfc; absolute error well below 1e-12.
double normal_quantile(double p);

/// Hit or false-alarm rate with extreme counts moved to 1/(2n) and
/// 1 - 1/(2n).
double corrected_rate(double count, double n);

/// Z(hit) - Z(fa), no clamping.
double dprime(double hit_rate, double fa_rate);

/// Regularised incomplete beta I_x(a, b) via Lentz's continued fraction.
double incomplete_beta(double a, double b, double x);

/// CDF of Student's t distribution with `dof` degrees of freedom.
double student_t_cdf(double t, double dof);

double mean(std::span<const double> values);
/// Sample variance (n - 1 denominator).
double variance(std::span<const double> values);
double stddev(std::span<const double> values);

/// Linear-interpolated percentile (q in [0, 100]) of unsorted values.
double percentile(std::span<const double> values, double q);

}  // namespace vsel::stats
