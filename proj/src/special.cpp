#include "msnmix/special.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace msnmix {

double norm_pdf(double x) { return std::exp(-0.5 * x * x) / kSqrt2Pi; }

double norm_logpdf(double x) { return -0.5 * x * x - kLogSqrt2Pi; }

double norm_cdf(double x) { return 0.5 * std::erfc(-x * 0.70710678118654752440); }

double erfcx(double x) {
  if (x < 26.0) return std::exp(x * x) * std::erfc(x);
  // Asymptotic series; erfc itself underflows past ~26.5.
  const double z = 1.0 / (x * x);
  double s = 1.0 + z * (-0.5 + z * (0.75 + z * (-1.875 + z * 6.5625)));
  return s / (x * 1.7724538509055160273);
}

double norm_logcdf(double x) {
  if (x > -1.0) {
    // erfc is exact enough here and log1p keeps precision near 0.
    return std::log1p(-0.5 * std::erfc(x * 0.70710678118654752440));
  }
  // Phi(x) = 0.5 erfcx(-x/sqrt2) exp(-x^2/2)
  return std::log(0.5 * erfcx(-x * 0.70710678118654752440)) - 0.5 * x * x;
}

double mills_ratio(double x) {
  // phi(x)/Phi(x) = sqrt(2/pi) / erfcx(-x/sqrt2)
  return 0.79788456080286535588 / erfcx(-x * 0.70710678118654752440);
}

namespace {

// Rational initial guess for the normal quantile (Acklam's method),
// polished below with one Halley step against erfc-based Phi.
double quantile_seed(double p) {
  static const double a[6] = {-3.969683028665376e+01, 2.209460984245205e+02,
                              -2.759285104469687e+02, 1.383577518672690e+02,
                              -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[5] = {-5.447609879822406e+01, 1.615858368580409e+02,
                              -1.556989798598866e+02, 6.680131188771972e+01,
                              -1.328068155288572e+01};
  static const double c[6] = {-7.784894002430293e-03, -3.223964580411365e-01,
                              -2.400758277161838e+00, -2.549732539343734e+00,
                              4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[4] = {7.784695709041462e-03, 3.224671290700398e-01,
                              2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425;
  if (p < plow) {
    double q = std::sqrt(-2.0 * std::log(p));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  if (p > 1.0 - plow) {
    double q = std::sqrt(-2.0 * std::log(1.0 - p));
    return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  double q = p - 0.5;
  double r = q * q;
  return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
         (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

} // namespace

double norm_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    if (p == 0.0) return -std::numeric_limits<double>::infinity();
    if (p == 1.0) return std::numeric_limits<double>::infinity();
    throw std::domain_error("norm_quantile: p outside [0,1]");
  }
  double x = quantile_seed(p);
  // One Halley iteration brings the seed to full double precision.
  double e = norm_cdf(x) - p;
  double u = e * kSqrt2Pi * std::exp(0.5 * x * x);
  x = x - u / (1.0 + 0.5 * x * u);
  return x;
}

} // namespace msnmix
