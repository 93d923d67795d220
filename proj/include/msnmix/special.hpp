#pragma once

// Scalar special functions for the univariate normal distribution.
// Everything here is branch-stable far into the tails; the EM inner
// loops lean on these.

namespace msnmix {

inline constexpr double kSqrt2Pi = 2.5066282746310005024;
inline constexpr double kLogSqrt2Pi = 0.91893853320467274178;

// Positive half of the 20-point Gauss-Legendre rule on [-1, 1]; the
// quadratures fold the symmetric half in.
inline constexpr double kGl20Node[10] = {
    0.0765265211334973, 0.2277858511416451, 0.3737060887154196, 0.5108670019508271,
    0.6360536807265150, 0.7463319064601508, 0.8391169718222188, 0.9122344282513259,
    0.9639719272779138, 0.9931285991850949};
inline constexpr double kGl20Weight[10] = {
    0.1527533871307259, 0.1491729864726037, 0.1420961093183821, 0.1316886384491766,
    0.1181945319615184, 0.1019301198172404, 0.0832767415767048, 0.0626720483341091,
    0.0406014298003869, 0.0176140071391521};

/// Standard normal density.
double norm_pdf(double x);

/// log of the standard normal density.
double norm_logpdf(double x);

/// Standard normal CDF, accurate in both tails.
double norm_cdf(double x);

/// log Phi(x); usable down to x ~ -1e7 without underflow.
double norm_logcdf(double x);

/// Inverse standard normal CDF on (0, 1).
double norm_quantile(double p);

/// Scaled complementary error function exp(x^2) erfc(x) for x >= 0.
double erfcx(double x);

/// Inverse Mills ratio phi(x) / Phi(x).
double mills_ratio(double x);

} // namespace msnmix
