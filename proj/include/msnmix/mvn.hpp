#pragma once

#include "msnmix/types.hpp"

namespace msnmix {

/// Multivariate normal density at y.
double mvn_pdf(const VectorXd& y, const VectorXd& mu, const MatrixXd& sigma);
double mvn_logpdf(const VectorXd& y, const VectorXd& mu, const MatrixXd& sigma);

/// P(a < Z < b) for a standard normal scalar, stable in both tails.
double norm_interval(double a, double b);

/// P(X > h, Y > k) for a standard bivariate normal with correlation rho.
double bvn_upper(double h, double k, double rho);

/// P(lower <= Y <= upper) for Y ~ N_p(mu, sigma).
///
/// Coordinates with two infinite bounds are marginalized out exactly.  The
/// reduced problem uses the error function (p = 1), a Drezner-style
/// bivariate quadrature (p = 2), or a separation-of-variables quasi-Monte
/// Carlo rule with deterministic shifts (p >= 3) targeting abs_tol.
double mvn_rect_prob(const Rectangle& rect, const VectorXd& mu, const MatrixXd& sigma,
                     double abs_tol = 1e-6);

/// Same, with the achieved error estimate written to *err_out when non-null.
double mvn_rect_prob_err(const Rectangle& rect, const VectorXd& mu, const MatrixXd& sigma,
                         double abs_tol, double* err_out);

} // namespace msnmix
