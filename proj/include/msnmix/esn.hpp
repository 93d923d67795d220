#pragma once

#include "msnmix/types.hpp"

namespace msnmix {

/// Below this tau_tilde the augmented-normal route loses the scale of
/// Phi(tau_tilde); rectangle masses and truncated moments switch to an
/// exponentially tilted conditioning on the latent coordinate.
inline constexpr double kEsnTiltThreshold = -8.0;

/// Extended skew-normal density and its log.
double esn_pdf(const VectorXd& y, const EsnParams& params);
double esn_logpdf(const VectorXd& y, const EsnParams& params);
double esn_logpdf(const VectorXd& y, const EsnParams& params, const EsnDerived& derived);

/// P(Y <= y) through one (p+1)-dimensional normal rectangle.
double esn_cdf(const VectorXd& y, const EsnParams& params, double abs_tol = 1e-7);

/// P(a <= Y <= b), the normalizing constant of the truncated ESN.
/// Production path: a (p+1)-dimensional normal rectangle with the latent
/// skewing coordinate restricted to [-tau_tilde, inf), divided by xi.
double esn_rect_prob(const Rectangle& rect, const EsnParams& params, double abs_tol = 1e-6);

/// Secondary route: signed inclusion-exclusion over 2^p corner CDFs.
/// Kept as an independent cross-check of esn_rect_prob.
double esn_rect_prob_corners(const Rectangle& rect, const EsnParams& params);

// ---------------------------------------------------------------------------
// Marginal / conditional factorization (ESN is closed under both).
// ---------------------------------------------------------------------------

/// Conditional law of block 2 given block 1 = y1.  Everything except the
/// y1-dependent location and shift is precomputed.
struct EsnConditional {
  MatrixXd sigma_cc;      // Sigma_{22.1}
  VectorXd lambda_c;      // Sigma_{22.1}^{1/2} varphi_2
  MatrixXd regression;    // Sigma_21 Sigma_11^{-1}
  VectorXd mu1, mu2;
  VectorXd varphi_tilde1; // varphi_1 + Sigma_11^{-1} Sigma_12 varphi_2
  double tau = 0.0;

  EsnParams at(const VectorXd& y1) const {
    EsnParams out;
    out.mu = mu2 + regression * (y1 - mu1);
    out.sigma = sigma_cc;
    out.lambda = lambda_c;
    out.tau = tau + varphi_tilde1.dot(y1 - mu1);
    return out;
  }
};

struct EsnSplit {
  EsnParams marginal; // law of block 1
  EsnConditional conditional;
};

/// Splits an ESN law into the block-1 marginal and the block-2-given-block-1
/// conditional family.
EsnSplit marginal_conditional_split(const EsnParams& params,
                                    const std::vector<Eigen::Index>& block1,
                                    const std::vector<Eigen::Index>& block2);

/// Mean and covariance of an untruncated ESN vector (closed form).
MomentPair esn_moments(const EsnParams& params);

} // namespace msnmix
