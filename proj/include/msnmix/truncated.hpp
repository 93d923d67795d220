#pragma once

#include "msnmix/types.hpp"

namespace msnmix {

/// First and second raw moments of W ~ N_p(mu, sigma) truncated to rect.
///
/// Boundary-density recurrence: moments reduce to rectangle probabilities of
/// dimension p-1 and p-2 evaluated at the finite faces.  Exact path for
/// p <= 8; beyond that a seeded Monte Carlo estimate is used (with a
/// warning).  Throws degenerate_region_error when the rectangle mass is
/// numerically zero.
MomentPair tn_moments(const Rectangle& rect, const VectorXd& mu, const MatrixXd& sigma);

/// Same quantity, but coordinates with no finite bound are removed before
/// the recurrence and reconstructed through the Gaussian conditional
/// regression on the bounded block.  The kernel then runs in the bounded
/// dimension only.
MomentPair tn_moments_reduced(const Rectangle& rect, const VectorXd& mu, const MatrixXd& sigma);

/// First moment only (both full and reduced flavors).
VectorXd tn_mean(const Rectangle& rect, const VectorXd& mu, const MatrixXd& sigma);
VectorXd tn_mean_reduced(const Rectangle& rect, const VectorXd& mu, const MatrixXd& sigma);

/// Moments of Y ~ TESN_p(params; rect), computed as the first p coordinates
/// of a (p+1)-dimensional truncated normal: the latent skewing variable is
/// appended with unit variance, covariance delta against Y, and truncation
/// to [-tau_tilde, inf).
MomentPair tesn_moments(const Rectangle& rect, const EsnParams& params);

/// Same law, but unbounded coordinates are recovered through the Gaussian
/// conditional regression so the kernel runs over the bounded block plus
/// the latent coordinate only.
MomentPair tesn_moments_reduced(const Rectangle& rect, const EsnParams& params);

/// E[ g(Y) phi1(tau + lambda' sigma^{-1/2}(Y-mu)) / Phi1(...) ] for
/// Y ~ TESN(params; rect) and g of order 0 (g=1), 1 (identity) or
/// 2 (outer product).  Evaluates as eta * L_p / cal-L_p * E[g(W)] with
/// W ~ TN(mu - mu_b, gamma; rect).
struct RatioWeighted {
  double order0 = 0.0;
  VectorXd order1;
  MatrixXd order2;
};
RatioWeighted ratio_weighted_tn_moments(const Rectangle& rect, const EsnParams& params,
                                        int g_order);

// ---------------------------------------------------------------------------
// Monte Carlo oracle (test support) — rejection sampling with standard errors.
// ---------------------------------------------------------------------------

struct McMoments {
  MomentPair moments;
  VectorXd mean_se;
  MatrixXd second_se;
  long n_accepted = 0;
  double acceptance_rate = 0.0;
};

/// Rejection estimate of truncated-normal moments; deterministic given seed.
/// Throws degenerate_region_error when the acceptance rate falls below 1e-5.
McMoments mc_truncated_oracle(const Rectangle& rect, const VectorXd& mu, const MatrixXd& sigma,
                              long n_draws, unsigned long seed);

/// Rejection estimate of truncated-ESN moments (samples the latent
/// representation, then rejects on the rectangle).
McMoments mc_truncated_oracle(const Rectangle& rect, const EsnParams& params, long n_draws,
                              unsigned long seed);

// ---------------------------------------------------------------------------
// Instrumentation: dimension-weighted count of truncated-moment kernel
// invocations.  Used by tests comparing the plain and reduced E-step paths.
// ---------------------------------------------------------------------------

long long moment_eval_count();
void reset_moment_eval_count();

} // namespace msnmix
