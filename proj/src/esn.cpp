#include "msnmix/esn.hpp"

#include "msnmix/linalg.hpp"
#include "msnmix/mvn.hpp"
#include "msnmix/special.hpp"

#include <cmath>

namespace msnmix {

double esn_logpdf(const VectorXd& y, const EsnParams& params, const EsnDerived& derived) {
  double skew_arg = params.tau + derived.varphi.dot(y - params.mu);
  return -derived.log_xi + mvn_logpdf(y, params.mu, params.sigma) + norm_logcdf(skew_arg);
}

double esn_logpdf(const VectorXd& y, const EsnParams& params) {
  return esn_logpdf(y, params, derive(params));
}

double esn_pdf(const VectorXd& y, const EsnParams& params) {
  return std::exp(esn_logpdf(y, params));
}

namespace {

// Augmented covariance [[sigma, s*delta], [s*delta', 1]].
MatrixXd augmented_cov(const EsnParams& params, const EsnDerived& d, double sign) {
  const Eigen::Index p = params.dim();
  MatrixXd omega(p + 1, p + 1);
  omega.topLeftCorner(p, p) = params.sigma;
  omega.topRightCorner(p, 1) = sign * d.delta;
  omega.bottomLeftCorner(1, p) = sign * d.delta.transpose();
  omega(p, p) = 1.0;
  return omega;
}

} // namespace

double esn_cdf(const VectorXd& y, const EsnParams& params, double abs_tol) {
  const Eigen::Index p = params.dim();
  if (y.size() != p) throw invalid_input_error("esn_cdf: dimension mismatch");
  EsnDerived d = derive(params);
  if (d.tau_tilde < kEsnTiltThreshold) {
    Rectangle rect{VectorXd::Constant(p, -kInf), y};
    return esn_rect_prob(rect, params, abs_tol);
  }
  if (params.lambda.isZero(0.0)) {
    // The latent coordinate decouples; its mass cancels against xi.
    Rectangle rect{VectorXd::Constant(p, -kInf), y};
    return mvn_rect_prob(rect, params.mu, params.sigma, abs_tol);
  }
  Rectangle rect;
  rect.lower = VectorXd::Constant(p + 1, -kInf);
  rect.upper.resize(p + 1);
  rect.upper.head(p) = y - params.mu;
  rect.upper[p] = d.tau_tilde;
  MatrixXd omega = augmented_cov(params, d, -1.0);
  double num = mvn_rect_prob(rect, VectorXd::Zero(p + 1), omega, abs_tol);
  return std::min(num / d.xi, 1.0);
}

namespace {

// For very negative tau_tilde the latent coordinate is confined to a far
// tail and both the augmented rectangle mass and xi underflow, while their
// ratio stays O(1).  Conditioning on u and integrating the exponentially
// tilted tail keeps everything on a representable scale:
//   P(Y in rect) = h(c) \int_0^T exp(-c t - t^2/2) L_p(rect; mu+delta(c+t), gamma) dt
// with c = -tau_tilde and h the normal hazard at c.
double esn_rect_prob_tilted(const Rectangle& rect, const EsnParams& params, const EsnDerived& d,
                            double abs_tol) {
  const double c = -d.tau_tilde;
  const double t_max = std::sqrt(c * c + 90.0) - c; // exp(-c t - t^2/2) ~ 1e-20 at T
  const int panels = 12;
  const double h = t_max / panels;
  double total = 0.0;
  for (int s = 0; s < panels; ++s) {
    double mid = (s + 0.5) * h;
    for (int i = 0; i < 10; ++i) {
      for (int sign = -1; sign <= 1; sign += 2) {
        double t = mid + sign * 0.5 * h * kGl20Node[i];
        double w = std::exp(-c * t - 0.5 * t * t);
        if (w <= 0.0) continue;
        VectorXd mu_u = params.mu + d.delta * (c + t);
        total += kGl20Weight[i] * w * mvn_rect_prob(rect, mu_u, d.gamma, abs_tol);
      }
    }
  }
  return std::clamp(mills_ratio(d.tau_tilde) * total * 0.5 * h, 0.0, 1.0);
}

} // namespace

double esn_rect_prob(const Rectangle& rect, const EsnParams& params, double abs_tol) {
  validate(rect);
  const Eigen::Index p = params.dim();
  if (rect.dim() != p) throw invalid_input_error("esn_rect_prob: dimension mismatch");
  EsnDerived d = derive(params);
  if (params.lambda.isZero(0.0) && params.tau == 0.0)
    return mvn_rect_prob(rect, params.mu, params.sigma, abs_tol);
  if (d.tau_tilde < kEsnTiltThreshold) return esn_rect_prob_tilted(rect, params, d, abs_tol);
  Rectangle aug;
  aug.lower.resize(p + 1);
  aug.upper.resize(p + 1);
  aug.lower.head(p) = rect.lower;
  aug.upper.head(p) = rect.upper;
  aug.lower[p] = -d.tau_tilde;
  aug.upper[p] = kInf;
  VectorXd mu_aug(p + 1);
  mu_aug.head(p) = params.mu;
  mu_aug[p] = 0.0;
  MatrixXd omega = augmented_cov(params, d, 1.0);
  double num = mvn_rect_prob(aug, mu_aug, omega, abs_tol);
  return std::min(num / d.xi, 1.0);
}

double esn_rect_prob_corners(const Rectangle& rect, const EsnParams& params) {
  validate(rect);
  const Eigen::Index p = params.dim();
  // Each corner CDF carries its own integration error; split the budget.
  double corner_tol = 0.5e-6 / static_cast<double>(1u << p);
  double total = 0.0;
  VectorXd corner(p);
  for (unsigned mask = 0; mask < (1u << p); ++mask) {
    int sign = 1;
    for (Eigen::Index k = 0; k < p; ++k) {
      if (mask & (1u << k)) {
        corner[k] = rect.lower[k];
        sign = -sign;
      } else {
        corner[k] = rect.upper[k];
      }
    }
    bool empty = false;
    for (Eigen::Index k = 0; k < p; ++k)
      if (corner[k] == -kInf) empty = true;
    if (!empty) total += sign * esn_cdf(corner, params, corner_tol);
  }
  return total;
}

EsnSplit marginal_conditional_split(const EsnParams& params,
                                    const std::vector<Eigen::Index>& block1,
                                    const std::vector<Eigen::Index>& block2) {
  if (block1.empty() || block2.empty())
    throw invalid_input_error("marginal_conditional_split: empty block");
  EsnDerived d = derive(params);

  MatrixXd s11 = submatrix(params.sigma, block1, block1);
  MatrixXd s12 = submatrix(params.sigma, block1, block2);
  MatrixXd s22 = submatrix(params.sigma, block2, block2);
  VectorXd mu1 = subvector(params.mu, block1);
  VectorXd mu2 = subvector(params.mu, block2);
  VectorXd phi1 = subvector(d.varphi, block1);
  VectorXd phi2 = subvector(d.varphi, block2);

  Eigen::LLT<MatrixXd> llt11(s11);
  if (llt11.info() != Eigen::Success)
    throw singularity_error("marginal_conditional_split: singular Sigma_11");
  MatrixXd s11_inv_s12 = llt11.solve(s12);

  MatrixXd s22_1 = s22 - s12.transpose() * s11_inv_s12;
  s22_1 = 0.5 * (s22_1 + s22_1.transpose());
  VectorXd phi_tilde1 = phi1 + s11_inv_s12 * phi2;
  double c12 = 1.0 / std::sqrt(1.0 + phi2.dot(s22_1 * phi2));

  EsnSplit out;
  out.marginal.mu = mu1;
  out.marginal.sigma = s11;
  out.marginal.lambda = c12 * (symmetric_sqrt(s11) * phi_tilde1);
  out.marginal.tau = c12 * params.tau;

  out.conditional.sigma_cc = s22_1;
  out.conditional.lambda_c = symmetric_sqrt(s22_1) * phi2;
  out.conditional.regression = s11_inv_s12.transpose();
  out.conditional.mu1 = mu1;
  out.conditional.mu2 = mu2;
  out.conditional.varphi_tilde1 = phi_tilde1;
  out.conditional.tau = params.tau;
  return out;
}

MomentPair esn_moments(const EsnParams& params) {
  EsnDerived d = derive(params);
  // Latent representation Y = mu + delta*U + noise with U ~ N(0,1)
  // restricted to U > -tau_tilde.
  double r = mills_ratio(d.tau_tilde);
  double eu = r;                       // E[U | U > -tau_tilde]
  double eu2 = 1.0 - d.tau_tilde * r;  // E[U^2 | ...]
  MomentPair out;
  out.mean = params.mu + eu * d.delta;
  MatrixXd cov = d.gamma + (eu2 - eu * eu) * (d.delta * d.delta.transpose());
  out.second = cov + out.mean * out.mean.transpose();
  return out;
}

} // namespace msnmix
