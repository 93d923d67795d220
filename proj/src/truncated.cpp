#include "msnmix/truncated.hpp"

#include "msnmix/esn.hpp"
#include "msnmix/linalg.hpp"
#include "msnmix/mvn.hpp"
#include "msnmix/special.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <iostream>
#include <random>

namespace msnmix {

namespace {

std::atomic<long long> g_moment_evals{0};

constexpr int kExactDimLimit = 8;

double finite_or(double x, double fallback) { return std::isfinite(x) ? x : fallback; }

// Univariate truncated normal, zero mean, variance s2, interval [a, b].
void tn1_moments(double a, double b, double s2, double& m1, double& m2) {
  double s = std::sqrt(s2);
  double alpha = std::isfinite(a) ? a / s : -kInf;
  double beta = std::isfinite(b) ? b / s : kInf;
  double z = norm_interval(alpha, beta);
  if (z < 1e-300) throw degenerate_region_error("tn_moments: zero-probability interval");
  double pa = std::isfinite(alpha) ? norm_pdf(alpha) : 0.0;
  double pb = std::isfinite(beta) ? norm_pdf(beta) : 0.0;
  double apa = std::isfinite(alpha) ? alpha * pa : 0.0;
  double bpb = std::isfinite(beta) ? beta * pb : 0.0;
  m1 = s * (pa - pb) / z;
  m2 = s2 * (1.0 + (apa - bpb) / z);
}

struct CondSlice {
  MatrixXd cov;      // residual covariance after conditioning
  MatrixXd reg;      // regression of the rest on the conditioned block
  std::vector<Eigen::Index> rest;
};

CondSlice condition_on(const MatrixXd& sigma, const std::vector<Eigen::Index>& on) {
  const Eigen::Index p = sigma.rows();
  CondSlice out;
  for (Eigen::Index k = 0; k < p; ++k)
    if (std::find(on.begin(), on.end(), k) == on.end()) out.rest.push_back(k);
  MatrixXd s_oo = submatrix(sigma, on, on);
  MatrixXd s_ro = submatrix(sigma, out.rest, on);
  MatrixXd s_rr = submatrix(sigma, out.rest, out.rest);
  MatrixXd sol = s_oo.llt().solve(s_ro.transpose());
  out.reg = sol.transpose();
  out.cov = s_rr - s_ro * sol;
  out.cov = 0.5 * (out.cov + out.cov.transpose());
  return out;
}

// Unnormalized boundary density F_k(x): the joint density with coordinate k
// pinned at x and the others integrated over their interval.
double boundary_density_1(const VectorXd& a, const VectorXd& b, const MatrixXd& sigma,
                          Eigen::Index k, double x, const CondSlice& slice, double inner_tol) {
  double fk = norm_pdf(x / std::sqrt(sigma(k, k))) / std::sqrt(sigma(k, k));
  if (fk == 0.0) return 0.0;
  if (slice.rest.empty()) return fk;
  VectorXd shift = slice.reg * VectorXd::Constant(1, x);
  Rectangle r;
  r.lower = subvector(a, slice.rest);
  r.upper = subvector(b, slice.rest);
  return fk * mvn_rect_prob(r, shift, slice.cov, inner_tol);
}

// Bivariate boundary density F_{kq}(xk, xq).
double boundary_density_2(const VectorXd& a, const VectorXd& b, const MatrixXd& sigma,
                          Eigen::Index k, Eigen::Index q, double xk, double xq,
                          const CondSlice& slice, double inner_tol) {
  MatrixXd s2(2, 2);
  s2 << sigma(k, k), sigma(k, q), sigma(q, k), sigma(q, q);
  VectorXd x(2);
  x << xk, xq;
  double det = s2(0, 0) * s2(1, 1) - s2(0, 1) * s2(1, 0);
  if (det <= 0.0) return 0.0;
  double quad = (s2(1, 1) * xk * xk - 2.0 * s2(0, 1) * xk * xq + s2(0, 0) * xq * xq) / det;
  double f2 = std::exp(-0.5 * quad) / (2.0 * M_PI * std::sqrt(det));
  if (f2 == 0.0) return 0.0;
  if (slice.rest.empty()) return f2;
  VectorXd shift = slice.reg * x;
  Rectangle r;
  r.lower = subvector(a, slice.rest);
  r.upper = subvector(b, slice.rest);
  return f2 * mvn_rect_prob(r, shift, slice.cov, inner_tol);
}

MomentPair mc_kernel(const VectorXd& a, const VectorXd& b, const MatrixXd& sigma,
                     long n_draws, unsigned long seed);

// Core recurrence for W ~ N(0, sigma) on [a, b].  Dimension-weighted
// instrumentation counter is bumped here.
MomentPair tn_kernel(const VectorXd& a, const VectorXd& b, const MatrixXd& sigma,
                     bool want_second) {
  const Eigen::Index p = a.size();
  g_moment_evals += p;

  MomentPair out;
  if (p == 0) {
    out.mean = VectorXd(0);
    out.second = MatrixXd(0, 0);
    return out;
  }
  if (p == 1) {
    double m1, m2;
    tn1_moments(a[0], b[0], sigma(0, 0), m1, m2);
    out.mean = VectorXd::Constant(1, m1);
    out.second = MatrixXd::Constant(1, 1, m2);
    return out;
  }
  if (p > kExactDimLimit) {
    std::cerr << "tn_moments: dimension " << p
              << " above exact-recurrence limit, using Monte Carlo estimate\n";
    return mc_kernel(a, b, sigma, 200000, 0x7a11e5u);
  }

  Rectangle full{a, b};
  double alpha = mvn_rect_prob(full, VectorXd::Zero(p), sigma, 1e-7);
  if (alpha < 1e-300)
    throw degenerate_region_error("tn_moments: zero-probability rectangle");
  double inner_tol = std::max(1e-8, 1e-5 * alpha);

  // First moments: alpha E[W] = sigma * q with q_k the signed sum of
  // boundary densities at the finite faces.
  VectorXd q = VectorXd::Zero(p);
  std::vector<CondSlice> slices(p);
  for (Eigen::Index k = 0; k < p; ++k) {
    if (!std::isfinite(a[k]) && !std::isfinite(b[k])) continue;
    slices[k] = condition_on(sigma, {k});
    double fa = std::isfinite(a[k]) ? boundary_density_1(a, b, sigma, k, a[k], slices[k], inner_tol) : 0.0;
    double fb = std::isfinite(b[k]) ? boundary_density_1(a, b, sigma, k, b[k], slices[k], inner_tol) : 0.0;
    q[k] = fa - fb;
  }
  out.mean = sigma * q / alpha;
  for (Eigen::Index k = 0; k < p; ++k)
    out.mean[k] = std::clamp(out.mean[k], finite_or(a[k], -kInf), finite_or(b[k], kInf));
  if (!want_second) {
    out.second = MatrixXd();
    return out;
  }

  // Second moments: diagonal boundary terms plus pair corner terms.
  VectorXd h = VectorXd::Zero(p); // a_k F_k(a_k) - b_k F_k(b_k)
  for (Eigen::Index k = 0; k < p; ++k) {
    if (!std::isfinite(a[k]) && !std::isfinite(b[k])) continue;
    double ha = std::isfinite(a[k]) ? a[k] * boundary_density_1(a, b, sigma, k, a[k], slices[k], inner_tol) : 0.0;
    double hb = std::isfinite(b[k]) ? b[k] * boundary_density_1(a, b, sigma, k, b[k], slices[k], inner_tol) : 0.0;
    h[k] = ha - hb;
  }
  // corner[k][q] = F_kq(a,a) - F_kq(a,b) - F_kq(b,a) + F_kq(b,b), k != q.
  MatrixXd corner = MatrixXd::Zero(p, p);
  for (Eigen::Index k = 0; k < p; ++k) {
    if (!std::isfinite(a[k]) && !std::isfinite(b[k])) continue;
    for (Eigen::Index q2 = 0; q2 < p; ++q2) {
      if (q2 == k) continue;
      if (!std::isfinite(a[q2]) && !std::isfinite(b[q2])) continue;
      CondSlice s2 = condition_on(sigma, {std::min(k, q2), std::max(k, q2)});
      double acc = 0.0;
      const double xk[2] = {a[k], b[k]};
      const double xq[2] = {a[q2], b[q2]};
      const double sk[2] = {1.0, -1.0};
      for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) {
          if (!std::isfinite(xk[i]) || !std::isfinite(xq[j])) continue;
          // boundary_density_2 conditions on sorted (k, q2); argument order
          // must match.
          double v = (k < q2)
                         ? boundary_density_2(a, b, sigma, k, q2, xk[i], xq[j], s2, inner_tol)
                         : boundary_density_2(a, b, sigma, q2, k, xq[j], xk[i], s2, inner_tol);
          acc += sk[i] * sk[j] * v;
        }
      corner(k, q2) = acc;
    }
  }

  MatrixXd second(p, p);
  for (Eigen::Index i = 0; i < p; ++i) {
    for (Eigen::Index j = i; j < p; ++j) {
      double val = alpha * sigma(i, j);
      for (Eigen::Index k = 0; k < p; ++k) {
        val += sigma(i, k) * sigma(j, k) / sigma(k, k) * h[k];
        double inner = 0.0;
        for (Eigen::Index q2 = 0; q2 < p; ++q2) {
          if (q2 == k) continue;
          inner += (sigma(j, q2) - sigma(k, q2) * sigma(j, k) / sigma(k, k)) * corner(k, q2);
        }
        val += sigma(i, k) * inner;
      }
      second(i, j) = val / alpha;
      second(j, i) = second(i, j);
    }
  }
  out.second = second;
  return out;
}

MomentPair mc_kernel(const VectorXd& a, const VectorXd& b, const MatrixXd& sigma,
                     long n_draws, unsigned long seed) {
  const Eigen::Index p = a.size();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::LLT<MatrixXd> llt(sigma);
  MatrixXd chol = llt.matrixL();
  VectorXd z(p), y(p);
  VectorXd sum = VectorXd::Zero(p);
  MatrixXd sum2 = MatrixXd::Zero(p, p);
  long accepted = 0;
  long attempts = 0;
  const long probe = 1000000;
  while (accepted < n_draws) {
    ++attempts;
    for (Eigen::Index k = 0; k < p; ++k) z[k] = gauss(rng);
    y = chol * z;
    bool inside = true;
    for (Eigen::Index k = 0; k < p && inside; ++k)
      inside = y[k] >= a[k] && y[k] <= b[k];
    if (inside) {
      ++accepted;
      sum += y;
      sum2 += y * y.transpose();
    }
    if (attempts == probe && accepted < probe / 100000)
      throw degenerate_region_error("mc oracle: acceptance rate below 1e-5");
  }
  MomentPair out;
  out.mean = sum / static_cast<double>(accepted);
  out.second = sum2 / static_cast<double>(accepted);
  return out;
}

} // namespace

long long moment_eval_count() { return g_moment_evals.load(); }
void reset_moment_eval_count() { g_moment_evals.store(0); }

MomentPair tn_moments(const Rectangle& rect, const VectorXd& mu, const MatrixXd& sigma) {
  validate(rect);
  const Eigen::Index p = mu.size();
  if (rect.dim() != p || sigma.rows() != p || sigma.cols() != p)
    throw invalid_input_error("tn_moments: dimension mismatch");
  if (rect.unbounded()) {
    MomentPair out;
    out.mean = mu;
    out.second = sigma + mu * mu.transpose();
    return out;
  }
  MomentPair c = tn_kernel(rect.lower - mu, rect.upper - mu, sigma, true);
  MomentPair out;
  out.mean = c.mean + mu;
  out.second = c.second + c.mean * mu.transpose() + mu * c.mean.transpose() + mu * mu.transpose();
  return out;
}

VectorXd tn_mean(const Rectangle& rect, const VectorXd& mu, const MatrixXd& sigma) {
  validate(rect);
  if (rect.unbounded()) return mu;
  MomentPair c = tn_kernel(rect.lower - mu, rect.upper - mu, sigma, false);
  return c.mean + mu;
}

namespace {

std::vector<Eigen::Index> bounded_coords(const Rectangle& rect) {
  std::vector<Eigen::Index> idx;
  for (Eigen::Index k = 0; k < rect.dim(); ++k)
    if (std::isfinite(rect.lower[k]) || std::isfinite(rect.upper[k])) idx.push_back(k);
  return idx;
}

// Shared implementation of the reduced path: kernel on the bounded block,
// Gaussian regression for the free block.
MomentPair tn_reduced_impl(const Rectangle& rect, const VectorXd& mu, const MatrixXd& sigma,
                           bool want_second) {
  const Eigen::Index p = mu.size();
  std::vector<Eigen::Index> tset = bounded_coords(rect);
  if (tset.empty()) {
    MomentPair out;
    out.mean = mu;
    if (want_second) out.second = sigma + mu * mu.transpose();
    return out;
  }
  if (static_cast<Eigen::Index>(tset.size()) == p)
    return want_second ? tn_moments(rect, mu, sigma)
                       : MomentPair{tn_mean(rect, mu, sigma), MatrixXd()};

  CondSlice slice = condition_on(sigma, tset);
  const std::vector<Eigen::Index>& fset = slice.rest;

  VectorXd mu_t = subvector(mu, tset);
  VectorXd mu_f = subvector(mu, fset);
  MatrixXd s_tt = submatrix(sigma, tset, tset);

  VectorXd at = subvector(rect.lower, tset) - mu_t;
  VectorXd bt = subvector(rect.upper, tset) - mu_t;
  MomentPair t = tn_kernel(at, bt, s_tt, want_second); // centered moments
  VectorXd et = t.mean;                                // E[X_t] - mu_t

  MomentPair out;
  out.mean = VectorXd(p);
  scatter(mu_t + et, tset, out.mean);
  scatter(mu_f + slice.reg * et, fset, out.mean);
  if (!want_second) return out;

  MatrixXd vt = t.second - et * et.transpose(); // var[X_t]
  MatrixXd cov(p, p);
  MatrixXd cov_tf = vt * slice.reg.transpose();
  MatrixXd cov_ff = slice.cov + slice.reg * vt * slice.reg.transpose();
  for (size_t i = 0; i < tset.size(); ++i)
    for (size_t j = 0; j < tset.size(); ++j) cov(tset[i], tset[j]) = vt(i, j);
  for (size_t i = 0; i < tset.size(); ++i)
    for (size_t j = 0; j < fset.size(); ++j) {
      cov(tset[i], fset[j]) = cov_tf(i, j);
      cov(fset[j], tset[i]) = cov_tf(i, j);
    }
  for (size_t i = 0; i < fset.size(); ++i)
    for (size_t j = 0; j < fset.size(); ++j) cov(fset[i], fset[j]) = cov_ff(i, j);
  out.second = cov + out.mean * out.mean.transpose();
  return out;
}

} // namespace

MomentPair tn_moments_reduced(const Rectangle& rect, const VectorXd& mu, const MatrixXd& sigma) {
  validate(rect);
  return tn_reduced_impl(rect, mu, sigma, true);
}

VectorXd tn_mean_reduced(const Rectangle& rect, const VectorXd& mu, const MatrixXd& sigma) {
  validate(rect);
  return tn_reduced_impl(rect, mu, sigma, false).mean;
}

namespace {

// Extreme negative tau_tilde: condition on the latent coordinate and
// integrate its exponentially tilted tail; every factor stays on a
// representable scale.  See esn_rect_prob for the same device.
MomentPair tesn_moments_tilted(const Rectangle& rect, const EsnParams& params,
                               const EsnDerived& d) {
  const Eigen::Index p = params.dim();
  const double c = -d.tau_tilde;
  const double t_max = std::sqrt(c * c + 90.0) - c;
  const int panels = 12;
  const double h = t_max / panels;
  double mass = 0.0;
  VectorXd mean = VectorXd::Zero(p);
  MatrixXd second = MatrixXd::Zero(p, p);
  for (int s = 0; s < panels; ++s) {
    double mid = (s + 0.5) * h;
    for (int i = 0; i < 10; ++i) {
      for (int sign = -1; sign <= 1; sign += 2) {
        double t = mid + sign * 0.5 * h * kGl20Node[i];
        double w = kGl20Weight[i] * std::exp(-c * t - 0.5 * t * t);
        if (w <= 0.0) continue;
        VectorXd mu_u = params.mu + d.delta * (c + t);
        double alpha = mvn_rect_prob(rect, mu_u, d.gamma, 1e-9);
        if (alpha <= 0.0) continue;
        MomentPair m = tn_moments_reduced(rect, mu_u, d.gamma);
        mass += w * alpha;
        mean += w * alpha * m.mean;
        second += w * alpha * m.second;
      }
    }
  }
  if (mass < 1e-300)
    throw degenerate_region_error("tesn_moments: zero-probability rectangle");
  MomentPair out;
  out.mean = mean / mass;
  out.second = second / mass;
  for (Eigen::Index k = 0; k < p; ++k)
    out.mean[k] = std::clamp(out.mean[k], rect.lower[k], rect.upper[k]);
  return out;
}

} // namespace

namespace {

MomentPair tesn_impl(const Rectangle& rect, const EsnParams& params, bool reduced) {
  validate(rect);
  const Eigen::Index p = params.dim();
  if (rect.dim() != p) throw invalid_input_error("tesn_moments: dimension mismatch");
  if (params.lambda.isZero(0.0) && params.tau == 0.0)
    return reduced ? tn_moments_reduced(rect, params.mu, params.sigma)
                   : tn_moments(rect, params.mu, params.sigma);

  EsnDerived d = derive(params);
  if (d.tau_tilde < kEsnTiltThreshold) return tesn_moments_tilted(rect, params, d);
  Rectangle aug;
  aug.lower.resize(p + 1);
  aug.upper.resize(p + 1);
  aug.lower.head(p) = rect.lower;
  aug.upper.head(p) = rect.upper;
  aug.lower[p] = -d.tau_tilde;
  aug.upper[p] = kInf;
  VectorXd mu_aug = VectorXd::Zero(p + 1);
  mu_aug.head(p) = params.mu;
  MatrixXd omega(p + 1, p + 1);
  omega.topLeftCorner(p, p) = params.sigma;
  omega.topRightCorner(p, 1) = d.delta;
  omega.bottomLeftCorner(1, p) = d.delta.transpose();
  omega(p, p) = 1.0;

  MomentPair full = reduced ? tn_moments_reduced(aug, mu_aug, omega) : tn_moments(aug, mu_aug, omega);
  MomentPair out;
  out.mean = full.mean.head(p);
  out.second = full.second.topLeftCorner(p, p);
  return out;
}

} // namespace

MomentPair tesn_moments(const Rectangle& rect, const EsnParams& params) {
  return tesn_impl(rect, params, false);
}

MomentPair tesn_moments_reduced(const Rectangle& rect, const EsnParams& params) {
  return tesn_impl(rect, params, true);
}

RatioWeighted ratio_weighted_tn_moments(const Rectangle& rect, const EsnParams& params,
                                        int g_order) {
  validate(rect);
  if (g_order < 0 || g_order > 2)
    throw invalid_input_error("ratio_weighted_tn_moments: g_order must be 0, 1 or 2");
  EsnDerived d = derive(params);
  double lam2 = params.lambda.squaredNorm();
  double eta = mills_ratio(d.tau_tilde) / std::sqrt(1.0 + lam2);
  VectorXd mu_w = params.mu - d.tau_tilde * d.delta;

  double num = mvn_rect_prob(rect, mu_w, d.gamma);
  double den = esn_rect_prob(rect, params);
  if (den < 1e-300)
    throw degenerate_region_error("ratio_weighted_tn_moments: zero-probability rectangle");
  double scale = eta * num / den;

  RatioWeighted out;
  out.order0 = scale;
  if (g_order >= 1) {
    if (g_order == 1) {
      out.order1 = scale * tn_mean(rect, mu_w, d.gamma);
    } else {
      MomentPair w = tn_moments(rect, mu_w, d.gamma);
      out.order1 = scale * w.mean;
      out.order2 = scale * w.second;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Rejection-sampling oracle.
// ---------------------------------------------------------------------------

namespace {

template <typename DrawFn>
McMoments mc_accumulate(const Rectangle& rect, long n_draws, unsigned long seed, DrawFn&& draw) {
  const Eigen::Index p = rect.dim();
  if (n_draws < 10000) throw invalid_input_error("mc oracle: n_draws must be >= 1e4");
  std::mt19937_64 rng(seed);
  VectorXd y(p);
  VectorXd sum = VectorXd::Zero(p), sumsq = VectorXd::Zero(p);
  MatrixXd sum2 = MatrixXd::Zero(p, p), sum2sq = MatrixXd::Zero(p, p);
  long accepted = 0, attempts = 0;
  const long probe = 2000000;
  while (accepted < n_draws) {
    ++attempts;
    draw(rng, y);
    bool inside = true;
    for (Eigen::Index k = 0; k < p && inside; ++k)
      inside = y[k] >= rect.lower[k] && y[k] <= rect.upper[k];
    if (inside) {
      ++accepted;
      sum += y;
      sumsq += y.cwiseProduct(y);
      MatrixXd op = y * y.transpose();
      sum2 += op;
      sum2sq += op.cwiseProduct(op);
    }
    if (attempts >= probe && static_cast<double>(accepted) / attempts < 1e-5)
      throw degenerate_region_error("mc oracle: acceptance rate below 1e-5");
  }
  double n = static_cast<double>(accepted);
  McMoments out;
  out.moments.mean = sum / n;
  out.moments.second = sum2 / n;
  out.mean_se = ((sumsq / n - out.moments.mean.cwiseProduct(out.moments.mean)).cwiseMax(0.0) / n)
                    .cwiseSqrt();
  out.second_se =
      ((sum2sq / n - out.moments.second.cwiseProduct(out.moments.second)).cwiseMax(0.0) / n)
          .cwiseSqrt();
  out.n_accepted = accepted;
  out.acceptance_rate = n / static_cast<double>(attempts);
  return out;
}

} // namespace

McMoments mc_truncated_oracle(const Rectangle& rect, const VectorXd& mu, const MatrixXd& sigma,
                              long n_draws, unsigned long seed) {
  validate(rect);
  Eigen::LLT<MatrixXd> llt(sigma);
  if (llt.info() != Eigen::Success)
    throw singularity_error("mc oracle: sigma is not positive definite");
  MatrixXd chol = llt.matrixL();
  const Eigen::Index p = mu.size();
  std::normal_distribution<double> gauss(0.0, 1.0);
  VectorXd z(p);
  return mc_accumulate(rect, n_draws, seed, [&](std::mt19937_64& rng, VectorXd& y) {
    for (Eigen::Index k = 0; k < p; ++k) z[k] = gauss(rng);
    y = mu + chol * z;
  });
}

McMoments mc_truncated_oracle(const Rectangle& rect, const EsnParams& params, long n_draws,
                              unsigned long seed) {
  validate(rect);
  EsnDerived d = derive(params);
  MatrixXd chol_gamma = MatrixXd(d.gamma.llt().matrixL());
  const Eigen::Index p = params.dim();
  // Latent representation: truncate the skewing normal below -tau_tilde by
  // inverse-CDF, then add Gaussian noise.
  double p_lo = norm_cdf(-d.tau_tilde);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  VectorXd z(p);
  return mc_accumulate(rect, n_draws, seed, [&](std::mt19937_64& rng, VectorXd& y) {
    double u = norm_quantile(p_lo + unif(rng) * (1.0 - p_lo));
    for (Eigen::Index k = 0; k < p; ++k) z[k] = gauss(rng);
    y = params.mu + d.delta * u + chol_gamma * z;
  });
}

} // namespace msnmix
