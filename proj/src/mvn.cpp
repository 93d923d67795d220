#include "msnmix/mvn.hpp"

#include "msnmix/linalg.hpp"
#include "msnmix/special.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <random>
#include <vector>

namespace msnmix {

double mvn_logpdf(const VectorXd& y, const VectorXd& mu, const MatrixXd& sigma) {
  const Eigen::Index p = mu.size();
  if (y.size() != p || sigma.rows() != p || sigma.cols() != p)
    throw invalid_input_error("mvn_pdf: dimension mismatch");
  Eigen::LLT<MatrixXd> llt(sigma);
  if (llt.info() != Eigen::Success)
    throw singularity_error("mvn_pdf: sigma is singular");
  VectorXd z = llt.matrixL().solve(y - mu);
  double logdet = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  return -0.5 * (static_cast<double>(p) * std::log(2.0 * M_PI) + logdet + z.squaredNorm());
}

double mvn_pdf(const VectorXd& y, const VectorXd& mu, const MatrixXd& sigma) {
  return std::exp(mvn_logpdf(y, mu, sigma));
}

double norm_interval(double a, double b) {
  if (a > b) return 0.0;
  if (a >= 0.0) // both limits in the upper tail: difference of upper tails
    return 0.5 * (std::erfc(a * 0.70710678118654752440) - std::erfc(b * 0.70710678118654752440));
  if (b <= 0.0)
    return 0.5 * (std::erfc(-b * 0.70710678118654752440) - std::erfc(-a * 0.70710678118654752440));
  return norm_cdf(b) - norm_cdf(a);
}

// ---------------------------------------------------------------------------
// Bivariate normal upper-orthant probability (Drezner-Wesolowsky with
// Gauss-Legendre panels, hybrid form for |rho| near 1).
// ---------------------------------------------------------------------------

namespace {

const double kGlw[3][10] = {
    {0.1713244923791705, 0.3607615730481384, 0.4679139345726904, 0, 0, 0, 0, 0, 0, 0},
    {0.04717533638651177, 0.1069393259953183, 0.1600783285433464, 0.2031674267230659,
     0.2334925365383547, 0.2491470458134029, 0, 0, 0, 0},
    {0.01761400713915212, 0.04060142980038694, 0.06267204833410906, 0.08327674157670475,
     0.1019301198172404, 0.1181945319615184, 0.1316886384491766, 0.1420961093183821,
     0.1491729864726037, 0.1527533871307259}};

const double kGlx[3][10] = {
    {-0.9324695142031522, -0.6612093864662647, -0.2386191860831970, 0, 0, 0, 0, 0, 0, 0},
    {-0.9815606342467191, -0.9041172563704750, -0.7699026741943050, -0.5873179542866171,
     -0.3678314989981802, -0.1252334085114692, 0, 0, 0, 0},
    {-0.9931285991850949, -0.9639719272779138, -0.9122344282513259, -0.8391169718222188,
     -0.7463319064601508, -0.6360536807265150, -0.5108670019508271, -0.3737060887154196,
     -0.2277858511416451, -0.07652652113349733}};

} // namespace

double bvn_upper(double h, double k, double rho) {
  if (std::isinf(h) || std::isinf(k)) {
    if (h == kInf || k == kInf) return 0.0;
    if (h == -kInf && k == -kInf) return 1.0;
    return h == -kInf ? norm_cdf(-k) : norm_cdf(-h);
  }

  int ng, lg;
  double ar = std::abs(rho);
  if (ar < 0.3) {
    ng = 0;
    lg = 3;
  } else if (ar < 0.75) {
    ng = 1;
    lg = 6;
  } else {
    ng = 2;
    lg = 10;
  }

  double hk = h * k;
  double bvn = 0.0;
  if (ar < 0.925) {
    double hs = 0.5 * (h * h + k * k);
    double asr = std::asin(rho);
    for (int i = 0; i < lg; ++i) {
      for (int is = -1; is <= 1; is += 2) {
        double sn = std::sin(asr * (is * kGlx[ng][i] + 1.0) * 0.5);
        bvn += kGlw[ng][i] * std::exp((sn * hk - hs) / (1.0 - sn * sn));
      }
    }
    bvn = bvn * asr / (4.0 * M_PI) + norm_cdf(-h) * norm_cdf(-k);
  } else {
    if (rho < 0.0) {
      k = -k;
      hk = -hk;
    }
    if (ar < 1.0) {
      double as = (1.0 - rho) * (1.0 + rho);
      double a = std::sqrt(as);
      double bs = (h - k) * (h - k);
      double c = (4.0 - hk) / 8.0;
      double d = (12.0 - hk) / 16.0;
      double asr = -0.5 * (bs / as + hk);
      if (asr > -100.0)
        bvn = a * std::exp(asr) * (1.0 - c * (bs - as) * (1.0 - d * bs / 5.0) / 3.0 +
                                   c * d * as * as / 5.0);
      if (-hk < 100.0) {
        double b = std::sqrt(bs);
        double sp = kSqrt2Pi * norm_cdf(-b / a);
        bvn -= std::exp(-0.5 * hk) * sp * b * (1.0 - c * bs * (1.0 - d * bs / 5.0) / 3.0);
      }
      a *= 0.5;
      for (int i = 0; i < lg; ++i) {
        for (int is = -1; is <= 1; is += 2) {
          double x = a * (is * kGlx[ng][i] + 1.0);
          double xs = x * x;
          double rs = std::sqrt(1.0 - xs);
          double asr2 = -0.5 * (bs / xs + hk);
          if (asr2 > -100.0) {
            double sp = 1.0 + c * xs * (1.0 + d * xs);
            double ep = std::exp(-hk * (1.0 - rs) / (2.0 * (1.0 + rs))) / rs;
            bvn += a * kGlw[ng][i] * std::exp(asr2) * (ep - sp);
          }
        }
      }
      bvn = -bvn / (2.0 * M_PI);
    }
    if (rho > 0.0) {
      bvn += norm_cdf(-std::max(h, k));
    } else {
      bvn = -bvn;
      if (k > h) bvn += norm_cdf(k) - norm_cdf(h);
    }
  }
  return std::clamp(bvn, 0.0, 1.0);
}

namespace {

// P(a1<X<b1, a2<Y<b2) for standardized margins with correlation rho.
// Axes are reflected so each interval points to the positive side first;
// otherwise the inclusion-exclusion cancels catastrophically for far-tail
// rectangles (terms near 1 with a tiny difference).
double bvn_rect(double a1, double b1, double a2, double b2, double rho) {
  bool x_free = a1 == -kInf && b1 == kInf;
  bool y_free = a2 == -kInf && b2 == kInf;
  if (x_free && y_free) return 1.0;
  if (x_free) return norm_interval(a2, b2);
  if (y_free) return norm_interval(a1, b1);

  bool flip_x = b1 == kInf ? false : (a1 == -kInf ? true : a1 + b1 < 0.0);
  bool flip_y = b2 == kInf ? false : (a2 == -kInf ? true : a2 + b2 < 0.0);
  if (flip_x) {
    std::swap(a1, b1);
    a1 = -a1;
    b1 = -b1;
    rho = -rho;
  }
  if (flip_y) {
    std::swap(a2, b2);
    a2 = -a2;
    b2 = -b2;
    rho = -rho;
  }
  double p = bvn_upper(a1, a2, rho) - bvn_upper(b1, a2, rho) - bvn_upper(a1, b2, rho) +
             bvn_upper(b1, b2, rho);
  return std::clamp(p, 0.0, 1.0);
}

// Trivariate rectangle by conditioning on one coordinate: a single 1-d
// integral (in probability space) of bivariate rectangle masses.  Composite
// Gauss-Legendre panels put this near machine accuracy at a few hundred
// bivariate evaluations.
double trivariate_rect(const VectorXd& a, const VectorXd& b, const MatrixXd& sigma,
                       double abs_tol) {
  // Condition on the coordinate with the smallest interval mass.
  int c = 0;
  double best = 2.0;
  for (int k = 0; k < 3; ++k) {
    double s = std::sqrt(sigma(k, k));
    double mass = norm_interval(std::isinf(a[k]) ? -kInf : a[k] / s,
                                std::isinf(b[k]) ? kInf : b[k] / s);
    if (mass < best) {
      best = mass;
      c = k;
    }
  }
  int r1 = (c + 1) % 3, r2 = (c + 2) % 3;
  double s0 = std::sqrt(sigma(c, c));
  double u_lo = std::isinf(a[c]) ? 0.0 : norm_cdf(a[c] / s0);
  double u_hi = std::isinf(b[c]) ? 1.0 : norm_cdf(b[c] / s0);
  if (u_hi <= u_lo) return 0.0;

  double g1 = sigma(r1, c) / sigma(c, c);
  double g2 = sigma(r2, c) / sigma(c, c);
  double v11 = sigma(r1, r1) - g1 * sigma(r1, c);
  double v22 = sigma(r2, r2) - g2 * sigma(r2, c);
  double v12 = sigma(r1, r2) - g1 * sigma(r2, c);
  double s1 = std::sqrt(std::max(v11, 1e-300));
  double s2 = std::sqrt(std::max(v22, 1e-300));
  double rho = std::clamp(v12 / (s1 * s2), -1.0, 1.0);

  // Integrate in x-space over a clipped range; the phi-damped integrand is
  // analytic there, so composite Gauss-Legendre converges fast.
  double x_lo = std::isinf(a[c]) ? -9.0 * s0 : a[c];
  double x_hi = std::isinf(b[c]) ? 9.0 * s0 : b[c];
  x_lo = std::max(x_lo, -9.0 * s0);
  x_hi = std::min(x_hi, 9.0 * s0);
  if (x_hi <= x_lo) return 0.0;
  (void)u_lo;
  (void)u_hi;

  const int panels = abs_tol < 1e-8 ? 24 : 16;
  double h = (x_hi - x_lo) / panels;
  double total = 0.0;
  for (int s = 0; s < panels; ++s) {
    double mid = x_lo + (s + 0.5) * h;
    for (int i = 0; i < 10; ++i) {
      for (int sign = -1; sign <= 1; sign += 2) {
        double x = mid + sign * 0.5 * h * (-kGlx[2][i]);
        double m1 = g1 * x, m2 = g2 * x;
        double lo1 = std::isinf(a[r1]) ? -kInf : (a[r1] - m1) / s1;
        double hi1 = std::isinf(b[r1]) ? kInf : (b[r1] - m1) / s1;
        double lo2 = std::isinf(a[r2]) ? -kInf : (a[r2] - m2) / s2;
        double hi2 = std::isinf(b[r2]) ? kInf : (b[r2] - m2) / s2;
        total += kGlw[2][i] * norm_pdf(x / s0) / s0 * bvn_rect(lo1, hi1, lo2, hi2, rho);
      }
    }
  }
  return std::clamp(total * 0.5 * h, 0.0, 1.0);
}

// Four dimensions at tight tolerance: condition on one coordinate and
// integrate trivariate masses.  Used only when the lattice rule's error
// estimate would not certify the requested accuracy.
double quadrivariate_rect(const VectorXd& a, const VectorXd& b, const MatrixXd& sigma,
                          double abs_tol) {
  int c = 0;
  double best = 2.0;
  for (int k = 0; k < 4; ++k) {
    double s = std::sqrt(sigma(k, k));
    double mass = norm_interval(std::isinf(a[k]) ? -kInf : a[k] / s,
                                std::isinf(b[k]) ? kInf : b[k] / s);
    if (mass < best) {
      best = mass;
      c = k;
    }
  }
  std::vector<Eigen::Index> rest;
  for (Eigen::Index k = 0; k < 4; ++k)
    if (k != c) rest.push_back(k);
  double s0 = std::sqrt(sigma(c, c));
  double u_lo = std::isinf(a[c]) ? 0.0 : norm_cdf(a[c] / s0);
  double u_hi = std::isinf(b[c]) ? 1.0 : norm_cdf(b[c] / s0);
  if (u_hi <= u_lo) return 0.0;

  VectorXd g(3);
  for (int i = 0; i < 3; ++i) g[i] = sigma(rest[static_cast<size_t>(i)], c) / sigma(c, c);
  MatrixXd cov(3, 3);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      cov(i, j) = sigma(rest[static_cast<size_t>(i)], rest[static_cast<size_t>(j)]) -
                  g[i] * sigma(rest[static_cast<size_t>(j)], c);
  cov = 0.5 * (cov + cov.transpose());

  double x_lo = std::isinf(a[c]) ? -9.0 * s0 : std::max(a[c], -9.0 * s0);
  double x_hi = std::isinf(b[c]) ? 9.0 * s0 : std::min(b[c], 9.0 * s0);
  if (x_hi <= x_lo) return 0.0;
  (void)u_lo;
  (void)u_hi;

  const int panels = 16;
  double h = (x_hi - x_lo) / panels;
  double total = 0.0;
  VectorXd lo(3), hi(3);
  for (int s = 0; s < panels; ++s) {
    double mid = x_lo + (s + 0.5) * h;
    for (int i = 0; i < 10; ++i) {
      for (int sign = -1; sign <= 1; sign += 2) {
        double x = mid + sign * 0.5 * h * (-kGlx[2][i]);
        for (int k = 0; k < 3; ++k) {
          lo[k] = std::isinf(a[rest[static_cast<size_t>(k)]])
                      ? -kInf
                      : a[rest[static_cast<size_t>(k)]] - g[k] * x;
          hi[k] = std::isinf(b[rest[static_cast<size_t>(k)]])
                      ? kInf
                      : b[rest[static_cast<size_t>(k)]] - g[k] * x;
        }
        total += kGlw[2][i] * norm_pdf(x / s0) / s0 * trivariate_rect(lo, hi, cov, abs_tol * 0.25);
      }
    }
  }
  return std::clamp(total * 0.5 * h, 0.0, 1.0);
}

// ---------------------------------------------------------------------------
// Separation-of-variables transform for p >= 4 (Genz), with the
// Gibson-Glasbey-Elston variable ordering built into the Cholesky pass.
// ---------------------------------------------------------------------------

struct SovProblem {
  MatrixXd chol;     // lower triangular
  VectorXd a, b;     // reordered centered limits
  Eigen::Index p = 0;
};

SovProblem sov_prepare(VectorXd a, VectorXd b, MatrixXd sigma) {
  const Eigen::Index p = a.size();
  SovProblem prob;
  prob.p = p;
  MatrixXd c = MatrixXd::Zero(p, p);
  VectorXd y = VectorXd::Zero(p);

  for (Eigen::Index i = 0; i < p; ++i) {
    // Pick the remaining variable with the smallest conditional interval mass.
    Eigen::Index best = i;
    double best_mass = 2.0;
    for (Eigen::Index j = i; j < p; ++j) {
      double s2 = sigma(j, j) - c.row(j).head(i).squaredNorm();
      double s = std::sqrt(std::max(s2, 1e-300));
      double mu_c = c.row(j).head(i).dot(y.head(i));
      double at = std::isinf(a[j]) ? -kInf : (a[j] - mu_c) / s;
      double bt = std::isinf(b[j]) ? kInf : (b[j] - mu_c) / s;
      double mass = norm_interval(at, bt);
      if (mass < best_mass) {
        best_mass = mass;
        best = j;
      }
    }
    if (best != i) {
      std::swap(a[i], a[best]);
      std::swap(b[i], b[best]);
      sigma.row(i).swap(sigma.row(best));
      sigma.col(i).swap(sigma.col(best));
      c.row(i).swap(c.row(best));
    }

    double s2 = sigma(i, i) - c.row(i).head(i).squaredNorm();
    double cii = std::sqrt(std::max(s2, 1e-300));
    c(i, i) = cii;
    for (Eigen::Index j = i + 1; j < p; ++j)
      c(j, i) = (sigma(j, i) - c.row(j).head(i).dot(c.row(i).head(i))) / cii;

    // Conditional expectation of this coordinate, used to order the rest.
    double mu_c = c.row(i).head(i).dot(y.head(i));
    double at = std::isinf(a[i]) ? -kInf : (a[i] - mu_c) / cii;
    double bt = std::isinf(b[i]) ? kInf : (b[i] - mu_c) / cii;
    double mass = std::max(norm_interval(at, bt), 1e-300);
    double pa = std::isinf(at) ? 0.0 : norm_pdf(at);
    double pb = std::isinf(bt) ? 0.0 : norm_pdf(bt);
    y[i] = (pa - pb) / mass;
  }
  prob.chol = c;
  prob.a = a;
  prob.b = b;
  return prob;
}

// Integrand over the unit cube [0,1]^{p-1}.
double sov_integrand(const SovProblem& prob, const double* w) {
  const Eigen::Index p = prob.p;
  double yv[16];
  double cii = prob.chol(0, 0);
  double at = std::isinf(prob.a[0]) ? -kInf : prob.a[0] / cii;
  double bt = std::isinf(prob.b[0]) ? kInf : prob.b[0] / cii;
  double d = std::isinf(at) ? 0.0 : norm_cdf(at);
  double width = norm_interval(at, bt); // stable difference in far tails
  double f = width;
  for (Eigen::Index i = 1; i < p; ++i) {
    double u = d + w[i - 1] * width;
    u = std::clamp(u, 1e-16, 1.0 - 1e-16);
    yv[i - 1] = norm_quantile(u);
    double mu_c = 0.0;
    for (Eigen::Index m = 0; m < i; ++m) mu_c += prob.chol(i, m) * yv[m];
    cii = prob.chol(i, i);
    at = std::isinf(prob.a[i]) ? -kInf : (prob.a[i] - mu_c) / cii;
    bt = std::isinf(prob.b[i]) ? kInf : (prob.b[i] - mu_c) / cii;
    d = std::isinf(at) ? 0.0 : norm_cdf(at);
    width = norm_interval(at, bt);
    f *= width;
    if (f <= 0.0) return 0.0;
  }
  return f;
}

// ---------------------------------------------------------------------------
// Randomized rank-1 lattice rules (Korobov generators found by a one-time
// seeded search per (sample size, dimension), cached).  The baker transform
// plus random shifts gives near-O(n^-2) convergence on these smooth
// integrands and an honest spread-based error estimate.
// ---------------------------------------------------------------------------

const long kLatticeSizes[5] = {521, 2053, 8191, 32749, 131071};

// Worst-case quality of a Korobov generator in the order-2 cosine space.
double korobov_merit(long n, long a, int dim) {
  std::vector<long> z(dim);
  z[0] = 1 % n;
  for (int j = 1; j < dim; ++j) z[j] = (z[j - 1] * a) % n;
  double total = 0.0;
  for (long k = 0; k < n; ++k) {
    double prod = 1.0;
    for (int j = 0; j < dim; ++j) {
      double x = static_cast<double>((k * z[j]) % n) / static_cast<double>(n);
      prod *= 1.0 + 2.0 * M_PI * M_PI * (x * x - x + 1.0 / 6.0);
    }
    total += prod;
  }
  return total / static_cast<double>(n) - 1.0;
}

const std::vector<long>& lattice_generator(long n, int dim) {
  struct Key {
    long n;
    int dim;
    bool operator<(const Key& o) const { return n != o.n ? n < o.n : dim < o.dim; }
  };
  static std::map<Key, std::vector<long>> cache;
  static std::mutex mutex;
  std::lock_guard<std::mutex> lock(mutex);
  auto it = cache.find({n, dim});
  if (it != cache.end()) return it->second;

  std::mt19937_64 rng(0x6b0ULL + static_cast<unsigned long long>(n) * 131 + dim);
  long best_a = 1;
  double best = std::numeric_limits<double>::infinity();
  const int candidates = 48;
  for (int c = 0; c < candidates; ++c) {
    long a = 2 + static_cast<long>(rng() % static_cast<unsigned long long>(n - 3));
    double m = korobov_merit(n, a, dim);
    if (m < best) {
      best = m;
      best_a = a;
    }
  }
  std::vector<long> z(dim);
  z[0] = 1;
  for (int j = 1; j < dim; ++j) z[j] = (z[j - 1] * best_a) % n;
  return cache.emplace(Key{n, dim}, std::move(z)).first->second;
}

double sov_qmc(const SovProblem& prob, double abs_tol, double* err_out) {
  const int dim = static_cast<int>(prob.p) - 1;
  const int n_shift = 8;
  // Deterministic shifts so identical inputs integrate identically.
  std::mt19937_64 rng(0x5eedf00dULL + static_cast<unsigned long long>(dim));
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<std::vector<double>> shifts(n_shift, std::vector<double>(dim));
  for (auto& s : shifts)
    for (double& v : s) v = unif(rng);

  double est = 0.0, err = 1.0;
  double w[16];
  for (long n : kLatticeSizes) {
    const std::vector<long>& z = lattice_generator(n, dim);
    double means[n_shift];
    for (int s = 0; s < n_shift; ++s) {
      double acc = 0.0;
      for (long k = 0; k < n; ++k) {
        for (int j = 0; j < dim; ++j) {
          double v = static_cast<double>((k * z[j]) % n) / static_cast<double>(n) + shifts[s][j];
          v -= std::floor(v);
          w[j] = std::abs(2.0 * v - 1.0); // baker transform
        }
        acc += sov_integrand(prob, w);
      }
      means[s] = acc / static_cast<double>(n);
    }
    double m = 0.0;
    for (double v : means) m += v;
    m /= n_shift;
    double var = 0.0;
    for (double v : means) var += (v - m) * (v - m);
    var /= (n_shift - 1.0);
    est = m;
    err = 3.0 * std::sqrt(var / n_shift);
    if (err < abs_tol) break;
  }
  if (err_out) *err_out = err;
  return std::clamp(est, 0.0, 1.0);
}

} // namespace

double mvn_rect_prob_err(const Rectangle& rect, const VectorXd& mu, const MatrixXd& sigma,
                         double abs_tol, double* err_out) {
  validate(rect);
  const Eigen::Index p = rect.dim();
  if (p == 0) throw invalid_input_error("mvn_rect_prob: empty rectangle");
  if (mu.size() != p || sigma.rows() != p || sigma.cols() != p)
    throw invalid_input_error("mvn_rect_prob: dimension mismatch");
  if (err_out) *err_out = 0.0;

  // Empty intervals carry zero mass.
  for (Eigen::Index k = 0; k < p; ++k) {
    if (rect.upper[k] == -kInf || rect.lower[k] == kInf) return 0.0;
    if (rect.lower[k] == rect.upper[k]) return 0.0;
  }

  // Center and drop coordinates that are not truncated at all; their
  // marginal contributes a factor of exactly 1.
  std::vector<Eigen::Index> active;
  for (Eigen::Index k = 0; k < p; ++k)
    if (std::isfinite(rect.lower[k]) || std::isfinite(rect.upper[k])) active.push_back(k);
  if (active.empty()) return 1.0;

  VectorXd a(active.size()), b(active.size());
  for (size_t i = 0; i < active.size(); ++i) {
    a[static_cast<Eigen::Index>(i)] = rect.lower[active[i]] - mu[active[i]];
    b[static_cast<Eigen::Index>(i)] = rect.upper[active[i]] - mu[active[i]];
  }
  MatrixXd s = submatrix(sigma, active, active);
  const Eigen::Index q = static_cast<Eigen::Index>(active.size());

  if (q == 1) {
    double sd = std::sqrt(s(0, 0));
    return norm_interval(a[0] / sd, b[0] / sd);
  }
  if (q == 2) {
    double s1 = std::sqrt(s(0, 0)), s2 = std::sqrt(s(1, 1));
    double rho = s(0, 1) / (s1 * s2);
    rho = std::clamp(rho, -1.0, 1.0);
    return bvn_rect(a[0] / s1, b[0] / s1, a[1] / s2, b[1] / s2, rho);
  }
  if (q == 3) return trivariate_rect(a, b, s, abs_tol);
  if (q == 4 && abs_tol < 9e-7) return quadrivariate_rect(a, b, s, abs_tol);
  if (q > 15)
    throw invalid_input_error("mvn_rect_prob: dimension above supported limit (15)");
  SovProblem prob = sov_prepare(a, b, s);
  return sov_qmc(prob, abs_tol, err_out);
}

double mvn_rect_prob(const Rectangle& rect, const VectorXd& mu, const MatrixXd& sigma,
                     double abs_tol) {
  return mvn_rect_prob_err(rect, mu, sigma, abs_tol, nullptr);
}

} // namespace msnmix
