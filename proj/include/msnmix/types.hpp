#pragma once

#include <Eigen/Dense>

#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace msnmix {

using Eigen::MatrixXd;
using Eigen::VectorXd;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Numerical failure tied to a singular or non-PD matrix.
struct singularity_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A truncation region carrying (numerically) zero probability.
struct degenerate_region_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Bad user input (dimensions, bounds, file contents).
struct invalid_input_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Extended skew-normal parameter set.
// ---------------------------------------------------------------------------

/// ESN_p(mu, sigma, lambda, tau).  tau = 0 gives the skew-normal; lambda = 0
/// on top of that gives the plain normal.
struct EsnParams {
  VectorXd mu;
  MatrixXd sigma;
  VectorXd lambda;
  double tau = 0.0;

  Eigen::Index dim() const { return mu.size(); }
};

/// Quantities derived from EsnParams that every routine downstream needs:
/// the convolution parameterization (delta, gamma), the scaled skewness
/// phi = sigma^{-1/2} lambda, the shifted tau and its normal CDF, and the
/// symmetric square root of sigma.
struct EsnDerived {
  VectorXd delta;     // sigma^{1/2} lambda / sqrt(1 + lambda'lambda)
  MatrixXd gamma;     // sigma - delta delta'
  VectorXd varphi;    // sigma^{-1/2} lambda
  double tau_tilde;   // tau / sqrt(1 + lambda'lambda)
  double xi;          // Phi(tau_tilde), in (0, 1]
  double log_xi;      // log Phi(tau_tilde), finite even when xi underflows
  MatrixXd sqrt_sigma;
};

EsnDerived derive(const EsnParams& params);

/// Validates symmetry and positive definiteness of sigma and the dimension
/// agreement between mu, sigma and lambda.  Throws on violation.
void validate(const EsnParams& params);

// ---------------------------------------------------------------------------
// Rectangles (hyper-rectangular truncation / censoring regions).
// ---------------------------------------------------------------------------

struct Rectangle {
  VectorXd lower; // -inf allowed
  VectorXd upper; // +inf allowed

  Eigen::Index dim() const { return lower.size(); }

  bool unbounded() const {
    for (Eigen::Index k = 0; k < lower.size(); ++k)
      if (std::isfinite(lower[k]) || std::isfinite(upper[k])) return false;
    return true;
  }

  static Rectangle whole_space(Eigen::Index p) {
    return {VectorXd::Constant(p, -kInf), VectorXd::Constant(p, kInf)};
  }
};

void validate(const Rectangle& rect);

/// First moment and second raw moment of a truncated distribution.
struct MomentPair {
  VectorXd mean;   // E[W]
  MatrixXd second; // E[W W']

  MatrixXd covariance() const { return second - mean * mean.transpose(); }
};

// ---------------------------------------------------------------------------
// Censored / missing observations.
// ---------------------------------------------------------------------------

/// One observation row: values where indicator = 0, interval bounds where
/// indicator = 1.  A missing entry is indicator = 1 with infinite bounds.
struct CensoredSample {
  VectorXd values;
  std::vector<int> indicators; // 0 observed, 1 censored/missing
  VectorXd lower;
  VectorXd upper;

  Eigen::Index dim() const { return values.size(); }

  bool is_censored(Eigen::Index k) const { return indicators[static_cast<size_t>(k)] != 0; }
  bool is_missing(Eigen::Index k) const {
    return is_censored(k) && !std::isfinite(lower[k]) && !std::isfinite(upper[k]);
  }

  std::vector<Eigen::Index> observed_idx() const;
  std::vector<Eigen::Index> censored_idx() const;

  static CensoredSample fully_observed(const VectorXd& y);
};

void validate(const CensoredSample& sample);

// ---------------------------------------------------------------------------
// Mixture model and fit results.
// ---------------------------------------------------------------------------

struct MixtureModel {
  VectorXd weights;                 // pi, sums to 1
  std::vector<EsnParams> components; // tau fixed at 0 for model components
  bool shared_gamma = false;

  int n_components() const { return static_cast<int>(components.size()); }
  Eigen::Index dim() const { return components.empty() ? 0 : components.front().dim(); }
};

void validate(const MixtureModel& model);

struct Criteria {
  double aic = 0.0;
  double bic = 0.0;
  double edc = 0.0;
};

struct FitResult {
  MixtureModel model;
  std::vector<double> loglik_trace;
  MatrixXd posterior;    // n x G
  Criteria criteria;
  VectorXd std_errors;   // empty when not computed
  std::vector<std::string> param_names;
  int n_params = 0;
  bool converged = false;
  int iterations = 0;

  double loglik() const { return loglik_trace.empty() ? -kInf : loglik_trace.back(); }

  /// Largest monotonicity violation in the trace, as a fraction of |loglik|.
  double max_trace_violation() const;
};

struct FitConfig {
  double tol = 1e-6;
  int max_iter = 500;
  bool fix_lambda_zero = false; // normal family
  bool shared_gamma = false;
  int n_starts = 1;
  unsigned long seed = 20240101u;
  bool compute_std_errors = true;
  int n_threads = 0; // 0 = hardware default
};

} // namespace msnmix
