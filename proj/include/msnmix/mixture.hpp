#pragma once

#include "msnmix/censored_em.hpp"
#include "msnmix/types.hpp"

namespace msnmix {

/// Posterior component-membership probabilities, computed in log space.
/// Throws invalid_input_error naming the row when every component assigns
/// zero likelihood to it.
MatrixXd responsibilities(const std::vector<CensoredSample>& data, const MixtureModel& model);

/// Observed-data log-likelihood of the mixture.
double mixture_loglik(const std::vector<CensoredSample>& data, const MixtureModel& model);

/// Everything the M-step and the score vectors need: responsibilities plus
/// the per-(i,j) component-conditional statistics.  The weighted quantities
/// are z(i,j) * stats[i][j].{y_hat, y2_hat, ty_hat, t2_hat, t_hat}.
struct MixtureEStep {
  MatrixXd z; // n x G
  std::vector<std::vector<EStepStats>> stats;
  double loglik = 0.0;
};

MixtureEStep mixture_e_step(const std::vector<CensoredSample>& data, const MixtureModel& model,
                            int n_threads = 0, bool use_split = true);

/// Closed-form mixture M-step.  Throws when a component's effective sample
/// size falls to the dimension or below (component collapse).
MixtureModel mixture_m_step(const MixtureEStep& e, const MixtureModel& current,
                            bool fix_lambda_zero, bool shared_gamma);

/// K-means based starting values: censored entries are replaced by their
/// censoring levels (nearest finite bound, midpoint when doubly finite,
/// column mean when missing), then G clusters seed the weights, locations
/// and dispersions; skewness starts at the per-cluster coordinatewise
/// skewness sign.
MixtureModel init_kmeans(const std::vector<CensoredSample>& data, int g, unsigned long seed);

/// Full mixture fit.  When init is null, starting values come from
/// init_kmeans; multi-start behavior is controlled by config.n_starts.
FitResult fit_fm_msnc(const std::vector<CensoredSample>& data, int g, const FitConfig& config,
                      const MixtureModel* init = nullptr);

/// -2 loglik + rho c_n for c_n = 2 (AIC), ln n (BIC) and 0.2 sqrt(n) (EDC).
Criteria selection_criteria(double loglik, long n, int rho);

/// Free-parameter count for the reported criteria.
int count_parameters(int g, int p, bool shared_gamma, bool skew_family);

/// Per-observation score vectors at the given parameters, one row per
/// sample, ordered [mu_1..mu_G, vech(F_1)..vech(F_G), lambda_1..lambda_G,
/// pi_1..pi_{G-1}].
MatrixXd score_vectors(const std::vector<CensoredSample>& data, const MixtureModel& model,
                       std::vector<std::string>* names = nullptr);

/// Standard errors from the empirical information matrix (sum of score
/// outer products at the MLE).  Falls back to a pseudo-inverse with a
/// warning when the information matrix is ill conditioned.
VectorXd empirical_info_se(const std::vector<CensoredSample>& data, const MixtureModel& model,
                           std::vector<std::string>* names = nullptr);

} // namespace msnmix
