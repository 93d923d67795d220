#pragma once

#include "msnmix/esn.hpp"
#include "msnmix/types.hpp"

namespace msnmix {

/// Conditional expectations for one observation, given current parameters:
/// the latent decomposition Y = mu + delta T + noise with half-normal T
/// makes the complete-data update a function of these five statistics plus
/// the auxiliary mean y0_hat under the gamma-parameterized truncation.
struct EStepStats {
  VectorXd y_hat;
  MatrixXd y2_hat;
  double t_hat = 0.0;
  double t2_hat = 0.0;
  VectorXd ty_hat;
  VectorXd y0_hat;
};

/// Per-component quantities shared by every sample in an E-step sweep.
struct PreparedComponent {
  EsnParams params; // tau = 0 at the model level
  EsnDerived d;
  MatrixXd gamma_inv;
  double m2 = 0.0; // M^2 = (1 + delta' gamma^{-1} delta)^{-1}
  double m1 = 0.0; // M
};

PreparedComponent prepare_component(const EsnParams& params);

/// Log-likelihood contribution of one sample: the censored-block interval
/// mass given the observed block, times the observed-block skew-normal
/// density.
double msnc_sample_loglik(const CensoredSample& sample, const PreparedComponent& comp);

/// Observed-data log-likelihood of the whole sample.
double msnc_loglik(const std::vector<CensoredSample>& data, const EsnParams& params);

/// E-step, case by case.  e_step dispatches on the censoring pattern;
/// use_split selects the reduced missing/censored computation.
EStepStats e_step_observed(const CensoredSample& sample, const PreparedComponent& comp);
EStepStats e_step_censored(const CensoredSample& sample, const PreparedComponent& comp);
EStepStats e_step_mixed(const CensoredSample& sample, const PreparedComponent& comp);

/// Same values as e_step_mixed when missing coordinates are present, but
/// truncated-moment work runs only over the truly censored block; missing
/// coordinates are recovered from the conditional regression.
EStepStats split_missing_censored(const CensoredSample& sample, const PreparedComponent& comp);

EStepStats e_step(const CensoredSample& sample, const PreparedComponent& comp,
                  bool use_split = true);

/// Closed-form maximizer of the expected complete-data log-likelihood.
struct MStepUpdate {
  VectorXd mu;
  VectorXd delta;
  MatrixXd gamma;
};
MStepUpdate m_step(const std::vector<EStepStats>& stats, bool fix_delta_zero = false);

/// Back-transform: sigma = gamma + delta delta', lambda from the scaled
/// delta.  Throws when delta' sigma^{-1} delta reaches 1.
EsnParams recover_sn_params(const VectorXd& mu, const VectorXd& delta, const MatrixXd& gamma);

/// Convolution parameterization for a given (sigma, lambda).
void sn_to_convolution(const EsnParams& params, VectorXd& delta, MatrixXd& gamma);

/// Full single-component fit.
FitResult fit_msnc(const std::vector<CensoredSample>& data, const EsnParams& init,
                   const FitConfig& config);

/// Worst relative log-likelihood drop seen in any EM trace since the last
/// reset (updated by every fit in the process).
double em_worst_trace_violation();
void reset_em_trace_stats();
void record_em_trace(const FitResult& result);

} // namespace msnmix
