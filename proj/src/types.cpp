#include "msnmix/types.hpp"

#include "msnmix/linalg.hpp"
#include "msnmix/special.hpp"

#include <cmath>

namespace msnmix {

void validate(const EsnParams& params) {
  const Eigen::Index p = params.dim();
  if (p == 0) throw invalid_input_error("EsnParams: empty location vector");
  if (params.sigma.rows() != p || params.sigma.cols() != p)
    throw invalid_input_error("EsnParams: sigma dimension mismatch");
  if (params.lambda.size() != p)
    throw invalid_input_error("EsnParams: lambda dimension mismatch");
  if (!is_symmetric(params.sigma))
    throw singularity_error("EsnParams: sigma is not symmetric");
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(params.sigma, Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() <= 0.0)
    throw singularity_error("EsnParams: sigma is not positive definite");
}

EsnDerived derive(const EsnParams& params) {
  EsnDerived d;
  d.sqrt_sigma = symmetric_sqrt(params.sigma);
  const double lam2 = params.lambda.squaredNorm();
  const double scale = 1.0 / std::sqrt(1.0 + lam2);
  d.delta = d.sqrt_sigma * params.lambda * scale;
  d.gamma = params.sigma - d.delta * d.delta.transpose();
  d.gamma = 0.5 * (d.gamma + d.gamma.transpose());
  d.varphi = d.sqrt_sigma.llt().solve(params.lambda);
  d.tau_tilde = params.tau * scale;
  d.xi = norm_cdf(d.tau_tilde);
  d.log_xi = norm_logcdf(d.tau_tilde);
  return d;
}

void validate(const Rectangle& rect) {
  if (rect.lower.size() != rect.upper.size())
    throw invalid_input_error("Rectangle: bound length mismatch");
  for (Eigen::Index k = 0; k < rect.lower.size(); ++k) {
    if (std::isnan(rect.lower[k]) || std::isnan(rect.upper[k]))
      throw invalid_input_error("Rectangle: NaN bound");
    if (rect.lower[k] > rect.upper[k])
      throw invalid_input_error("Rectangle: lower > upper in coordinate " + std::to_string(k));
  }
}

std::vector<Eigen::Index> CensoredSample::observed_idx() const {
  std::vector<Eigen::Index> idx;
  for (Eigen::Index k = 0; k < dim(); ++k)
    if (!is_censored(k)) idx.push_back(k);
  return idx;
}

std::vector<Eigen::Index> CensoredSample::censored_idx() const {
  std::vector<Eigen::Index> idx;
  for (Eigen::Index k = 0; k < dim(); ++k)
    if (is_censored(k)) idx.push_back(k);
  return idx;
}

CensoredSample CensoredSample::fully_observed(const VectorXd& y) {
  CensoredSample s;
  s.values = y;
  s.indicators.assign(static_cast<size_t>(y.size()), 0);
  s.lower = VectorXd::Constant(y.size(), -kInf);
  s.upper = VectorXd::Constant(y.size(), kInf);
  return s;
}

void validate(const CensoredSample& sample) {
  const Eigen::Index p = sample.dim();
  if (static_cast<Eigen::Index>(sample.indicators.size()) != p ||
      sample.lower.size() != p || sample.upper.size() != p)
    throw invalid_input_error("CensoredSample: field length mismatch");
  for (Eigen::Index k = 0; k < p; ++k) {
    int c = sample.indicators[static_cast<size_t>(k)];
    if (c != 0 && c != 1)
      throw invalid_input_error("CensoredSample: indicator must be 0 or 1");
    if (c == 1 && sample.lower[k] > sample.upper[k])
      throw invalid_input_error("CensoredSample: lower > upper at coordinate " +
                                std::to_string(k));
    if (c == 0 && !std::isfinite(sample.values[k]))
      throw invalid_input_error("CensoredSample: non-finite observed value at coordinate " +
                                std::to_string(k));
  }
}

void validate(const MixtureModel& model) {
  if (model.components.empty()) throw invalid_input_error("MixtureModel: no components");
  if (model.weights.size() != model.n_components())
    throw invalid_input_error("MixtureModel: weight count mismatch");
  if (std::abs(model.weights.sum() - 1.0) > 1e-12)
    throw invalid_input_error("MixtureModel: weights do not sum to 1");
  if (model.weights.minCoeff() <= 0.0)
    throw invalid_input_error("MixtureModel: non-positive weight");
  const Eigen::Index p = model.dim();
  for (const auto& comp : model.components) {
    if (comp.dim() != p) throw invalid_input_error("MixtureModel: mixed dimensions");
    validate(comp);
  }
}

double FitResult::max_trace_violation() const {
  double worst = 0.0;
  for (size_t k = 1; k < loglik_trace.size(); ++k) {
    double drop = loglik_trace[k - 1] - loglik_trace[k];
    if (drop > 0.0) worst = std::max(worst, drop / std::max(1.0, std::abs(loglik_trace[k - 1])));
  }
  return worst;
}

} // namespace msnmix
