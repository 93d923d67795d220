#include "msnmix/censored_em.hpp"

#include "msnmix/linalg.hpp"
#include "msnmix/mvn.hpp"
#include "msnmix/special.hpp"
#include "msnmix/truncated.hpp"

#include <atomic>
#include <cmath>

namespace msnmix {

PreparedComponent prepare_component(const EsnParams& params) {
  PreparedComponent comp;
  comp.params = params;
  comp.d = derive(params);
  comp.gamma_inv = spd_inverse(comp.d.gamma);
  comp.m2 = 1.0 / (1.0 + comp.d.delta.dot(comp.gamma_inv * comp.d.delta));
  comp.m1 = std::sqrt(comp.m2);
  return comp;
}

namespace {

Rectangle censored_rect(const CensoredSample& sample, const std::vector<Eigen::Index>& cens) {
  Rectangle r;
  r.lower = subvector(sample.lower, cens);
  r.upper = subvector(sample.upper, cens);
  return r;
}

// eta = phi1(tau; 0, 1 + lambda'lambda) / xi, written through the Mills
// ratio so extreme shifts stay finite.
double eta_constant(const EsnParams& params, const EsnDerived& d) {
  double lam2 = params.lambda.squaredNorm();
  return mills_ratio(d.tau_tilde) / std::sqrt(1.0 + lam2);
}

// Shared tail of every E-step case: fold (y_hat, y2_hat, y0_hat, gamma_ratio)
// into the latent-factor moments.
void assemble_t_stats(const PreparedComponent& comp, double gamma_ratio, EStepStats& s) {
  const VectorXd& mu = comp.params.mu;
  VectorXd gd = comp.gamma_inv * comp.d.delta; // gamma^{-1} delta
  VectorXd centered = s.y_hat - mu;
  double lin = gd.dot(centered);
  MatrixXd cmom = s.y2_hat - s.y_hat * mu.transpose() - mu * s.y_hat.transpose() +
                  mu * mu.transpose(); // E[(Y-mu)(Y-mu)'] given data
  s.t_hat = comp.m2 * lin + gamma_ratio * comp.m1;
  s.t2_hat = comp.m2 * comp.m2 * gd.dot(cmom * gd) + comp.m2 +
             gamma_ratio * comp.m2 * comp.m1 * gd.dot(s.y0_hat - mu);
  s.ty_hat = comp.m2 * (s.y2_hat - s.y_hat * mu.transpose()) * gd + gamma_ratio * comp.m1 * s.y0_hat;
}

} // namespace

EStepStats e_step_observed(const CensoredSample& sample, const PreparedComponent& comp) {
  EStepStats s;
  s.y_hat = sample.values;
  s.y2_hat = sample.values * sample.values.transpose();
  s.y0_hat = sample.values;
  double arg = comp.params.tau + comp.d.varphi.dot(sample.values - comp.params.mu);
  double gamma_ratio = mills_ratio(arg);
  assemble_t_stats(comp, gamma_ratio, s);
  return s;
}

EStepStats e_step_censored(const CensoredSample& sample, const PreparedComponent& comp) {
  Rectangle rect{sample.lower, sample.upper};
  MomentPair w = tesn_moments(rect, comp.params);

  double num = mvn_rect_prob(rect, comp.params.mu, comp.d.gamma);
  double den = esn_rect_prob(rect, comp.params);
  if (den < 1e-300)
    throw degenerate_region_error("e_step_censored: zero-probability rectangle");
  double gamma_ratio = eta_constant(comp.params, comp.d) * num / den;
  // The auxiliary mean only matters through gamma_ratio-weighted terms.
  VectorXd w0 =
      gamma_ratio > 1e-12 ? tn_mean(rect, comp.params.mu, comp.d.gamma) : w.mean;

  EStepStats s;
  s.y_hat = w.mean;
  s.y2_hat = w.second;
  s.y0_hat = w0;
  assemble_t_stats(comp, gamma_ratio, s);
  return s;
}

namespace {

// Conditional ESN law of the censored block given the observed block, plus
// the observed-block marginal (used by the likelihood).
struct PatternSplit {
  std::vector<Eigen::Index> obs, cens;
  EsnParams cond;       // ESN(mu^{co}, Sigma^{cc.o}, lambda^{co}, tau^{co})
  EsnDerived cond_d;
  EsnParams marginal;   // observed-block SN
};

PatternSplit split_pattern(const CensoredSample& sample, const PreparedComponent& comp) {
  PatternSplit out;
  out.obs = sample.observed_idx();
  out.cens = sample.censored_idx();
  if (out.obs.empty()) {
    // Nothing to condition on; the "conditional" is the full law.
    out.cond = comp.params;
    out.cond_d = comp.d;
    return out;
  }
  EsnSplit split = marginal_conditional_split(comp.params, out.obs, out.cens);
  out.marginal = split.marginal;
  out.cond = split.conditional.at(subvector(sample.values, out.obs));
  out.cond_d = derive(out.cond);
  return out;
}

// Builds the full-dimension stats from conditional censored-block moments.
EStepStats assemble_mixed(const CensoredSample& sample, const PreparedComponent& comp,
                          const PatternSplit& ps, const MomentPair& w, const VectorXd& w0,
                          double gamma_ratio) {
  const Eigen::Index p = sample.dim();
  VectorXd y_obs = subvector(sample.values, ps.obs);
  EStepStats s;
  s.y_hat = VectorXd(p);
  scatter(y_obs, ps.obs, s.y_hat);
  scatter(w.mean, ps.cens, s.y_hat);
  s.y0_hat = VectorXd(p);
  scatter(y_obs, ps.obs, s.y0_hat);
  scatter(w0, ps.cens, s.y0_hat);
  s.y2_hat = MatrixXd(p, p);
  for (size_t i = 0; i < ps.obs.size(); ++i)
    for (size_t j = 0; j < ps.obs.size(); ++j)
      s.y2_hat(ps.obs[i], ps.obs[j]) = y_obs[i] * y_obs[j];
  for (size_t i = 0; i < ps.obs.size(); ++i)
    for (size_t j = 0; j < ps.cens.size(); ++j) {
      double v = y_obs[i] * w.mean[j];
      s.y2_hat(ps.obs[i], ps.cens[j]) = v;
      s.y2_hat(ps.cens[j], ps.obs[i]) = v;
    }
  for (size_t i = 0; i < ps.cens.size(); ++i)
    for (size_t j = 0; j < ps.cens.size(); ++j)
      s.y2_hat(ps.cens[i], ps.cens[j]) = w.second(i, j);
  assemble_t_stats(comp, gamma_ratio, s);
  return s;
}

} // namespace

EStepStats e_step_mixed(const CensoredSample& sample, const PreparedComponent& comp) {
  if (sample.censored_idx().empty()) return e_step_observed(sample, comp);
  PatternSplit ps = split_pattern(sample, comp);
  Rectangle rect = censored_rect(sample, ps.cens);

  MomentPair w = tesn_moments(rect, ps.cond);
  VectorXd m_co = ps.cond.mu - ps.cond_d.tau_tilde * ps.cond_d.delta;

  double num = mvn_rect_prob(rect, m_co, ps.cond_d.gamma);
  double den = esn_rect_prob(rect, ps.cond);
  if (den < 1e-300)
    throw degenerate_region_error("e_step_mixed: zero-probability conditional rectangle");
  double gamma_ratio = eta_constant(ps.cond, ps.cond_d) * num / den;
  // The gamma-parameterized auxiliary mean only enters terms weighted by
  // gamma_ratio; skip its (possibly far-tail) computation when that weight
  // has vanished.
  VectorXd w0 = gamma_ratio > 1e-12 ? tn_mean(rect, m_co, ps.cond_d.gamma) : w.mean;
  return assemble_mixed(sample, comp, ps, w, w0, gamma_ratio);
}

EStepStats split_missing_censored(const CensoredSample& sample, const PreparedComponent& comp) {
  PatternSplit ps = split_pattern(sample, comp);
  const Eigen::Index pc = static_cast<Eigen::Index>(ps.cens.size());
  Rectangle rect = censored_rect(sample, ps.cens);

  bool any_finite = !rect.unbounded();
  MomentPair w;
  VectorXd w0;
  double gamma_ratio;
  VectorXd m_co = ps.cond.mu - ps.cond_d.tau_tilde * ps.cond_d.delta;

  if (!any_finite) {
    // Every censored coordinate is missing: the conditional ESN is
    // untruncated, so its moments are closed form and no truncated-moment
    // kernel runs at all.
    w = esn_moments(ps.cond);
    w0 = m_co;
    gamma_ratio = eta_constant(ps.cond, ps.cond_d);
  } else {
    // The reduced path keeps the kernel on the truly censored block (plus
    // the latent coordinate); missing coordinates ride on the regression.
    w = tesn_moments_reduced(rect, ps.cond);

    double num = mvn_rect_prob(rect, m_co, ps.cond_d.gamma);
    double den = esn_rect_prob(rect, ps.cond);
    if (den < 1e-300)
      throw degenerate_region_error("split_missing_censored: zero-probability rectangle");
    gamma_ratio = eta_constant(ps.cond, ps.cond_d) * num / den;
    w0 = gamma_ratio > 1e-12 ? tn_mean_reduced(rect, m_co, ps.cond_d.gamma) : w.mean;
  }
  (void)pc;
  return assemble_mixed(sample, comp, ps, w, w0, gamma_ratio);
}

EStepStats e_step(const CensoredSample& sample, const PreparedComponent& comp, bool use_split) {
  const auto cens = sample.censored_idx();
  if (cens.empty()) return e_step_observed(sample, comp);
  if (cens.size() == static_cast<size_t>(sample.dim())) {
    bool any_missing = false;
    for (Eigen::Index k : cens)
      if (sample.is_missing(k)) any_missing = true;
    if (use_split && any_missing) return split_missing_censored(sample, comp);
    return e_step_censored(sample, comp);
  }
  bool any_missing = false;
  for (Eigen::Index k : cens)
    if (sample.is_missing(k)) any_missing = true;
  if (use_split && any_missing) return split_missing_censored(sample, comp);
  return e_step_mixed(sample, comp);
}

double msnc_sample_loglik(const CensoredSample& sample, const PreparedComponent& comp) {
  const auto cens = sample.censored_idx();
  if (cens.empty()) return esn_logpdf(sample.values, comp.params, comp.d);
  if (cens.size() == static_cast<size_t>(sample.dim())) {
    Rectangle rect{sample.lower, sample.upper};
    if (rect.unbounded()) return 0.0; // fully missing row
    double mass = esn_rect_prob(rect, comp.params);
    if (mass < 1e-300)
      throw degenerate_region_error("msnc_loglik: zero-probability censored rectangle");
    return std::log(mass);
  }
  PatternSplit ps = split_pattern(sample, comp);
  Rectangle rect = censored_rect(sample, ps.cens);
  VectorXd y_obs = subvector(sample.values, ps.obs);
  double obs_part = esn_logpdf(y_obs, ps.marginal);
  if (rect.unbounded()) return obs_part;
  double mass = esn_rect_prob(rect, ps.cond);
  if (mass < 1e-300)
    throw degenerate_region_error("msnc_loglik: zero-probability censored rectangle");
  return obs_part + std::log(mass);
}

double msnc_loglik(const std::vector<CensoredSample>& data, const EsnParams& params) {
  PreparedComponent comp = prepare_component(params);
  double total = 0.0;
  for (const auto& sample : data) total += msnc_sample_loglik(sample, comp);
  return total;
}

MStepUpdate m_step(const std::vector<EStepStats>& stats, bool fix_delta_zero) {
  if (stats.empty()) throw invalid_input_error("m_step: no statistics");
  const Eigen::Index p = stats.front().y_hat.size();
  const double n = static_cast<double>(stats.size());
  double st = 0.0, st2 = 0.0;
  VectorXd sy = VectorXd::Zero(p), sty = VectorXd::Zero(p);
  for (const auto& s : stats) {
    st += s.t_hat;
    st2 += s.t2_hat;
    sy += s.y_hat;
    sty += s.ty_hat;
  }
  if (st2 <= 0.0) throw invalid_input_error("m_step: degenerate latent second moment");

  MStepUpdate out;
  if (fix_delta_zero) {
    out.delta = VectorXd::Zero(p);
    out.mu = sy / n;
  } else {
    // Joint stationarity in (mu, delta):
    //   n mu + (sum t) delta = sum y
    //   (sum t) mu + (sum t^2) delta = sum ty
    double det = n * st2 - st * st;
    if (det <= 1e-12 * n * st2)
      throw invalid_input_error("m_step: degenerate latent second moment");
    out.mu = (st2 * sy - st * sty) / det;
    out.delta = (n * sty - st * sy) / det;
  }

  MatrixXd g = MatrixXd::Zero(p, p);
  for (const auto& s : stats) {
    g += s.y2_hat - s.y_hat * out.mu.transpose() - out.mu * s.y_hat.transpose() +
         out.mu * out.mu.transpose() - s.ty_hat * out.delta.transpose() -
         out.delta * s.ty_hat.transpose() +
         s.t_hat * (out.delta * out.mu.transpose() + out.mu * out.delta.transpose()) +
         s.t2_hat * (out.delta * out.delta.transpose());
  }
  out.gamma = symmetrize_floor(g / n);
  return out;
}

void sn_to_convolution(const EsnParams& params, VectorXd& delta, MatrixXd& gamma) {
  EsnDerived d = derive(params);
  delta = d.delta;
  gamma = d.gamma;
}

EsnParams recover_sn_params(const VectorXd& mu, const VectorXd& delta, const MatrixXd& gamma) {
  EsnParams out;
  out.mu = mu;
  out.sigma = gamma + delta * delta.transpose();
  out.sigma = 0.5 * (out.sigma + out.sigma.transpose());
  double q = delta.dot(out.sigma.llt().solve(delta));
  if (q >= 1.0)
    throw singularity_error("recover_sn_params: delta lies on the boundary of the parameter space");
  MatrixXd root = symmetric_sqrt(out.sigma);
  out.lambda = root.llt().solve(delta) / std::sqrt(1.0 - q);
  out.tau = 0.0;
  return out;
}

namespace {
std::atomic<double> g_worst_violation{0.0};
}

double em_worst_trace_violation() { return g_worst_violation.load(); }
void reset_em_trace_stats() { g_worst_violation.store(0.0); }
void record_em_trace(const FitResult& result) {
  double v = result.max_trace_violation();
  double cur = g_worst_violation.load();
  while (v > cur && !g_worst_violation.compare_exchange_weak(cur, v)) {
  }
}

FitResult fit_msnc(const std::vector<CensoredSample>& data, const EsnParams& init,
                   const FitConfig& config) {
  if (data.empty()) throw invalid_input_error("fit_msnc: empty data");
  validate(init);
  EsnParams params = init;
  params.tau = 0.0;
  if (config.fix_lambda_zero) params.lambda.setZero();

  FitResult result;
  result.loglik_trace.push_back(msnc_loglik(data, params));

  std::vector<EStepStats> stats(data.size());
  for (int iter = 0; iter < config.max_iter; ++iter) {
    PreparedComponent comp = prepare_component(params);
    for (size_t i = 0; i < data.size(); ++i) stats[i] = e_step(data[i], comp);
    MStepUpdate up = m_step(stats, config.fix_lambda_zero);
    params = recover_sn_params(up.mu, up.delta, up.gamma);
    if (config.fix_lambda_zero) params.lambda.setZero();

    double ll = msnc_loglik(data, params);
    double prev = result.loglik_trace.back();
    result.loglik_trace.push_back(ll);
    result.iterations = iter + 1;
    if (std::abs(ll / prev - 1.0) < config.tol) {
      result.converged = true;
      break;
    }
  }

  result.model.weights = VectorXd::Ones(1);
  result.model.components = {params};
  result.posterior = MatrixXd::Ones(static_cast<Eigen::Index>(data.size()), 1);
  record_em_trace(result);
  return result;
}

} // namespace msnmix
