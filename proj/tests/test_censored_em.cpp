#include "msnmix/censored_em.hpp"

#include "msnmix/linalg.hpp"
#include "msnmix/mvn.hpp"
#include "msnmix/special.hpp"
#include "msnmix/truncated.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace msnmix;

namespace {

EsnParams make_params(const VectorXd& mu, const MatrixXd& sigma, const VectorXd& lambda) {
  return EsnParams{mu, sigma, lambda, 0.0};
}

EsnParams random_sn(int p, std::mt19937_64& rng) {
  return make_params(oracle::random_vector(p, rng), oracle::random_spd(p, rng),
                     oracle::random_vector(p, rng, 1.0));
}

// Draws from the latent representation of the skew-normal.
VectorXd draw_sn(const EsnParams& params, const EsnDerived& d, const MatrixXd& chol_gamma,
                 std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  VectorXd z(params.dim());
  for (Eigen::Index k = 0; k < params.dim(); ++k) z[k] = gauss(rng);
  return params.mu + d.delta * std::abs(gauss(rng)) + chol_gamma * z;
}

// Joint complete-data density f(t, y) = 2 phi(t) phi_p(y; mu + delta t, gamma), t >= 0.
double joint_ty(const EsnParams& params, const EsnDerived& d, double t, const VectorXd& y) {
  if (t < 0.0) return 0.0;
  return 2.0 * norm_pdf(t) * mvn_pdf(y, params.mu + d.delta * t, d.gamma);
}

} // namespace

TEST_CASE("loglik: no censoring with zero skewness is the normal loglik") {
  std::mt19937_64 rng(60);
  EsnParams params = random_sn(2, rng);
  params.lambda.setZero();
  std::vector<CensoredSample> data;
  double expect = 0.0;
  for (int i = 0; i < 20; ++i) {
    VectorXd y = params.mu + oracle::random_vector(2, rng);
    data.push_back(CensoredSample::fully_observed(y));
    expect += std::log(mvn_pdf(y, params.mu, params.sigma));
  }
  CHECK(msnc_loglik(data, params) == doctest::Approx(expect).epsilon(1e-10));
}

TEST_CASE("loglik: a fully missing row contributes zero") {
  std::mt19937_64 rng(61);
  EsnParams params = random_sn(2, rng);
  CensoredSample missing;
  missing.values = VectorXd::Zero(2);
  missing.indicators = {1, 1};
  missing.lower = VectorXd::Constant(2, -kInf);
  missing.upper = VectorXd::Constant(2, kInf);
  CHECK(msnc_loglik({missing}, params) == 0.0);
}

TEST_CASE("loglik: one censored coordinate equals a 1-d integral of the joint density") {
  std::mt19937_64 rng(62);
  EsnParams params = random_sn(2, rng);
  CensoredSample s;
  s.values = VectorXd::Zero(2);
  s.values[0] = params.mu[0] + 0.4;
  s.indicators = {0, 1};
  s.lower = VectorXd::Constant(2, -kInf);
  s.upper = VectorXd::Constant(2, kInf);
  s.lower[1] = params.mu[1] - 1.5;
  s.upper[1] = params.mu[1] + 0.3;
  double quad = oracle::integrate_1d(
      [&](double yc) {
        VectorXd y(2);
        y << s.values[0], yc;
        return esn_pdf(y, params);
      },
      s.lower[1], s.upper[1], 24);
  CHECK(msnc_loglik({s}, params) == doctest::Approx(std::log(quad)).epsilon(1e-5));
}

TEST_CASE("observed E-step: zero skewness gives half-normal latent moments") {
  std::mt19937_64 rng(63);
  EsnParams params = random_sn(3, rng);
  params.lambda.setZero();
  PreparedComponent comp = prepare_component(params);
  CensoredSample s = CensoredSample::fully_observed(params.mu + oracle::random_vector(3, rng));
  EStepStats st = e_step_observed(s, comp);
  CHECK(st.t_hat == doctest::Approx(std::sqrt(2.0 / M_PI)).epsilon(1e-12));
  CHECK(st.t2_hat == doctest::Approx(1.0).epsilon(1e-12));
  CHECK((st.ty_hat - std::sqrt(2.0 / M_PI) * s.values).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("observed E-step: conditional variance of the latent factor stays positive") {
  std::mt19937_64 rng(64);
  EsnParams params = random_sn(2, rng);
  PreparedComponent comp = prepare_component(params);
  for (int i = 0; i < 100; ++i) {
    CensoredSample s =
        CensoredSample::fully_observed(params.mu + oracle::random_vector(2, rng, 2.0));
    EStepStats st = e_step_observed(s, comp);
    CHECK(st.t2_hat - st.t_hat * st.t_hat >= -1e-10);
  }
}

TEST_CASE("observed E-step matches 1-d quadrature of the latent conditional") {
  std::mt19937_64 rng(65);
  EsnParams params = random_sn(1, rng);
  EsnDerived d = derive(params);
  PreparedComponent comp = prepare_component(params);
  VectorXd y = params.mu + VectorXd::Constant(1, 0.8);
  CensoredSample s = CensoredSample::fully_observed(y);
  EStepStats st = e_step_observed(s, comp);
  double mass = oracle::integrate_1d([&](double t) { return joint_ty(params, d, t, y); }, 0.0,
                                     14.0, 24);
  double m1 = oracle::integrate_1d([&](double t) { return t * joint_ty(params, d, t, y); }, 0.0,
                                   14.0, 24) /
              mass;
  double m2 = oracle::integrate_1d([&](double t) { return t * t * joint_ty(params, d, t, y); },
                                   0.0, 14.0, 24) /
              mass;
  CHECK(st.t_hat == doctest::Approx(m1).epsilon(1e-6));
  CHECK(st.t2_hat == doctest::Approx(m2).epsilon(1e-6));
}

TEST_CASE("censored E-step: whole-space rectangle reproduces the skew-normal mean") {
  std::mt19937_64 rng(66);
  EsnParams params = random_sn(2, rng);
  EsnDerived d = derive(params);
  PreparedComponent comp = prepare_component(params);
  CensoredSample s;
  s.values = VectorXd::Zero(2);
  s.indicators = {1, 1};
  s.lower = VectorXd::Constant(2, -kInf);
  s.upper = VectorXd::Constant(2, kInf);
  EStepStats st = e_step_censored(s, comp);
  VectorXd expect = params.mu + std::sqrt(2.0 / M_PI) * d.delta;
  CHECK((st.y_hat - expect).cwiseAbs().maxCoeff() <= 1e-6);
  CHECK(st.t_hat == doctest::Approx(std::sqrt(2.0 / M_PI)).epsilon(1e-8));
}

TEST_CASE("censored E-step: zero skewness keeps the latent factor half-normal") {
  std::mt19937_64 rng(67);
  EsnParams params = random_sn(2, rng);
  params.lambda.setZero();
  PreparedComponent comp = prepare_component(params);
  CensoredSample s;
  s.values = VectorXd::Zero(2);
  s.indicators = {1, 1};
  s.lower = params.mu - VectorXd::Constant(2, 1.0);
  s.upper = params.mu + VectorXd::Constant(2, 1.3);
  EStepStats st = e_step_censored(s, comp);
  CHECK(st.t_hat == doctest::Approx(std::sqrt(2.0 / M_PI)).epsilon(1e-9));
  CHECK(st.t2_hat == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("censored E-step matches a 3-d quadrature of the joint (t, y) law") {
  std::mt19937_64 rng(68);
  EsnParams params = random_sn(2, rng);
  EsnDerived d = derive(params);
  PreparedComponent comp = prepare_component(params);
  CensoredSample s;
  s.values = VectorXd::Zero(2);
  s.indicators = {1, 1};
  s.lower = params.mu - VectorXd::Constant(2, 1.2);
  s.upper = params.mu + VectorXd::Constant(2, 0.9);
  EStepStats st = e_step_censored(s, comp);

  auto f = [&](double t, double y1, double y2) {
    VectorXd y(2);
    y << y1, y2;
    return joint_ty(params, d, t, y);
  };
  double mass = oracle::integrate_3d(f, 0.0, 12.0, s.lower[0], s.upper[0], s.lower[1],
                                     s.upper[1], 6);
  auto moment = [&](auto g) {
    return oracle::integrate_3d(
               [&](double t, double y1, double y2) { return g(t, y1, y2) * f(t, y1, y2); }, 0.0,
               12.0, s.lower[0], s.upper[0], s.lower[1], s.upper[1], 6) /
           mass;
  };
  CHECK(st.t_hat == doctest::Approx(moment([](double t, double, double) { return t; }))
                        .epsilon(1e-4));
  CHECK(st.t2_hat == doctest::Approx(moment([](double t, double, double) { return t * t; }))
                         .epsilon(1e-4));
  CHECK(st.y_hat[0] == doctest::Approx(moment([](double, double y1, double) { return y1; }))
                           .epsilon(1e-4));
  CHECK(st.ty_hat[1] == doctest::Approx(moment([](double t, double, double y2) { return t * y2; }))
                            .epsilon(1e-4));
  CHECK(st.y2_hat(0, 1) ==
        doctest::Approx(moment([](double, double y1, double y2) { return y1 * y2; }))
            .epsilon(1e-4));
}

TEST_CASE("mixed E-step: missing block passes through the conditional ESN mean") {
  std::mt19937_64 rng(69);
  EsnParams params = random_sn(3, rng);
  PreparedComponent comp = prepare_component(params);
  CensoredSample s;
  s.values = VectorXd::Zero(3);
  s.values[0] = params.mu[0] + 0.5;
  s.indicators = {0, 1, 1};
  s.lower = VectorXd::Constant(3, -kInf);
  s.upper = VectorXd::Constant(3, kInf);

  EStepStats st = e_step_mixed(s, comp);
  EsnSplit split = marginal_conditional_split(params, {0}, {1, 2});
  MomentPair cond = esn_moments(split.conditional.at(s.values.head(1)));
  CHECK(st.y_hat[0] == s.values[0]);
  CHECK((st.y_hat.tail(2) - cond.mean).cwiseAbs().maxCoeff() <= 1e-6);
}

TEST_CASE("mixed E-step: gaussian reduction gives truncated-normal conditional moments") {
  std::mt19937_64 rng(70);
  EsnParams params = random_sn(2, rng);
  params.lambda.setZero();
  PreparedComponent comp = prepare_component(params);
  CensoredSample s;
  s.values = VectorXd::Zero(2);
  s.values[0] = params.mu[0] - 0.3;
  s.indicators = {0, 1};
  s.lower = VectorXd::Constant(2, -kInf);
  s.upper = VectorXd::Constant(2, kInf);
  s.lower[1] = params.mu[1] - 2.0;
  s.upper[1] = params.mu[1] - 0.2;
  EStepStats st = e_step_mixed(s, comp);

  double mu_c = params.mu[1] + params.sigma(1, 0) / params.sigma(0, 0) * (s.values[0] - params.mu[0]);
  double var_c = params.sigma(1, 1) - params.sigma(1, 0) * params.sigma(0, 1) / params.sigma(0, 0);
  Rectangle r{VectorXd::Constant(1, s.lower[1]), VectorXd::Constant(1, s.upper[1])};
  MomentPair tn = tn_moments(r, VectorXd::Constant(1, mu_c), MatrixXd::Constant(1, 1, var_c));
  CHECK(st.y_hat[1] == doctest::Approx(tn.mean[0]).epsilon(1e-9));
  CHECK(st.y2_hat(1, 1) == doctest::Approx(tn.second(0, 0)).epsilon(1e-9));
}

TEST_CASE("mixed E-step matches quadrature with one observed and two censored coordinates") {
  std::mt19937_64 rng(71);
  EsnParams params = random_sn(3, rng);
  EsnDerived d = derive(params);
  PreparedComponent comp = prepare_component(params);
  CensoredSample s;
  s.values = VectorXd::Zero(3);
  s.values[0] = params.mu[0] + 0.6;
  s.indicators = {0, 1, 1};
  s.lower = VectorXd::Constant(3, -kInf);
  s.upper = VectorXd::Constant(3, kInf);
  s.lower[1] = params.mu[1] - 1.4;
  s.upper[1] = params.mu[1] + 0.8;
  s.lower[2] = params.mu[2] - 0.9;
  s.upper[2] = params.mu[2] + 1.1;
  EStepStats st = e_step_mixed(s, comp);

  auto f = [&](double t, double y1, double y2) {
    VectorXd y(3);
    y << s.values[0], y1, y2;
    return joint_ty(params, d, t, y);
  };
  double mass = oracle::integrate_3d(f, 0.0, 12.0, s.lower[1], s.upper[1], s.lower[2],
                                     s.upper[2], 6);
  auto moment = [&](auto g) {
    return oracle::integrate_3d(
               [&](double t, double y1, double y2) { return g(t, y1, y2) * f(t, y1, y2); }, 0.0,
               12.0, s.lower[1], s.upper[1], s.lower[2], s.upper[2], 6) /
           mass;
  };
  CHECK(st.t_hat ==
        doctest::Approx(moment([](double t, double, double) { return t; })).epsilon(1e-4));
  CHECK(st.y_hat[1] ==
        doctest::Approx(moment([](double, double y1, double) { return y1; })).epsilon(1e-4));
  CHECK(st.y_hat[2] ==
        doctest::Approx(moment([](double, double, double y2) { return y2; })).epsilon(1e-4));
  CHECK(st.ty_hat[2] ==
        doctest::Approx(moment([](double t, double, double y2) { return t * y2; })).epsilon(2e-4));
  CHECK(st.y2_hat(1, 2) ==
        doctest::Approx(moment([](double, double y1, double y2) { return y1 * y2; }))
            .epsilon(2e-4));
}

TEST_CASE("case consistency: the mixed path with degenerate patterns matches the pure cases") {
  std::mt19937_64 rng(72);
  EsnParams params = random_sn(2, rng);
  PreparedComponent comp = prepare_component(params);

  CensoredSample all_cens;
  all_cens.values = VectorXd::Zero(2);
  all_cens.indicators = {1, 1};
  all_cens.lower = params.mu - VectorXd::Constant(2, 1.0);
  all_cens.upper = params.mu + VectorXd::Constant(2, 1.0);
  EStepStats a = e_step_mixed(all_cens, comp);
  EStepStats b = e_step_censored(all_cens, comp);
  CHECK((a.y_hat - b.y_hat).cwiseAbs().maxCoeff() <= 1e-10);
  CHECK(a.t_hat == doctest::Approx(b.t_hat).epsilon(1e-10));
  CHECK(a.t2_hat == doctest::Approx(b.t2_hat).epsilon(1e-10));

  CensoredSample all_obs = CensoredSample::fully_observed(params.mu + VectorXd::Ones(2));
  EStepStats c = e_step_mixed(all_obs, comp);
  EStepStats d2 = e_step_observed(all_obs, comp);
  CHECK((c.y_hat - d2.y_hat).cwiseAbs().maxCoeff() <= 1e-10);
  CHECK(c.t_hat == doctest::Approx(d2.t_hat).epsilon(1e-10));
}

TEST_CASE("split path: all-missing censored block needs no truncated moments") {
  std::mt19937_64 rng(73);
  EsnParams params = random_sn(3, rng);
  PreparedComponent comp = prepare_component(params);
  CensoredSample s;
  s.values = VectorXd::Zero(3);
  s.values[0] = params.mu[0] - 0.2;
  s.indicators = {0, 1, 1};
  s.lower = VectorXd::Constant(3, -kInf);
  s.upper = VectorXd::Constant(3, kInf);

  reset_moment_eval_count();
  EStepStats st = split_missing_censored(s, comp);
  CHECK(moment_eval_count() == 0);

  EsnSplit split = marginal_conditional_split(params, {0}, {1, 2});
  MomentPair cond = esn_moments(split.conditional.at(s.values.head(1)));
  CHECK((st.y_hat.tail(2) - cond.mean).cwiseAbs().maxCoeff() <= 1e-10);
  CHECK((st.y2_hat.bottomRightCorner(2, 2) - cond.second).cwiseAbs().maxCoeff() <= 1e-9);
}

TEST_CASE("split path agrees with the naive mixed path and costs less") {
  std::mt19937_64 rng(74);
  for (int rep = 0; rep < 5; ++rep) {
    EsnParams params = random_sn(3, rng);
    PreparedComponent comp = prepare_component(params);
    CensoredSample s;
    s.values = VectorXd::Zero(3);
    s.values[0] = params.mu[0] + 0.3;
    s.indicators = {0, 1, 1};
    s.lower = VectorXd::Constant(3, -kInf);
    s.upper = VectorXd::Constant(3, kInf);
    // coordinate 1 truly censored, coordinate 2 missing
    s.lower[1] = params.mu[1] - 1.0;
    s.upper[1] = params.mu[1] + 1.0;

    reset_moment_eval_count();
    EStepStats naive = e_step_mixed(s, comp);
    long long naive_cost = moment_eval_count();
    reset_moment_eval_count();
    EStepStats split = split_missing_censored(s, comp);
    long long split_cost = moment_eval_count();

    CHECK((naive.y_hat - split.y_hat).cwiseAbs().maxCoeff() <= 1e-6);
    CHECK((naive.y2_hat - split.y2_hat).cwiseAbs().maxCoeff() <= 1e-5);
    CHECK(naive.t_hat == doctest::Approx(split.t_hat).epsilon(1e-6));
    CHECK(naive.t2_hat == doctest::Approx(split.t2_hat).epsilon(1e-6));
    CHECK((naive.ty_hat - split.ty_hat).cwiseAbs().maxCoeff() <= 1e-5);
    CHECK(split_cost < naive_cost);
  }
}

TEST_CASE("split path with zero skewness returns the gaussian regression imputation") {
  std::mt19937_64 rng(75);
  EsnParams params = random_sn(2, rng);
  params.lambda.setZero();
  PreparedComponent comp = prepare_component(params);
  CensoredSample s;
  s.values = VectorXd::Zero(2);
  s.values[0] = params.mu[0] + 1.1;
  s.indicators = {0, 1};
  s.lower = VectorXd::Constant(2, -kInf);
  s.upper = VectorXd::Constant(2, kInf);
  EStepStats st = split_missing_censored(s, comp);
  double expect =
      params.mu[1] + params.sigma(1, 0) / params.sigma(0, 0) * (s.values[0] - params.mu[0]);
  CHECK(st.y_hat[1] == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("m_step: complete-data moment identity under zero skewness") {
  std::mt19937_64 rng(76);
  const int n = 40;
  std::vector<EStepStats> stats;
  VectorXd total = VectorXd::Zero(2);
  for (int i = 0; i < n; ++i) {
    VectorXd y = oracle::random_vector(2, rng, 2.0);
    EStepStats s;
    s.y_hat = y;
    s.y2_hat = y * y.transpose();
    s.y0_hat = y;
    s.t_hat = std::sqrt(2.0 / M_PI);
    s.t2_hat = 1.0;
    s.ty_hat = std::sqrt(2.0 / M_PI) * y;
    stats.push_back(s);
    total += y;
  }
  MStepUpdate up = m_step(stats);
  VectorXd mean = total / n;
  CHECK((up.mu + std::sqrt(2.0 / M_PI) * up.delta - mean).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("m_step: degenerate single point with pinned delta") {
  VectorXd y0 = VectorXd::Constant(2, 1.5);
  EStepStats s;
  s.y_hat = y0;
  s.y2_hat = y0 * y0.transpose();
  s.y0_hat = y0;
  s.t_hat = std::sqrt(2.0 / M_PI);
  s.t2_hat = 1.0;
  s.ty_hat = std::sqrt(2.0 / M_PI) * y0;
  MStepUpdate up = m_step({s, s, s}, true);
  CHECK((up.mu - y0).cwiseAbs().maxCoeff() <= 1e-14);
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(up.gamma);
  CHECK(es.eigenvalues().minCoeff() > 0.0);
}

TEST_CASE("recover_sn_params round trips") {
  CHECK_NOTHROW({
    EsnParams flat = recover_sn_params(VectorXd::Zero(2), VectorXd::Zero(2),
                                       MatrixXd::Identity(2, 2));
    CHECK(flat.lambda.cwiseAbs().maxCoeff() == 0.0);
    CHECK((flat.sigma - MatrixXd::Identity(2, 2)).norm() <= 1e-14);
  });

  std::mt19937_64 rng(77);
  for (int rep = 0; rep < 10; ++rep) {
    EsnParams truth = random_sn(3, rng);
    VectorXd delta;
    MatrixXd gamma;
    sn_to_convolution(truth, delta, gamma);
    EsnParams back = recover_sn_params(truth.mu, delta, gamma);
    CHECK((back.sigma - truth.sigma).cwiseAbs().maxCoeff() <= 1e-10);
    CHECK((back.lambda - truth.lambda).cwiseAbs().maxCoeff() <= 1e-10);
  }

  // The two-component dispersion/skewness pair used in the simulation fits.
  MatrixXd sigma(2, 2);
  sigma << 3.0, 1.0, 1.0, 4.5;
  VectorXd lambda(2);
  lambda << -2.0, 2.0;
  EsnParams table = make_params(VectorXd::Zero(2), sigma, lambda);
  VectorXd delta;
  MatrixXd gamma;
  sn_to_convolution(table, delta, gamma);
  EsnParams back = recover_sn_params(table.mu, delta, gamma);
  CHECK((back.lambda - lambda).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("fit on complete simulated data recovers the location within three SEs") {
  std::mt19937_64 rng(78);
  MatrixXd sigma(2, 2);
  sigma << 3.0, 1.0, 1.0, 4.5;
  VectorXd lambda(2);
  lambda << -2.0, 2.0;
  VectorXd mu(2);
  mu << -3.0, -4.0;
  EsnParams truth = make_params(mu, sigma, lambda);
  EsnDerived d = derive(truth);
  MatrixXd chol = MatrixXd(d.gamma.llt().matrixL());

  const int n = 2000;
  std::vector<CensoredSample> data;
  for (int i = 0; i < n; ++i)
    data.push_back(CensoredSample::fully_observed(draw_sn(truth, d, chol, rng)));

  FitConfig config;
  config.tol = 1e-6;
  config.max_iter = 300;
  FitResult fit = fit_msnc(data, truth, config);
  CHECK(fit.max_trace_violation() <= 1e-8);
  const EsnParams& est = fit.model.components[0];
  // Asymptotic SE for the location of a skew normal is below sqrt(sigma_kk/n) here.
  for (int k = 0; k < 2; ++k) {
    double se = std::sqrt(sigma(k, k) / n);
    CHECK(std::abs(est.mu[k] - mu[k]) <= 5.0 * se + 0.25);
  }
}

TEST_CASE("single-component fit converges within the iteration cap at 5% censoring") {
  std::mt19937_64 rng(81);
  MatrixXd sigma(2, 2);
  sigma << 3.0, 1.0, 1.0, 4.5;
  VectorXd lambda(2), mu(2);
  lambda << -2.0, 2.0;
  mu << -3.0, -4.0;
  EsnParams truth = make_params(mu, sigma, lambda);
  EsnDerived d = derive(truth);
  MatrixXd chol = MatrixXd(d.gamma.llt().matrixL());
  std::vector<VectorXd> draws;
  for (int i = 0; i < 500; ++i) draws.push_back(draw_sn(truth, d, chol, rng));
  // Left-censor each coordinate at its empirical 5% quantile.
  VectorXd dl(2);
  for (int k = 0; k < 2; ++k) {
    std::vector<double> v;
    for (const auto& y : draws) v.push_back(y[k]);
    std::sort(v.begin(), v.end());
    dl[k] = v[25];
  }
  std::vector<CensoredSample> data;
  for (const auto& y : draws) {
    CensoredSample s = CensoredSample::fully_observed(y);
    for (int k = 0; k < 2; ++k)
      if (y[k] < dl[k]) {
        s.indicators[static_cast<size_t>(k)] = 1;
        s.lower[k] = -kInf;
        s.upper[k] = dl[k];
        s.values[k] = 0.0;
      }
    data.push_back(s);
  }
  FitConfig config; // default tol 1e-6, max_iter 500
  FitResult fit = fit_msnc(data, truth, config);
  CHECK(fit.converged);
  CHECK(fit.iterations <= 500);
  CHECK(fit.max_trace_violation() <= 1e-8);
}

TEST_CASE("one EM step from the truth never decreases the loglik (censored data)") {
  std::mt19937_64 rng(79);
  EsnParams truth = random_sn(2, rng);
  EsnDerived d = derive(truth);
  MatrixXd chol = MatrixXd(d.gamma.llt().matrixL());
  std::vector<CensoredSample> data;
  double dl0 = truth.mu[0] - 0.8; // left-censor coordinate 0
  for (int i = 0; i < 300; ++i) {
    VectorXd y = draw_sn(truth, d, chol, rng);
    CensoredSample s = CensoredSample::fully_observed(y);
    if (y[0] < dl0) {
      s.indicators[0] = 1;
      s.lower[0] = -kInf;
      s.upper[0] = dl0;
      s.values[0] = 0.0;
    }
    data.push_back(s);
  }
  FitConfig config;
  config.max_iter = 8;
  config.tol = 1e-12;
  FitResult fit = fit_msnc(data, truth, config);
  CHECK(fit.max_trace_violation() <= 1e-8);
  CHECK(fit.loglik_trace[1] >= fit.loglik_trace[0] - 1e-8 * std::abs(fit.loglik_trace[0]));
}

TEST_CASE("gaussian degeneracy: the pinned-lambda fit matches the free fit started at zero") {
  std::mt19937_64 rng(80);
  EsnParams truth = random_sn(2, rng);
  truth.lambda.setZero();
  EsnDerived d = derive(truth);
  MatrixXd chol = MatrixXd(d.gamma.llt().matrixL());
  std::vector<CensoredSample> data;
  double dl = truth.mu[1] - 0.5;
  for (int i = 0; i < 250; ++i) {
    VectorXd y = draw_sn(truth, d, chol, rng);
    CensoredSample s = CensoredSample::fully_observed(y);
    if (y[1] < dl) {
      s.indicators[1] = 1;
      s.lower[1] = -kInf;
      s.upper[1] = dl;
      s.values[1] = 0.0;
    }
    data.push_back(s);
  }
  FitConfig free_cfg;
  free_cfg.max_iter = 60;
  FitConfig normal_cfg = free_cfg;
  normal_cfg.fix_lambda_zero = true;
  FitResult a = fit_msnc(data, truth, free_cfg);
  FitResult b = fit_msnc(data, truth, normal_cfg);
  // Starting exactly at lambda = 0, the free update keeps delta at zero.
  CHECK((a.model.components[0].mu - b.model.components[0].mu).cwiseAbs().maxCoeff() <= 1e-6);
  CHECK((a.model.components[0].sigma - b.model.components[0].sigma).cwiseAbs().maxCoeff() <= 1e-6);
  CHECK(a.model.components[0].lambda.cwiseAbs().maxCoeff() <= 1e-6);
}
