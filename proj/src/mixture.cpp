#include "msnmix/mixture.hpp"

#include "msnmix/linalg.hpp"
#include "msnmix/special.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <iostream>
#include <random>
#include <thread>

namespace msnmix {

namespace {

int resolve_threads(int requested) {
  if (requested > 0) return requested;
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

// Simple blocked parallel-for; the E-step rows are independent.
template <typename Fn>
void parallel_rows(Eigen::Index n, int n_threads, Fn&& fn) {
  n_threads = std::min<Eigen::Index>(n_threads, n);
  if (n_threads <= 1) {
    for (Eigen::Index i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::atomic<Eigen::Index> next{0};
  std::vector<std::exception_ptr> errors(static_cast<size_t>(n_threads));
  for (int t = 0; t < n_threads; ++t) {
    pool.emplace_back([&, t] {
      try {
        for (Eigen::Index i = next++; i < n; i = next++) fn(i);
      } catch (...) {
        errors[static_cast<size_t>(t)] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

std::vector<PreparedComponent> prepare_all(const MixtureModel& model) {
  std::vector<PreparedComponent> comps;
  comps.reserve(model.components.size());
  for (const auto& c : model.components) comps.push_back(prepare_component(c));
  return comps;
}

double logsumexp_row(const VectorXd& v) {
  double m = v.maxCoeff();
  if (!std::isfinite(m)) return -kInf;
  double acc = 0.0;
  for (Eigen::Index j = 0; j < v.size(); ++j) acc += std::exp(v[j] - m);
  return m + std::log(acc);
}

// One component assigning zero mass to a row is an ordinary mixture event
// (f_ij = 0); only an all-zero row is a failure, detected at the logsumexp.
double log_fij(const CensoredSample& sample, const PreparedComponent& comp) {
  try {
    return msnc_sample_loglik(sample, comp);
  } catch (const degenerate_region_error&) {
    return -kInf;
  }
}

} // namespace

MatrixXd responsibilities(const std::vector<CensoredSample>& data, const MixtureModel& model) {
  validate(model);
  const Eigen::Index n = static_cast<Eigen::Index>(data.size());
  const int g = model.n_components();
  auto comps = prepare_all(model);
  VectorXd log_pi = model.weights.array().log();
  MatrixXd z(n, g);
  parallel_rows(n, resolve_threads(0), [&](Eigen::Index i) {
    VectorXd row(g);
    for (int j = 0; j < g; ++j) row[j] = log_pi[j] + log_fij(data[i], comps[j]);
    double lse = logsumexp_row(row);
    if (!std::isfinite(lse))
      throw invalid_input_error("responsibilities: zero likelihood in every component for row " +
                                std::to_string(i));
    for (int j = 0; j < g; ++j) z(i, j) = std::exp(row[j] - lse);
  });
  return z;
}

double mixture_loglik(const std::vector<CensoredSample>& data, const MixtureModel& model) {
  const Eigen::Index n = static_cast<Eigen::Index>(data.size());
  const int g = model.n_components();
  auto comps = prepare_all(model);
  VectorXd log_pi = model.weights.array().log();
  VectorXd contrib(n);
  parallel_rows(n, resolve_threads(0), [&](Eigen::Index i) {
    VectorXd row(g);
    for (int j = 0; j < g; ++j) row[j] = log_pi[j] + log_fij(data[i], comps[j]);
    contrib[i] = logsumexp_row(row);
  });
  return contrib.sum();
}

MixtureEStep mixture_e_step(const std::vector<CensoredSample>& data, const MixtureModel& model,
                            int n_threads, bool use_split) {
  const Eigen::Index n = static_cast<Eigen::Index>(data.size());
  const int g = model.n_components();
  auto comps = prepare_all(model);
  VectorXd log_pi = model.weights.array().log();

  MixtureEStep out;
  out.z.resize(n, g);
  out.stats.assign(static_cast<size_t>(n), std::vector<EStepStats>(static_cast<size_t>(g)));
  VectorXd contrib(n);

  parallel_rows(n, resolve_threads(n_threads), [&](Eigen::Index i) {
    VectorXd row(g);
    for (int j = 0; j < g; ++j) row[j] = log_pi[j] + log_fij(data[i], comps[j]);
    double lse = logsumexp_row(row);
    if (!std::isfinite(lse))
      throw invalid_input_error("mixture_e_step: zero likelihood in every component for row " +
                                std::to_string(i));
    contrib[i] = lse;
    for (int j = 0; j < g; ++j) {
      double zij = std::exp(row[j] - lse);
      out.z(i, j) = zij;
      // A numerically dead component contributes nothing to the sums; skip
      // its truncated-moment work.  Dead components may also sit so far
      // from the row's censoring rectangle that the conditional mass
      // underflows; those regions are equally irrelevant.
      bool dead = zij <= 1e-12;
      if (!dead) {
        try {
          out.stats[static_cast<size_t>(i)][static_cast<size_t>(j)] =
              e_step(data[i], comps[j], use_split);
          continue;
        } catch (const degenerate_region_error& err) {
          if (zij > 1e-8)
            throw degenerate_region_error(
                "mixture_e_step: zero-probability region for row " + std::to_string(i) +
                ", component " + std::to_string(j) + " (" + err.what() + ")");
          out.z(i, j) = 0.0;
        }
      }
      EStepStats zero;
      zero.y_hat = VectorXd::Zero(model.dim());
      zero.y2_hat = MatrixXd::Zero(model.dim(), model.dim());
      zero.ty_hat = VectorXd::Zero(model.dim());
      zero.y0_hat = VectorXd::Zero(model.dim());
      out.stats[static_cast<size_t>(i)][static_cast<size_t>(j)] = zero;
    }
    double row_sum = out.z.row(i).sum();
    if (row_sum > 0.0 && row_sum != 1.0) out.z.row(i) /= row_sum;
  });
  out.loglik = contrib.sum();
  return out;
}

MixtureModel mixture_m_step(const MixtureEStep& e, const MixtureModel& current,
                            bool fix_lambda_zero, bool shared_gamma) {
  const Eigen::Index n = e.z.rows();
  const int g = static_cast<int>(e.z.cols());
  const Eigen::Index p = current.dim();

  MixtureModel next = current;
  next.shared_gamma = shared_gamma;
  MatrixXd gamma_pool = MatrixXd::Zero(p, p);

  std::vector<VectorXd> mus(g), deltas(g);
  VectorXd nj(g);
  for (int j = 0; j < g; ++j) {
    double zsum = 0.0, e4 = 0.0, e5 = 0.0;
    VectorXd e1 = VectorXd::Zero(p), e3 = VectorXd::Zero(p);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double zij = e.z(i, j);
      if (zij <= 0.0) continue;
      const EStepStats& s = e.stats[static_cast<size_t>(i)][static_cast<size_t>(j)];
      zsum += zij;
      e1 += zij * s.y_hat;
      e3 += zij * s.ty_hat;
      e4 += zij * s.t2_hat;
      e5 += zij * s.t_hat;
    }
    nj[j] = zsum;
    if (zsum <= static_cast<double>(p))
      throw invalid_input_error("mixture_m_step: component " + std::to_string(j) +
                                " collapsed (effective size " + std::to_string(zsum) + ")");
    if (fix_lambda_zero) {
      mus[j] = e1 / zsum;
      deltas[j] = VectorXd::Zero(p);
    } else {
      double det = zsum * e4 - e5 * e5;
      if (det <= 1e-12 * zsum * e4)
        throw invalid_input_error("mixture_m_step: degenerate latent moments in component " +
                                  std::to_string(j));
      mus[j] = (e4 * e1 - e5 * e3) / det;
      deltas[j] = (zsum * e3 - e5 * e1) / det;
    }
  }

  for (int j = 0; j < g; ++j) {
    const VectorXd& mu = mus[j];
    const VectorXd& delta = deltas[j];
    MatrixXd acc = MatrixXd::Zero(p, p);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double zij = e.z(i, j);
      if (zij <= 0.0) continue;
      const EStepStats& s = e.stats[static_cast<size_t>(i)][static_cast<size_t>(j)];
      acc += zij * (s.y2_hat - s.y_hat * mu.transpose() - mu * s.y_hat.transpose() +
                    mu * mu.transpose() - s.ty_hat * delta.transpose() -
                    delta * s.ty_hat.transpose() +
                    s.t_hat * (delta * mu.transpose() + mu * delta.transpose()) +
                    s.t2_hat * (delta * delta.transpose()));
    }
    if (shared_gamma) {
      gamma_pool += acc;
    } else {
      next.components[static_cast<size_t>(j)] =
          recover_sn_params(mu, delta, symmetrize_floor(acc / nj[j]));
    }
  }
  if (shared_gamma) {
    MatrixXd gamma = symmetrize_floor(gamma_pool / static_cast<double>(n));
    for (int j = 0; j < g; ++j)
      next.components[static_cast<size_t>(j)] = recover_sn_params(mus[j], deltas[j], gamma);
  }
  next.weights = nj / nj.sum();
  return next;
}

// ---------------------------------------------------------------------------
// K-means initialization.
// ---------------------------------------------------------------------------

namespace {

// Censoring levels stand in for unobserved entries; missing entries get the
// column mean of the observed values.
MatrixXd imputed_matrix(const std::vector<CensoredSample>& data) {
  const Eigen::Index n = static_cast<Eigen::Index>(data.size());
  const Eigen::Index p = data.front().dim();
  VectorXd col_sum = VectorXd::Zero(p);
  VectorXd col_count = VectorXd::Zero(p);
  for (const auto& s : data)
    for (Eigen::Index k = 0; k < p; ++k)
      if (!s.is_censored(k)) {
        col_sum[k] += s.values[k];
        col_count[k] += 1.0;
      }
  VectorXd col_mean = VectorXd::Zero(p);
  for (Eigen::Index k = 0; k < p; ++k)
    if (col_count[k] > 0.0) col_mean[k] = col_sum[k] / col_count[k];

  MatrixXd x(n, p);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& s = data[static_cast<size_t>(i)];
    for (Eigen::Index k = 0; k < p; ++k) {
      if (!s.is_censored(k)) {
        x(i, k) = s.values[k];
      } else if (s.is_missing(k)) {
        x(i, k) = col_mean[k];
      } else if (std::isfinite(s.lower[k]) && std::isfinite(s.upper[k])) {
        x(i, k) = 0.5 * (s.lower[k] + s.upper[k]);
      } else {
        x(i, k) = std::isfinite(s.upper[k]) ? s.upper[k] : s.lower[k];
      }
    }
  }
  return x;
}

std::vector<int> lloyd_kmeans(const MatrixXd& x, int g, std::mt19937_64& rng, bool& ok) {
  const Eigen::Index n = x.rows();
  MatrixXd centers(g, x.cols());
  // k-means++ seeding
  std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
  centers.row(0) = x.row(pick(rng));
  VectorXd d2 = (x.rowwise() - centers.row(0)).rowwise().squaredNorm();
  for (int c = 1; c < g; ++c) {
    double total = d2.sum();
    std::uniform_real_distribution<double> u(0.0, total);
    double target = u(rng);
    Eigen::Index chosen = n - 1;
    double acc = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      acc += d2[i];
      if (acc >= target) {
        chosen = i;
        break;
      }
    }
    centers.row(c) = x.row(chosen);
    d2 = d2.cwiseMin((x.rowwise() - centers.row(c)).rowwise().squaredNorm());
  }

  std::vector<int> label(static_cast<size_t>(n), 0);
  for (int iter = 0; iter < 100; ++iter) {
    bool changed = false;
    for (Eigen::Index i = 0; i < n; ++i) {
      int best = 0;
      double best_d = kInf;
      for (int c = 0; c < g; ++c) {
        double d = (x.row(i) - centers.row(c)).squaredNorm();
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      if (label[static_cast<size_t>(i)] != best) {
        label[static_cast<size_t>(i)] = best;
        changed = true;
      }
    }
    MatrixXd sums = MatrixXd::Zero(g, x.cols());
    VectorXd counts = VectorXd::Zero(g);
    for (Eigen::Index i = 0; i < n; ++i) {
      sums.row(label[static_cast<size_t>(i)]) += x.row(i);
      counts[label[static_cast<size_t>(i)]] += 1.0;
    }
    if (counts.minCoeff() < 1.0) {
      ok = false;
      return label;
    }
    for (int c = 0; c < g; ++c) centers.row(c) = sums.row(c) / counts[c];
    if (!changed) break;
  }
  ok = true;
  return label;
}

} // namespace

MixtureModel init_kmeans(const std::vector<CensoredSample>& data, int g, unsigned long seed) {
  if (data.empty()) throw invalid_input_error("init_kmeans: empty data");
  const Eigen::Index n = static_cast<Eigen::Index>(data.size());
  const Eigen::Index p = data.front().dim();
  if (n < static_cast<Eigen::Index>(g) * (p + 1))
    throw invalid_input_error("init_kmeans: not enough rows for the requested components");

  MatrixXd x = imputed_matrix(data);
  std::vector<int> label;
  bool ok = false;
  for (int attempt = 0; attempt < 10 && !ok; ++attempt) {
    std::mt19937_64 rng(seed + 7919ULL * static_cast<unsigned long>(attempt));
    label = lloyd_kmeans(x, g, rng, ok);
    // A cluster must support a covariance estimate.
    if (ok) {
      std::vector<int> counts(static_cast<size_t>(g), 0);
      for (int l : label) counts[static_cast<size_t>(l)]++;
      for (int c = 0; c < g; ++c)
        if (counts[static_cast<size_t>(c)] < p + 1) ok = false;
    }
  }
  if (!ok) throw invalid_input_error("init_kmeans: could not find non-empty clusters");

  MixtureModel model;
  model.weights.resize(g);
  model.components.resize(static_cast<size_t>(g));
  for (int c = 0; c < g; ++c) {
    std::vector<Eigen::Index> rows;
    for (Eigen::Index i = 0; i < n; ++i)
      if (label[static_cast<size_t>(i)] == c) rows.push_back(i);
    const double nc = static_cast<double>(rows.size());
    model.weights[c] = nc / static_cast<double>(n);

    VectorXd mean = VectorXd::Zero(p);
    for (Eigen::Index i : rows) mean += x.row(i).transpose();
    mean /= nc;
    MatrixXd cov = MatrixXd::Zero(p, p);
    VectorXd m3 = VectorXd::Zero(p), m2 = VectorXd::Zero(p);
    for (Eigen::Index i : rows) {
      VectorXd dlt = x.row(i).transpose() - mean;
      cov += dlt * dlt.transpose();
      m2 += dlt.cwiseProduct(dlt);
      m3 += dlt.cwiseProduct(dlt.cwiseProduct(dlt));
    }
    cov /= nc;
    cov = symmetrize_floor(cov, 1e-4);
    // Coordinatewise moment inversion of the skew-normal skewness: without
    // a magnitude the EM routinely stalls in a low-skewness local optimum
    // on strongly skewed clusters.
    VectorXd lambda(p);
    const double edge = std::pow((4.0 - M_PI) / 2.0, 2.0 / 3.0);
    for (Eigen::Index k = 0; k < p; ++k) {
      double skew = m3[k] / nc / std::pow(std::max(m2[k] / nc, 1e-12), 1.5);
      double r = std::pow(std::min(std::abs(skew), 0.99), 2.0 / 3.0);
      double delta2 = std::min(0.5 * M_PI * r / (r + edge), 0.960);
      double mag = std::sqrt(delta2 / (1.0 - delta2));
      lambda[k] = (skew >= 0.0 ? 1.0 : -1.0) * std::clamp(mag, 1.0, 5.0);
    }
    model.components[static_cast<size_t>(c)] = EsnParams{mean, cov, lambda, 0.0};
  }
  return model;
}

// ---------------------------------------------------------------------------
// Full fit.
// ---------------------------------------------------------------------------

namespace {

// Runs the EM loop for at most max_iter sweeps, appending to the trace.
// Each iteration costs one E-step sweep: the sweep at theta_k also yields
// the observed loglik at theta_k.
bool run_em(const std::vector<CensoredSample>& data, MixtureModel& model,
            const FitConfig& config, int max_iter, std::vector<double>& trace,
            int& iterations) {
  MixtureEStep e = mixture_e_step(data, model, config.n_threads);
  if (trace.empty()) trace.push_back(e.loglik);
  for (int iter = 0; iter < max_iter; ++iter) {
    model = mixture_m_step(e, model, config.fix_lambda_zero, config.shared_gamma);
    e = mixture_e_step(data, model, config.n_threads);
    double prev = trace.back();
    trace.push_back(e.loglik);
    ++iterations;
    if (std::abs(e.loglik / prev - 1.0) < config.tol) return true;
  }
  return false;
}

FitResult fit_single_start(const std::vector<CensoredSample>& data, int g,
                           const FitConfig& config, const MixtureModel* init,
                           unsigned long seed) {
  MixtureModel model = init ? *init : init_kmeans(data, g, seed);
  model.shared_gamma = config.shared_gamma;
  if (config.fix_lambda_zero)
    for (auto& c : model.components) c.lambda.setZero();
  validate(model);

  FitResult result;
  if (!init && !config.fix_lambda_zero) {
    // Censoring-level imputation distorts the cluster skewness that seeds
    // lambda, so neither its signs nor its magnitudes are trustworthy.
    // Burn in a handful of sign/scale variants with short EM runs and
    // continue from the best.  A start whose skewness starves some
    // censored row of all its mass is simply damped.
    const Eigen::Index p = model.dim();
    std::vector<MixtureModel> candidates;
    if (g * p <= 4) {
      // Full sign enumeration over (component, coordinate).
      unsigned total = 1u << static_cast<unsigned>(g * p);
      for (unsigned mask = 0; mask < total; ++mask) {
        MixtureModel cand = model;
        unsigned bit = 0;
        for (auto& c : cand.components)
          for (Eigen::Index k = 0; k < p; ++k, ++bit)
            if (mask & (1u << bit)) c.lambda[k] = -c.lambda[k];
        candidates.push_back(std::move(cand));
      }
    } else {
      candidates.push_back(model);
      MixtureModel flipped = model;
      for (auto& c : flipped.components) c.lambda = -c.lambda;
      candidates.push_back(std::move(flipped));
      for (Eigen::Index k = 0; k < p; ++k) {
        MixtureModel cand = model;
        for (auto& c : cand.components) c.lambda[k] = -c.lambda[k];
        candidates.push_back(std::move(cand));
      }
    }

    // Scale variants ride along with the sign patterns.
    {
      std::vector<MixtureModel> scaled;
      for (const MixtureModel& pattern : candidates) {
        for (double scale : {1.0, 2.5}) {
          MixtureModel cand = pattern;
          for (auto& c : cand.components) c.lambda *= scale;
          scaled.push_back(std::move(cand));
        }
      }
      MixtureModel damped = model;
      for (auto& c : damped.components) c.lambda *= 0.4;
      scaled.push_back(std::move(damped));
      candidates = std::move(scaled);
    }

    // Stage one: a short burn for every candidate.  Stage two: the leaders
    // run to convergence and the best final loglik wins; basins here differ
    // in ascent speed, so the short burn alone misranks them.
    struct Burned {
      MixtureModel model;
      std::vector<double> trace;
      int iters = 0;
    };
    std::vector<Burned> burned;
    for (const MixtureModel& pattern : candidates) {
      Burned b;
      b.model = pattern;
      for (int attempt = 0; attempt < 4 && !std::isfinite(mixture_loglik(data, b.model));
           ++attempt)
        for (auto& c : b.model.components) c.lambda *= 0.5;
      try {
        run_em(data, b.model, config, std::min(12, config.max_iter), b.trace, b.iters);
      } catch (const std::exception&) {
        continue; // a start that dies is simply not used
      }
      if (!b.trace.empty()) burned.push_back(std::move(b));
    }
    if (burned.empty())
      throw invalid_input_error("fit_fm_msnc: every start failed during burn-in");
    std::sort(burned.begin(), burned.end(),
              [](const Burned& a, const Burned& b) { return a.trace.back() > b.trace.back(); });
    burned.resize(std::min<size_t>(burned.size(), 6));

    FitResult best;
    double best_ll = -kInf;
    for (Burned& b : burned) {
      FitResult r;
      r.loglik_trace = b.trace;
      r.iterations = b.iters;
      try {
        r.converged = run_em(data, b.model, config, config.max_iter - r.iterations,
                             r.loglik_trace, r.iterations);
      } catch (const std::exception&) {
        continue;
      }
      r.model = b.model;
      if (r.loglik() > best_ll) {
        best_ll = r.loglik();
        best = std::move(r);
      }
    }
    if (!std::isfinite(best_ll))
      throw invalid_input_error("fit_fm_msnc: every start failed");
    record_em_trace(best);
    return best;
  }

  result.converged = run_em(data, model, config, config.max_iter - result.iterations,
                            result.loglik_trace, result.iterations);
  result.model = model;
  record_em_trace(result);
  return result;
}

} // namespace

FitResult fit_fm_msnc(const std::vector<CensoredSample>& data, int g, const FitConfig& config,
                      const MixtureModel* init) {
  if (g < 1) throw invalid_input_error("fit_fm_msnc: need at least one component");
  if (data.empty()) throw invalid_input_error("fit_fm_msnc: empty data");

  FitResult best;
  bool have = false;
  for (int s = 0; s < std::max(1, config.n_starts); ++s) {
    unsigned long seed = config.seed + 1000ULL * static_cast<unsigned long>(s);
    FitResult r = fit_single_start(data, g, config, s == 0 ? init : nullptr, seed);
    if (!have || r.loglik() > best.loglik()) {
      best = std::move(r);
      have = true;
    }
  }

  const Eigen::Index p = best.model.dim();
  best.n_params = count_parameters(g, static_cast<int>(p), config.shared_gamma,
                                   !config.fix_lambda_zero);
  best.criteria = selection_criteria(best.loglik(), static_cast<long>(data.size()), best.n_params);
  best.posterior = responsibilities(data, best.model);
  if (config.compute_std_errors)
    best.std_errors = empirical_info_se(data, best.model, &best.param_names);
  return best;
}

Criteria selection_criteria(double loglik, long n, int rho) {
  Criteria c;
  double base = -2.0 * loglik;
  c.aic = base + 2.0 * rho;
  c.bic = base + std::log(static_cast<double>(n)) * rho;
  c.edc = base + 0.2 * std::sqrt(static_cast<double>(n)) * rho;
  return c;
}

int count_parameters(int g, int p, bool shared_gamma, bool skew_family) {
  int weights = g - 1;
  int means = g * p;
  int skew = skew_family ? g * p : 0;
  int disp = (shared_gamma ? 1 : g) * p * (p + 1) / 2;
  return weights + means + skew + disp;
}

// ---------------------------------------------------------------------------
// Empirical information matrix.
// ---------------------------------------------------------------------------

MatrixXd score_vectors(const std::vector<CensoredSample>& data, const MixtureModel& model,
                       std::vector<std::string>* names) {
  validate(model);
  const Eigen::Index n = static_cast<Eigen::Index>(data.size());
  const int g = model.n_components();
  const Eigen::Index p = model.dim();
  const Eigen::Index nvech = p * (p + 1) / 2;
  const Eigen::Index rho = g * p + g * nvech + g * p + (g - 1);

  if (names) {
    names->clear();
    for (int j = 0; j < g; ++j)
      for (Eigen::Index k = 0; k < p; ++k)
        names->push_back("mu[" + std::to_string(j + 1) + "][" + std::to_string(k + 1) + "]");
    for (int j = 0; j < g; ++j)
      for (Eigen::Index r = 0; r < nvech; ++r) {
        auto [row, col] = vech_indices(r, p);
        names->push_back("alpha[" + std::to_string(j + 1) + "][" + std::to_string(row + 1) + "," +
                         std::to_string(col + 1) + "]");
      }
    for (int j = 0; j < g; ++j)
      for (Eigen::Index k = 0; k < p; ++k)
        names->push_back("lambda[" + std::to_string(j + 1) + "][" + std::to_string(k + 1) + "]");
    for (int j = 0; j + 1 < g; ++j) names->push_back("pi[" + std::to_string(j + 1) + "]");
  }

  MixtureEStep e = mixture_e_step(data, model);

  // Per-component fixed pieces.
  struct CompCache {
    MatrixXd gamma_inv, f;
    VectorXd delta, mu, lambda, deltaS; // deltaS = lambda / sqrt(1+l'l)
    std::vector<MatrixXd> gamma_dot_alpha, delta_dot_alpha; // per vech slot
    std::vector<MatrixXd> gamma_dot_lambda;
    std::vector<VectorXd> delta_dot_lambda;
  };
  std::vector<CompCache> cache(static_cast<size_t>(g));
  for (int j = 0; j < g; ++j) {
    const EsnParams& c = model.components[static_cast<size_t>(j)];
    EsnDerived d = derive(c);
    CompCache& cc = cache[static_cast<size_t>(j)];
    cc.mu = c.mu;
    cc.lambda = c.lambda;
    cc.f = d.sqrt_sigma;
    cc.delta = d.delta;
    cc.gamma_inv = spd_inverse(d.gamma);
    double lam2 = c.lambda.squaredNorm();
    cc.deltaS = c.lambda / std::sqrt(1.0 + lam2);
    MatrixXd proj = MatrixXd::Identity(p, p) - cc.deltaS * cc.deltaS.transpose();
    for (Eigen::Index r = 0; r < nvech; ++r) {
      auto [row, col] = vech_indices(r, p);
      MatrixXd er = sym_unit(row, col, p);
      cc.gamma_dot_alpha.push_back(er * proj * cc.f + cc.f * proj * er);
      cc.delta_dot_alpha.push_back(er * cc.deltaS);
    }
    for (Eigen::Index r = 0; r < p; ++r) {
      VectorXd er = VectorXd::Zero(p);
      er[r] = 1.0;
      VectorXd ddot =
          (er * (1.0 + lam2) - c.lambda[r] * c.lambda) / std::pow(1.0 + lam2, 1.5);
      VectorXd fd = cc.f * ddot;
      cc.delta_dot_lambda.push_back(fd);
      MatrixXd gdot = -(fd * cc.delta.transpose() + cc.delta * fd.transpose());
      cc.gamma_dot_lambda.push_back(gdot);
    }
  }

  MatrixXd scores = MatrixXd::Zero(n, rho);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int j = 0; j < g; ++j) {
      const CompCache& cc = cache[static_cast<size_t>(j)];
      const EStepStats& s = e.stats[static_cast<size_t>(i)][static_cast<size_t>(j)];
      const double zij = e.z(i, j);
      VectorXd e1 = zij * s.y_hat;
      MatrixXd e2 = zij * s.y2_hat;
      VectorXd e3 = zij * s.ty_hat;
      double e4 = zij * s.t2_hat;
      double e5 = zij * s.t_hat;

      scores.row(i).segment(j * p, p) =
          (cc.gamma_inv * (e1 - zij * cc.mu - e5 * cc.delta)).transpose();

      // E[z (y - mu - delta t)(y - mu - delta t)' | data] and
      // E[z t (y - mu - delta t) | data]
      MatrixXd psi2 = e2 - e1 * cc.mu.transpose() - cc.mu * e1.transpose() +
                      zij * cc.mu * cc.mu.transpose() - e3 * cc.delta.transpose() -
                      cc.delta * e3.transpose() +
                      e5 * (cc.delta * cc.mu.transpose() + cc.mu * cc.delta.transpose()) +
                      e4 * (cc.delta * cc.delta.transpose());
      VectorXd psi1 = e3 - e5 * cc.mu - e4 * cc.delta;

      Eigen::Index alpha_base = g * p + j * nvech;
      for (Eigen::Index r = 0; r < nvech; ++r) {
        const MatrixXd& gdot = cc.gamma_dot_alpha[static_cast<size_t>(r)];
        const MatrixXd& ddot = cc.delta_dot_alpha[static_cast<size_t>(r)];
        MatrixXd gig = cc.gamma_inv * gdot * cc.gamma_inv;
        double val = -0.5 * zij * (cc.gamma_inv * gdot).trace() + 0.5 * (gig * psi2).trace() +
                     (ddot.col(0)).dot(cc.gamma_inv * psi1);
        scores(i, alpha_base + r) = val;
      }
      Eigen::Index lambda_base = g * p + g * nvech + j * p;
      for (Eigen::Index r = 0; r < p; ++r) {
        const MatrixXd& gdot = cc.gamma_dot_lambda[static_cast<size_t>(r)];
        const VectorXd& ddot = cc.delta_dot_lambda[static_cast<size_t>(r)];
        MatrixXd gig = cc.gamma_inv * gdot * cc.gamma_inv;
        double val = -0.5 * zij * (cc.gamma_inv * gdot).trace() + 0.5 * (gig * psi2).trace() +
                     ddot.dot(cc.gamma_inv * psi1);
        scores(i, lambda_base + r) = val;
      }
      if (j + 1 < g) {
        Eigen::Index pi_base = g * p + g * nvech + g * p;
        scores(i, pi_base + j) =
            e.z(i, j) / model.weights[j] - e.z(i, g - 1) / model.weights[g - 1];
      }
    }
  }
  return scores;
}

VectorXd empirical_info_se(const std::vector<CensoredSample>& data, const MixtureModel& model,
                           std::vector<std::string>* names) {
  MatrixXd s = score_vectors(data, model, names);
  MatrixXd info = s.transpose() * s;
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(info);
  const VectorXd& ev = es.eigenvalues();
  double max_ev = ev.maxCoeff();
  MatrixXd inv;
  if (ev.minCoeff() <= 0.0 || max_ev / ev.minCoeff() > 1e12) {
    std::cerr << "empirical_info_se: information matrix ill conditioned, "
                 "using pseudo-inverse\n";
    VectorXd inv_ev = ev.unaryExpr(
        [&](double v) { return v > 1e-12 * max_ev ? 1.0 / v : 0.0; });
    inv = es.eigenvectors() * inv_ev.asDiagonal() * es.eigenvectors().transpose();
  } else {
    inv = spd_inverse(info);
  }
  return inv.diagonal().cwiseMax(0.0).cwiseSqrt();
}

} // namespace msnmix
