#include "msnmix/analysis.hpp"

#include "msnmix/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numeric>
#include <random>

namespace msnmix {

void validate(const SimulationDesign& design) {
  validate(design.model);
  if (design.n < 1) throw invalid_input_error("SimulationDesign: n must be positive");
  if (design.censor == CensorScheme::left_quantile &&
      (design.censor_rate < 0.0 || design.censor_rate >= 1.0))
    throw invalid_input_error("SimulationDesign: censor rate outside [0,1)");
  if (design.missing == MissingScheme::mcar &&
      (design.missing_rate < 0.0 || design.missing_rate >= 1.0))
    throw invalid_input_error("SimulationDesign: missing rate outside [0,1)");
  if (design.censor == CensorScheme::interval) {
    if (design.interval_lower.size() != design.model.dim() ||
        design.interval_upper.size() != design.model.dim())
      throw invalid_input_error("SimulationDesign: interval bounds dimension mismatch");
    for (Eigen::Index k = 0; k < design.model.dim(); ++k)
      if (design.interval_lower[k] > design.interval_upper[k])
        throw invalid_input_error("SimulationDesign: interval lower > upper");
  }
}

SimulatedData simulate(const SimulationDesign& design) {
  validate(design);
  const Eigen::Index p = design.model.dim();
  const int g = design.model.n_components();
  std::mt19937_64 rng(design.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  // Component-wise convolution pieces.
  std::vector<VectorXd> deltas(static_cast<size_t>(g));
  std::vector<MatrixXd> chols(static_cast<size_t>(g));
  for (int j = 0; j < g; ++j) {
    EsnDerived d = derive(design.model.components[static_cast<size_t>(j)]);
    deltas[static_cast<size_t>(j)] = d.delta;
    chols[static_cast<size_t>(j)] = MatrixXd(d.gamma.llt().matrixL());
  }
  VectorXd cum(g);
  double acc = 0.0;
  for (int j = 0; j < g; ++j) {
    acc += design.model.weights[j];
    cum[j] = acc;
  }

  SimulatedData out;
  out.complete.resize(design.n, p);
  out.labels.resize(static_cast<size_t>(design.n));
  VectorXd z(p);
  for (long i = 0; i < design.n; ++i) {
    double u = unif(rng);
    int j = 0;
    while (j < g - 1 && u > cum[j]) ++j;
    out.labels[static_cast<size_t>(i)] = j;
    double t = std::abs(gauss(rng));
    for (Eigen::Index k = 0; k < p; ++k) z[k] = gauss(rng);
    out.complete.row(i) = (design.model.components[static_cast<size_t>(j)].mu +
                           deltas[static_cast<size_t>(j)] * t + chols[static_cast<size_t>(j)] * z)
                              .transpose();
  }

  // Detection limits at the empirical rate-quantile within each component,
  // per coordinate.
  if (design.censor == CensorScheme::left_quantile && design.censor_rate > 0.0) {
    out.detection_limits.resize(g, p);
    for (int j = 0; j < g; ++j) {
      std::vector<long> members;
      for (long i = 0; i < design.n; ++i)
        if (out.labels[static_cast<size_t>(i)] == j) members.push_back(i);
      for (Eigen::Index k = 0; k < p; ++k) {
        std::vector<double> vals;
        vals.reserve(members.size());
        for (long i : members) vals.push_back(out.complete(i, k));
        std::sort(vals.begin(), vals.end());
        size_t m = static_cast<size_t>(std::floor(design.censor_rate * vals.size()));
        out.detection_limits(j, k) =
            (vals.empty() || m >= vals.size()) ? -kInf : vals[m];
      }
    }
  }

  out.rows.reserve(static_cast<size_t>(design.n));
  for (long i = 0; i < design.n; ++i) {
    CensoredSample s = CensoredSample::fully_observed(out.complete.row(i).transpose());
    int j = out.labels[static_cast<size_t>(i)];
    for (Eigen::Index k = 0; k < p; ++k) {
      if (design.censor == CensorScheme::left_quantile && design.censor_rate > 0.0) {
        double dl = out.detection_limits(j, k);
        if (out.complete(i, k) < dl) {
          s.indicators[static_cast<size_t>(k)] = 1;
          s.lower[k] = -kInf;
          s.upper[k] = dl;
          s.values[k] = 0.0;
        }
      } else if (design.censor == CensorScheme::interval) {
        if (out.complete(i, k) < design.interval_upper[k]) {
          s.indicators[static_cast<size_t>(k)] = 1;
          s.lower[k] = design.interval_lower[k];
          s.upper[k] = design.interval_upper[k];
          s.values[k] = 0.0;
        }
      }
    }
    if (design.missing == MissingScheme::mcar && design.missing_rate > 0.0) {
      for (Eigen::Index k = 0; k < p; ++k) {
        if (unif(rng) < design.missing_rate) {
          s.indicators[static_cast<size_t>(k)] = 1;
          s.lower[k] = -kInf;
          s.upper[k] = kInf;
          s.values[k] = 0.0;
        }
      }
    }
    out.rows.push_back(std::move(s));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Imputation.
// ---------------------------------------------------------------------------

ImputationResult impute(const std::vector<CensoredSample>& data, const MixtureModel& model) {
  validate(model);
  const Eigen::Index n = static_cast<Eigen::Index>(data.size());
  const Eigen::Index p = model.dim();
  MixtureEStep e = mixture_e_step(data, model);

  ImputationResult out;
  out.completed.resize(n, p);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& s = data[static_cast<size_t>(i)];
    VectorXd filled = VectorXd::Zero(p);
    for (int j = 0; j < model.n_components(); ++j)
      filled += e.z(i, j) * e.stats[static_cast<size_t>(i)][static_cast<size_t>(j)].y_hat;
    for (Eigen::Index k = 0; k < p; ++k) {
      if (s.is_censored(k)) {
        out.completed(i, k) = filled[k];
        out.imputed_cells.emplace_back(i, k);
      } else {
        out.completed(i, k) = s.values[k];
      }
    }
  }
  return out;
}

ImputationResult impute_column_means(const std::vector<CensoredSample>& data) {
  const Eigen::Index n = static_cast<Eigen::Index>(data.size());
  const Eigen::Index p = data.front().dim();
  VectorXd sum = VectorXd::Zero(p), count = VectorXd::Zero(p);
  for (const auto& s : data)
    for (Eigen::Index k = 0; k < p; ++k)
      if (!s.is_censored(k)) {
        sum[k] += s.values[k];
        count[k] += 1.0;
      }
  ImputationResult out;
  out.completed.resize(n, p);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& s = data[static_cast<size_t>(i)];
    for (Eigen::Index k = 0; k < p; ++k) {
      if (s.is_censored(k)) {
        out.completed(i, k) = count[k] > 0.0 ? sum[k] / count[k] : 0.0;
        out.imputed_cells.emplace_back(i, k);
      } else {
        out.completed(i, k) = s.values[k];
      }
    }
  }
  return out;
}

ImputationAccuracy imputation_accuracy(const ImputationResult& result, const MatrixXd& truth) {
  ImputationAccuracy acc;
  for (const auto& [i, k] : result.imputed_cells) {
    double err = std::abs(result.completed(i, k) - truth(i, k));
    acc.mae += err;
    acc.mare += std::abs(truth(i, k)) > 0.0 ? err / std::abs(truth(i, k)) : 0.0;
    ++acc.cells;
  }
  if (acc.cells > 0) {
    acc.mae /= static_cast<double>(acc.cells);
    acc.mare /= static_cast<double>(acc.cells);
  }
  return acc;
}

// ---------------------------------------------------------------------------
// Classification accuracy.
// ---------------------------------------------------------------------------

namespace {

// Max-weight assignment on a small square matrix (Hungarian, O(g^3)).
std::vector<int> hungarian_max(const MatrixXd& w) {
  const int n = static_cast<int>(w.rows());
  const double big = w.cwiseAbs().maxCoeff() + 1.0;
  // Convert to min-cost.
  MatrixXd cost = MatrixXd::Constant(n, n, big) - w;
  std::vector<double> u(static_cast<size_t>(n + 1)), v(static_cast<size_t>(n + 1));
  std::vector<int> match(static_cast<size_t>(n + 1), 0), way(static_cast<size_t>(n + 1), 0);
  for (int i = 1; i <= n; ++i) {
    match[0] = i;
    int j0 = 0;
    std::vector<double> minv(static_cast<size_t>(n + 1), kInf);
    std::vector<char> used(static_cast<size_t>(n + 1), false);
    do {
      used[static_cast<size_t>(j0)] = true;
      int i0 = match[static_cast<size_t>(j0)], j1 = 0;
      double delta = kInf;
      for (int j = 1; j <= n; ++j) {
        if (used[static_cast<size_t>(j)]) continue;
        double cur = cost(i0 - 1, j - 1) - u[static_cast<size_t>(i0)] - v[static_cast<size_t>(j)];
        if (cur < minv[static_cast<size_t>(j)]) {
          minv[static_cast<size_t>(j)] = cur;
          way[static_cast<size_t>(j)] = j0;
        }
        if (minv[static_cast<size_t>(j)] < delta) {
          delta = minv[static_cast<size_t>(j)];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[static_cast<size_t>(j)]) {
          u[static_cast<size_t>(match[static_cast<size_t>(j)])] += delta;
          v[static_cast<size_t>(j)] -= delta;
        } else {
          minv[static_cast<size_t>(j)] -= delta;
        }
      }
      j0 = j1;
    } while (match[static_cast<size_t>(j0)] != 0);
    do {
      int j1 = way[static_cast<size_t>(j0)];
      match[static_cast<size_t>(j0)] = match[static_cast<size_t>(j1)];
      j0 = j1;
    } while (j0);
  }
  std::vector<int> assign(static_cast<size_t>(n));
  for (int j = 1; j <= n; ++j) assign[static_cast<size_t>(match[static_cast<size_t>(j)] - 1)] = j - 1;
  return assign; // assign[row] = column
}

} // namespace

double classification_ccr(const MatrixXd& posterior, const std::vector<int>& labels) {
  const Eigen::Index n = posterior.rows();
  const int g = static_cast<int>(posterior.cols());
  if (static_cast<Eigen::Index>(labels.size()) != n)
    throw invalid_input_error("classification_ccr: label count mismatch");

  MatrixXd confusion = MatrixXd::Zero(g, g);
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::Index assigned;
    posterior.row(i).maxCoeff(&assigned);
    confusion(labels[static_cast<size_t>(i)], assigned) += 1.0;
  }

  double best = 0.0;
  if (g <= 6) {
    std::vector<int> perm(static_cast<size_t>(g));
    std::iota(perm.begin(), perm.end(), 0);
    do {
      double total = 0.0;
      for (int j = 0; j < g; ++j) total += confusion(j, perm[static_cast<size_t>(j)]);
      best = std::max(best, total);
    } while (std::next_permutation(perm.begin(), perm.end()));
  } else {
    std::vector<int> assign = hungarian_max(confusion);
    for (int j = 0; j < g; ++j) best += confusion(j, assign[static_cast<size_t>(j)]);
  }
  return best / static_cast<double>(n);
}

// ---------------------------------------------------------------------------
// Monte Carlo studies.
// ---------------------------------------------------------------------------

VectorXd pack_parameters(const MixtureModel& model, std::vector<std::string>* names) {
  const int g = model.n_components();
  const Eigen::Index p = model.dim();
  const Eigen::Index nvech = p * (p + 1) / 2;
  VectorXd theta(g * (2 * p + nvech) + g);
  if (names) names->clear();
  Eigen::Index off = 0;
  for (int j = 0; j < g; ++j) {
    const EsnParams& c = model.components[static_cast<size_t>(j)];
    theta.segment(off, p) = c.mu;
    if (names)
      for (Eigen::Index k = 0; k < p; ++k)
        names->push_back("mu[" + std::to_string(j + 1) + "][" + std::to_string(k + 1) + "]");
    off += p;
    theta.segment(off, nvech) = vech(symmetric_sqrt(c.sigma));
    if (names)
      for (Eigen::Index r = 0; r < nvech; ++r) {
        auto [row, col] = vech_indices(r, p);
        names->push_back("alpha[" + std::to_string(j + 1) + "][" + std::to_string(row + 1) + "," +
                         std::to_string(col + 1) + "]");
      }
    off += nvech;
    theta.segment(off, p) = c.lambda;
    if (names)
      for (Eigen::Index k = 0; k < p; ++k)
        names->push_back("lambda[" + std::to_string(j + 1) + "][" + std::to_string(k + 1) + "]");
    off += p;
  }
  theta.segment(off, g) = model.weights;
  if (names)
    for (int j = 0; j < g; ++j) names->push_back("pi[" + std::to_string(j + 1) + "]");
  return theta;
}

MixtureModel align_to_truth(const MixtureModel& fitted, const MixtureModel& truth) {
  const int g = fitted.n_components();
  if (g != truth.n_components() || g > 8) return fitted;
  std::vector<int> perm(static_cast<size_t>(g));
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<int> best = perm;
  double best_d = kInf;
  do {
    double d = 0.0;
    for (int j = 0; j < g; ++j) {
      const EsnParams& a = fitted.components[static_cast<size_t>(perm[static_cast<size_t>(j)])];
      const EsnParams& b = truth.components[static_cast<size_t>(j)];
      d += (a.mu - b.mu).squaredNorm() + (a.lambda - b.lambda).squaredNorm() +
           (vech(a.sigma) - vech(b.sigma)).squaredNorm();
    }
    if (d < best_d) {
      best_d = d;
      best = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));

  MixtureModel out = fitted;
  for (int j = 0; j < g; ++j) {
    out.components[static_cast<size_t>(j)] =
        fitted.components[static_cast<size_t>(best[static_cast<size_t>(j)])];
    out.weights[j] = fitted.weights[best[static_cast<size_t>(j)]];
  }
  return out;
}

StudyResult mc_study(const SimulationDesign& design, const StudyConfig& config) {
  if (config.n_replicates < 2)
    throw invalid_input_error("mc_study: need at least two replicates");
  StudyResult out;
  out.truth = pack_parameters(design.model, &out.param_names);
  const Eigen::Index q = out.truth.size();
  VectorXd sum = VectorXd::Zero(q), sumsq = VectorXd::Zero(q);
  VectorXd abs_err = VectorXd::Zero(q), sq_err = VectorXd::Zero(q);
  VectorXd se_sum = VectorXd::Zero(q);
  long se_count = 0;
  double ccr_sum = 0.0, mae_sum = 0.0, mare_sum = 0.0, base_mae_sum = 0.0;
  long imput_count = 0;

  for (int m = 0; m < config.n_replicates; ++m) {
    SimulationDesign rep = design;
    rep.seed = design.seed + static_cast<unsigned long>(m);
    SimulatedData sim = simulate(rep);
    try {
      FitConfig fc = config.fit;
      fc.seed = rep.seed;
      FitResult fit = fit_fm_msnc(sim.rows, config.g_fit, fc);
      MixtureModel aligned = align_to_truth(fit.model, design.model);
      VectorXd est = pack_parameters(aligned);
      sum += est;
      sumsq += est.cwiseProduct(est);
      abs_err += (est - out.truth).cwiseAbs();
      sq_err += (est - out.truth).cwiseProduct(est - out.truth);
      ++out.replicates_used;

      if (config.compute_ccr && config.g_fit == design.model.n_components()) {
        MatrixXd post = responsibilities(sim.rows, aligned);
        ccr_sum += classification_ccr(post, sim.labels);
      }
      if (config.compute_imputation) {
        ImputationResult imp = impute(sim.rows, fit.model);
        ImputationAccuracy acc = imputation_accuracy(imp, sim.complete);
        ImputationAccuracy base =
            imputation_accuracy(impute_column_means(sim.rows), sim.complete);
        if (acc.cells > 0) {
          mae_sum += acc.mae;
          mare_sum += acc.mare;
          base_mae_sum += base.mae;
          ++imput_count;
        }
      }
      if (fit.std_errors.size() > 0) {
        // Standard errors are reported in score order; re-pack into the
        // study order (per component mu, alpha, lambda, then weights).
        const int g = config.g_fit;
        const Eigen::Index p = design.model.dim();
        const Eigen::Index nvech = p * (p + 1) / 2;
        if (g == design.model.n_components()) {
          VectorXd se(q);
          Eigen::Index off = 0;
          for (int j = 0; j < g; ++j) {
            se.segment(off, p) = fit.std_errors.segment(j * p, p);
            off += p;
            se.segment(off, nvech) = fit.std_errors.segment(g * p + j * nvech, nvech);
            off += nvech;
            se.segment(off, p) = fit.std_errors.segment(g * p + g * nvech + j * p, p);
            off += p;
          }
          for (int j = 0; j < g; ++j)
            se[off + j] = j + 1 < g ? fit.std_errors[g * (2 * p + nvech) + j] : 0.0;
          se_sum += se;
          ++se_count;
        }
      }
    } catch (const std::exception& err) {
      ++out.failures;
      std::cerr << "mc_study: replicate " << m << " failed: " << err.what() << "\n";
      if (out.failures > config.n_replicates / 5)
        throw invalid_input_error("mc_study: more than 20% of replicates failed");
    }
  }

  double used = static_cast<double>(out.replicates_used);
  out.mc_mean = sum / used;
  out.mc_sd = ((sumsq / used - out.mc_mean.cwiseProduct(out.mc_mean)).cwiseMax(0.0) * used /
               std::max(1.0, used - 1.0))
                  .cwiseSqrt();
  out.bias = abs_err / used;
  out.mse = sq_err / used;
  if (se_count > 0) out.mean_im_se = se_sum / static_cast<double>(se_count);
  if (config.compute_ccr) out.mean_ccr = ccr_sum / used;
  if (imput_count > 0) {
    out.mean_mae = mae_sum / static_cast<double>(imput_count);
    out.mean_mare = mare_sum / static_cast<double>(imput_count);
    out.baseline_mae = base_mae_sum / static_cast<double>(imput_count);
  }
  return out;
}

} // namespace msnmix
