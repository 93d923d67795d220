#pragma once

#include "msnmix/mixture.hpp"
#include "msnmix/types.hpp"

namespace msnmix {

// ---------------------------------------------------------------------------
// Data simulation with censoring / missingness injection.
// ---------------------------------------------------------------------------

enum class CensorScheme { none, left_quantile, interval };
enum class MissingScheme { none, mcar };

struct SimulationDesign {
  MixtureModel model; // truth
  long n = 0;
  CensorScheme censor = CensorScheme::none;
  double censor_rate = 0.0;      // left_quantile
  VectorXd interval_lower;       // interval scheme bounds per coordinate
  VectorXd interval_upper;
  MissingScheme missing = MissingScheme::none;
  double missing_rate = 0.0;
  unsigned long seed = 1u;
};

void validate(const SimulationDesign& design);

struct SimulatedData {
  MatrixXd complete;                // n x p latent values
  std::vector<CensoredSample> rows; // after censoring/missing injection
  std::vector<int> labels;          // true component per row
  MatrixXd detection_limits;        // G x p (left_quantile scheme), else empty
};

/// Draws from the latent convolution representation, then applies the
/// censoring scheme (detection limits at the empirical quantile within each
/// component for left_quantile) and MCAR masking.  Deterministic given the
/// design seed.
SimulatedData simulate(const SimulationDesign& design);

// ---------------------------------------------------------------------------
// Imputation.
// ---------------------------------------------------------------------------

struct ImputationResult {
  MatrixXd completed;                                  // observed passed through
  std::vector<std::pair<Eigen::Index, Eigen::Index>> imputed_cells; // (row, col)
};

/// Posterior-weighted conditional-mean completion: censored entries receive
/// truncated conditional means, missing entries conditional means, averaged
/// over components by responsibility.
ImputationResult impute(const std::vector<CensoredSample>& data, const MixtureModel& model);

/// Column means of the observed entries fill every unobserved cell
/// (baseline competitor).
ImputationResult impute_column_means(const std::vector<CensoredSample>& data);

/// Mean absolute error and mean absolute relative error over the unobserved
/// cells, against the complete matrix.
struct ImputationAccuracy {
  double mae = 0.0;
  double mare = 0.0;
  long cells = 0;
};
ImputationAccuracy imputation_accuracy(const ImputationResult& result, const MatrixXd& truth);

// ---------------------------------------------------------------------------
// Clustering and Monte Carlo study summaries.
// ---------------------------------------------------------------------------

/// Correct classification rate: MAP labels against the truth, maximized
/// over label permutations (enumerated for G <= 6, Hungarian assignment
/// beyond).
double classification_ccr(const MatrixXd& posterior, const std::vector<int>& labels);

struct StudyConfig {
  FitConfig fit;
  int g_fit = 2;
  int n_replicates = 100;
  bool compute_ccr = true;
  bool compute_imputation = false;
};

struct StudyResult {
  std::vector<std::string> param_names;
  VectorXd truth;
  VectorXd mc_mean;
  VectorXd mc_sd;
  VectorXd mean_im_se; // empty when SEs disabled
  VectorXd bias;       // mean |estimate - truth|
  VectorXd mse;
  double mean_ccr = 0.0;
  double mean_mae = 0.0;
  double mean_mare = 0.0;
  double baseline_mae = 0.0; // column-mean imputation
  int replicates_used = 0;
  int failures = 0;
};

/// Repeated simulate-fit-summarize passes.  Replicate m uses seed
/// design.seed + m; labels are aligned to the truth by the permutation
/// minimizing the summed parameter distance.  Aborts when more than 20% of
/// replicates fail.
StudyResult mc_study(const SimulationDesign& design, const StudyConfig& config);

/// Stacked parameter vector (mu, vech F, lambda per component, then
/// weights) used for study summaries.
VectorXd pack_parameters(const MixtureModel& model, std::vector<std::string>* names = nullptr);

/// Best label permutation of `fitted` against `truth` under summed
/// parameter distance; returns the permuted model.
MixtureModel align_to_truth(const MixtureModel& fitted, const MixtureModel& truth);

} // namespace msnmix
