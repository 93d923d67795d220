// Command-line front end: fit mixtures of censored skew-normal data, run
// simulations and Monte Carlo studies, and export imputations.

#include "msnmix/analysis.hpp"
#include "msnmix/io.hpp"
#include "msnmix/mixture.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <iostream>

using namespace msnmix;

namespace {

struct CommonOpts {
  int g = 1;
  int g_max = 0;
  std::string family = "skew-normal";
  bool shared_gamma = false;
  double tol = 1e-6;
  int max_iter = 500;
  int starts = 1;
  unsigned long seed = 20240101;
  std::string out;
};

void add_fit_flags(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--g", opts.g, "number of components (or lower end of a range)");
  cmd->add_option("--g-max", opts.g_max, "upper end of the component range");
  cmd->add_option("--family", opts.family, "skew-normal or normal")
      ->check(CLI::IsMember({"skew-normal", "normal"}));
  cmd->add_flag("--shared-gamma", opts.shared_gamma, "pool the dispersion across components");
  cmd->add_option("--tol", opts.tol, "relative loglik stopping tolerance");
  cmd->add_option("--max-iter", opts.max_iter, "EM iteration cap");
  cmd->add_option("--starts", opts.starts, "number of EM starts (distinct seeds)");
  cmd->add_option("--seed", opts.seed, "seed for initialization");
}

FitConfig to_config(const CommonOpts& opts, bool with_se) {
  FitConfig config;
  config.tol = opts.tol;
  config.max_iter = opts.max_iter;
  config.fix_lambda_zero = opts.family == "normal";
  config.shared_gamma = opts.shared_gamma;
  config.n_starts = opts.starts;
  config.seed = opts.seed;
  config.compute_std_errors = with_se;
  return config;
}

int cmd_fit(const std::string& data_path, const CommonOpts& opts, bool with_se) {
  Dataset dataset = parse_dataset_csv_file(data_path);
  FitReport report;
  report.n = static_cast<long>(dataset.rows.size());
  report.p = dataset.p;
  report.shared_gamma = opts.shared_gamma;
  report.normal_family = opts.family == "normal";

  int g_hi = std::max(opts.g, opts.g_max);
  bool any_ok = false;
  for (int g = opts.g; g <= g_hi; ++g) {
    FitReportEntry entry;
    entry.g = g;
    try {
      entry.result = fit_fm_msnc(dataset.rows, g, to_config(opts, with_se));
      any_ok = true;
    } catch (const std::exception& err) {
      entry.error = err.what();
      std::cerr << "fit with G = " << g << " failed: " << err.what() << "\n";
    }
    report.fits.push_back(std::move(entry));
  }
  std::cout << format_report_table(report);
  if (!opts.out.empty()) write_file(opts.out, emit_report_json(report));
  return any_ok ? 0 : 2;
}

int cmd_simulate(const std::string& design_path, const std::string& out_path,
                 const std::string& truth_path) {
  DesignFile file = parse_design_json_file(design_path);
  SimulatedData data = simulate(file.design);
  write_file(out_path, emit_dataset_csv(data.rows));
  if (!truth_path.empty()) write_file(truth_path, emit_truth_json(file.design, data));
  std::cout << "wrote " << data.rows.size() << " rows to " << out_path << "\n";
  long censored = 0, missing = 0;
  for (const auto& r : data.rows)
    for (Eigen::Index k = 0; k < r.dim(); ++k) {
      if (r.is_missing(k))
        ++missing;
      else if (r.is_censored(k))
        ++censored;
    }
  std::cout << "censored cells: " << censored << ", missing cells: " << missing << "\n";
  return 0;
}

int cmd_impute(const std::string& data_path, const std::string& model_path, int g,
               const std::string& out_path) {
  Dataset dataset = parse_dataset_csv_file(data_path);
  MixtureModel model = model_from_report_json(read_file(model_path), g);
  if (model.dim() != dataset.p)
    throw invalid_input_error("impute: report dimension does not match the dataset");
  ImputationResult result = impute(dataset.rows, model);
  std::string csv = emit_imputed_csv(dataset, result);
  if (!out_path.empty())
    write_file(out_path, csv);
  else
    std::cout << csv;
  std::cerr << "imputed " << result.imputed_cells.size() << " cells\n";

  // Side-by-side baseline so the numbers are easy to sanity check.
  ImputationResult baseline = impute_column_means(dataset.rows);
  double shift = 0.0;
  for (const auto& [i, k] : result.imputed_cells)
    shift += std::abs(result.completed(i, k) - baseline.completed(i, k));
  if (!result.imputed_cells.empty())
    std::cerr << "mean |model - column_mean| over imputed cells: "
              << shift / static_cast<double>(result.imputed_cells.size()) << "\n";
  return 0;
}

int cmd_study(const std::string& design_path, int replicates, const CommonOpts& opts,
              bool with_se) {
  DesignFile file = parse_design_json_file(design_path);
  if (replicates <= 0) replicates = file.replicates > 0 ? file.replicates : 100;

  StudyConfig config;
  config.fit = to_config(opts, with_se);
  config.g_fit = opts.g > 1 ? opts.g : file.design.model.n_components();
  config.n_replicates = replicates;
  config.compute_imputation = file.design.missing == MissingScheme::mcar;

  std::vector<long> sizes = file.sizes;
  if (sizes.empty()) sizes.push_back(file.design.n);

  nlohmann::json out_json;
  out_json["replicates"] = replicates;
  nlohmann::json per_size = nlohmann::json::array();
  char line[200];
  for (long n : sizes) {
    SimulationDesign design = file.design;
    design.n = n;
    StudyResult res = mc_study(design, config);
    std::printf("n = %ld (%d replicates used, %d failures)\n", n, res.replicates_used,
                res.failures);
    std::snprintf(line, sizeof(line), "%-16s %10s %10s %10s %10s %10s %10s\n", "parameter",
                  "truth", "MC mean", "MC Sd", "IM SE", "bias", "mse");
    std::printf("%s", line);
    for (size_t k = 0; k < res.param_names.size(); ++k) {
      Eigen::Index i = static_cast<Eigen::Index>(k);
      std::snprintf(line, sizeof(line), "%-16s %10.4f %10.4f %10.4f %10.4f %10.4f %10.4f\n",
                    res.param_names[k].c_str(), res.truth[i], res.mc_mean[i], res.mc_sd[i],
                    res.mean_im_se.size() > 0 ? res.mean_im_se[i] : 0.0, res.bias[i],
                    res.mse[i]);
      std::printf("%s", line);
    }
    if (config.compute_ccr) std::printf("mean CCR: %.4f\n", res.mean_ccr);
    if (config.compute_imputation)
      std::printf("imputation MAE %.4f (column-mean baseline %.4f), MARE %.4f\n", res.mean_mae,
                  res.baseline_mae, res.mean_mare);
    std::printf("\n");

    nlohmann::json js;
    js["n"] = n;
    js["replicates_used"] = res.replicates_used;
    js["failures"] = res.failures;
    js["param_names"] = res.param_names;
    auto vec = [](const VectorXd& v) {
      std::vector<double> o(v.data(), v.data() + v.size());
      return o;
    };
    js["truth"] = vec(res.truth);
    js["mc_mean"] = vec(res.mc_mean);
    js["mc_sd"] = vec(res.mc_sd);
    if (res.mean_im_se.size() > 0) js["mean_im_se"] = vec(res.mean_im_se);
    js["bias"] = vec(res.bias);
    js["mse"] = vec(res.mse);
    js["mean_ccr"] = res.mean_ccr;
    if (config.compute_imputation) {
      js["mean_mae"] = res.mean_mae;
      js["mean_mare"] = res.mean_mare;
      js["baseline_mae"] = res.baseline_mae;
    }
    per_size.push_back(js);
  }
  out_json["results"] = per_size;
  if (!opts.out.empty()) write_file(opts.out, out_json.dump(2) + "\n");
  return 0;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"finite mixtures of multivariate skew-normal distributions "
               "for censored and missing data"};
  app.require_subcommand(1);

  CommonOpts fit_opts;
  std::string fit_data;
  bool fit_no_se = false;
  CLI::App* fit = app.add_subcommand("fit", "fit models across a component range");
  fit->add_option("data", fit_data, "dataset CSV")->required();
  add_fit_flags(fit, fit_opts);
  fit->add_option("--out", fit_opts.out, "write a JSON report here");
  fit->add_flag("--no-se", fit_no_se, "skip standard errors");

  std::string sim_design, sim_out = "dataset.csv", sim_truth;
  CLI::App* sim = app.add_subcommand("simulate", "draw a dataset from a design file");
  sim->add_option("design", sim_design, "design JSON")->required();
  sim->add_option("--out", sim_out, "output dataset CSV");
  sim->add_option("--truth", sim_truth, "also write the generating truth (JSON)");

  std::string imp_data, imp_model, imp_out;
  int imp_g = 0;
  CLI::App* imp = app.add_subcommand("impute", "complete a dataset from a fitted report");
  imp->add_option("data", imp_data, "dataset CSV")->required();
  imp->add_option("--model", imp_model, "fit report JSON")->required();
  imp->add_option("--g", imp_g, "component count to read from the report (default: best BIC)");
  imp->add_option("--out", imp_out, "output CSV (stdout when omitted)");

  CommonOpts study_opts;
  std::string study_design;
  int study_reps = 0;
  bool study_no_se = false;
  CLI::App* study = app.add_subcommand("study", "Monte Carlo study over a design file");
  study->add_option("design", study_design, "design JSON")->required();
  study->add_option("--replicates", study_reps, "number of Monte Carlo replicates");
  add_fit_flags(study, study_opts);
  study->add_option("--out", study_opts.out, "write a JSON summary here");
  study->add_flag("--no-se", study_no_se, "skip standard errors");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (fit->parsed()) return cmd_fit(fit_data, fit_opts, !fit_no_se);
    if (sim->parsed()) return cmd_simulate(sim_design, sim_out, sim_truth);
    if (imp->parsed()) return cmd_impute(imp_data, imp_model, imp_g, imp_out);
    if (study->parsed()) return cmd_study(study_design, study_reps, study_opts, !study_no_se);
  } catch (const invalid_input_error& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  } catch (const std::exception& err) {
    std::cerr << "numerical failure: " << err.what() << "\n";
    return 2;
  }
  return 1;
}
