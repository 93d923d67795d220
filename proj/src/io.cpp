#include "msnmix/io.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace msnmix {

using nlohmann::json;

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      cells.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  cells.push_back(cur);
  return cells;
}

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

double parse_cell(const std::string& cell, double empty_value, long row, const std::string& col) {
  std::string t = trim(cell);
  if (t.empty()) return empty_value;
  if (t == "inf" || t == "+inf") return kInf;
  if (t == "-inf") return -kInf;
  try {
    size_t pos = 0;
    double v = std::stod(t, &pos);
    if (pos != t.size()) throw std::invalid_argument(t);
    return v;
  } catch (const std::exception&) {
    throw invalid_input_error("dataset: cannot parse cell '" + t + "' at row " +
                              std::to_string(row) + ", column " + col);
  }
}

std::string format_number(double v) {
  if (v == kInf || v == -kInf) return ""; // infinite bounds are empty cells
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

} // namespace

Dataset parse_dataset_csv(std::istream& in) {
  Dataset out;
  std::string line;
  if (!std::getline(in, line)) throw invalid_input_error("dataset: empty file");
  out.header = split_csv_line(line);

  // The header fixes p: y1..yp, c1..cp, lo1..lop, hi1..hip.
  Eigen::Index p = 0;
  while (static_cast<size_t>(p) < out.header.size() &&
         trim(out.header[static_cast<size_t>(p)]) == "y" + std::to_string(p + 1))
    ++p;
  if (p == 0 || out.header.size() != static_cast<size_t>(4 * p))
    throw invalid_input_error("dataset: header must be y1..yp,c1..cp,lo1..lop,hi1..hip");
  for (Eigen::Index k = 0; k < p; ++k) {
    if (trim(out.header[static_cast<size_t>(p + k)]) != "c" + std::to_string(k + 1) ||
        trim(out.header[static_cast<size_t>(2 * p + k)]) != "lo" + std::to_string(k + 1) ||
        trim(out.header[static_cast<size_t>(3 * p + k)]) != "hi" + std::to_string(k + 1))
      throw invalid_input_error("dataset: header must be y1..yp,c1..cp,lo1..lop,hi1..hip");
  }
  out.p = p;

  long row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    std::vector<std::string> cells = split_csv_line(line);
    if (cells.size() != static_cast<size_t>(4 * p))
      throw invalid_input_error("dataset: row " + std::to_string(row) + " has " +
                                std::to_string(cells.size()) + " cells, expected " +
                                std::to_string(4 * p));
    CensoredSample s;
    s.values = VectorXd::Zero(p);
    s.indicators.assign(static_cast<size_t>(p), 0);
    s.lower = VectorXd::Constant(p, -kInf);
    s.upper = VectorXd::Constant(p, kInf);
    for (Eigen::Index k = 0; k < p; ++k) {
      double c = parse_cell(cells[static_cast<size_t>(p + k)], 0.0, row, "c" + std::to_string(k + 1));
      if (c != 0.0 && c != 1.0)
        throw invalid_input_error("dataset: indicator must be 0 or 1 at row " +
                                  std::to_string(row) + ", column c" + std::to_string(k + 1));
      s.indicators[static_cast<size_t>(k)] = static_cast<int>(c);
      if (s.indicators[static_cast<size_t>(k)] == 0) {
        s.values[k] = parse_cell(cells[static_cast<size_t>(k)],
                                 std::numeric_limits<double>::quiet_NaN(), row,
                                 "y" + std::to_string(k + 1));
        if (std::isnan(s.values[k]))
          throw invalid_input_error("dataset: missing value for observed cell at row " +
                                    std::to_string(row) + ", column y" + std::to_string(k + 1));
      } else {
        s.lower[k] = parse_cell(cells[static_cast<size_t>(2 * p + k)], -kInf, row,
                                "lo" + std::to_string(k + 1));
        s.upper[k] = parse_cell(cells[static_cast<size_t>(3 * p + k)], kInf, row,
                                "hi" + std::to_string(k + 1));
        if (s.lower[k] > s.upper[k])
          throw invalid_input_error("dataset: lo > hi at row " + std::to_string(row) +
                                    ", column lo" + std::to_string(k + 1));
      }
    }
    out.rows.push_back(std::move(s));
    out.raw.push_back(std::move(cells));
  }
  return out;
}

Dataset parse_dataset_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw invalid_input_error("cannot open dataset file: " + path);
  return parse_dataset_csv(in);
}

std::string emit_dataset_csv(const std::vector<CensoredSample>& rows) {
  if (rows.empty()) throw invalid_input_error("emit_dataset_csv: no rows");
  const Eigen::Index p = rows.front().dim();
  std::ostringstream os;
  for (Eigen::Index k = 0; k < p; ++k) os << "y" << k + 1 << ",";
  for (Eigen::Index k = 0; k < p; ++k) os << "c" << k + 1 << ",";
  for (Eigen::Index k = 0; k < p; ++k) os << "lo" << k + 1 << ",";
  for (Eigen::Index k = 0; k < p; ++k) os << "hi" << k + 1 << (k + 1 < p ? "," : "\n");
  for (const auto& s : rows) {
    for (Eigen::Index k = 0; k < p; ++k)
      os << (s.is_censored(k) ? "" : format_number(s.values[k])) << ",";
    for (Eigen::Index k = 0; k < p; ++k) os << (s.is_censored(k) ? 1 : 0) << ",";
    for (Eigen::Index k = 0; k < p; ++k)
      os << (s.is_censored(k) ? format_number(s.lower[k]) : "") << ",";
    for (Eigen::Index k = 0; k < p; ++k)
      os << (s.is_censored(k) ? format_number(s.upper[k]) : "") << (k + 1 < p ? "," : "\n");
  }
  return os.str();
}

std::string emit_dataset_csv(const Dataset& dataset) {
  std::ostringstream os;
  for (size_t k = 0; k < dataset.header.size(); ++k)
    os << dataset.header[k] << (k + 1 < dataset.header.size() ? "," : "\n");
  for (const auto& cells : dataset.raw) {
    for (size_t k = 0; k < cells.size(); ++k)
      os << cells[k] << (k + 1 < cells.size() ? "," : "\n");
  }
  return os.str();
}

void write_file(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw invalid_input_error("cannot write file: " + path);
  out << contents;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw invalid_input_error("cannot open file: " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

// ---------------------------------------------------------------------------
// JSON helpers.
// ---------------------------------------------------------------------------

namespace {

json vector_to_json(const VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

json matrix_to_json(const MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json r = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) r.push_back(m(i, j));
    rows.push_back(r);
  }
  return rows;
}

VectorXd vector_from_json(const json& a) {
  VectorXd v(a.size());
  for (size_t i = 0; i < a.size(); ++i) v[static_cast<Eigen::Index>(i)] = a[i].get<double>();
  return v;
}

MatrixXd matrix_from_json(const json& a) {
  if (a.empty()) return MatrixXd();
  MatrixXd m(a.size(), a[0].size());
  for (size_t i = 0; i < a.size(); ++i)
    for (size_t j = 0; j < a[i].size(); ++j)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = a[i][j].get<double>();
  return m;
}

json model_to_json(const MixtureModel& model) {
  json out;
  out["weights"] = vector_to_json(model.weights);
  out["shared_gamma"] = model.shared_gamma;
  json comps = json::array();
  for (const auto& c : model.components) {
    json jc;
    jc["mu"] = vector_to_json(c.mu);
    jc["sigma"] = matrix_to_json(c.sigma);
    jc["lambda"] = vector_to_json(c.lambda);
    comps.push_back(jc);
  }
  out["components"] = comps;
  return out;
}

MixtureModel model_from_json(const json& j) {
  MixtureModel model;
  model.weights = vector_from_json(j.at("weights"));
  model.shared_gamma = j.value("shared_gamma", false);
  for (const auto& jc : j.at("components")) {
    EsnParams c;
    c.mu = vector_from_json(jc.at("mu"));
    c.sigma = matrix_from_json(jc.at("sigma"));
    c.lambda = vector_from_json(jc.at("lambda"));
    c.tau = 0.0;
    model.components.push_back(std::move(c));
  }
  return model;
}

} // namespace

DesignFile parse_design_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const std::exception& err) {
    throw invalid_input_error(std::string("design: invalid JSON: ") + err.what());
  }
  DesignFile out;
  out.design.model = model_from_json(j);
  out.design.n = j.value("n", 0L);
  out.design.seed = j.value("seed", 1UL);
  if (j.contains("censoring")) {
    const json& c = j["censoring"];
    std::string scheme = c.value("scheme", "none");
    if (scheme == "none") {
      out.design.censor = CensorScheme::none;
    } else if (scheme == "left_quantile") {
      out.design.censor = CensorScheme::left_quantile;
      out.design.censor_rate = c.at("rate").get<double>();
    } else if (scheme == "interval") {
      out.design.censor = CensorScheme::interval;
      out.design.interval_lower = vector_from_json(c.at("lower"));
      out.design.interval_upper = vector_from_json(c.at("upper"));
    } else {
      throw invalid_input_error("design: unknown censoring scheme '" + scheme + "'");
    }
  }
  if (j.contains("missing")) {
    const json& m = j["missing"];
    std::string scheme = m.value("scheme", "none");
    if (scheme == "none") {
      out.design.missing = MissingScheme::none;
    } else if (scheme == "mcar") {
      out.design.missing = MissingScheme::mcar;
      out.design.missing_rate = m.at("rate").get<double>();
    } else {
      throw invalid_input_error("design: unknown missing scheme '" + scheme + "'");
    }
  }
  if (j.contains("sizes"))
    for (const auto& v : j["sizes"]) out.sizes.push_back(v.get<long>());
  out.replicates = j.value("replicates", 0);
  validate(out.design);
  return out;
}

DesignFile parse_design_json_file(const std::string& path) {
  return parse_design_json(read_file(path));
}

std::string emit_design_json(const DesignFile& file) {
  json j = model_to_json(file.design.model);
  j["n"] = file.design.n;
  j["seed"] = file.design.seed;
  switch (file.design.censor) {
    case CensorScheme::none:
      j["censoring"] = {{"scheme", "none"}};
      break;
    case CensorScheme::left_quantile:
      j["censoring"] = {{"scheme", "left_quantile"}, {"rate", file.design.censor_rate}};
      break;
    case CensorScheme::interval:
      j["censoring"] = {{"scheme", "interval"},
                        {"lower", vector_to_json(file.design.interval_lower)},
                        {"upper", vector_to_json(file.design.interval_upper)}};
      break;
  }
  if (file.design.missing == MissingScheme::mcar)
    j["missing"] = {{"scheme", "mcar"}, {"rate", file.design.missing_rate}};
  else
    j["missing"] = {{"scheme", "none"}};
  if (!file.sizes.empty()) j["sizes"] = file.sizes;
  if (file.replicates > 0) j["replicates"] = file.replicates;
  return j.dump(2) + "\n";
}

std::string emit_truth_json(const SimulationDesign& design, const SimulatedData& data) {
  json j;
  j["model"] = model_to_json(design.model);
  j["seed"] = design.seed;
  j["labels"] = data.labels;
  j["complete"] = matrix_to_json(data.complete);
  if (data.detection_limits.size() > 0)
    j["detection_limits"] = matrix_to_json(data.detection_limits);
  return j.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// Fit reports.
// ---------------------------------------------------------------------------

std::string emit_report_json(const FitReport& report) {
  json j;
  j["n"] = report.n;
  j["p"] = report.p;
  j["family"] = report.normal_family ? "normal" : "skew-normal";
  j["shared_gamma"] = report.shared_gamma;
  json fits = json::array();
  int best_aic = 0, best_bic = 0, best_edc = 0;
  double aic = kInf, bic = kInf, edc = kInf;
  for (const auto& entry : report.fits) {
    json f;
    f["g"] = entry.g;
    if (!entry.error.empty()) {
      f["error"] = entry.error;
      fits.push_back(f);
      continue;
    }
    const FitResult& r = entry.result;
    f["converged"] = r.converged;
    f["iterations"] = r.iterations;
    f["loglik"] = r.loglik();
    f["loglik_trace"] = r.loglik_trace;
    f["n_params"] = r.n_params;
    f["criteria"] = {{"aic", r.criteria.aic}, {"bic", r.criteria.bic}, {"edc", r.criteria.edc}};
    f["model"] = model_to_json(r.model);
    if (r.std_errors.size() > 0) {
      f["std_errors"] = vector_to_json(r.std_errors);
      f["param_names"] = r.param_names;
    }
    f["posterior"] = matrix_to_json(r.posterior);
    json cls = json::array();
    for (Eigen::Index i = 0; i < r.posterior.rows(); ++i) {
      Eigen::Index arg;
      r.posterior.row(i).maxCoeff(&arg);
      cls.push_back(arg + 1);
    }
    f["classification"] = cls;
    if (r.criteria.aic < aic) {
      aic = r.criteria.aic;
      best_aic = entry.g;
    }
    if (r.criteria.bic < bic) {
      bic = r.criteria.bic;
      best_bic = entry.g;
    }
    if (r.criteria.edc < edc) {
      edc = r.criteria.edc;
      best_edc = entry.g;
    }
    fits.push_back(f);
  }
  j["fits"] = fits;
  if (std::isfinite(aic)) j["best"] = {{"aic", best_aic}, {"bic", best_bic}, {"edc", best_edc}};
  return j.dump(2) + "\n";
}

std::string format_report_table(const FitReport& report) {
  std::ostringstream os;
  os << "model family: " << (report.normal_family ? "normal" : "skew-normal")
     << (report.shared_gamma ? ", shared dispersion" : "") << "\n";
  os << "n = " << report.n << ", p = " << report.p << "\n\n";
  char line[160];
  std::snprintf(line, sizeof(line), "%4s %12s %10s %12s %12s %12s %6s %5s\n", "G", "loglik",
                "params", "AIC", "BIC", "EDC", "iters", "conv");
  os << line;
  for (const auto& entry : report.fits) {
    if (!entry.error.empty()) {
      std::snprintf(line, sizeof(line), "%4d failed: %s\n", entry.g, entry.error.c_str());
      os << line;
      continue;
    }
    const FitResult& r = entry.result;
    std::snprintf(line, sizeof(line), "%4d %12.4f %10d %12.3f %12.3f %12.3f %6d %5s\n", entry.g,
                  r.loglik(), r.n_params, r.criteria.aic, r.criteria.bic, r.criteria.edc,
                  r.iterations, r.converged ? "yes" : "no");
    os << line;
  }
  for (const auto& entry : report.fits) {
    if (!entry.error.empty()) continue;
    const FitResult& r = entry.result;
    os << "\nG = " << entry.g << " estimates\n";
    os << "  weights:";
    for (Eigen::Index j = 0; j < r.model.weights.size(); ++j)
      os << " " << r.model.weights[j];
    os << "\n";
    for (int j = 0; j < r.model.n_components(); ++j) {
      const EsnParams& c = r.model.components[static_cast<size_t>(j)];
      os << "  component " << j + 1 << "\n";
      os << "    mu:     " << c.mu.transpose() << "\n";
      os << "    lambda: " << c.lambda.transpose() << "\n";
      os << "    sigma:\n";
      for (Eigen::Index a = 0; a < c.sigma.rows(); ++a)
        os << "      " << c.sigma.row(a) << "\n";
    }
    if (r.std_errors.size() > 0) {
      os << "  standard errors:\n";
      for (size_t k = 0; k < r.param_names.size(); ++k) {
        std::snprintf(line, sizeof(line), "    %-16s %12.5f\n", r.param_names[k].c_str(),
                      r.std_errors[static_cast<Eigen::Index>(k)]);
        os << line;
      }
    }
  }
  return os.str();
}

MixtureModel model_from_report_json(const std::string& text, int g) {
  json j;
  try {
    j = json::parse(text);
  } catch (const std::exception& err) {
    throw invalid_input_error(std::string("report: invalid JSON: ") + err.what());
  }
  if (g == 0) {
    if (!j.contains("best")) throw invalid_input_error("report: no successful fits");
    g = j["best"]["bic"].get<int>();
  }
  for (const auto& f : j.at("fits")) {
    if (f.value("g", -1) == g && !f.contains("error")) return model_from_json(f.at("model"));
  }
  throw invalid_input_error("report: no fit with G = " + std::to_string(g));
}

std::string emit_imputed_csv(const Dataset& input, const ImputationResult& imputed) {
  std::ostringstream os;
  for (size_t k = 0; k < input.header.size(); ++k) os << input.header[k] << ",";
  os << "imputed\n";
  const Eigen::Index p = input.p;
  for (size_t i = 0; i < input.raw.size(); ++i) {
    std::vector<std::string> cells = input.raw[i];
    std::string audit;
    for (Eigen::Index k = 0; k < p; ++k) {
      if (input.rows[i].is_censored(k)) {
        cells[static_cast<size_t>(k)] =
            format_number(imputed.completed(static_cast<Eigen::Index>(i), k));
        if (!audit.empty()) audit += ";";
        audit += "y" + std::to_string(k + 1);
      }
    }
    for (const auto& cell : cells) os << cell << ",";
    os << audit << "\n";
  }
  return os.str();
}

} // namespace msnmix
