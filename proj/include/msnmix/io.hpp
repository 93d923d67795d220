#pragma once

#include "msnmix/analysis.hpp"
#include "msnmix/types.hpp"

#include <iosfwd>
#include <string>

namespace msnmix {

// ---------------------------------------------------------------------------
// Dataset CSV: columns y1..yp, c1..cp, lo1..lop, hi1..hip.  Empty bound
// cells mean -inf / +inf; empty value cells are allowed (and ignored) where
// the indicator is 1.  Raw tokens are kept so rewrites leave untouched
// cells byte-identical.
// ---------------------------------------------------------------------------

struct Dataset {
  std::vector<CensoredSample> rows;
  Eigen::Index p = 0;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> raw; // cells per row, as read
};

Dataset parse_dataset_csv(std::istream& in);
Dataset parse_dataset_csv_file(const std::string& path);

/// Serializes rows in the dataset layout (used by the simulator; numeric
/// cells are written with round-trippable precision).
std::string emit_dataset_csv(const std::vector<CensoredSample>& rows);

/// Value-identical re-emission of a parsed dataset.
std::string emit_dataset_csv(const Dataset& dataset);

void write_file(const std::string& path, const std::string& contents);
std::string read_file(const std::string& path);

// ---------------------------------------------------------------------------
// Design JSON for simulate/study.
// ---------------------------------------------------------------------------

struct DesignFile {
  SimulationDesign design;
  std::vector<long> sizes; // optional n-sweep for study mode
  int replicates = 0;      // optional default replicate count
};

DesignFile parse_design_json(const std::string& text);
DesignFile parse_design_json_file(const std::string& path);
std::string emit_design_json(const DesignFile& file);

/// Truth sidecar emitted next to a simulated dataset: the generating model,
/// labels, and the latent complete matrix.
std::string emit_truth_json(const SimulationDesign& design, const SimulatedData& data);

// ---------------------------------------------------------------------------
// Fit reports.
// ---------------------------------------------------------------------------

struct FitReportEntry {
  int g = 0;
  FitResult result;
  std::string error; // non-empty when this G failed
};

struct FitReport {
  long n = 0;
  Eigen::Index p = 0;
  bool shared_gamma = false;
  bool normal_family = false;
  std::vector<FitReportEntry> fits;
};

std::string emit_report_json(const FitReport& report);
std::string format_report_table(const FitReport& report);

/// Reads the fitted mixture for a given G back from a report (the best-BIC
/// entry when g == 0).
MixtureModel model_from_report_json(const std::string& text, int g = 0);

/// Completed matrix next to the original tokens; an extra audit column
/// lists the imputed cells of each row.
std::string emit_imputed_csv(const Dataset& input, const ImputationResult& imputed);

} // namespace msnmix
