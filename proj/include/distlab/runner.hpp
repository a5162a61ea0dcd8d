#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "distlab/data.hpp"
#include "distlab/frameworks.hpp"
#include "distlab/models.hpp"

namespace distlab {

extern const std::vector<std::string> kFrameworkNames;  // report row order
std::string framework_label(const std::string& framework);  // "x->M_T" etc.
std::string classifier_label(Family family);                // "CNN" / "LSTM"

/// One dataset of the grid: either a TSV pair or synthetic parameters.
struct DataConfig {
  std::string name;
  bool synthetic = false;
  SyntheticParams synth;
  std::string train_path;
  std::string test_path;
  int max_len = 64;
  int vocab_cap = 20000;
};

struct ExperimentConfig {
  std::string name = "experiment";
  std::vector<Family> classifiers;
  std::vector<std::string> frameworks;  // subset of kFrameworkNames
  std::vector<uint64_t> seeds;
  std::string output_dir = "out";
  int workers = 1;
  TrainConfig train;  // seed/max_len/vocab_cap filled per cell
  std::vector<DataConfig> datasets;
};

/// Line-oriented `key = value` config with `#` comments and [experiment],
/// [train], [data] sections; [data] may repeat, one per dataset. Unknown
/// keys are errors.
ExperimentConfig parse_config_text(const std::string& text,
                                   const std::string& origin = "<config>");
ExperimentConfig parse_config_file(const std::string& path);

/// Checks cross-field invariants and that referenced paths exist.
void validate_experiment(const ExperimentConfig& config);

struct RunResult {
  std::string classifier;  // family_name()
  std::string framework;   // entry of kFrameworkNames
  std::string dataset;
  std::vector<uint64_t> seeds;
  std::vector<double> accuracies;  // fractions in [0, 1], one per seed

  double mean() const;
  double stddev() const;  // n-1 denominator; NaN when n < 2
};

struct GridOutcome {
  std::vector<RunResult> results;
  std::vector<std::string> failures;  // one line per failed cell
};

/// Executes every (classifier, framework, dataset, seed) cell, writing one
/// CSV per cell under <output_dir>/cells/ plus teacher checkpoints under
/// <output_dir>/teachers/. A (dataset, classifier, seed) teacher is trained
/// exactly once and shared by its conventional-teacher and passive cells.
/// Cell failures are recorded and the rest of the grid continues.
GridOutcome run_grid(const ExperimentConfig& config);

/// Aggregated report: rows are frameworks, columns datasets, grouped by
/// classifier, best mean per column marked.
struct ReportCell {
  bool present = false;
  bool best = false;
  const RunResult* result = nullptr;
};

struct ReportTable {
  std::vector<std::string> datasets;
  std::vector<std::string> classifiers;
  std::vector<std::string> frameworks;
  // cells[classifier][framework][dataset]
  std::vector<std::vector<std::vector<ReportCell>>> cells;
};

/// Groups results into the report layout. Throws AggregationError when the
/// groups disagree on seed count.
ReportTable build_report(const std::vector<RunResult>& results);

std::string render_report_csv(const ReportTable& table);
std::string render_report_markdown(const ReportTable& table,
                                   const std::string& title);

/// Reparses render_report_csv output into results (round-trip).
std::vector<RunResult> parse_report_csv(const std::string& text);

/// Reconstructs results from the per-cell CSVs under <results_dir>/cells.
std::vector<RunResult> read_cells(const std::string& results_dir);

/// "mean±std" cell text in percent, e.g. 90.21±.13; bare mean when n < 2.
std::string format_mean_std(double mean, double stddev, size_t n);

}  // namespace distlab
