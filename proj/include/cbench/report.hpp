#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cbench/analysis.hpp"

namespace cbench::analysis {

struct BiasSummary {
  std::string model;
  std::string arch_family;
  std::optional<double> dataset_size;  // training images
  std::optional<double> flops;         // per sample
  std::optional<double> acc_segments;
  std::optional<double> acc_phosphenes;
  std::optional<double> overall_accuracy;
  std::optional<double> robustness;    // external score, ingested as data

  // acc_segments - acc_phosphenes when both are known.
  std::optional<double> integration_bias() const;
};

// Header `model,arch_family,dataset_size,flops,acc_seg,acc_phos[,overall][,robustness]`;
// empty cells are missing values.
std::vector<BiasSummary> read_bias_csv(const std::string& path);
void write_bias_csv(const std::string& path, const std::vector<BiasSummary>& rows);

// Per-id accuracies from a response table: segments and phosphenes over the
// fragmented trials, overall over every trial.
std::vector<BiasSummary> summarize_models(const ResponseTable& table);

// Fills metadata (family, dataset size, flops, robustness) from `metadata` by model name.
std::vector<BiasSummary> join_metadata(std::vector<BiasSummary> measured, const std::vector<BiasSummary>& metadata);

// Per-condition accuracy curves with CIs, pooled and split log-linear fits,
// slope comparison, contour/RGB accuracy, integration bias band and Cohen's d
// over subject means. Parts that the data cannot support are reported as
// {"unavailable": reason}.
nlohmann::json summarize_responses(const ResponseTable& table, int resamples = kBootstrapResamples);

// Per-observer breakdown plus summarize_responses over the whole table.
nlohmann::json evaluate_responses(const ResponseTable& table, int resamples = kBootstrapResamples);

// Model-level scaling analysis: bias correlations with accuracy, log10
// dataset size, log10 FLOPs and robustness, the architecture regression and a
// human reference band. Rows missing the needed fields are skipped with a warning.
nlohmann::json scaling_report(const std::vector<BiasSummary>& models, const std::optional<ResponseTable>& human,
                              int resamples = kBootstrapResamples);

// Writes <out>/<name>.json plus SVG plots derived from it.
void write_evaluation(const nlohmann::json& evaluation, const std::filesystem::path& out);
void write_scaling_report(const nlohmann::json& report, const std::filesystem::path& out);

}  // namespace cbench::analysis
