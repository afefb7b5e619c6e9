// Copyright 2026 The Spreadcast Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// End-to-end orchestration: a declarative run configuration, the stage
// functions shared by the CLI subcommands, and the run manifest.
//
// A run directory holds one subdirectory per stage:
//   ingest/    daily_features.csv, features_meta.json
//   select/    daily_features.csv, features_meta.json, selection_report.json
//   factors/   factors.csv, target.csv
//   reduce/    cluster.json, pca.json, pca_scores.csv
//   models/    forecasts_<model>.csv, loss traces, GB grid tables
//   evaluate/  report.json and the table/plot CSVs
//   shap/      shap_importance.csv, shap_values.csv
//   manifest.json

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "spreadcast/calendar_time.hpp"
#include "spreadcast/deepar.hpp"
#include "spreadcast/dimreduce.hpp"
#include "spreadcast/evaluation.hpp"
#include "spreadcast/features.hpp"
#include "spreadcast/gbm.hpp"
#include "spreadcast/term_structure.hpp"

namespace spreadcast::pipeline {

namespace fs = std::filesystem;

enum class CovariateSet {
  kNone,
  kFactors,
  kFactorsGdelt,
  kFactorsGdeltHierarc,
  kFactorsGdeltPca,
  kGdelt,
  kGdeltHierarc,
  kGdeltPca,
};

const std::array<CovariateSet, 8>& all_covariate_sets();
std::string_view covariate_set_name(CovariateSet s);  // "factors-gdelt-pca"
CovariateSet parse_covariate_set(std::string_view name);
std::string deepar_model_name(CovariateSet s);  // "DeepAR-Factors-GDELT-PCA"
std::string gbm_model_name(CovariateSet s);     // "GB-Factors-GDELT-PCA"

// --- configuration -----------------------------------------------------------

struct IngestConfig {
  bool enabled = true;
  Date from{};
  Date to{};                 // inclusive
  fs::path gkg_dir;          // local archives (and fetch cache)
  std::string base_url;      // fetch missing slots when non-empty
  fs::path outlets;          // empty: built-in outlet list
  fs::path calendar;         // empty: weekdays in [from, to]
  int min_theme_keywords = 4;
  std::int64_t min_word_count = 100;
};

struct SelectConfig {
  bool enabled = true;
  fs::path exclusions;  // optional GCAM exclusion list
  features::SelectionConfig selection;
};

struct FactorsConfig {
  bool enabled = true;
  fs::path yields;
  double lambda = term_structure::kDefaultLambda;
  double target_maturity = 120.0;
};

struct ReduceConfig {
  bool enabled = true;
  dimreduce::Linkage linkage = dimreduce::Linkage::kWard;
  std::size_t k_min = 2;
  std::size_t k_max = 54;
  // Cluster factors together with the news features instead of keeping the
  // factors unconditionally.
  bool joint_clustering = false;
  std::size_t pca_components = 3;
  bool fit_in_sample = true;  // fit on the first t0 rows only
};

struct ModelsConfig {
  bool enabled = true;
  std::vector<CovariateSet> deepar;
  std::vector<CovariateSet> gbm;
  deepar::NetworkConfig network;
  std::size_t retrain_stride = 20;
  std::size_t samples = 200;
  gbm::GridSearchConfig grid;
};

struct EvaluateConfig {
  bool enabled = true;
  evaluation::BacktestConfig backtest;
  // "default": every DeepAR model against DeepAR-NoCov and against the GB
  // model on the same covariates. "all": every pair. Otherwise `pairs`.
  std::string pair_mode = "default";
  std::vector<std::pair<std::string, std::string>> pairs;
};

struct ShapStageConfig {
  bool enabled = false;
  CovariateSet covariates = CovariateSet::kFactorsGdeltHierarc;
  std::size_t explain_days = 20;
  std::size_t coalitions = 512;
};

struct RunConfig {
  std::string run_id = "run";
  fs::path output_dir;
  std::uint64_t seed = 0;
  std::size_t t0 = 586;      // training window and first out-of-sample index
  std::size_t threads = 0;   // 0: hardware concurrency
  IngestConfig ingest;
  SelectConfig select;
  FactorsConfig factors;
  ReduceConfig reduce;
  ModelsConfig models;
  EvaluateConfig evaluate;
  ShapStageConfig shap;

  // Relative paths resolve against `base_dir`. Unknown keys and wrongly
  // typed values raise kSchema.
  static RunConfig from_json(std::string_view text, const fs::path& base_dir);
  static RunConfig from_file(const fs::path& path);
  std::string to_json() const;

  // Input files of enabled stages must exist.
  void validate() const;
};

// --- stage data --------------------------------------------------------------

// Everything the models consume, aligned to the target days. Row t of a
// covariate block holds values observed on the trading day before target
// day t, so no same-day information reaches the forecast.
struct ModelInputs {
  std::vector<Date> days;
  std::vector<double> target;  // robust-scaled log changes
  std::vector<std::string> factor_keys;
  Eigen::MatrixXd factors;
  std::vector<std::string> gdelt_keys;
  Eigen::MatrixXd gdelt;
  std::vector<std::string> warnings;
};

// Missing feature cells (and days absent from the feature table) take the
// column mean over the first `fill_rows` rows.
ModelInputs assemble_inputs(const term_structure::SpreadSeries& target,
                            const term_structure::NsFactors& factors,
                            const features::FeatureMatrix& selected, std::size_t fill_rows);

struct Reductions {
  dimreduce::ClusterModel cluster;
  std::vector<std::string> cluster_keys;  // the clustered columns
  std::vector<std::string> factors_retained;
  std::vector<std::string> gdelt_retained;
  dimreduce::PcaModel pca;
  std::vector<std::string> pca_keys;
  Eigen::MatrixXd pca_scores;  // one row per input row
};

Reductions reduce_inputs(const ModelInputs& inputs, const ReduceConfig& cfg, std::size_t fit_rows);

struct CovariateBlock {
  std::vector<std::string> keys;
  Eigen::MatrixXd values;
};

CovariateBlock covariates_for(CovariateSet set, const ModelInputs& inputs, const Reductions& red);

// --- stages ------------------------------------------------------------------

using Outputs = std::vector<fs::path>;

struct IngestSummary {
  std::size_t files = 0;
  std::size_t records = 0;
  std::size_t kept = 0;
  std::size_t parse_errors = 0;
  std::size_t trading_days = 0;
  std::vector<fs::path> archives;
};

IngestSummary stage_ingest(const IngestConfig& cfg, const fs::path& out_dir, Outputs* outputs);
void stage_select(const SelectConfig& cfg, const fs::path& in_dir, const fs::path& out_dir,
                  const fs::path& report_path, Outputs* outputs);
void stage_factors(const FactorsConfig& cfg, const fs::path& out_dir, Outputs* outputs);

// Loads factors/ and, when present, select/ from a run directory.
ModelInputs load_inputs(const fs::path& run_dir, std::size_t t0);

// Rows used to fit reductions and fill missing values.
std::size_t fit_rows(const ReduceConfig& cfg, const ModelInputs& inputs, std::size_t t0);

// cluster.json, pca.json and pca_scores.csv.
void write_reductions(const fs::path& out_dir, const ModelInputs& inputs, const Reductions& red,
                      bool hierarc, bool pca, Outputs* outputs);

// Reductions are cheap and deterministic, so the model stage refits them
// from the same inputs instead of reading these files back.
void stage_reduce(const ReduceConfig& cfg, const fs::path& run_dir, std::size_t t0, Outputs* outputs);

// Standalone form over a feature directory (news features only).
void reduce_feature_dir(const ReduceConfig& cfg, const fs::path& in_dir, const fs::path& out_dir,
                        bool hierarc, bool pca, std::size_t t0, Outputs* outputs);

// Rolling DeepAR forecasts for one covariate set.
void run_deepar(const ModelsConfig& cfg, CovariateSet set, const ModelInputs& inputs,
                const Reductions& red, std::size_t t0, std::uint64_t seed, std::size_t threads,
                const std::vector<double>& quantiles, const fs::path& out_dir, Outputs* outputs);

// Per-quantile pinball boosting: grid search on the first window, then
// rolling refits with the chosen parameters.
void run_gbm(const ModelsConfig& cfg, CovariateSet set, const ModelInputs& inputs,
             const Reductions& red, std::size_t t0, std::size_t threads,
             const std::vector<double>& quantiles, const fs::path& out_dir, Outputs* outputs);

void stage_models(const RunConfig& cfg, const fs::path& run_dir, Outputs* outputs);

std::vector<std::string> configured_model_names(const ModelsConfig& cfg);
std::vector<std::pair<std::string, std::string>> resolve_pairs(const EvaluateConfig& cfg,
                                                               const std::vector<std::string>& models);

// Reads forecasts_<model>.csv from `forecast_dir` and the target from
// `target_csv`; writes the report files to `out_dir`.
evaluation::BacktestReport stage_evaluate(const EvaluateConfig& cfg, const fs::path& target_csv,
                                          const fs::path& forecast_dir, const fs::path& out_dir,
                                          const std::vector<std::string>& models, Outputs* outputs);

void stage_shap(const RunConfig& cfg, const fs::path& run_dir, Outputs* outputs);

// --- forecast files ----------------------------------------------------------

struct ForecastTable {
  std::vector<std::size_t> indices;  // target index
  std::vector<std::string> dates;
  std::vector<double> quantiles;
  Eigen::MatrixXd values;  // indices x quantiles
};

void write_forecast_table(const fs::path& path, const ForecastTable& table);
ForecastTable read_forecast_table(const fs::path& path);

// --- manifest ----------------------------------------------------------------

std::string sha256_file(const fs::path& path);

struct StageRecord {
  std::string name;
  std::string status;  // ok | failed | skipped
  double seconds = 0.0;
  std::vector<std::string> outputs;
  std::string error;
};

struct Manifest {
  std::string run_id;
  std::string status;  // complete | partial
  std::map<std::string, std::string> input_hashes;
  std::string config_snapshot;  // JSON text
  std::vector<StageRecord> stages;
  std::map<std::string, std::string> output_hashes;

  std::string to_json() const;
};

// Runs the enabled stages in order and writes <output_dir>/manifest.json.
// A failing stage is recorded, the manifest is written as partial and the
// error is rethrown.
Manifest run_pipeline(const RunConfig& cfg, const fs::path& config_path = {});

}  // namespace spreadcast::pipeline
