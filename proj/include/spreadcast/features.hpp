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

// The news-feature funnel: dictionary exclusion, missing-value filters,
// low-variance filter, per-article normalization and the greedy
// correlation filter.

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "spreadcast/calendar_time.hpp"
#include "spreadcast/gkg.hpp"

namespace spreadcast::features {

using gkg::Category;

struct FeatureMeta {
  Category category = Category::kGcam;
  std::string dictionary;  // GCAM dictionary id, empty otherwise
};

using MissingMask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

// days x features. Missing cells hold 0 in `values` and true in `missing`.
struct FeatureMatrix {
  std::vector<Date> days;
  std::vector<std::string> keys;
  std::vector<FeatureMeta> meta;
  Eigen::MatrixXd values;
  MissingMask missing;
  bool normalized = false;

  std::size_t n_days() const { return days.size(); }
  std::size_t n_features() const { return keys.size(); }
  std::size_t missing_count(std::size_t feature) const;
  std::size_t present_count(std::size_t feature) const { return n_days() - missing_count(feature); }

  FeatureMatrix select(std::span<const std::size_t> columns) const;
  void validate() const;
};

// Builds a matrix from per-column optional values (NaN = missing).
FeatureMatrix make_matrix(std::vector<Date> days, std::vector<std::string> keys,
                          std::vector<FeatureMeta> meta, const Eigen::MatrixXd& values_with_nan);

enum class DropReason {
  kExcludedDictionary,
  kAllMissingInitial,
  kLowAvailability,
  kLowVariance,
  kCorrelatedOut,
};

std::string_view drop_reason_name(DropReason r);

struct CorrelationDecision {
  std::string kept;
  std::string dropped;
  double rho = 0.0;
  std::string rule;  // fewer-missing | category-priority | random
};

struct SelectionConfig {
  // Exact GCAM codes ("c2.168") or whole dictionaries ("c3").
  std::set<std::string> drop_gcam_codes;
  double initial_fraction = 0.33;
  double availability_fraction = 0.90;
  double min_std_words = 5.0;
  double corr_threshold = 0.70;
  std::vector<Category> category_priority = {Category::kGcam,     Category::kWbTheme,
                                             Category::kGdeltTheme, Category::kLocation,
                                             Category::kPerson,   Category::kOrganization};
  std::uint64_t rng_seed = 0;

  void validate() const;
};

struct SelectionReport {
  std::vector<std::string> kept;
  std::map<std::string, DropReason> dropped;
  std::vector<CorrelationDecision> decisions;
  std::vector<std::string> stages;
  std::vector<std::string> warnings;
};

FeatureMatrix drop_excluded_gcams(const FeatureMatrix& m, const SelectionConfig& cfg,
                                  SelectionReport* report = nullptr);
FeatureMatrix missing_value_filter(const FeatureMatrix& m, const SelectionConfig& cfg,
                                   SelectionReport* report = nullptr);
FeatureMatrix variance_filter(const FeatureMatrix& m, const SelectionConfig& cfg,
                              SelectionReport* report = nullptr);
// No-op on an already normalized matrix.
FeatureMatrix normalize_by_article_count(const FeatureMatrix& m,
                                         std::span<const double> daily_articles);

// Pearson correlation on jointly observed days. Pairs with fewer than three
// joint observations get 0 and a warning.
Eigen::MatrixXd pairwise_correlation(const FeatureMatrix& m, std::vector<std::string>* warnings);

std::pair<FeatureMatrix, SelectionReport> correlation_filter(const FeatureMatrix& m,
                                                             const SelectionConfig& cfg);

std::pair<FeatureMatrix, SelectionReport> run_selection_pipeline(
    const FeatureMatrix& m, std::span<const double> daily_articles, const SelectionConfig& cfg);

// Population standard deviation over present cells.
double population_sd(const FeatureMatrix& m, std::size_t feature);

// --- files -------------------------------------------------------------------

struct FeatureTable {
  FeatureMatrix matrix;
  std::vector<double> article_counts;
};

// daily_features.csv + features_meta.json as written by ingestion.
FeatureTable read_feature_table(const std::filesystem::path& dir);
void write_feature_table(const std::filesystem::path& dir, const FeatureTable& table);

std::set<std::string> read_exclusion_file(const std::filesystem::path& path);

std::string report_to_json(const SelectionReport& report);

}  // namespace spreadcast::features
