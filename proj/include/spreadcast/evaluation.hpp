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

// Out-of-sample scoring: check-function losses, point metrics at the median,
// Diebold-Mariano and Giacomini-Rossi fluctuation tests, rolling backtests
// and Kernel SHAP attributions.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace spreadcast::evaluation {

// rho_q(z) = (q - 1{z < 0}) z, with z = actual - forecast.
double check_loss(double error, double q);

double rmse(std::span<const double> y, std::span<const double> yhat);
// Mean of 2|yhat - y| / (|y| + |yhat|); 0/0 cells count as 0. Range [0, 2].
double smape(std::span<const double> y, std::span<const double> yhat);
// 1 - SSE/SST; throws kUndefined when y is constant.
double r2(std::span<const double> y, std::span<const double> yhat);

struct DmResult {
  double statistic = 0.0;
  double mean_difference = 0.0;
  double long_run_variance = 0.0;
  std::size_t n = 0;
  bool degenerate = false;  // zero long-run variance, statistic reported as 0
};

// d_t = loss_a - loss_b; mean(d) / sqrt(LRV / n) with a Bartlett-kernel HAC
// long-run variance using `hac_lags` lags.
DmResult dm_test(std::span<const double> loss_a, std::span<const double> loss_b, int hac_lags);

// Two-sided critical values of the fluctuation test, tabulated for
// mu in {0.1, ..., 0.9} and alpha in {0.05, 0.10}. Off-grid mu uses the
// nearest tabulated value and appends a warning.
double fluctuation_critical_value(double mu, double alpha, std::vector<std::string>* warnings = nullptr);

struct BacktestConfig {
  std::size_t t0 = 586;
  std::vector<double> quantiles{0.1, 0.3, 0.5, 0.7, 0.9};
  double mu = 0.30;
  int hac_lags = 1;
  double size = 0.05;

  void validate() const;
};

// floor(mu * out_of_sample)
std::size_t fluctuation_window(std::size_t out_of_sample, double mu);

struct TestResult {
  std::vector<double> statistic;  // one per window position; window i covers [i, i + m)
  double critical_value = 0.0;
  std::vector<bool> reject;
  std::size_t m = 0;
  std::vector<std::string> warnings;

  bool any_reject() const;
  double reject_fraction() const;
};

// Window-local DM statistics over every window of m consecutive losses.
std::vector<double> fluctuation_path(std::span<const double> loss_a, std::span<const double> loss_b,
                                     std::size_t m, int hac_lags);

TestResult fluctuation_test(std::span<const double> loss_a, std::span<const double> loss_b,
                            const BacktestConfig& cfg);

// Supplies quantile forecasts for target indices. Rows follow `days`,
// columns follow `quantiles`.
class ForecastProvider {
 public:
  virtual ~ForecastProvider() = default;
  virtual std::string name() const = 0;
  virtual Eigen::MatrixXd forecast(std::span<const std::size_t> days, std::span<const double> quantiles) = 0;
};

// Forecasts computed elsewhere (rolling DeepAR, GB) keyed by target index.
class PrecomputedProvider : public ForecastProvider {
 public:
  PrecomputedProvider(std::string name, std::vector<std::size_t> days, std::vector<double> quantiles,
                      Eigen::MatrixXd values);
  std::string name() const override { return name_; }
  Eigen::MatrixXd forecast(std::span<const std::size_t> days, std::span<const double> quantiles) override;

 private:
  std::string name_;
  std::vector<std::size_t> days_;
  std::vector<double> quantiles_;
  Eigen::MatrixXd values_;
};

struct ModelScores {
  std::string name;
  Eigen::MatrixXd forecasts;  // days x quantiles
  Eigen::MatrixXd losses;     // days x quantiles, check losses
  std::vector<double> mean_loss;   // per quantile
  std::vector<double> total_loss;  // per quantile, mean x out-of-sample days
  double rmse = 0.0;               // point forecast: the 0.5 quantile
  double smape = 0.0;
  double r2 = 0.0;
  bool has_point_metrics = false;
  bool r2_defined = false;
};

struct PairwiseTest {
  std::string model_a;
  std::string model_b;
  double quantile = 0.5;
  DmResult dm;
  TestResult fluctuation;
};

struct BacktestReport {
  BacktestConfig config;
  std::vector<std::size_t> days;
  std::vector<std::string> labels;  // e.g. dates, one per day; may be empty
  std::vector<double> actual;
  std::vector<ModelScores> models;
  std::vector<PairwiseTest> tests;
  std::vector<std::string> warnings;
};

// Scores every provider on days [t0, actual.size()). `pairs` selects the
// model pairs to test (by name); every quantile is tested for each pair.
BacktestReport rolling_backtest(std::span<const std::shared_ptr<ForecastProvider>> providers,
                                std::span<const double> actual, const BacktestConfig& cfg,
                                const std::vector<std::pair<std::string, std::string>>& pairs = {},
                                std::span<const std::string> labels = {});

// Every unordered pair of model names, in report order.
std::vector<std::pair<std::string, std::string>> all_pairs(std::span<const std::shared_ptr<ForecastProvider>> providers);

std::string report_to_json(const BacktestReport& report);
// report.json, table1_quantile_losses.csv, table2_point_metrics.csv,
// forecasts_<model>.csv and fluctuation_<a>__<b>_q<q>.csv.
void write_report(const std::filesystem::path& dir, const BacktestReport& report);

using BatchPredictor = std::function<std::vector<double>(const Eigen::MatrixXd& rows)>;

struct ShapConfig {
  std::size_t n_coalitions = 2048;
  std::uint64_t seed = 0;
};

struct ShapResult {
  std::vector<double> phi;
  double base_value = 0.0;  // mean prediction over the background
  double prediction = 0.0;  // f(x)
  std::size_t coalitions = 0;
  bool exact = false;  // every coalition enumerated
  bool ridge = false;
};

// Absent features take their background means. All coalitions are
// enumerated when 2^M - 2 <= n_coalitions; otherwise sizes are drawn in
// proportion to the Shapley kernel mass and subsets uniformly within a size.
// The weighted least squares is solved under sum(phi) = f(x) - base_value.
ShapResult kernel_shap(const BatchPredictor& predict, const Eigen::MatrixXd& background,
                       std::span<const double> x, const ShapConfig& cfg);

struct FeatureImportance {
  std::string key;
  double mean_abs_phi = 0.0;
};

// Mean |phi| per feature over explained rows, descending (ties by key).
std::vector<FeatureImportance> mean_abs_importance(std::span<const ShapResult> results,
                                                   std::span<const std::string> keys);

}  // namespace spreadcast::evaluation
