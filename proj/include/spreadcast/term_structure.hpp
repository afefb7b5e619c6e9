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

#include <array>
#include <filesystem>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "spreadcast/calendar_time.hpp"

namespace spreadcast::term_structure {

inline constexpr double kDefaultLambda = 0.0609;  // per month

// Italian and German yield curves on a common (days x maturities) grid.
// Maturities are in months and yields in percent.
struct YieldCurvePanel {
  std::vector<Date> days;
  std::vector<double> maturities;
  Eigen::MatrixXd yields_it;
  Eigen::MatrixXd yields_de;

  // Throws kAlignment/kDomain when the invariants do not hold.
  void validate() const;
};

// Long-format CSV: date,maturity_months,yield_it,yield_de. Weekend rows are
// dropped; every remaining day must quote every maturity.
YieldCurvePanel read_yield_csv(const std::filesystem::path& path);
void write_yield_csv(const std::filesystem::path& path, const YieldCurvePanel& panel);

Eigen::MatrixXd compute_spreads(const YieldCurvePanel& panel);

// out[t] = ln(series[t+1]) - ln(series[t]). `days`, when given, names the
// offending date in the domain error.
std::vector<double> log_diff(std::span<const double> series, std::span<const Date> days = {});

// Quantile by linear interpolation between order statistics (the
// (n-1)p + 1 convention).
double quantile_linear(std::span<const double> values, double p);

struct RobustScaling {
  double median = 0.0;
  double iqr = 1.0;

  double apply(double x) const { return (x - median) / iqr; }
  double invert(double z) const { return z * iqr + median; }
};

struct RobustScaled {
  std::vector<double> values;
  RobustScaling state;
};

RobustScaled robust_scale(std::span<const double> series);

struct NsLoadings {
  double level = 1.0;
  double slope = 0.0;
  double curvature = 0.0;
};

NsLoadings ns_loadings(double tau_months, double lambda);

struct NsFactors {
  std::vector<Date> days;
  std::vector<double> beta0;
  std::vector<double> beta1;
  std::vector<double> beta2;
  double lambda = kDefaultLambda;
};

// Per-day OLS of the curve on [1, L1(tau), L2(tau)].
NsFactors fit_ns_factors(const Eigen::MatrixXd& spreads, std::span<const double> maturities,
                         double lambda, std::span<const Date> days = {});

Eigen::MatrixXd ns_design(std::span<const double> maturities, double lambda);

// The forecast target: robust-scaled log-differences of the spread at one
// maturity. days[i] is the later day of difference i.
struct SpreadSeries {
  std::vector<Date> days;
  std::vector<double> spread_level;  // spread on days[i]
  std::vector<double> log_changes;
  std::vector<double> values;        // scaled log_changes
  RobustScaling transform;
};

SpreadSeries build_target(const YieldCurvePanel& panel, double target_maturity);

void write_factors_csv(const std::filesystem::path& path, const NsFactors& factors);
NsFactors read_factors_csv(const std::filesystem::path& path);
void write_target_csv(const std::filesystem::path& path, const SpreadSeries& target);
SpreadSeries read_target_csv(const std::filesystem::path& path);

}  // namespace spreadcast::term_structure
