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

#include "spreadcast/term_structure.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "spreadcast/csv.hpp"
#include "spreadcast/error.hpp"

namespace spreadcast::term_structure {

void YieldCurvePanel::validate() const {
  if (maturities.empty()) throw Error(ErrorKind::kAlignment, "panel has no maturities");
  for (std::size_t j = 0; j < maturities.size(); ++j) {
    if (!(maturities[j] > 0.0) || (j > 0 && !(maturities[j] > maturities[j - 1]))) {
      throw Error(ErrorKind::kDomain, "maturities must be positive and strictly increasing");
    }
  }
  const auto n_days = static_cast<Eigen::Index>(days.size());
  const auto n_mat = static_cast<Eigen::Index>(maturities.size());
  if (yields_it.rows() != n_days || yields_de.rows() != n_days || yields_it.cols() != n_mat ||
      yields_de.cols() != n_mat) {
    throw Error(ErrorKind::kAlignment, "yield matrices do not match days x maturities");
  }
  if (!yields_it.allFinite() || !yields_de.allFinite()) {
    throw Error(ErrorKind::kDomain, "yield panel contains non-finite values");
  }
  for (std::size_t i = 0; i < days.size(); ++i) {
    if (is_weekend(days[i])) {
      throw Error(ErrorKind::kDomain, "weekend row in panel: " + format_date(days[i]));
    }
    if (i > 0 && !(days[i] > days[i - 1])) {
      throw Error(ErrorKind::kAlignment, "panel days not strictly increasing");
    }
  }
}

YieldCurvePanel read_yield_csv(const std::filesystem::path& path) {
  const csv::Table table = csv::read_table(path);
  const std::size_t c_date = table.column("date");
  const std::size_t c_mat = table.column("maturity_months");
  const std::size_t c_it = table.column("yield_it");
  const std::size_t c_de = table.column("yield_de");

  std::map<Date, std::map<double, std::pair<double, double>>> by_day;
  std::map<double, int> maturity_set;
  for (const auto& row : table.rows) {
    const Date d = parse_date(row[c_date]);
    if (is_weekend(d)) continue;
    const double tau = csv::parse_double(row[c_mat]);
    by_day[d][tau] = {csv::parse_double(row[c_it]), csv::parse_double(row[c_de])};
    maturity_set[tau] = 0;
  }
  YieldCurvePanel panel;
  for (const auto& [tau, unused] : maturity_set) panel.maturities.push_back(tau);
  const auto n_mat = static_cast<Eigen::Index>(panel.maturities.size());
  panel.yields_it.resize(static_cast<Eigen::Index>(by_day.size()), n_mat);
  panel.yields_de.resize(static_cast<Eigen::Index>(by_day.size()), n_mat);
  Eigen::Index row = 0;
  for (const auto& [day, curve] : by_day) {
    if (static_cast<Eigen::Index>(curve.size()) != n_mat) {
      throw Error(ErrorKind::kAlignment, "day " + format_date(day) + " does not quote every maturity");
    }
    Eigen::Index col = 0;
    for (const auto& [tau, yields] : curve) {
      panel.yields_it(row, col) = yields.first;
      panel.yields_de(row, col) = yields.second;
      ++col;
    }
    panel.days.push_back(day);
    ++row;
  }
  panel.validate();
  return panel;
}

void write_yield_csv(const std::filesystem::path& path, const YieldCurvePanel& panel) {
  csv::Table table;
  table.header = {"date", "maturity_months", "yield_it", "yield_de"};
  for (std::size_t i = 0; i < panel.days.size(); ++i) {
    for (std::size_t j = 0; j < panel.maturities.size(); ++j) {
      const auto r = static_cast<Eigen::Index>(i);
      const auto c = static_cast<Eigen::Index>(j);
      table.rows.push_back({format_date(panel.days[i]), csv::format_double(panel.maturities[j]),
                            csv::format_double(panel.yields_it(r, c)),
                            csv::format_double(panel.yields_de(r, c))});
    }
  }
  csv::write_table(path, table);
}

Eigen::MatrixXd compute_spreads(const YieldCurvePanel& panel) {
  if (panel.yields_it.rows() != panel.yields_de.rows() ||
      panel.yields_it.cols() != panel.yields_de.cols() ||
      panel.yields_it.rows() != static_cast<Eigen::Index>(panel.days.size()) ||
      panel.yields_it.cols() != static_cast<Eigen::Index>(panel.maturities.size())) {
    throw Error(ErrorKind::kAlignment, "Italian and German panels are not aligned");
  }
  return panel.yields_it - panel.yields_de;
}

std::vector<double> log_diff(std::span<const double> series, std::span<const Date> days) {
  for (std::size_t t = 0; t < series.size(); ++t) {
    if (!(series[t] > 0.0)) {
      std::string where = t < days.size() ? format_date(days[t]) : "index " + std::to_string(t);
      throw Error(ErrorKind::kDomain, "log-difference needs positive values; got " +
                                          csv::format_double(series[t]) + " at " + where);
    }
  }
  std::vector<double> out;
  if (series.size() < 2) return out;
  out.reserve(series.size() - 1);
  for (std::size_t t = 0; t + 1 < series.size(); ++t) {
    out.push_back(std::log(series[t + 1]) - std::log(series[t]));
  }
  return out;
}

double quantile_linear(std::span<const double> values, double p) {
  if (values.empty()) throw Error(ErrorKind::kParameter, "quantile of empty sample");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

RobustScaled robust_scale(std::span<const double> series) {
  if (series.empty()) throw Error(ErrorKind::kParameter, "robust_scale of empty series");
  RobustScaled out;
  out.state.median = quantile_linear(series, 0.5);
  out.state.iqr = quantile_linear(series, 0.75) - quantile_linear(series, 0.25);
  if (!(out.state.iqr > 0.0)) {
    throw Error(ErrorKind::kDegenerateScale, "interquartile range is zero");
  }
  out.values.reserve(series.size());
  for (double x : series) out.values.push_back(out.state.apply(x));
  return out;
}

NsLoadings ns_loadings(double tau_months, double lambda) {
  const double x = lambda * tau_months;
  NsLoadings l;
  if (x < 1e-6) {
    l.slope = 1.0 - x / 2.0 + x * x / 6.0;
    l.curvature = x / 2.0 - x * x / 3.0;
    return l;
  }
  const double decay = std::exp(-x);
  l.slope = -std::expm1(-x) / x;
  l.curvature = l.slope - decay;
  return l;
}

Eigen::MatrixXd ns_design(std::span<const double> maturities, double lambda) {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(maturities.size()), 3);
  for (std::size_t j = 0; j < maturities.size(); ++j) {
    const NsLoadings l = ns_loadings(maturities[j], lambda);
    const auto r = static_cast<Eigen::Index>(j);
    x(r, 0) = l.level;
    x(r, 1) = l.slope;
    x(r, 2) = l.curvature;
  }
  return x;
}

NsFactors fit_ns_factors(const Eigen::MatrixXd& spreads, std::span<const double> maturities,
                         double lambda, std::span<const Date> days) {
  if (!(lambda > 0.0)) throw Error(ErrorKind::kParameter, "lambda must be positive");
  if (spreads.cols() != static_cast<Eigen::Index>(maturities.size())) {
    throw Error(ErrorKind::kAlignment, "spread columns do not match maturities");
  }
  if (!days.empty() && static_cast<Eigen::Index>(days.size()) != spreads.rows()) {
    throw Error(ErrorKind::kAlignment, "spread rows do not match days");
  }
  if (maturities.size() < 3) {
    throw Error(ErrorKind::kParameter, "Nelson-Siegel fit needs at least 3 maturities");
  }
  const Eigen::MatrixXd design = ns_design(maturities, lambda);
  // The design is shared by all days, so one factorization serves the panel.
  const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  if (qr.rank() < 3) {
    const std::string where = days.empty() ? std::string("every day") : format_date(days.front());
    throw Error(ErrorKind::kSingularFit, "rank-deficient Nelson-Siegel design (" + where + ")");
  }
  NsFactors f;
  f.lambda = lambda;
  f.days.assign(days.begin(), days.end());
  const auto n = static_cast<std::size_t>(spreads.rows());
  f.beta0.resize(n);
  f.beta1.resize(n);
  f.beta2.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::VectorXd beta = qr.solve(spreads.row(static_cast<Eigen::Index>(i)).transpose());
    f.beta0[i] = beta(0);
    f.beta1[i] = beta(1);
    f.beta2[i] = beta(2);
  }
  return f;
}

SpreadSeries build_target(const YieldCurvePanel& panel, double target_maturity) {
  const auto it = std::find(panel.maturities.begin(), panel.maturities.end(), target_maturity);
  if (it == panel.maturities.end()) {
    throw Error(ErrorKind::kParameter,
                "target maturity " + csv::format_double(target_maturity) + " not in panel");
  }
  const auto col = static_cast<Eigen::Index>(it - panel.maturities.begin());
  const Eigen::VectorXd level = panel.yields_it.col(col) - panel.yields_de.col(col);
  std::vector<double> series(level.data(), level.data() + level.size());

  SpreadSeries out;
  out.log_changes = log_diff(series, panel.days);
  const RobustScaled scaled = robust_scale(out.log_changes);
  out.values = scaled.values;
  out.transform = scaled.state;
  out.days.assign(panel.days.begin() + 1, panel.days.end());
  out.spread_level.assign(series.begin() + 1, series.end());
  return out;
}

void write_factors_csv(const std::filesystem::path& path, const NsFactors& factors) {
  csv::Table table;
  table.header = {"date", "beta0", "beta1", "beta2"};
  for (std::size_t i = 0; i < factors.beta0.size(); ++i) {
    table.rows.push_back({i < factors.days.size() ? format_date(factors.days[i]) : std::string(),
                          csv::format_double(factors.beta0[i]), csv::format_double(factors.beta1[i]),
                          csv::format_double(factors.beta2[i])});
  }
  csv::write_table(path, table);
}

NsFactors read_factors_csv(const std::filesystem::path& path) {
  const csv::Table table = csv::read_table(path);
  NsFactors f;
  for (const auto& row : table.rows) {
    f.days.push_back(parse_date(row[table.column("date")]));
    f.beta0.push_back(csv::parse_double(row[table.column("beta0")]));
    f.beta1.push_back(csv::parse_double(row[table.column("beta1")]));
    f.beta2.push_back(csv::parse_double(row[table.column("beta2")]));
  }
  return f;
}

void write_target_csv(const std::filesystem::path& path, const SpreadSeries& target) {
  csv::Table table;
  table.header = {"date", "spread", "log_change", "target", "median", "iqr"};
  for (std::size_t i = 0; i < target.values.size(); ++i) {
    table.rows.push_back({format_date(target.days[i]), csv::format_double(target.spread_level[i]),
                          csv::format_double(target.log_changes[i]),
                          csv::format_double(target.values[i]),
                          csv::format_double(target.transform.median),
                          csv::format_double(target.transform.iqr)});
  }
  csv::write_table(path, table);
}

SpreadSeries read_target_csv(const std::filesystem::path& path) {
  const csv::Table table = csv::read_table(path);
  SpreadSeries s;
  for (const auto& row : table.rows) {
    s.days.push_back(parse_date(row[table.column("date")]));
    s.spread_level.push_back(csv::parse_double(row[table.column("spread")]));
    s.log_changes.push_back(csv::parse_double(row[table.column("log_change")]));
    s.values.push_back(csv::parse_double(row[table.column("target")]));
    s.transform.median = csv::parse_double(row[table.column("median")]);
    s.transform.iqr = csv::parse_double(row[table.column("iqr")]);
  }
  return s;
}

}  // namespace spreadcast::term_structure
