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

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include "spreadcast/error.hpp"
#include "spreadcast/evaluation.hpp"

namespace spreadcast::evaluation {
namespace {

void check_lengths(std::span<const double> a, std::span<const double> b, std::size_t min_n) {
  if (a.size() != b.size()) throw Error(ErrorKind::kAlignment, "series lengths differ");
  if (a.size() < min_n) {
    throw Error(ErrorKind::kParameter, "need at least " + std::to_string(min_n) + " observations");
  }
}

// Giacomini and Rossi (2010, Journal of Applied Econometrics), Table I,
// two-sided fluctuation test critical values.
constexpr std::array<double, 9> kMuGrid{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
constexpr std::array<double, 9> kCritical05{3.393, 3.179, 3.012, 2.890, 2.779, 2.634, 2.560, 2.433, 2.248};
constexpr std::array<double, 9> kCritical10{3.170, 2.948, 2.766, 2.626, 2.500, 2.356, 2.252, 2.130, 1.950};

DmResult dm_from_differences(const double* d, std::size_t n, int hac_lags) {
  DmResult r;
  r.n = n;
  double mean = 0.0;
  for (std::size_t t = 0; t < n; ++t) mean += d[t];
  mean /= static_cast<double>(n);
  r.mean_difference = mean;
  auto autocov = [&](std::size_t lag) {
    double s = 0.0;
    for (std::size_t t = lag; t < n; ++t) s += (d[t] - mean) * (d[t - lag] - mean);
    return s / static_cast<double>(n);
  };
  const double gamma0 = autocov(0);
  double lrv = gamma0;
  for (int l = 1; l <= hac_lags; ++l) {
    lrv += 2.0 * (1.0 - static_cast<double>(l) / (hac_lags + 1.0)) * autocov(static_cast<std::size_t>(l));
  }
  r.long_run_variance = lrv;
  double scale = 0.0;
  for (std::size_t t = 0; t < n; ++t) scale = std::max(scale, std::abs(d[t]));
  if (!(lrv > 1e-14 * scale * scale) || scale == 0.0) {
    r.degenerate = true;
    r.statistic = 0.0;
    return r;
  }
  r.statistic = mean / std::sqrt(lrv / static_cast<double>(n));
  return r;
}

}  // namespace

double check_loss(double error, double q) {
  if (!(q > 0.0 && q < 1.0)) throw Error(ErrorKind::kParameter, "quantile level must lie in (0, 1)");
  return (q - (error < 0.0 ? 1.0 : 0.0)) * error;
}

double rmse(std::span<const double> y, std::span<const double> yhat) {
  check_lengths(y, yhat, 1);
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += (y[i] - yhat[i]) * (y[i] - yhat[i]);
  return std::sqrt(s / static_cast<double>(y.size()));
}

double smape(std::span<const double> y, std::span<const double> yhat) {
  check_lengths(y, yhat, 1);
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double denom = std::abs(y[i]) + std::abs(yhat[i]);
    if (denom > 0.0) s += 2.0 * std::abs(yhat[i] - y[i]) / denom;
  }
  return s / static_cast<double>(y.size());
}

double r2(std::span<const double> y, std::span<const double> yhat) {
  check_lengths(y, yhat, 2);
  const double mean = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(y.size());
  double sse = 0.0, sst = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    sse += (y[i] - yhat[i]) * (y[i] - yhat[i]);
    sst += (y[i] - mean) * (y[i] - mean);
  }
  if (sst == 0.0) throw Error(ErrorKind::kUndefined, "R2 is undefined for a constant target");
  return 1.0 - sse / sst;
}

DmResult dm_test(std::span<const double> loss_a, std::span<const double> loss_b, int hac_lags) {
  if (hac_lags < 0) throw Error(ErrorKind::kParameter, "hac_lags must be non-negative");
  check_lengths(loss_a, loss_b, static_cast<std::size_t>(hac_lags) + 2);
  std::vector<double> d(loss_a.size());
  for (std::size_t t = 0; t < d.size(); ++t) d[t] = loss_a[t] - loss_b[t];
  return dm_from_differences(d.data(), d.size(), hac_lags);
}

double fluctuation_critical_value(double mu, double alpha, std::vector<std::string>* warnings) {
  const std::array<double, 9>* table = nullptr;
  if (std::abs(alpha - 0.05) < 1e-12) {
    table = &kCritical05;
  } else if (std::abs(alpha - 0.10) < 1e-12) {
    table = &kCritical10;
  } else {
    throw Error(ErrorKind::kParameter, "fluctuation critical values exist for size 0.05 and 0.10 only");
  }
  if (!(mu > 0.0 && mu < 1.0)) throw Error(ErrorKind::kParameter, "mu must lie in (0, 1)");
  std::size_t best = 0;
  for (std::size_t k = 1; k < kMuGrid.size(); ++k) {
    if (std::abs(kMuGrid[k] - mu) < std::abs(kMuGrid[best] - mu)) best = k;
  }
  if (std::abs(kMuGrid[best] - mu) > 1e-9 && warnings) {
    warnings->push_back("mu " + std::to_string(mu) + " not tabulated; using the critical value for " +
                        std::to_string(kMuGrid[best]));
  }
  return (*table)[best];
}

void BacktestConfig::validate() const {
  if (t0 == 0) throw Error(ErrorKind::kParameter, "t0 must be positive");
  if (quantiles.empty()) throw Error(ErrorKind::kParameter, "at least one quantile is required");
  for (std::size_t k = 0; k < quantiles.size(); ++k) {
    if (!(quantiles[k] > 0.0 && quantiles[k] < 1.0)) {
      throw Error(ErrorKind::kParameter, "quantiles must lie strictly inside (0, 1)");
    }
    if (k > 0 && !(quantiles[k] > quantiles[k - 1])) {
      throw Error(ErrorKind::kParameter, "quantiles must be strictly increasing");
    }
  }
  if (!(mu > 0.0 && mu < 1.0)) throw Error(ErrorKind::kParameter, "mu must lie in (0, 1)");
  if (hac_lags < 0) throw Error(ErrorKind::kParameter, "hac_lags must be non-negative");
  fluctuation_critical_value(mu, size);
}

std::size_t fluctuation_window(std::size_t out_of_sample, double mu) {
  return static_cast<std::size_t>(std::floor(mu * static_cast<double>(out_of_sample) + 1e-9));
}

bool TestResult::any_reject() const { return std::find(reject.begin(), reject.end(), true) != reject.end(); }

double TestResult::reject_fraction() const {
  if (reject.empty()) return 0.0;
  return static_cast<double>(std::count(reject.begin(), reject.end(), true)) / static_cast<double>(reject.size());
}

std::vector<double> fluctuation_path(std::span<const double> loss_a, std::span<const double> loss_b,
                                     std::size_t m, int hac_lags) {
  if (hac_lags < 0) throw Error(ErrorKind::kParameter, "hac_lags must be non-negative");
  if (loss_a.size() != loss_b.size()) throw Error(ErrorKind::kAlignment, "loss series lengths differ");
  const std::size_t n = loss_a.size();
  if (m < static_cast<std::size_t>(hac_lags) + 2 || m > n) {
    throw Error(ErrorKind::kParameter, "fluctuation window of " + std::to_string(m) +
                                          " does not fit an out-of-sample length of " + std::to_string(n));
  }
  std::vector<double> d(n);
  for (std::size_t t = 0; t < n; ++t) d[t] = loss_a[t] - loss_b[t];
  std::vector<double> path;
  for (std::size_t i = 0; i + m <= n; ++i) path.push_back(dm_from_differences(d.data() + i, m, hac_lags).statistic);
  return path;
}

TestResult fluctuation_test(std::span<const double> loss_a, std::span<const double> loss_b,
                            const BacktestConfig& cfg) {
  if (!(cfg.mu > 0.0 && cfg.mu < 1.0)) throw Error(ErrorKind::kParameter, "mu must lie in (0, 1)");
  TestResult r;
  r.m = fluctuation_window(loss_a.size(), cfg.mu);
  r.critical_value = fluctuation_critical_value(cfg.mu, cfg.size, &r.warnings);
  r.statistic = fluctuation_path(loss_a, loss_b, r.m, cfg.hac_lags);
  for (double s : r.statistic) r.reject.push_back(std::abs(s) > r.critical_value);
  return r;
}

}  // namespace spreadcast::evaluation
