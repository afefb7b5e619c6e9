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
#include <cmath>
#include <map>

#include <json.hpp>

#include "spreadcast/csv.hpp"
#include "spreadcast/error.hpp"
#include "spreadcast/evaluation.hpp"
#include "spreadcast/parallel.hpp"

namespace spreadcast::evaluation {
namespace {

using nlohmann::ordered_json;

ordered_json number(double v) { return std::isfinite(v) ? ordered_json(v) : ordered_json(nullptr); }

std::string quantile_label(double q) { return csv::format_double(q); }

std::string safe_name(const std::string& name) {
  std::string out;
  for (char c : name) out += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_') ? c : '_';
  return out;
}

std::size_t median_column(const std::vector<double>& quantiles) {
  for (std::size_t k = 0; k < quantiles.size(); ++k) {
    if (std::abs(quantiles[k] - 0.5) < 1e-12) return k;
  }
  return quantiles.size();
}

}  // namespace

PrecomputedProvider::PrecomputedProvider(std::string name, std::vector<std::size_t> days,
                                         std::vector<double> quantiles, Eigen::MatrixXd values)
    : name_(std::move(name)), days_(std::move(days)), quantiles_(std::move(quantiles)), values_(std::move(values)) {
  if (values_.rows() != static_cast<Eigen::Index>(days_.size()) ||
      values_.cols() != static_cast<Eigen::Index>(quantiles_.size())) {
    throw Error(ErrorKind::kAlignment, "forecast table shape does not match days x quantiles for " + name_);
  }
}

Eigen::MatrixXd PrecomputedProvider::forecast(std::span<const std::size_t> days, std::span<const double> quantiles) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(days.size()), static_cast<Eigen::Index>(quantiles.size()));
  for (std::size_t k = 0; k < quantiles.size(); ++k) {
    auto qit = std::find_if(quantiles_.begin(), quantiles_.end(),
                            [&](double q) { return std::abs(q - quantiles[k]) < 1e-12; });
    if (qit == quantiles_.end()) {
      throw Error(ErrorKind::kAlignment, name_ + " has no forecasts for quantile " + quantile_label(quantiles[k]));
    }
    const auto col = static_cast<Eigen::Index>(qit - quantiles_.begin());
    for (std::size_t i = 0; i < days.size(); ++i) {
      auto dit = std::lower_bound(days_.begin(), days_.end(), days[i]);
      if (dit == days_.end() || *dit != days[i]) {
        throw Error(ErrorKind::kAlignment, name_ + " has no forecast for day index " + std::to_string(days[i]));
      }
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) =
          values_(static_cast<Eigen::Index>(dit - days_.begin()), col);
    }
  }
  return out;
}

std::vector<std::pair<std::string, std::string>> all_pairs(
    std::span<const std::shared_ptr<ForecastProvider>> providers) {
  std::vector<std::pair<std::string, std::string>> out;
  for (std::size_t a = 0; a < providers.size(); ++a) {
    for (std::size_t b = a + 1; b < providers.size(); ++b) out.emplace_back(providers[a]->name(), providers[b]->name());
  }
  return out;
}

BacktestReport rolling_backtest(std::span<const std::shared_ptr<ForecastProvider>> providers,
                                std::span<const double> actual, const BacktestConfig& cfg,
                                const std::vector<std::pair<std::string, std::string>>& pairs,
                                std::span<const std::string> labels) {
  cfg.validate();
  if (providers.empty()) throw Error(ErrorKind::kParameter, "no models to evaluate");
  if (actual.size() <= cfg.t0) throw Error(ErrorKind::kParameter, "series is not longer than t0");
  if (!labels.empty() && labels.size() != actual.size()) {
    throw Error(ErrorKind::kAlignment, "day labels do not match the target length");
  }
  BacktestReport report;
  report.config = cfg;
  for (std::size_t t = cfg.t0; t < actual.size(); ++t) {
    report.days.push_back(t);
    report.actual.push_back(actual[t]);
    if (!labels.empty()) report.labels.push_back(labels[t]);
  }
  const std::size_t n = report.days.size();
  const std::size_t nq = cfg.quantiles.size();
  const std::size_t mid = median_column(cfg.quantiles);
  if (mid == nq) report.warnings.push_back("quantile 0.5 not evaluated; point metrics omitted");

  std::map<std::string, std::size_t> index;
  for (const auto& p : providers) {
    if (!index.emplace(p->name(), index.size()).second) {
      throw Error(ErrorKind::kParameter, "duplicate model name " + p->name());
    }
  }
  report.models.resize(providers.size());
  for (std::size_t m = 0; m < providers.size(); ++m) {
    ModelScores& s = report.models[m];
    s.name = providers[m]->name();
    s.forecasts = providers[m]->forecast(report.days, cfg.quantiles);
    if (s.forecasts.rows() != static_cast<Eigen::Index>(n) || s.forecasts.cols() != static_cast<Eigen::Index>(nq)) {
      throw Error(ErrorKind::kAlignment, s.name + " returned a forecast table of the wrong shape");
    }
    if (!s.forecasts.allFinite()) throw Error(ErrorKind::kDomain, s.name + " returned non-finite forecasts");
  }
  parallel_for(report.models.size(), [&](std::size_t m) {
    ModelScores& s = report.models[m];
    s.losses.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(nq));
    s.mean_loss.assign(nq, 0.0);
    s.total_loss.assign(nq, 0.0);
    for (std::size_t k = 0; k < nq; ++k) {
      double sum = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const auto r = static_cast<Eigen::Index>(i), c = static_cast<Eigen::Index>(k);
        s.losses(r, c) = check_loss(report.actual[i] - s.forecasts(r, c), cfg.quantiles[k]);
        sum += s.losses(r, c);
      }
      s.mean_loss[k] = sum / static_cast<double>(n);
      s.total_loss[k] = sum;
    }
    if (mid < nq) {
      std::vector<double> point(n);
      for (std::size_t i = 0; i < n; ++i) point[i] = s.forecasts(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(mid));
      s.has_point_metrics = true;
      s.rmse = rmse(report.actual, point);
      s.smape = smape(report.actual, point);
      if (n >= 2) {
        try {
          s.r2 = r2(report.actual, point);
          s.r2_defined = true;
        } catch (const Error&) {
          s.r2 = std::nan("");
        }
      } else {
        s.r2 = std::nan("");
      }
    }
  });

  for (const auto& [a, b] : pairs) {
    const auto ia = index.find(a), ib = index.find(b);
    if (ia == index.end() || ib == index.end()) {
      throw Error(ErrorKind::kParameter, "test pair names an unknown model: " + a + " vs " + b);
    }
    for (std::size_t k = 0; k < nq; ++k) {
      const auto& la = report.models[ia->second].losses.col(static_cast<Eigen::Index>(k));
      const auto& lb = report.models[ib->second].losses.col(static_cast<Eigen::Index>(k));
      std::vector<double> va(la.data(), la.data() + n), vb(lb.data(), lb.data() + n);
      PairwiseTest t;
      t.model_a = a;
      t.model_b = b;
      t.quantile = cfg.quantiles[k];
      if (n >= static_cast<std::size_t>(cfg.hac_lags) + 2) t.dm = dm_test(va, vb, cfg.hac_lags);
      if (fluctuation_window(n, cfg.mu) >= static_cast<std::size_t>(cfg.hac_lags) + 2) {
        t.fluctuation = fluctuation_test(va, vb, cfg);
      } else {
        report.warnings.push_back("out-of-sample too short for a fluctuation test: " + a + " vs " + b);
      }
      report.tests.push_back(std::move(t));
    }
  }
  return report;
}

std::string report_to_json(const BacktestReport& r) {
  ordered_json j;
  j["config"] = {{"t0", r.config.t0},
                 {"quantiles", r.config.quantiles},
                 {"mu", r.config.mu},
                 {"hac_lags", r.config.hac_lags},
                 {"size", r.config.size}};
  j["out_of_sample_days"] = r.days.size();
  j["loss_units"] = "check loss: mean per out-of-sample day and total (mean x days)";
  if (!r.labels.empty()) {
    j["first_day"] = r.labels.front();
    j["last_day"] = r.labels.back();
  }
  ordered_json models = ordered_json::array();
  for (const ModelScores& m : r.models) {
    ordered_json jm;
    jm["name"] = m.name;
    ordered_json ql = ordered_json::object();
    for (std::size_t k = 0; k < m.mean_loss.size(); ++k) {
      ql[quantile_label(r.config.quantiles[k])] = {{"mean", number(m.mean_loss[k])}, {"total", number(m.total_loss[k])}};
    }
    jm["quantile_loss"] = ql;
    if (m.has_point_metrics) {
      jm["rmse"] = number(m.rmse);
      jm["smape"] = number(m.smape);
      jm["r2"] = m.r2_defined ? number(m.r2) : ordered_json(nullptr);
    }
    models.push_back(jm);
  }
  j["models"] = models;
  ordered_json tests = ordered_json::array();
  for (const PairwiseTest& t : r.tests) {
    ordered_json jt;
    jt["model_a"] = t.model_a;
    jt["model_b"] = t.model_b;
    jt["quantile"] = t.quantile;
    jt["dm"] = {{"statistic", number(t.dm.statistic)},
                {"mean_difference", number(t.dm.mean_difference)},
                {"degenerate", t.dm.degenerate}};
    if (t.fluctuation.m > 0) {
      const auto& f = t.fluctuation;
      const auto mm = std::minmax_element(f.statistic.begin(), f.statistic.end());
      jt["fluctuation"] = {{"window", f.m},
                           {"critical_value", f.critical_value},
                           {"positions", f.statistic.size()},
                           {"min_statistic", number(*mm.first)},
                           {"max_statistic", number(*mm.second)},
                           {"reject_fraction", f.reject_fraction()},
                           {"any_reject", f.any_reject()}};
    }
    tests.push_back(jt);
  }
  j["tests"] = tests;
  j["warnings"] = r.warnings;
  return j.dump(2) + "\n";
}

void write_report(const std::filesystem::path& dir, const BacktestReport& r) {
  csv::write_file(dir / "report.json", report_to_json(r));
  const auto& qs = r.config.quantiles;

  std::string t1 = "model";
  for (double q : qs) t1 += ",q" + quantile_label(q);
  t1 += "\n";
  for (const auto& m : r.models) {
    t1 += m.name;
    for (double v : m.total_loss) t1 += "," + csv::format_double(v);
    t1 += "\n";
  }
  csv::write_file(dir / "table1_quantile_losses.csv", t1);

  std::string t2 = "model,rmse,smape,r2\n";
  for (const auto& m : r.models) {
    if (!m.has_point_metrics) continue;
    t2 += m.name + "," + csv::format_double(m.rmse) + "," + csv::format_double(m.smape) + "," +
          (m.r2_defined ? csv::format_double(m.r2) : std::string()) + "\n";
  }
  csv::write_file(dir / "table2_point_metrics.csv", t2);

  auto day_label = [&](std::size_t i) { return r.labels.empty() ? std::to_string(r.days[i]) : r.labels[i]; };
  for (const auto& m : r.models) {
    std::string text = "day,actual";
    for (double q : qs) text += ",q" + quantile_label(q);
    text += "\n";
    for (std::size_t i = 0; i < r.days.size(); ++i) {
      text += day_label(i) + "," + csv::format_double(r.actual[i]);
      for (Eigen::Index k = 0; k < m.forecasts.cols(); ++k) {
        text += "," + csv::format_double(m.forecasts(static_cast<Eigen::Index>(i), k));
      }
      text += "\n";
    }
    csv::write_file(dir / ("forecasts_" + safe_name(m.name) + ".csv"), text);
  }
  for (const auto& t : r.tests) {
    if (t.fluctuation.m == 0) continue;
    std::string text = "window_end,statistic,critical_value,reject\n";
    for (std::size_t i = 0; i < t.fluctuation.statistic.size(); ++i) {
      text += day_label(i + t.fluctuation.m - 1) + "," + csv::format_double(t.fluctuation.statistic[i]) + "," +
              csv::format_double(t.fluctuation.critical_value) + "," + (t.fluctuation.reject[i] ? "1" : "0") + "\n";
    }
    csv::write_file(dir / ("fluctuation_" + safe_name(t.model_a) + "__" + safe_name(t.model_b) + "_q" +
                           quantile_label(t.quantile) + ".csv"),
                    text);
  }
}

}  // namespace spreadcast::evaluation
