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
#include <memory>
#include <optional>
#include <set>
#include <sstream>

#include <json.hpp>

#include "spreadcast/csv.hpp"
#include "spreadcast/error.hpp"
#include "spreadcast/gkg.hpp"
#include "spreadcast/log.hpp"
#include "spreadcast/parallel.hpp"
#include "spreadcast/pipeline.hpp"

namespace spreadcast::pipeline {

namespace {

using Eigen::Index;
using Eigen::MatrixXd;

std::size_t thread_count(std::size_t requested) { return requested == 0 ? default_threads() : requested; }

void note(Outputs* outputs, const fs::path& p) {
  if (outputs) outputs->push_back(p);
}

bool is_gkg_archive(const fs::path& p) {
  const std::string name = p.filename().string();
  auto ends = [&](std::string_view suffix) {
    return name.size() >= suffix.size() && name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0;
  };
  return ends(".gkg.csv.zip") || ends(".gkg.csv") || ends(".GKG.CSV.ZIP");
}

std::vector<fs::path> list_archives(const fs::path& dir) {
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && is_gkg_archive(e.path())) out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

// Close of the trading day before `from`, or local midnight of `from` when
// the calendar has no earlier day.
Instant window_start(const gkg::TradingCalendar& cal, Date from) {
  using namespace std::chrono;
  const auto it = std::lower_bound(cal.trading_days.begin(), cal.trading_days.end(), from);
  sys_seconds local;
  if (it == cal.trading_days.begin()) {
    local = sys_seconds{from};
  } else {
    local = sys_seconds{*std::prev(it)} + duration_cast<seconds>(cal.market_close);
  }
  return local - hours{cal.utc_offset_hours};
}

// Close of the last calendar day.
Instant window_end(const gkg::TradingCalendar& cal) {
  using namespace std::chrono;
  return sys_seconds{cal.trading_days.back()} + duration_cast<seconds>(cal.market_close) -
         hours{cal.utc_offset_hours};
}

std::string cluster_json(const Reductions& red) {
  auto doc = nlohmann::ordered_json::parse(dimreduce::cluster_model_to_json(red.cluster, red.cluster_keys));
  doc["factors_retained"] = red.factors_retained;
  doc["news_retained"] = red.gdelt_retained;
  return doc.dump(2) + "\n";
}

std::string quantile_label(double q) { return "q" + csv::format_double(q); }

MatrixXd hstack(const MatrixXd& a, const MatrixXd& b) {
  if (a.cols() == 0) return b;
  if (b.cols() == 0) return a;
  MatrixXd out(a.rows(), a.cols() + b.cols());
  out << a, b;
  return out;
}

MatrixXd pick_columns(const MatrixXd& m, const std::vector<std::string>& keys,
                      const std::vector<std::string>& wanted) {
  MatrixXd out(m.rows(), static_cast<Index>(wanted.size()));
  for (std::size_t j = 0; j < wanted.size(); ++j) {
    const auto it = std::find(keys.begin(), keys.end(), wanted[j]);
    if (it == keys.end()) throw Error(ErrorKind::kParameter, "unknown covariate " + wanted[j]);
    out.col(static_cast<Index>(j)) = m.col(it - keys.begin());
  }
  return out;
}

template <class T>
std::vector<T> concat(std::vector<T> a, const std::vector<T>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

void require_columns(const CovariateBlock& block, CovariateSet set) {
  if (set != CovariateSet::kNone && block.values.cols() == 0) {
    throw Error(ErrorKind::kParameter,
                "covariate set " + std::string(covariate_set_name(set)) + " has no columns");
  }
}

std::vector<std::string> date_labels(const std::vector<Date>& days) {
  std::vector<std::string> out;
  out.reserve(days.size());
  for (Date d : days) out.push_back(format_date(d));
  return out;
}

}  // namespace

// --- ingest ------------------------------------------------------------------

IngestSummary stage_ingest(const IngestConfig& cfg, const fs::path& out_dir, Outputs* outputs) {
  if (cfg.to < cfg.from) throw Error(ErrorKind::kParameter, "ingest: \"to\" precedes \"from\"");
  const gkg::TradingCalendar full =
      cfg.calendar.empty() ? gkg::weekday_calendar(cfg.from, cfg.to) : gkg::read_calendar_file(cfg.calendar);
  gkg::TradingCalendar cal = full;
  cal.trading_days.clear();
  for (Date d : full.trading_days) {
    if (d >= cfg.from && d <= cfg.to) cal.trading_days.push_back(d);
  }
  if (cal.trading_days.empty()) throw Error(ErrorKind::kParameter, "ingest: no trading days in range");
  const Instant start = window_start(full, cfg.from);
  const Instant end = window_end(cal);

  gkg::ArticleFilterConfig filter;
  filter.allowed_outlets = cfg.outlets.empty() ? gkg::default_outlets() : gkg::read_outlets_file(cfg.outlets);
  filter.min_theme_keywords = cfg.min_theme_keywords;
  filter.min_word_count = cfg.min_word_count;
  filter.validate();

  IngestSummary summary;
  if (!cfg.base_url.empty()) {
    fs::create_directories(cfg.gkg_dir);
    const gkg::FetchReport fetched = gkg::fetch_gkg_files(cfg.base_url, start, end, cfg.gkg_dir);
    log::info("ingest: downloaded " + std::to_string(fetched.downloaded) + " archives");
    if (!fetched.complete()) {
      log::warn("ingest: " + std::to_string(fetched.missing.size()) + " slots could not be fetched");
    }
    summary.archives = fetched.paths;
  } else {
    summary.archives = list_archives(cfg.gkg_dir);
  }
  summary.files = summary.archives.size();
  if (summary.archives.empty()) throw Error(ErrorKind::kIo, "ingest: no GKG archives in " + cfg.gkg_dir.string());

  struct FileResult {
    std::size_t records = 0;
    std::size_t kept = 0;
    std::vector<std::string> errors;
  };
  std::vector<FileResult> results(summary.archives.size());
  std::vector<gkg::DailyAggregator> partial(summary.archives.size(), gkg::DailyAggregator(cal));
  parallel_for(summary.archives.size(), [&](std::size_t i) {
    const gkg::ParseOutcome parsed = gkg::parse_gkg_text(gkg::read_gkg_archive(summary.archives[i]));
    results[i].records = parsed.records.size();
    results[i].errors = parsed.errors;
    for (const auto& rec : parsed.records) {
      if (rec.publish_instant < start || rec.publish_instant >= end) continue;
      if (!gkg::keep_article(rec, filter)) continue;
      try {
        (void)gkg::assign_trading_day(rec.publish_instant, cal);
      } catch (const Error& e) {
        if (e.kind() == ErrorKind::kOutOfCalendar) continue;
        throw;
      }
      partial[i].add(rec);
      ++results[i].kept;
    }
  });
  gkg::DailyAggregator total(cal);
  for (std::size_t i = 0; i < partial.size(); ++i) {
    total.merge(partial[i]);
    summary.records += results[i].records;
    summary.kept += results[i].kept;
    summary.parse_errors += results[i].errors.size();
    for (std::size_t e = 0; e < std::min<std::size_t>(results[i].errors.size(), 3); ++e) {
      log::warn("ingest: " + summary.archives[i].filename().string() + " " + results[i].errors[e]);
    }
  }
  const auto days = total.finish();
  summary.trading_days = days.size();
  fs::create_directories(out_dir);
  gkg::write_daily_features(out_dir, days);
  note(outputs, out_dir / "daily_features.csv");
  note(outputs, out_dir / "features_meta.json");
  log::info("ingest: " + std::to_string(summary.kept) + " of " + std::to_string(summary.records) +
            " articles kept over " + std::to_string(summary.trading_days) + " trading days");
  return summary;
}

// --- select ------------------------------------------------------------------

void stage_select(const SelectConfig& cfg, const fs::path& in_dir, const fs::path& out_dir,
                  const fs::path& report_path, Outputs* outputs) {
  features::FeatureTable table = features::read_feature_table(in_dir);
  features::SelectionConfig sel = cfg.selection;
  if (!cfg.exclusions.empty()) {
    const auto codes = features::read_exclusion_file(cfg.exclusions);
    sel.drop_gcam_codes.insert(codes.begin(), codes.end());
  }
  auto [selected, report] = features::run_selection_pipeline(table.matrix, table.article_counts, sel);
  fs::create_directories(out_dir);
  features::write_feature_table(out_dir, {selected, table.article_counts});
  note(outputs, out_dir / "daily_features.csv");
  note(outputs, out_dir / "features_meta.json");
  if (!report_path.parent_path().empty()) fs::create_directories(report_path.parent_path());
  csv::write_file(report_path, features::report_to_json(report));
  note(outputs, report_path);
  for (const auto& w : report.warnings) log::warn("select: " + w);
  log::info("select: kept " + std::to_string(selected.n_features()) + " of " +
            std::to_string(table.matrix.n_features()) + " features");
}

// --- factors -----------------------------------------------------------------

void stage_factors(const FactorsConfig& cfg, const fs::path& out_dir, Outputs* outputs) {
  const auto panel = term_structure::read_yield_csv(cfg.yields);
  const auto spreads = term_structure::compute_spreads(panel);
  const auto factors = term_structure::fit_ns_factors(spreads, panel.maturities, cfg.lambda, panel.days);
  const auto target = term_structure::build_target(panel, cfg.target_maturity);
  fs::create_directories(out_dir);
  term_structure::write_factors_csv(out_dir / "factors.csv", factors);
  term_structure::write_target_csv(out_dir / "target.csv", target);
  note(outputs, out_dir / "factors.csv");
  note(outputs, out_dir / "target.csv");
  log::info("factors: " + std::to_string(panel.days.size()) + " curve days, " +
            std::to_string(target.values.size()) + " target changes");
}

// --- inputs ------------------------------------------------------------------

ModelInputs assemble_inputs(const term_structure::SpreadSeries& target,
                            const term_structure::NsFactors& factors,
                            const features::FeatureMatrix& selected, std::size_t fill_rows) {
  ModelInputs in;
  const std::size_t n = target.values.size();
  if (n == 0) throw Error(ErrorKind::kParameter, "empty target series");
  in.days = target.days;
  in.target = target.values;
  in.factor_keys = {"FACTOR_0", "FACTOR_1", "FACTOR_2"};
  in.factors.resize(static_cast<Index>(n), 3);
  in.gdelt_keys = selected.keys;
  in.gdelt.setZero(static_cast<Index>(n), static_cast<Index>(selected.n_features()));

  std::map<Date, std::size_t> feature_row;
  for (std::size_t i = 0; i < selected.n_days(); ++i) feature_row[selected.days[i]] = i;

  using Mask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;
  Mask missing = Mask::Constant(static_cast<Index>(n), in.gdelt.cols(), true);
  std::size_t absent_days = 0;
  for (std::size_t t = 0; t < n; ++t) {
    // Latest curve day strictly before the target day.
    const auto it = std::lower_bound(factors.days.begin(), factors.days.end(), target.days[t]);
    if (it == factors.days.begin()) {
      throw Error(ErrorKind::kAlignment, "no factor observation before " + format_date(target.days[t]));
    }
    const std::size_t f = static_cast<std::size_t>(std::prev(it) - factors.days.begin());
    const auto row = static_cast<Index>(t);
    in.factors(row, 0) = factors.beta0[f];
    in.factors(row, 1) = factors.beta1[f];
    in.factors(row, 2) = factors.beta2[f];
    if (selected.n_features() == 0) continue;
    const auto fr = feature_row.find(factors.days[f]);
    if (fr == feature_row.end()) {
      ++absent_days;
      continue;
    }
    const auto src = static_cast<Index>(fr->second);
    in.gdelt.row(row) = selected.values.row(src);
    missing.row(row) = selected.missing.row(src);
  }
  if (absent_days > 0) {
    in.warnings.push_back(std::to_string(absent_days) + " covariate days absent from the feature table");
  }

  const std::size_t span = std::clamp<std::size_t>(fill_rows, 1, n);
  for (Index j = 0; j < in.gdelt.cols(); ++j) {
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t pass = 0; pass < 2 && count == 0; ++pass) {
      const std::size_t rows = pass == 0 ? span : n;
      for (std::size_t t = 0; t < rows; ++t) {
        if (!missing(static_cast<Index>(t), j)) {
          sum += in.gdelt(static_cast<Index>(t), j);
          ++count;
        }
      }
    }
    if (count == 0) in.warnings.push_back("feature " + in.gdelt_keys[static_cast<std::size_t>(j)] + " never observed");
    const double fill = count ? sum / static_cast<double>(count) : 0.0;
    for (Index t = 0; t < in.gdelt.rows(); ++t) {
      if (missing(t, j)) in.gdelt(t, j) = fill;
    }
  }
  return in;
}

ModelInputs load_inputs(const fs::path& run_dir, std::size_t t0) {
  const fs::path fdir = run_dir / "factors";
  if (!fs::exists(fdir / "target.csv") || !fs::exists(fdir / "factors.csv")) {
    throw Error(ErrorKind::kIo, "factors stage output missing under " + fdir.string());
  }
  const auto target = term_structure::read_target_csv(fdir / "target.csv");
  const auto factors = term_structure::read_factors_csv(fdir / "factors.csv");
  features::FeatureMatrix selected;
  if (fs::exists(run_dir / "select" / "daily_features.csv")) {
    selected = features::read_feature_table(run_dir / "select").matrix;
  }
  return assemble_inputs(target, factors, selected, t0);
}

std::size_t fit_rows(const ReduceConfig& cfg, const ModelInputs& inputs, std::size_t t0) {
  const std::size_t n = inputs.target.size();
  return cfg.fit_in_sample ? std::min(t0, n) : n;
}

// --- reduce ------------------------------------------------------------------

Reductions reduce_inputs(const ModelInputs& inputs, const ReduceConfig& cfg, std::size_t rows) {
  Reductions red;
  rows = std::clamp<std::size_t>(rows, 2, static_cast<std::size_t>(inputs.gdelt.rows()));
  const auto fit_span = static_cast<Index>(rows);

  // Hierarchical clustering of feature columns as points in day space.
  MatrixXd columns = inputs.gdelt.topRows(fit_span);
  red.cluster_keys = inputs.gdelt_keys;
  if (cfg.joint_clustering) {
    columns = hstack(inputs.factors.topRows(fit_span), columns);
    red.cluster_keys = concat(inputs.factor_keys, inputs.gdelt_keys);
  } else {
    red.factors_retained = inputs.factor_keys;
  }
  const std::size_t p = red.cluster_keys.size();
  std::vector<std::string> retained;
  if (p >= 3) {
    const MatrixXd points = dimreduce::standardize_columns(columns).transpose();
    // k = p makes every cluster a singleton, where silhouette is zero by
    // definition; the search stops one short of it.
    const std::size_t k_max = std::min(cfg.k_max, p - 1);
    const std::size_t k_min = std::min(cfg.k_min, k_max);
    red.cluster = dimreduce::select_k(points, red.cluster_keys, k_min, k_max, cfg.linkage);
    retained = red.cluster.retained;
  } else {
    retained = red.cluster_keys;
    red.cluster.k = p;
    red.cluster.retained = retained;
    for (std::size_t i = 0; i < p; ++i) red.cluster.assignments.push_back(static_cast<int>(i));
  }
  const std::set<std::string> kept(retained.begin(), retained.end());
  if (cfg.joint_clustering) {
    for (const auto& k : inputs.factor_keys) {
      if (kept.count(k)) red.factors_retained.push_back(k);
    }
  }
  for (const auto& k : inputs.gdelt_keys) {
    if (kept.count(k)) red.gdelt_retained.push_back(k);
  }

  if (inputs.gdelt.cols() > 0) {
    red.pca = dimreduce::pca_fit(inputs.gdelt.topRows(fit_span), cfg.pca_components, true);
    red.pca_scores = dimreduce::pca_transform(red.pca, inputs.gdelt);
    for (Index c = 0; c < red.pca_scores.cols(); ++c) red.pca_keys.push_back("PC" + std::to_string(c + 1));
  } else {
    red.pca_scores.resize(inputs.gdelt.rows(), 0);
  }
  return red;
}

CovariateBlock covariates_for(CovariateSet set, const ModelInputs& in, const Reductions& red) {
  CovariateBlock b;
  const auto rows = static_cast<Index>(in.target.size());
  switch (set) {
    case CovariateSet::kNone:
      b.values.resize(rows, 0);
      break;
    case CovariateSet::kFactors:
      b.keys = in.factor_keys;
      b.values = in.factors;
      break;
    case CovariateSet::kFactorsGdelt:
      b.keys = concat(in.factor_keys, in.gdelt_keys);
      b.values = hstack(in.factors, in.gdelt);
      break;
    case CovariateSet::kFactorsGdeltHierarc:
      b.keys = concat(red.factors_retained, red.gdelt_retained);
      b.values = hstack(pick_columns(in.factors, in.factor_keys, red.factors_retained),
                        pick_columns(in.gdelt, in.gdelt_keys, red.gdelt_retained));
      break;
    case CovariateSet::kFactorsGdeltPca:
      b.keys = concat(in.factor_keys, red.pca_keys);
      b.values = hstack(in.factors, red.pca_scores);
      if (red.pca_keys.empty()) b.values.resize(rows, 0);
      break;
    case CovariateSet::kGdelt:
      b.keys = in.gdelt_keys;
      b.values = in.gdelt;
      break;
    case CovariateSet::kGdeltHierarc:
      b.keys = red.gdelt_retained;
      b.values = pick_columns(in.gdelt, in.gdelt_keys, red.gdelt_retained);
      break;
    case CovariateSet::kGdeltPca:
      b.keys = red.pca_keys;
      b.values = red.pca_scores;
      break;
  }
  const bool needs_news = set == CovariateSet::kFactorsGdelt || set == CovariateSet::kFactorsGdeltPca ||
                          set == CovariateSet::kGdelt || set == CovariateSet::kGdeltHierarc ||
                          set == CovariateSet::kGdeltPca;
  if (needs_news && in.gdelt.cols() == 0) {
    throw Error(ErrorKind::kParameter,
                "covariate set " + std::string(covariate_set_name(set)) + " needs selected news features");
  }
  require_columns(b, set);
  return b;
}

void write_reductions(const fs::path& out_dir, const ModelInputs& inputs, const Reductions& red,
                      bool hierarc, bool pca, Outputs* outputs) {
  fs::create_directories(out_dir);
  if (hierarc) {
    csv::write_file(out_dir / "cluster.json", cluster_json(red));
    note(outputs, out_dir / "cluster.json");
  }
  if (pca && !red.pca_keys.empty()) {
    csv::write_file(out_dir / "pca.json", dimreduce::pca_model_to_json(red.pca, inputs.gdelt_keys));
    note(outputs, out_dir / "pca.json");
    csv::Table t;
    t.header = {"date"};
    for (const auto& k : red.pca_keys) t.header.push_back(k);
    for (std::size_t i = 0; i < inputs.days.size(); ++i) {
      std::vector<std::string> row{format_date(inputs.days[i])};
      for (Index c = 0; c < red.pca_scores.cols(); ++c) {
        row.push_back(csv::format_double(red.pca_scores(static_cast<Index>(i), c)));
      }
      t.rows.push_back(std::move(row));
    }
    csv::write_table(out_dir / "pca_scores.csv", t);
    note(outputs, out_dir / "pca_scores.csv");
  }
}

void stage_reduce(const ReduceConfig& cfg, const fs::path& run_dir, std::size_t t0, Outputs* outputs) {
  const ModelInputs inputs = load_inputs(run_dir, t0);
  for (const auto& w : inputs.warnings) log::warn("reduce: " + w);
  const Reductions red = reduce_inputs(inputs, cfg, fit_rows(cfg, inputs, t0));
  write_reductions(run_dir / "reduce", inputs, red, true, true, outputs);
  log::info("reduce: k=" + std::to_string(red.cluster.k) + ", " + std::to_string(red.gdelt_retained.size()) +
            " news features retained, " + std::to_string(red.pca_keys.size()) + " components");
}

void reduce_feature_dir(const ReduceConfig& cfg, const fs::path& in_dir, const fs::path& out_dir,
                        bool hierarc, bool pca, std::size_t t0, Outputs* outputs) {
  const features::FeatureMatrix m = features::read_feature_table(in_dir).matrix;
  if (m.n_features() == 0) throw Error(ErrorKind::kParameter, "no features in " + in_dir.string());
  // Same fill and fit rules as the run, with no factor columns.
  ModelInputs inputs;
  inputs.days = m.days;
  inputs.target.assign(m.n_days(), 0.0);
  inputs.factors.resize(static_cast<Index>(m.n_days()), 0);
  inputs.gdelt_keys = m.keys;
  inputs.gdelt = m.values;
  const std::size_t span = std::clamp<std::size_t>(t0, 1, m.n_days());
  for (Index j = 0; j < m.values.cols(); ++j) {
    double sum = 0.0;
    std::size_t count = 0;
    for (Index t = 0; t < static_cast<Index>(span); ++t) {
      if (!m.missing(t, j)) {
        sum += m.values(t, j);
        ++count;
      }
    }
    const double fill = count ? sum / static_cast<double>(count) : 0.0;
    for (Index t = 0; t < m.values.rows(); ++t) {
      if (m.missing(t, j)) inputs.gdelt(t, j) = fill;
    }
  }
  ReduceConfig local = cfg;
  local.joint_clustering = false;
  const Reductions red = reduce_inputs(inputs, local, fit_rows(local, inputs, t0));
  write_reductions(out_dir, inputs, red, hierarc, pca, outputs);
}

// --- forecast tables ---------------------------------------------------------

void write_forecast_table(const fs::path& path, const ForecastTable& table) {
  csv::Table t;
  t.header = {"index", "date"};
  for (double q : table.quantiles) t.header.push_back(quantile_label(q));
  for (std::size_t i = 0; i < table.indices.size(); ++i) {
    std::vector<std::string> row{std::to_string(table.indices[i]), table.dates.empty() ? "" : table.dates[i]};
    for (Index j = 0; j < table.values.cols(); ++j) {
      row.push_back(csv::format_double(table.values(static_cast<Index>(i), j)));
    }
    t.rows.push_back(std::move(row));
  }
  csv::write_table(path, t);
}

ForecastTable read_forecast_table(const fs::path& path) {
  const csv::Table t = csv::read_table(path);
  ForecastTable out;
  const std::size_t c_index = t.column("index");
  const std::size_t c_date = t.column("date");
  std::vector<std::size_t> qcols;
  for (std::size_t c = 0; c < t.header.size(); ++c) {
    const std::string& h = t.header[c];
    if (h.size() > 1 && h[0] == 'q') {
      out.quantiles.push_back(csv::parse_double(std::string_view(h).substr(1)));
      qcols.push_back(c);
    }
  }
  if (qcols.empty()) throw Error(ErrorKind::kParse, path.string() + ": no quantile columns");
  out.values.resize(static_cast<Index>(t.rows.size()), static_cast<Index>(qcols.size()));
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& row = t.rows[i];
    out.indices.push_back(static_cast<std::size_t>(csv::parse_double(row[c_index])));
    out.dates.push_back(row[c_date]);
    for (std::size_t j = 0; j < qcols.size(); ++j) {
      out.values(static_cast<Index>(i), static_cast<Index>(j)) = csv::parse_double(row[qcols[j]]);
    }
  }
  return out;
}

// --- models ------------------------------------------------------------------

void run_deepar(const ModelsConfig& cfg, CovariateSet set, const ModelInputs& inputs,
                const Reductions& red, std::size_t t0, std::uint64_t seed, std::size_t threads,
                const std::vector<double>& quantiles, const fs::path& out_dir, Outputs* outputs) {
  const std::string name = deepar_model_name(set);
  const CovariateBlock cov = covariates_for(set, inputs, red);
  if (inputs.target.size() <= t0) throw Error(ErrorKind::kParameter, "target series is not longer than t0");
  deepar::SeriesDataset data{inputs.target, cov.values};
  deepar::NetworkConfig net = cfg.network;
  net.seed = seed;
  deepar::RollingOptions opt;
  opt.window = t0;
  opt.retrain_stride = cfg.retrain_stride;
  opt.samples = cfg.samples;
  opt.seed = seed;
  opt.threads = thread_count(threads);
  const deepar::RollingResult r = deepar::rolling_forecast(data, net, opt);

  ForecastTable table;
  table.indices = r.indices;
  table.quantiles = quantiles;
  table.values.resize(static_cast<Index>(r.indices.size()), static_cast<Index>(quantiles.size()));
  for (std::size_t i = 0; i < r.indices.size(); ++i) {
    table.dates.push_back(format_date(inputs.days[r.indices[i]]));
    for (std::size_t j = 0; j < quantiles.size(); ++j) {
      table.values(static_cast<Index>(i), static_cast<Index>(j)) = r.forecasts[i].quantile(quantiles[j]);
    }
  }
  fs::create_directories(out_dir);
  write_forecast_table(out_dir / ("forecasts_" + name + ".csv"), table);
  note(outputs, out_dir / ("forecasts_" + name + ".csv"));

  csv::Table blocks;
  blocks.header = {"training_start", "final_loss"};
  for (std::size_t b = 0; b < r.training_starts.size(); ++b) {
    blocks.rows.push_back({std::to_string(r.training_starts[b]), csv::format_double(r.final_losses[b])});
  }
  csv::write_table(out_dir / ("training_" + name + ".csv"), blocks);
  note(outputs, out_dir / ("training_" + name + ".csv"));
  log::info("models: " + name + " (" + std::to_string(cov.keys.size()) + " covariates, " +
            std::to_string(r.training_starts.size()) + " trainings)");
}

void run_gbm(const ModelsConfig& cfg, CovariateSet set, const ModelInputs& inputs, const Reductions& red,
             std::size_t t0, std::size_t threads, const std::vector<double>& quantiles,
             const fs::path& out_dir, Outputs* outputs) {
  if (set == CovariateSet::kNone) throw Error(ErrorKind::kParameter, "gradient boosting needs covariates");
  const std::string name = gbm_model_name(set);
  const CovariateBlock cov = covariates_for(set, inputs, red);
  const std::size_t n = inputs.target.size();
  if (n <= t0) throw Error(ErrorKind::kParameter, "target series is not longer than t0");
  const std::size_t nq = quantiles.size();
  fs::create_directories(out_dir);

  // Grid search per quantile on the first training window.
  const MatrixXd first_x = cov.values.topRows(static_cast<Index>(t0));
  const std::vector<double> first_y(inputs.target.begin(), inputs.target.begin() + static_cast<std::ptrdiff_t>(t0));
  std::vector<gbm::BoostParams> chosen(nq);
  for (std::size_t j = 0; j < nq; ++j) {
    gbm::GridSearchConfig g = cfg.grid;
    g.loss = gbm::Loss::kPinball;
    g.quantile = quantiles[j];
    g.threads = thread_count(threads);
    const gbm::GridSearchResult res = gbm::cv_grid_search(first_x, first_y, g);
    const fs::path table = out_dir / ("cv_" + name + "_" + quantile_label(quantiles[j]) + ".csv");
    gbm::write_cv_table(table, res);
    note(outputs, table);
    chosen[j] = {res.best_depth, res.best_learning_rate, cfg.grid.n_trees, gbm::Loss::kPinball, quantiles[j]};
  }

  // Rolling refits: block b trains on [s - t0, s) and forecasts [s, s + stride).
  std::vector<std::size_t> starts;
  for (std::size_t s = t0; s < n; s += cfg.retrain_stride) starts.push_back(s);
  MatrixXd values(static_cast<Index>(n - t0), static_cast<Index>(nq));
  std::vector<gbm::GbmModel> last(nq);
  parallel_for(
      starts.size() * nq,
      [&](std::size_t task) {
        const std::size_t b = task / nq;
        const std::size_t j = task % nq;
        const std::size_t s = starts[b];
        const std::size_t stop = std::min(n, s + cfg.retrain_stride);
        const MatrixXd x = cov.values.middleRows(static_cast<Index>(s - t0), static_cast<Index>(t0));
        const std::vector<double> y(inputs.target.begin() + static_cast<std::ptrdiff_t>(s - t0),
                                    inputs.target.begin() + static_cast<std::ptrdiff_t>(s));
        const gbm::GbmModel model = gbm::gbm_fit(x, y, chosen[j]);
        const MatrixXd ahead = cov.values.middleRows(static_cast<Index>(s), static_cast<Index>(stop - s));
        const std::vector<double> pred = gbm::gbm_predict(model, ahead);
        for (std::size_t k = 0; k < pred.size(); ++k) {
          values(static_cast<Index>(s - t0 + k), static_cast<Index>(j)) = pred[k];
        }
        if (b + 1 == starts.size()) last[j] = model;
      },
      thread_count(threads));

  ForecastTable table;
  table.quantiles = quantiles;
  table.values = values;
  for (std::size_t t = t0; t < n; ++t) {
    table.indices.push_back(t);
    table.dates.push_back(format_date(inputs.days[t]));
  }
  write_forecast_table(out_dir / ("forecasts_" + name + ".csv"), table);
  note(outputs, out_dir / ("forecasts_" + name + ".csv"));
  for (std::size_t j = 0; j < nq; ++j) {
    const fs::path p = out_dir / ("model_" + name + "_" + quantile_label(quantiles[j]) + ".json");
    csv::write_file(p, gbm::model_to_json(last[j]));
    note(outputs, p);
  }
  log::info("models: " + name + " (" + std::to_string(cov.keys.size()) + " covariates)");
}

std::vector<std::string> configured_model_names(const ModelsConfig& cfg) {
  std::vector<std::string> out;
  for (auto s : cfg.deepar) out.push_back(deepar_model_name(s));
  for (auto s : cfg.gbm) out.push_back(gbm_model_name(s));
  return out;
}

void stage_models(const RunConfig& cfg, const fs::path& run_dir, Outputs* outputs) {
  const ModelInputs inputs = load_inputs(run_dir, cfg.t0);
  for (const auto& w : inputs.warnings) log::warn("models: " + w);
  const Reductions red = reduce_inputs(inputs, cfg.reduce, fit_rows(cfg.reduce, inputs, cfg.t0));
  const fs::path out = run_dir / "models";
  const auto& q = cfg.evaluate.backtest.quantiles;
  for (auto s : cfg.models.deepar) {
    run_deepar(cfg.models, s, inputs, red, cfg.t0, cfg.seed, cfg.threads, q, out, outputs);
  }
  for (auto s : cfg.models.gbm) run_gbm(cfg.models, s, inputs, red, cfg.t0, cfg.threads, q, out, outputs);
}

// --- evaluate ----------------------------------------------------------------

std::vector<std::pair<std::string, std::string>> resolve_pairs(const EvaluateConfig& cfg,
                                                               const std::vector<std::string>& models) {
  const std::set<std::string> known(models.begin(), models.end());
  std::vector<std::pair<std::string, std::string>> out;
  if (cfg.pair_mode == "all") {
    for (std::size_t i = 0; i < models.size(); ++i) {
      for (std::size_t j = i + 1; j < models.size(); ++j) out.emplace_back(models[i], models[j]);
    }
  } else if (cfg.pair_mode == "list") {
    for (const auto& [a, b] : cfg.pairs) {
      if (!known.count(a) || !known.count(b)) {
        throw Error(ErrorKind::kParameter, "pair (" + a + ", " + b + ") names a model that is not evaluated");
      }
      out.emplace_back(a, b);
    }
  } else {
    const std::string nocov = deepar_model_name(CovariateSet::kNone);
    for (auto s : all_covariate_sets()) {
      const std::string d = deepar_model_name(s);
      if (!known.count(d) || s == CovariateSet::kNone) continue;
      if (known.count(nocov)) out.emplace_back(d, nocov);
      if (known.count(gbm_model_name(s))) out.emplace_back(d, gbm_model_name(s));
    }
  }
  return out;
}

evaluation::BacktestReport stage_evaluate(const EvaluateConfig& cfg, const fs::path& target_csv,
                                          const fs::path& forecast_dir, const fs::path& out,
                                          const std::vector<std::string>& models, Outputs* outputs) {
  if (models.empty()) throw Error(ErrorKind::kParameter, "evaluate: no models");
  const auto target = term_structure::read_target_csv(target_csv);
  std::vector<std::shared_ptr<evaluation::ForecastProvider>> providers;
  for (const auto& name : models) {
    const fs::path p = forecast_dir / ("forecasts_" + name + ".csv");
    if (!fs::exists(p)) throw Error(ErrorKind::kIo, "evaluate: no forecasts for " + name + " (" + p.string() + ")");
    ForecastTable t = read_forecast_table(p);
    providers.push_back(std::make_shared<evaluation::PrecomputedProvider>(name, std::move(t.indices),
                                                                          std::move(t.quantiles), std::move(t.values)));
  }
  const auto labels = date_labels(target.days);
  const auto pairs = resolve_pairs(cfg, models);
  evaluation::BacktestReport report =
      evaluation::rolling_backtest(providers, target.values, cfg.backtest, pairs, labels);
  fs::create_directories(out);
  evaluation::write_report(out, report);
  std::vector<fs::path> written;
  for (const auto& e : fs::directory_iterator(out)) {
    if (e.is_regular_file()) written.push_back(e.path());
  }
  std::sort(written.begin(), written.end());
  for (const auto& p : written) note(outputs, p);
  for (const auto& w : report.warnings) log::warn("evaluate: " + w);
  log::info("evaluate: " + std::to_string(report.models.size()) + " models, " +
            std::to_string(report.tests.size()) + " pairwise tests over " + std::to_string(report.days.size()) +
            " days");
  return report;
}

// --- shap --------------------------------------------------------------------

void stage_shap(const RunConfig& cfg, const fs::path& run_dir, Outputs* outputs) {
  const ModelInputs inputs = load_inputs(run_dir, cfg.t0);
  const Reductions red = reduce_inputs(inputs, cfg.reduce, fit_rows(cfg.reduce, inputs, cfg.t0));
  const CovariateBlock cov = covariates_for(cfg.shap.covariates, inputs, red);
  const std::size_t n = inputs.target.size();
  const std::size_t window = std::min(cfg.t0, n);
  const std::size_t begin = n - window;
  deepar::SeriesDataset data{inputs.target, cov.values};
  deepar::NetworkConfig net = cfg.models.network;
  net.seed = cfg.seed;
  const std::size_t L = net.context_length;
  if (window <= L + 1) throw Error(ErrorKind::kParameter, "shap: window shorter than the context length");
  const deepar::DeepArModel model = deepar::train(data.slice(begin, n), net);

  const fs::path out = run_dir / "shap";
  fs::create_directories(out);
  csv::write_file(out / "model.json", deepar::model_to_json(model));
  note(outputs, out / "model.json");
  deepar::write_loss_trace(out / "loss_trace.csv", model.loss_trace);
  note(outputs, out / "loss_trace.csv");

  const MatrixXd background = cov.values.middleRows(static_cast<Index>(begin), static_cast<Index>(window));
  const std::size_t explain = std::min(cfg.shap.explain_days, window - L);
  std::vector<evaluation::ShapResult> results(explain);
  std::vector<std::size_t> days(explain);
  for (std::size_t e = 0; e < explain; ++e) days[e] = n - explain + e;
  parallel_for(
      explain,
      [&](std::size_t e) {
        const std::size_t t = days[e];
        const std::span<const double> history(inputs.target.data() + (t - L), L);
        const MatrixXd context = cov.values.middleRows(static_cast<Index>(t - L), static_cast<Index>(L + 1));
        const evaluation::BatchPredictor predict = [&](const MatrixXd& rows) {
          std::vector<double> mu(static_cast<std::size_t>(rows.rows()));
          MatrixXd c = context;
          for (Index r = 0; r < rows.rows(); ++r) {
            c.row(static_cast<Index>(L)) = rows.row(r);
            mu[static_cast<std::size_t>(r)] = deepar::predict_next(model, history, c).mu;
          }
          return mu;
        };
        std::vector<double> x(static_cast<std::size_t>(cov.values.cols()));
        for (Index j = 0; j < cov.values.cols(); ++j) x[static_cast<std::size_t>(j)] = cov.values(static_cast<Index>(t), j);
        evaluation::ShapConfig sc;
        sc.n_coalitions = cfg.shap.coalitions;
        sc.seed = cfg.seed + t;
        results[e] = evaluation::kernel_shap(predict, background, x, sc);
      },
      thread_count(cfg.threads));

  csv::Table values;
  values.header = {"date", "base_value", "prediction"};
  for (const auto& k : cov.keys) values.header.push_back(k);
  for (std::size_t e = 0; e < explain; ++e) {
    std::vector<std::string> row{format_date(inputs.days[days[e]]), csv::format_double(results[e].base_value),
                                 csv::format_double(results[e].prediction)};
    for (double phi : results[e].phi) row.push_back(csv::format_double(phi));
    values.rows.push_back(std::move(row));
  }
  csv::write_table(out / "shap_values.csv", values);
  note(outputs, out / "shap_values.csv");

  csv::Table importance;
  importance.header = {"feature", "mean_abs_phi"};
  for (const auto& fi : evaluation::mean_abs_importance(results, cov.keys)) {
    importance.rows.push_back({fi.key, csv::format_double(fi.mean_abs_phi)});
  }
  csv::write_table(out / "shap_importance.csv", importance);
  note(outputs, out / "shap_importance.csv");
  log::info("shap: explained " + std::to_string(explain) + " days over " + std::to_string(cov.keys.size()) +
            " covariates");
}

}  // namespace spreadcast::pipeline
