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

#include "spreadcast/features.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <json.hpp>

#include "spreadcast/csv.hpp"
#include "spreadcast/error.hpp"
#include "spreadcast/kernels.hpp"

namespace spreadcast::features {
namespace {

constexpr double kSlack = 1e-9;

void record_drop(SelectionReport* report, const std::string& key, DropReason reason) {
  if (report) report->dropped[key] = reason;
}

std::size_t priority_rank(const SelectionConfig& cfg, Category c) {
  const auto it = std::find(cfg.category_priority.begin(), cfg.category_priority.end(), c);
  return static_cast<std::size_t>(it - cfg.category_priority.begin());
}

bool gcam_excluded(const std::string& key, const std::set<std::string>& drop) {
  const std::string_view code = gkg::key_code(key);
  if (drop.count(std::string(code))) return true;
  return drop.count(gkg::gcam_dictionary(key)) > 0;
}

}  // namespace

std::string_view drop_reason_name(DropReason r) {
  switch (r) {
    case DropReason::kExcludedDictionary: return "excluded-dictionary";
    case DropReason::kAllMissingInitial: return "all-missing-initial";
    case DropReason::kLowAvailability: return "low-availability";
    case DropReason::kLowVariance: return "low-variance";
    case DropReason::kCorrelatedOut: return "correlated-out";
  }
  return "unknown";
}

std::size_t FeatureMatrix::missing_count(std::size_t feature) const {
  return static_cast<std::size_t>(missing.col(static_cast<Eigen::Index>(feature)).count());
}

FeatureMatrix FeatureMatrix::select(std::span<const std::size_t> columns) const {
  FeatureMatrix out;
  out.days = days;
  out.normalized = normalized;
  out.values.resize(static_cast<Eigen::Index>(days.size()), static_cast<Eigen::Index>(columns.size()));
  out.missing.resize(static_cast<Eigen::Index>(days.size()), static_cast<Eigen::Index>(columns.size()));
  for (std::size_t k = 0; k < columns.size(); ++k) {
    const auto src = static_cast<Eigen::Index>(columns[k]);
    out.keys.push_back(keys[columns[k]]);
    out.meta.push_back(meta[columns[k]]);
    out.values.col(static_cast<Eigen::Index>(k)) = values.col(src);
    out.missing.col(static_cast<Eigen::Index>(k)) = missing.col(src);
  }
  return out;
}

void FeatureMatrix::validate() const {
  const auto r = static_cast<Eigen::Index>(days.size());
  const auto c = static_cast<Eigen::Index>(keys.size());
  if (values.rows() != r || values.cols() != c || missing.rows() != r || missing.cols() != c ||
      meta.size() != keys.size()) {
    throw Error(ErrorKind::kAlignment, "feature matrix dimensions are inconsistent");
  }
  std::set<std::string> seen;
  for (const auto& k : keys) {
    if (!seen.insert(k).second) throw Error(ErrorKind::kSchema, "duplicate feature key " + k);
  }
  for (Eigen::Index j = 0; j < c; ++j) {
    for (Eigen::Index i = 0; i < r; ++i) {
      if (!missing(i, j) && !std::isfinite(values(i, j))) {
        throw Error(ErrorKind::kDomain, "non-finite value in feature " + keys[static_cast<std::size_t>(j)]);
      }
    }
  }
}

FeatureMatrix make_matrix(std::vector<Date> days, std::vector<std::string> keys,
                          std::vector<FeatureMeta> meta, const Eigen::MatrixXd& values_with_nan) {
  FeatureMatrix m;
  m.days = std::move(days);
  m.keys = std::move(keys);
  m.meta = std::move(meta);
  m.missing = values_with_nan.array().isNaN();
  m.values = m.missing.select(0.0, values_with_nan);
  m.validate();
  return m;
}

void SelectionConfig::validate() const {
  if (!(initial_fraction > 0.0 && initial_fraction < 1.0)) {
    throw Error(ErrorKind::kParameter, "initial_fraction must lie in (0,1)");
  }
  if (!(availability_fraction > 0.0 && availability_fraction <= 1.0)) {
    throw Error(ErrorKind::kParameter, "availability_fraction must lie in (0,1]");
  }
  if (!(corr_threshold > 0.0 && corr_threshold < 1.0)) {
    throw Error(ErrorKind::kParameter, "corr_threshold must lie in (0,1)");
  }
  if (!(min_std_words >= 0.0)) throw Error(ErrorKind::kParameter, "min_std_words must be >= 0");
}

FeatureMatrix drop_excluded_gcams(const FeatureMatrix& m, const SelectionConfig& cfg,
                                  SelectionReport* report) {
  std::vector<std::size_t> keep;
  for (std::size_t j = 0; j < m.n_features(); ++j) {
    if (m.meta[j].category == Category::kGcam && gcam_excluded(m.keys[j], cfg.drop_gcam_codes)) {
      record_drop(report, m.keys[j], DropReason::kExcludedDictionary);
    } else {
      keep.push_back(j);
    }
  }
  return m.select(keep);
}

FeatureMatrix missing_value_filter(const FeatureMatrix& m, const SelectionConfig& cfg,
                                   SelectionReport* report) {
  const std::size_t n = m.n_days();
  if (n < 3 && m.n_features() > 0) throw Error(ErrorKind::kParameter, "missing-value filter needs >= 3 days");
  const auto initial = static_cast<Eigen::Index>(
      std::ceil(cfg.initial_fraction * static_cast<double>(n) - kSlack));
  const double needed = cfg.availability_fraction * static_cast<double>(n) - kSlack;
  std::vector<std::size_t> keep;
  for (std::size_t j = 0; j < m.n_features(); ++j) {
    const auto col = static_cast<Eigen::Index>(j);
    if (initial > 0 && m.missing.col(col).head(initial).all()) {
      record_drop(report, m.keys[j], DropReason::kAllMissingInitial);
    } else if (static_cast<double>(m.present_count(j)) < needed) {
      record_drop(report, m.keys[j], DropReason::kLowAvailability);
    } else {
      keep.push_back(j);
    }
  }
  return m.select(keep);
}

double population_sd(const FeatureMatrix& m, std::size_t feature) {
  const auto col = static_cast<Eigen::Index>(feature);
  double sum = 0.0;
  std::size_t count = 0;
  for (Eigen::Index i = 0; i < m.values.rows(); ++i) {
    if (!m.missing(i, col)) {
      sum += m.values(i, col);
      ++count;
    }
  }
  if (count == 0) return 0.0;
  const double mean = sum / static_cast<double>(count);
  double ss = 0.0;
  for (Eigen::Index i = 0; i < m.values.rows(); ++i) {
    if (!m.missing(i, col)) {
      const double d = m.values(i, col) - mean;
      ss += d * d;
    }
  }
  return std::sqrt(ss / static_cast<double>(count));
}

FeatureMatrix variance_filter(const FeatureMatrix& m, const SelectionConfig& cfg,
                              SelectionReport* report) {
  std::vector<std::size_t> keep;
  for (std::size_t j = 0; j < m.n_features(); ++j) {
    if (m.present_count(j) >= 2 && population_sd(m, j) > cfg.min_std_words) {
      keep.push_back(j);
    } else {
      record_drop(report, m.keys[j], DropReason::kLowVariance);
    }
  }
  return m.select(keep);
}

FeatureMatrix normalize_by_article_count(const FeatureMatrix& m,
                                         std::span<const double> daily_articles) {
  if (m.normalized) return m;
  if (daily_articles.size() != m.n_days()) {
    throw Error(ErrorKind::kAlignment, "article counts do not match feature days");
  }
  FeatureMatrix out = m;
  out.normalized = true;
  for (std::size_t i = 0; i < m.n_days(); ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    if (daily_articles[i] > 0.0) {
      out.values.row(row) /= daily_articles[i];
    } else {
      out.values.row(row).setZero();
      out.missing.row(row).setConstant(true);
    }
  }
  return out;
}

Eigen::MatrixXd pairwise_correlation(const FeatureMatrix& m, std::vector<std::string>* warnings) {
  const std::size_t n = m.n_days();
  const std::size_t p = m.n_features();
  // Per column: present-day mask, values centred on the column mean with
  // missing cells zeroed, and their squares. Joint moments are then dot
  // products over these arrays.
  std::vector<std::vector<double>> mask(p, std::vector<double>(n));
  std::vector<std::vector<double>> x(p, std::vector<double>(n));
  std::vector<std::vector<double>> x2(p, std::vector<double>(n));
  for (std::size_t j = 0; j < p; ++j) {
    const auto col = static_cast<Eigen::Index>(j);
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (!m.missing(static_cast<Eigen::Index>(i), col)) {
        sum += m.values(static_cast<Eigen::Index>(i), col);
        ++count;
      }
    }
    const double mean = count ? sum / static_cast<double>(count) : 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const bool present = !m.missing(static_cast<Eigen::Index>(i), col);
      mask[j][i] = present ? 1.0 : 0.0;
      x[j][i] = present ? m.values(static_cast<Eigen::Index>(i), col) - mean : 0.0;
      x2[j][i] = x[j][i] * x[j][i];
    }
  }
  const auto& k = kernels::active();
  Eigen::MatrixXd rho = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(p));
  for (std::size_t a = 0; a < p; ++a) {
    for (std::size_t b = a + 1; b < p; ++b) {
      const double joint = k.dot(mask[a].data(), mask[b].data(), n);
      double r = 0.0;
      if (joint < 3.0) {
        if (warnings) {
          warnings->push_back("fewer than 3 joint observations for " + m.keys[a] + " / " + m.keys[b] +
                              "; correlation set to 0");
        }
      } else {
        const double sx = k.dot(x[a].data(), mask[b].data(), n);
        const double sy = k.dot(x[b].data(), mask[a].data(), n);
        const double sxx = k.dot(x2[a].data(), mask[b].data(), n);
        const double syy = k.dot(x2[b].data(), mask[a].data(), n);
        const double sxy = k.dot(x[a].data(), x[b].data(), n);
        const double cov = sxy - sx * sy / joint;
        const double vx = sxx - sx * sx / joint;
        const double vy = syy - sy * sy / joint;
        if (vx > 0.0 && vy > 0.0) r = std::clamp(cov / std::sqrt(vx * vy), -1.0, 1.0);
      }
      rho(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = r;
      rho(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(a)) = r;
    }
  }
  return rho;
}

std::pair<FeatureMatrix, SelectionReport> correlation_filter(const FeatureMatrix& m,
                                                             const SelectionConfig& cfg) {
  SelectionReport report;
  const Eigen::MatrixXd rho = pairwise_correlation(m, &report.warnings);
  const std::size_t p = m.n_features();

  struct Pair {
    std::size_t a, b;
    double abs_rho;
  };
  std::vector<Pair> pairs;
  for (std::size_t a = 0; a < p; ++a) {
    for (std::size_t b = a + 1; b < p; ++b) {
      const double r = std::abs(rho(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)));
      if (r > cfg.corr_threshold) pairs.push_back({a, b, r});
    }
  }
  std::stable_sort(pairs.begin(), pairs.end(),
                   [](const Pair& l, const Pair& r) { return l.abs_rho > r.abs_rho; });

  std::mt19937_64 rng(cfg.rng_seed);
  std::vector<bool> dropped(p, false);
  for (const Pair& pr : pairs) {
    if (dropped[pr.a] || dropped[pr.b]) continue;
    const std::size_t miss_a = m.missing_count(pr.a);
    const std::size_t miss_b = m.missing_count(pr.b);
    std::size_t keep = pr.a;
    std::string rule;
    if (miss_a != miss_b) {
      keep = miss_a < miss_b ? pr.a : pr.b;
      rule = "fewer-missing";
    } else {
      const std::size_t rank_a = priority_rank(cfg, m.meta[pr.a].category);
      const std::size_t rank_b = priority_rank(cfg, m.meta[pr.b].category);
      if (rank_a != rank_b) {
        keep = rank_a < rank_b ? pr.a : pr.b;
        rule = "category-priority";
      } else {
        keep = (rng() & 1u) ? pr.b : pr.a;
        rule = "random";
      }
    }
    const std::size_t drop = keep == pr.a ? pr.b : pr.a;
    dropped[drop] = true;
    report.dropped[m.keys[drop]] = DropReason::kCorrelatedOut;
    report.decisions.push_back({m.keys[keep], m.keys[drop],
                                rho(static_cast<Eigen::Index>(pr.a), static_cast<Eigen::Index>(pr.b)), rule});
  }
  std::vector<std::size_t> keep;
  for (std::size_t j = 0; j < p; ++j) {
    if (!dropped[j]) {
      keep.push_back(j);
      report.kept.push_back(m.keys[j]);
    }
  }
  return {m.select(keep), std::move(report)};
}

std::pair<FeatureMatrix, SelectionReport> run_selection_pipeline(
    const FeatureMatrix& m, std::span<const double> daily_articles, const SelectionConfig& cfg) {
  cfg.validate();
  SelectionReport report;
  if (m.n_features() == 0) return {m, report};

  report.stages.push_back("drop_excluded_gcams");
  FeatureMatrix cur = drop_excluded_gcams(m, cfg, &report);
  report.stages.push_back("missing_value_filter");
  cur = missing_value_filter(cur, cfg, &report);
  report.stages.push_back("variance_filter");
  cur = variance_filter(cur, cfg, &report);
  report.stages.push_back("normalize_by_article_count");
  cur = normalize_by_article_count(cur, daily_articles);
  report.stages.push_back("correlation_filter");
  auto [final_matrix, corr] = correlation_filter(cur, cfg);

  for (const auto& [key, reason] : corr.dropped) report.dropped[key] = reason;
  report.decisions = std::move(corr.decisions);
  report.warnings.insert(report.warnings.end(), corr.warnings.begin(), corr.warnings.end());
  report.kept = std::move(corr.kept);
  return {std::move(final_matrix), std::move(report)};
}

FeatureTable read_feature_table(const std::filesystem::path& dir) {
  const csv::Table table = csv::read_table(dir / "daily_features.csv");
  const auto meta_json = nlohmann::json::parse(csv::read_file(dir / "features_meta.json"));
  const std::size_t c_day = table.column("trading_day");
  const std::size_t c_articles = table.column("article_count");

  std::vector<std::size_t> feature_cols;
  std::vector<std::string> keys;
  std::vector<FeatureMeta> meta;
  bool normalized = false;
  for (std::size_t c = 0; c < table.header.size(); ++c) {
    if (c == c_day || c == c_articles) continue;
    const std::string& key = table.header[c];
    if (!meta_json.contains(key)) throw Error(ErrorKind::kSchema, "no metadata for feature " + key);
    const auto& entry = meta_json.at(key);
    FeatureMeta fm;
    fm.category = gkg::parse_category(entry.at("category").get<std::string>());
    fm.dictionary = entry.value("dictionary", std::string());
    normalized = normalized || entry.value("normalized", false);
    feature_cols.push_back(c);
    keys.push_back(key);
    meta.push_back(fm);
  }
  FeatureTable out;
  std::vector<Date> days;
  Eigen::MatrixXd raw(static_cast<Eigen::Index>(table.rows.size()),
                      static_cast<Eigen::Index>(feature_cols.size()));
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    days.push_back(parse_date(row[c_day]));
    out.article_counts.push_back(csv::parse_double(row[c_articles]));
    for (std::size_t k = 0; k < feature_cols.size(); ++k) {
      const auto v = csv::parse_optional_double(row[feature_cols[k]]);
      raw(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) = v ? *v : std::nan("");
    }
  }
  out.matrix = make_matrix(std::move(days), std::move(keys), std::move(meta), raw);
  out.matrix.normalized = normalized;
  return out;
}

void write_feature_table(const std::filesystem::path& dir, const FeatureTable& table) {
  const FeatureMatrix& m = table.matrix;
  csv::Table out;
  out.header = {"trading_day", "article_count"};
  out.header.insert(out.header.end(), m.keys.begin(), m.keys.end());
  for (std::size_t i = 0; i < m.n_days(); ++i) {
    std::vector<std::string> row{format_date(m.days[i]), csv::format_double(table.article_counts[i])};
    for (std::size_t j = 0; j < m.n_features(); ++j) {
      const auto r = static_cast<Eigen::Index>(i);
      const auto c = static_cast<Eigen::Index>(j);
      row.push_back(m.missing(r, c) ? std::string() : csv::format_double(m.values(r, c)));
    }
    out.rows.push_back(std::move(row));
  }
  csv::write_table(dir / "daily_features.csv", out);
  nlohmann::ordered_json meta = nlohmann::ordered_json::object();
  for (std::size_t j = 0; j < m.n_features(); ++j) {
    meta[m.keys[j]] = {{"category", std::string(gkg::category_name(m.meta[j].category))},
                       {"dictionary", m.meta[j].dictionary},
                       {"normalized", m.normalized}};
  }
  csv::write_file(dir / "features_meta.json", meta.dump(2) + "\n");
}

std::set<std::string> read_exclusion_file(const std::filesystem::path& path) {
  return gkg::read_outlets_file(path);  // same one-entry-per-line format
}

std::string report_to_json(const SelectionReport& report) {
  nlohmann::ordered_json j;
  j["stages"] = report.stages;
  j["kept"] = report.kept;
  nlohmann::ordered_json dropped = nlohmann::ordered_json::object();
  for (const auto& [key, reason] : report.dropped) dropped[key] = std::string(drop_reason_name(reason));
  j["dropped"] = dropped;
  nlohmann::ordered_json decisions = nlohmann::ordered_json::array();
  for (const auto& d : report.decisions) {
    decisions.push_back({{"kept", d.kept}, {"dropped", d.dropped}, {"rho", d.rho}, {"rule", d.rule}});
  }
  j["correlation_decisions"] = decisions;
  j["warnings"] = report.warnings;
  return j.dump(2) + "\n";
}

}  // namespace spreadcast::features
