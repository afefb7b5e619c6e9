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

#include "spreadcast/synthetic.hpp"

#include <array>
#include <cmath>
#include <cstdio>
#include <map>
#include <random>
#include <set>
#include <string>

#include <json.hpp>

#include "spreadcast/csv.hpp"
#include "spreadcast/error.hpp"
#include "spreadcast/gkg.hpp"
#include "spreadcast/term_structure.hpp"

namespace spreadcast::synthetic {

namespace {

namespace fs = std::filesystem;
using namespace std::chrono;

constexpr std::array<double, 20> kMaturities{1, 3, 6, 9, 12, 18, 24, 36, 48, 60,
                                             72, 84, 96, 108, 120, 144, 180, 240, 300, 360};

Date easter_sunday(int y) {
  // Anonymous Gregorian algorithm.
  const int a = y % 19, b = y / 100, c = y % 100, d = b / 4, e = b % 4;
  const int f = (b + 8) / 25, g = (b - f + 1) / 3, h = (19 * a + b - d - g + 15) % 30;
  const int i = c / 4, k = c % 4, l = (32 + 2 * e + 2 * i - h - k) % 7;
  const int m = (a + 11 * h + 22 * l) / 451;
  const int month = (h + l - 7 * m + 114) / 31;
  const int day = (h + l - 7 * m + 114) % 31 + 1;
  return sys_days{year{y} / month / day};
}

std::string fixed4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

struct GcamDim {
  std::string code;
  double rate;      // per 1000 words
  double loading;   // response to the news latent
  double presence;  // probability the article carries the dimension
};

// Dimensions are chosen to exercise every filter: c3 is excluded by
// dictionary, c5 is too sparse, c7.1 barely varies and c6.14 tracks c2.14.
const std::vector<GcamDim>& gcam_dims() {
  static const std::vector<GcamDim> dims = {
      {"c1.1", 12.0, 0.0, 1.0},    {"c1.2", 6.0, 0.15, 1.0},   {"c1.3", 4.0, 0.0, 1.0},
      {"c2.14", 9.0, 0.45, 1.0},   {"c2.39", 5.0, -0.35, 1.0}, {"c2.76", 7.0, 0.0, 1.0},
      {"c2.95", 4.0, 0.3, 1.0},    {"c2.121", 6.0, 0.0, 1.0},  {"c2.144", 3.0, 0.2, 1.0},
      {"c2.155", 8.0, 0.0, 1.0},   {"c2.168", 5.0, 0.5, 1.0},  {"c2.183", 4.0, -0.25, 1.0},
      {"c2.198", 6.0, 0.0, 1.0},   {"c2.203", 3.5, 0.35, 1.0}, {"c2.210", 5.0, 0.0, 1.0},
      {"c3.1", 10.0, 0.3, 1.0},    {"c3.2", 8.0, 0.0, 1.0},    {"c5.7", 4.0, 0.0, 0.01},
      {"c5.9", 6.0, 0.0, 0.015},   {"c9.1", 7.0, -0.3, 1.0},   {"c9.3", 5.0, 0.0, 1.0},
      {"c12.1", 6.0, 0.25, 1.0},   {"c12.9", 4.0, 0.0, 1.0},   {"c7.1", 0.05, 0.0, 1.0},
  };
  return dims;
}

struct Tagged {
  std::string code;
  double probability;
  double loading;
};

const std::vector<Tagged> kGdeltThemes = {
    {"ECON_DEBT", 0.55, 0.3},  {"ECON_INTEREST_RATES", 0.45, 0.0}, {"ECON_STOCKMARKET", 0.35, 0.0},
    {"EPU_POLICY", 0.4, 0.25}, {"ELECTION", 0.2, 0.4},              {"GOV_REFORM", 0.25, 0.0},
    {"UNEMPLOYMENT", 0.15, 0.0}, {"TAX_FNCACT_MINISTER", 0.3, 0.0},
};
const std::vector<Tagged> kLocations = {
    {"IT", 0.92, 0.0}, {"GM", 0.55, 0.0}, {"FR", 0.3, 0.0}, {"US", 0.25, 0.0}, {"BE", 0.2, 0.2}, {"GR", 0.03, 0.0},
};
const std::vector<Tagged> kOrganizations = {
    {"european central bank", 0.5, 0.0}, {"bank of italy", 0.15, 0.0},
    {"european commission", 0.3, 0.3},   {"international monetary fund", 0.05, 0.0},
};
const std::vector<Tagged> kPersons = {
    {"giuseppe conte", 0.3, 0.2}, {"matteo salvini", 0.22, 0.45}, {"olaf scholz", 0.04, 0.0},
};

const std::vector<std::string> kOtherOutlets = {"marketblog.net", "newsaggregator.com", "finance-feed.org"};

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Probability p at zero latent, tilted by loading * latent on the logit scale.
bool draw(std::mt19937_64& rng, double p, double loading, double latent) {
  const double base = std::log(p / (1.0 - p));
  return std::bernoulli_distribution(logistic(base + loading * latent))(rng);
}

}  // namespace

std::vector<Date> market_holidays(Date first, Date last) {
  std::set<Date> out;
  const int y0 = static_cast<int>(year_month_day{first}.year());
  const int y1 = static_cast<int>(year_month_day{last}.year());
  for (int y = y0; y <= y1; ++y) {
    const Date easter = easter_sunday(y);
    for (Date d : {sys_days{year{y} / 1 / 1}, easter - days{2}, easter + days{1}, sys_days{year{y} / 5 / 1},
                   sys_days{year{y} / 8 / 15}, sys_days{year{y} / 12 / 24}, sys_days{year{y} / 12 / 25},
                   sys_days{year{y} / 12 / 26}, sys_days{year{y} / 12 / 31}}) {
      if (d >= first && d <= last) out.insert(d);
    }
  }
  return {out.begin(), out.end()};
}

DatasetFiles write_dataset(const fs::path& dir, const DatasetConfig& cfg) {
  if (cfg.trading_days < 10) throw Error(ErrorKind::kParameter, "synthetic dataset needs at least 10 days");
  if (!(cfg.articles_per_day > 0.0)) throw Error(ErrorKind::kParameter, "articles_per_day must be positive");
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  // Trading calendar: weekdays minus holidays until enough days exist.
  std::vector<Date> days;
  Date cursor = cfg.first;
  while (days.size() < cfg.trading_days) {
    const auto hol = market_holidays(cursor, cursor);
    if (!is_weekend(cursor) && hol.empty()) days.push_back(cursor);
    cursor += sys_days::duration{1};
  }
  const std::size_t n = days.size();

  // Latent drivers. The news latent leads the spread change by one day.
  std::vector<double> news(n), log_spread(n), beta1(n), beta2(n), de0(n), de1(n), de2(n);
  double u = 0.0;
  news[0] = normal(rng);
  log_spread[0] = std::log(2.2);
  beta1[0] = -1.0;
  beta2[0] = 0.6;
  de0[0] = 0.6;
  de1[0] = -0.9;
  de2[0] = 0.4;
  for (std::size_t k = 1; k < n; ++k) {
    news[k] = 0.7 * news[k - 1] + std::sqrt(1.0 - 0.49) * normal(rng);
    u = 0.45 * u + 0.009 * normal(rng);
    beta1[k] = -1.0 + 0.98 * (beta1[k - 1] + 1.0) + 0.02 * normal(rng);
    beta2[k] = 0.6 + 0.97 * (beta2[k - 1] - 0.6) + 0.03 * normal(rng);
    const double r = 0.010 * news[k - 1] - 0.02 * (beta2[k - 1] - 0.6) + u;
    log_spread[k] = log_spread[k - 1] + r;
    de0[k] = de0[k - 1] + 0.01 * normal(rng);
    de1[k] = de1[k - 1] + 0.008 * normal(rng);
    de2[k] = de2[k - 1] + 0.01 * normal(rng);
  }

  fs::create_directories(dir / "gkg");
  DatasetFiles files;
  files.yields = dir / "yields.csv";
  files.calendar = dir / "calendar.txt";
  files.outlets = dir / "outlets.txt";
  files.exclusions = dir / "gcam_exclusions.txt";
  files.gkg_dir = dir / "gkg";
  files.first = days.front();
  files.last = days.back();

  // Yield curves: the 10-year spread follows the simulated level exactly up
  // to four-decimal quoting, which is far below its daily variation.
  const double lambda = term_structure::kDefaultLambda;
  const auto at10 = term_structure::ns_loadings(120.0, lambda);
  std::string yields = "date,maturity_months,yield_it,yield_de\n";
  for (std::size_t k = 0; k < n; ++k) {
    const double spread10 = std::exp(log_spread[k]);
    const double b0 = spread10 - beta1[k] * at10.slope - beta2[k] * at10.curvature;
    for (double tau : kMaturities) {
      const auto l = term_structure::ns_loadings(tau, lambda);
      const double de = de0[k] + de1[k] * l.slope + de2[k] * l.curvature + 0.002 * normal(rng);
      double spread = b0 + beta1[k] * l.slope + beta2[k] * l.curvature;
      if (tau != 120.0) spread += 0.004 * normal(rng);
      yields += format_date(days[k]) + "," + csv::format_double(tau) + "," + fixed4(de + spread) + "," +
                fixed4(de) + "\n";
    }
  }
  csv::write_file(files.yields, yields);

  gkg::TradingCalendar cal;
  cal.trading_days = days;
  gkg::write_calendar_file(files.calendar, cal);

  std::string outlets = "# Italian financial and general news outlets\n";
  for (const auto& o : gkg::default_outlets()) outlets += o + "\n";
  csv::write_file(files.outlets, outlets);
  csv::write_file(files.exclusions, "# GCAM dictionaries without an emotional reading\nc3\n");

  // Articles: each trading day collects what is published between the
  // previous close and its own close (16:30 UTC).
  const std::vector<std::string> allowed = [] {
    const auto s = gkg::default_outlets();
    return std::vector<std::string>(s.begin(), s.end());
  }();
  const std::string target_theme = "WB_1234_MACROECONOMIC_VULNERABILITY_AND_DEBT";
  const std::string policy_theme = "WB_1104_MACROECONOMIC_AND_STRUCTURAL_POLICIES";
  const seconds close = hours{16} + minutes{30};
  std::map<std::string, std::string> by_month;
  std::size_t serial = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const Instant end = sys_seconds{days[k]} + close;
    const Instant begin = k == 0 ? end - hours{24} : sys_seconds{days[k - 1]} + close;
    const double span_days = duration<double>(end - begin).count() / 86400.0;
    // Weekend windows are longer but quieter.
    const double weight = span_days > 1.5 ? 0.5 : 1.0;
    const auto count = std::poisson_distribution<int>(cfg.articles_per_day * span_days * weight)(rng);
    const double latent = news[k];
    std::uniform_int_distribution<std::int64_t> when(0, (end - begin).count() - 1);
    for (int a = 0; a < count; ++a) {
      gkg::GkgRecord rec;
      rec.publish_instant = begin + seconds{when(rng)};
      rec.record_id = format_gkg_timestamp(rec.publish_instant) + "-" + std::to_string(serial++);
      const bool allowed_outlet = std::bernoulli_distribution(0.85)(rng);
      rec.outlet = allowed_outlet
                       ? allowed[std::uniform_int_distribution<std::size_t>(0, allowed.size() - 1)(rng)]
                       : kOtherOutlets[std::uniform_int_distribution<std::size_t>(0, kOtherOutlets.size() - 1)(rng)];
      rec.document = "https://" + rec.outlet + "/economia/" + std::to_string(serial);
      rec.word_count = std::bernoulli_distribution(0.05)(rng)
                           ? std::uniform_int_distribution<std::int64_t>(40, 99)(rng)
                           : std::uniform_int_distribution<std::int64_t>(200, 1500)(rng);

      // Theme mentions with character offsets; most articles clear the
      // four-mention bar.
      std::int64_t offset = 0;
      auto mention = [&](const std::string& code, int times) {
        for (int i = 0; i < times; ++i) {
          offset += std::uniform_int_distribution<std::int64_t>(40, 400)(rng);
          rec.theme_mentions.push_back({code, offset});
        }
      };
      const int hits = std::bernoulli_distribution(0.8)(rng) ? std::uniform_int_distribution<int>(4, 9)(rng)
                                                             : std::uniform_int_distribution<int>(1, 3)(rng);
      rec.wb_themes.push_back(target_theme);
      mention(target_theme, hits);
      if (draw(rng, 0.35, 0.0, latent)) {
        rec.wb_themes.push_back(policy_theme);
        mention(policy_theme, std::uniform_int_distribution<int>(1, 3)(rng));
      }
      for (const auto& t : kGdeltThemes) {
        if (draw(rng, t.probability, t.loading, latent)) {
          rec.gdelt_themes.push_back(t.code);
          mention(t.code, std::uniform_int_distribution<int>(1, 3)(rng));
        }
      }
      for (const auto& t : kLocations) {
        if (draw(rng, t.probability, t.loading, latent)) rec.locations.push_back(t.code);
      }
      for (const auto& t : kPersons) {
        if (draw(rng, t.probability, t.loading, latent)) rec.persons.push_back(t.code);
      }
      // Appears only in the second half of the sample.
      if (k >= n / 2 && draw(rng, 0.3, 0.0, latent)) rec.persons.push_back("christine lagarde");
      for (const auto& t : kOrganizations) {
        if (draw(rng, t.probability, t.loading, latent)) rec.organizations.push_back(t.code);
      }

      const double words = static_cast<double>(rec.word_count) / 1000.0;
      for (const auto& d : gcam_dims()) {
        if (d.presence < 1.0 && !std::bernoulli_distribution(d.presence)(rng)) continue;
        const double mean = words * d.rate * std::exp(d.loading * latent);
        const int c = std::poisson_distribution<int>(mean)(rng);
        if (c > 0) rec.gcam_counts[d.code] = c;
      }
      if (auto it = rec.gcam_counts.find("c2.14"); it != rec.gcam_counts.end()) {
        rec.gcam_counts["c6.14"] = it->second + std::poisson_distribution<int>(0.5)(rng);
      }

      const year_month_day ymd{floor<sys_days::duration>(rec.publish_instant)};
      char key[32];
      std::snprintf(key, sizeof key, "%04d%02u01000000", static_cast<int>(ymd.year()),
                    static_cast<unsigned>(ymd.month()));
      by_month[key] += gkg::serialize_gkg_record(rec) + "\n";
    }
  }
  for (const auto& [stamp, text] : by_month) {
    gkg::write_zip(files.gkg_dir / (stamp + ".gkg.csv.zip"), stamp + ".gkg.csv", text);
  }
  return files;
}

std::string desk_config_json(const DatasetFiles& files, const fs::path& config_dir) {
  auto rel = [&](const fs::path& p) { return fs::relative(p, config_dir).generic_string(); };
  nlohmann::ordered_json j;
  j["run_id"] = "desk-scale";
  j["output_dir"] = "../runs/desk-scale";
  j["seed"] = 7;
  j["t0"] = 200;
  j["threads"] = 0;
  nlohmann::ordered_json s;
  s["ingest"] = {{"from", format_date(files.first)},
                 {"to", format_date(files.last)},
                 {"gkg_dir", rel(files.gkg_dir)},
                 {"outlets", rel(files.outlets)},
                 {"calendar", rel(files.calendar)},
                 {"min_theme_keywords", 4},
                 {"min_word_count", 100}};
  s["select"] = {{"exclusions", rel(files.exclusions)},
                 {"initial_fraction", 0.33},
                 {"availability_fraction", 0.90},
                 {"min_std_words", 5.0},
                 {"corr_threshold", 0.70}};
  s["factors"] = {{"yields", rel(files.yields)}, {"lambda", 0.0609}, {"target_maturity", 120}};
  s["reduce"] = {{"linkage", "ward"}, {"k_min", 2}, {"k_max", 54}, {"joint_clustering", false},
                 {"pca_components", 3}, {"fit_in_sample", true}};
  s["models"] = {
      {"deepar",
       {"none", "factors", "factors-gdelt", "factors-gdelt-hierarc", "factors-gdelt-pca", "gdelt",
        "gdelt-hierarc", "gdelt-pca"}},
      {"gbm",
       {"factors", "factors-gdelt", "factors-gdelt-hierarc", "factors-gdelt-pca", "gdelt", "gdelt-hierarc",
        "gdelt-pca"}},
      {"network",
       {{"num_layers", 2},
        {"hidden_size", 40},
        {"context_length", 30},
        {"likelihood", "gaussian"},
        {"epochs", 150},
        {"learning_rate", 0.001},
        {"dropout", 0.1},
        {"weight_decay", 0.0}}},
      {"retrain_stride", 20},
      {"samples", 200},
      {"grid", "default"}};
  s["evaluate"] = {{"quantiles", {0.1, 0.3, 0.5, 0.7, 0.9}}, {"mu", 0.3}, {"hac_lags", 1}, {"size", 0.05},
                   {"pairs", "default"}};
  s["shap"] = {{"covariates", "factors-gdelt-hierarc"}, {"explain_days", 20}, {"coalitions", 512}};
  j["stages"] = s;
  return j.dump(2) + "\n";
}

}  // namespace spreadcast::synthetic
