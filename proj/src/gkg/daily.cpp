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
#include <cctype>
#include <set>

#include <json.hpp>

#include "spreadcast/csv.hpp"
#include "spreadcast/error.hpp"
#include "spreadcast/gkg.hpp"

namespace spreadcast::gkg {

// --- filtering ---------------------------------------------------------------

void ArticleFilterConfig::validate() const {
  if (min_theme_keywords < 1) throw Error(ErrorKind::kParameter, "min_theme_keywords must be >= 1");
  if (min_word_count < 0) throw Error(ErrorKind::kParameter, "min_word_count must be >= 0");
  if (allowed_outlets.empty()) throw Error(ErrorKind::kParameter, "allowed_outlets is empty");
  if (target_wb_themes.empty()) throw Error(ErrorKind::kParameter, "target_wb_themes is empty");
}

std::set<std::string> default_outlets() {
  return {"ilsole24ore.com",   "borsaitaliana.it",     "italiaoggi.it",     "milanofinanza.it",
          "ansa.it",           "ilgiornale.it",        "finanza.com",       "wallstreetitalia.com",
          "repubblica.it",     "investireoggi.it",     "liberoquotidiano.it", "ilmessaggero.it",
          "ilfattoquotidiano.it", "corriere.it",       "huffingtonpost.it", "lastampa.it",
          "trend-online.com",  "teleborsa.it",         "tradelink.it",      "iltempo.it",
          "finanzaonline.com", "ilsussidiario.net"};
}

std::set<std::string> read_outlets_file(const std::filesystem::path& path) {
  std::set<std::string> out;
  const std::string text = csv::read_file(path);
  for (auto line : csv::split(text, '\n')) {
    while (!line.empty() && std::isspace(static_cast<unsigned char>(line.back()))) line.remove_suffix(1);
    while (!line.empty() && std::isspace(static_cast<unsigned char>(line.front()))) line.remove_prefix(1);
    if (line.empty() || line.front() == '#') continue;
    out.emplace(line);
  }
  return out;
}

bool is_target_theme(std::string_view code, const std::set<std::string>& targets) {
  if (targets.count(std::string(code))) return true;
  if (code.rfind("WB_", 0) != 0) return false;
  std::size_t i = 3;
  while (i < code.size() && std::isdigit(static_cast<unsigned char>(code[i]))) ++i;
  if (i == 3 || i >= code.size() || code[i] != '_') return false;
  return targets.count(std::string(code.substr(i + 1))) > 0;
}

int count_theme_hits(const GkgRecord& record, const std::set<std::string>& targets) {
  int hits = 0;
  if (!record.theme_mentions.empty()) {
    for (const auto& m : record.theme_mentions) hits += is_target_theme(m.code, targets) ? 1 : 0;
    return hits;
  }
  for (const auto& t : record.wb_themes) hits += is_target_theme(t, targets) ? 1 : 0;
  return hits;
}

bool keep_article(const GkgRecord& record, const ArticleFilterConfig& cfg) {
  if (!cfg.allowed_outlets.count(record.outlet)) return false;
  if (record.word_count < cfg.min_word_count) return false;
  return count_theme_hits(record, cfg.target_wb_themes) >= cfg.min_theme_keywords;
}

std::vector<GkgRecord> filter_articles(std::span<const GkgRecord> records,
                                       const ArticleFilterConfig& cfg) {
  cfg.validate();
  std::vector<GkgRecord> out;
  for (const auto& r : records) {
    if (keep_article(r, cfg)) out.push_back(r);
  }
  return out;
}

// --- calendar ------------------------------------------------------------------

void TradingCalendar::validate() const {
  if (!(market_open < market_close)) throw Error(ErrorKind::kParameter, "market_open must precede market_close");
  for (std::size_t i = 0; i < trading_days.size(); ++i) {
    if (is_weekend(trading_days[i])) {
      throw Error(ErrorKind::kParameter, "calendar contains weekend day " + format_date(trading_days[i]));
    }
    if (i > 0 && !(trading_days[i] > trading_days[i - 1])) {
      throw Error(ErrorKind::kParameter, "calendar days not strictly increasing");
    }
  }
}

bool TradingCalendar::is_trading_day(Date d) const {
  return std::binary_search(trading_days.begin(), trading_days.end(), d);
}

TradingCalendar weekday_calendar(Date first, Date last, std::span<const Date> holidays) {
  TradingCalendar cal;
  const std::set<Date> skip(holidays.begin(), holidays.end());
  for (Date d = first; d <= last; d += std::chrono::days{1}) {
    if (!is_weekend(d) && !skip.count(d)) cal.trading_days.push_back(d);
  }
  return cal;
}

TradingCalendar read_calendar_file(const std::filesystem::path& path) {
  TradingCalendar cal;
  const std::string text = csv::read_file(path);
  for (auto line : csv::split(text, '\n')) {
    while (!line.empty() && std::isspace(static_cast<unsigned char>(line.back()))) line.remove_suffix(1);
    if (line.empty() || line.front() == '#') continue;
    cal.trading_days.push_back(parse_date(line));
  }
  cal.validate();
  return cal;
}

void write_calendar_file(const std::filesystem::path& path, const TradingCalendar& cal) {
  std::string out;
  for (Date d : cal.trading_days) out += format_date(d) + "\n";
  csv::write_file(path, out);
}

Date assign_trading_day(Instant publish_instant, const TradingCalendar& cal) {
  using namespace std::chrono;
  if (cal.trading_days.empty()) throw Error(ErrorKind::kOutOfCalendar, "empty trading calendar");
  const auto local = publish_instant + hours{cal.utc_offset_hours};
  const Date local_day = floor<days>(local);
  const auto time_of_day = duration_cast<minutes>(local - sys_seconds{local_day});

  // First trading session that has not closed yet at the local instant.
  Date from = local_day;
  if (time_of_day > cal.market_close) from += days{1};
  const auto it = std::lower_bound(cal.trading_days.begin(), cal.trading_days.end(), from);
  if (it == cal.trading_days.end() || *it - local_day > cal.max_lookahead) {
    throw Error(ErrorKind::kOutOfCalendar,
                "publication " + format_gkg_timestamp(publish_instant) + " is outside the calendar");
  }
  return *it;
}

// --- aggregation -----------------------------------------------------------------

std::string_view category_name(Category c) {
  switch (c) {
    case Category::kGcam: return "gcam";
    case Category::kWbTheme: return "wb";
    case Category::kGdeltTheme: return "theme";
    case Category::kLocation: return "loc";
    case Category::kPerson: return "person";
    case Category::kOrganization: return "org";
  }
  return "gcam";
}

Category parse_category(std::string_view name) {
  for (Category c : {Category::kGcam, Category::kWbTheme, Category::kGdeltTheme, Category::kLocation,
                     Category::kPerson, Category::kOrganization}) {
    if (category_name(c) == name) return c;
  }
  throw Error(ErrorKind::kSchema, "unknown feature category '" + std::string(name) + "'");
}

std::string feature_key(Category c, std::string_view code) {
  std::string key(category_name(c));
  key.push_back(':');
  for (char ch : code) key.push_back(ch == ',' ? ' ' : ch);
  return key;
}

Category key_category(std::string_view key) {
  const std::size_t colon = key.find(':');
  if (colon == std::string_view::npos) throw Error(ErrorKind::kSchema, "unqualified feature key '" + std::string(key) + "'");
  return parse_category(key.substr(0, colon));
}

std::string_view key_code(std::string_view key) {
  const std::size_t colon = key.find(':');
  return colon == std::string_view::npos ? key : key.substr(colon + 1);
}

std::string gcam_dictionary(std::string_view key) {
  if (key.rfind("gcam:", 0) != 0) return {};
  const std::string_view code = key_code(key);
  const std::size_t dot = code.find('.');
  return std::string(dot == std::string_view::npos ? code : code.substr(0, dot));
}

void DailyAggregator::add(const GkgRecord& record) {
  const Date day = assign_trading_day(record.publish_instant, *cal_);
  DailyAggregate& agg = days_[day];
  agg.trading_day = day;
  agg.article_count += 1;
  auto& counts = agg.category_counts;
  for (const auto& [code, value] : record.gcam_counts) counts[feature_key(Category::kGcam, code)] += value;
  if (!record.theme_mentions.empty()) {
    for (const auto& m : record.theme_mentions) {
      const bool wb = m.code.rfind("WB_", 0) == 0;
      counts[feature_key(wb ? Category::kWbTheme : Category::kGdeltTheme, m.code)] += 1.0;
    }
  } else {
    for (const auto& t : record.wb_themes) counts[feature_key(Category::kWbTheme, t)] += 1.0;
    for (const auto& t : record.gdelt_themes) counts[feature_key(Category::kGdeltTheme, t)] += 1.0;
  }
  for (const auto& cc : record.locations) counts[feature_key(Category::kLocation, cc)] += 1.0;
  for (const auto& p : record.persons) counts[feature_key(Category::kPerson, p)] += 1.0;
  for (const auto& o : record.organizations) counts[feature_key(Category::kOrganization, o)] += 1.0;
}

void DailyAggregator::merge(const DailyAggregator& other) {
  for (const auto& [day, agg] : other.days_) {
    DailyAggregate& mine = days_[day];
    mine.trading_day = day;
    mine.article_count += agg.article_count;
    for (const auto& [key, value] : agg.category_counts) mine.category_counts[key] += value;
  }
}

std::vector<DailyAggregate> DailyAggregator::finish() const {
  std::vector<DailyAggregate> out;
  out.reserve(cal_->trading_days.size());
  for (Date d : cal_->trading_days) {
    const auto it = days_.find(d);
    if (it != days_.end()) {
      out.push_back(it->second);
    } else {
      DailyAggregate empty;
      empty.trading_day = d;
      out.push_back(std::move(empty));
    }
  }
  return out;
}

std::vector<DailyAggregate> aggregate_daily(std::span<const GkgRecord> records,
                                            const TradingCalendar& cal) {
  DailyAggregator agg(cal);
  for (const auto& r : records) agg.add(r);
  return agg.finish();
}

void write_daily_features(const std::filesystem::path& dir, std::span<const DailyAggregate> days) {
  std::set<std::string> keys;
  for (const auto& d : days) {
    for (const auto& [key, value] : d.category_counts) keys.insert(key);
  }
  csv::Table table;
  table.header = {"trading_day", "article_count"};
  table.header.insert(table.header.end(), keys.begin(), keys.end());
  for (const auto& d : days) {
    std::vector<std::string> row{format_date(d.trading_day), std::to_string(d.article_count)};
    for (const auto& key : keys) {
      const auto it = d.category_counts.find(key);
      row.push_back(it == d.category_counts.end() ? std::string() : csv::format_double(it->second));
    }
    table.rows.push_back(std::move(row));
  }
  csv::write_table(dir / "daily_features.csv", table);

  nlohmann::ordered_json meta = nlohmann::ordered_json::object();
  for (const auto& key : keys) {
    meta[key] = {{"category", std::string(category_name(key_category(key)))},
                 {"dictionary", gcam_dictionary(key)}};
  }
  csv::write_file(dir / "features_meta.json", meta.dump(2) + "\n");
}

}  // namespace spreadcast::gkg
