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

// GDELT Global Knowledge Graph (2.1) ingestion: fetching the 15-minute
// archives, parsing rows, article filtering, trading-day assignment and
// daily aggregation.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "spreadcast/calendar_time.hpp"

namespace spreadcast::gkg {

inline constexpr std::size_t kGkgColumnCount = 27;

// Column indices of the fields this library consumes.
enum Column : std::size_t {
  kRecordId = 0,
  kDate = 1,
  kSourceCommonName = 3,
  kDocumentIdentifier = 4,
  kV1Themes = 7,
  kV2Themes = 8,
  kV1Locations = 9,
  kV1Persons = 11,
  kV1Organizations = 13,
  kV2Gcam = 17,
};

struct ThemeMention {
  std::string code;
  std::int64_t offset = -1;

  bool operator==(const ThemeMention&) const = default;
};

struct GkgRecord {
  std::string record_id;
  Instant publish_instant{};
  std::string outlet;
  std::string document;
  std::vector<std::string> wb_themes;     // V1 themes starting "WB_"
  std::vector<std::string> gdelt_themes;  // every other V1 theme
  std::vector<ThemeMention> theme_mentions;  // V2 enhanced themes with offsets
  std::vector<std::string> locations;     // country codes
  std::vector<std::string> persons;
  std::vector<std::string> organizations;
  std::map<std::string, double> gcam_counts;
  std::int64_t word_count = 0;
  std::vector<std::string> warnings;

  // Equality over consumed fields (warnings excluded).
  bool same_fields(const GkgRecord& other) const;
};

GkgRecord parse_gkg_record(std::string_view raw_line);

// Emits a 27-column line whose consumed fields re-parse to `record`.
std::string serialize_gkg_record(const GkgRecord& record);

struct ParseOutcome {
  std::vector<GkgRecord> records;
  std::vector<std::string> errors;  // "line N: message"
};

// Parses every non-empty line; bad lines are reported, not fatal.
ParseOutcome parse_gkg_text(std::string_view text);

// Reads a .csv or single-entry .zip GKG file.
std::string read_gkg_archive(const std::filesystem::path& path);

// --- filtering ---------------------------------------------------------------

struct ArticleFilterConfig {
  std::set<std::string> allowed_outlets;
  std::set<std::string> target_wb_themes = {"MACROECONOMIC_VULNERABILITY_AND_DEBT",
                                            "MACROECONOMIC_AND_STRUCTURAL_POLICIES"};
  int min_theme_keywords = 4;
  std::int64_t min_word_count = 100;

  void validate() const;
};

std::set<std::string> default_outlets();
std::set<std::string> read_outlets_file(const std::filesystem::path& path);

// A target matches its exact code or any "WB_<digits>_<target>" code.
bool is_target_theme(std::string_view code, const std::set<std::string>& targets);

// Occurrences of target theme codes, with repetition. Uses the V2 mention
// list (one per character offset) and falls back to the V1 list.
int count_theme_hits(const GkgRecord& record, const std::set<std::string>& targets);

bool keep_article(const GkgRecord& record, const ArticleFilterConfig& cfg);
std::vector<GkgRecord> filter_articles(std::span<const GkgRecord> records,
                                       const ArticleFilterConfig& cfg);

// --- trading calendar --------------------------------------------------------

struct TradingCalendar {
  std::vector<Date> trading_days;
  std::chrono::minutes market_open{9 * 60};
  std::chrono::minutes market_close{17 * 60 + 30};
  int utc_offset_hours = 1;
  // Publications further than this from their assigned day are rejected.
  std::chrono::days max_lookahead{7};

  void validate() const;
  bool is_trading_day(Date d) const;
};

// Weekdays in [first, last] minus `holidays`.
TradingCalendar weekday_calendar(Date first, Date last, std::span<const Date> holidays = {});
// One YYYY-MM-DD per line; '#' comments allowed.
TradingCalendar read_calendar_file(const std::filesystem::path& path);
void write_calendar_file(const std::filesystem::path& path, const TradingCalendar& cal);

Date assign_trading_day(Instant publish_instant, const TradingCalendar& cal);

// --- aggregation -------------------------------------------------------------

enum class Category { kGcam, kWbTheme, kGdeltTheme, kLocation, kPerson, kOrganization };

std::string_view category_name(Category c);
Category parse_category(std::string_view name);

// Feature keys are category-qualified, e.g. "gcam:c2.168", "wb:WB_...".
std::string feature_key(Category c, std::string_view code);
Category key_category(std::string_view key);
std::string_view key_code(std::string_view key);
// GCAM dictionary of a key ("c2" for "gcam:c2.168"); empty for non-GCAM keys.
std::string gcam_dictionary(std::string_view key);

struct DailyAggregate {
  Date trading_day{};
  std::int64_t article_count = 0;
  std::map<std::string, double> category_counts;
};

// Partial per-day sums. merge() is associative and commutative so per-file
// aggregators can be combined in any order.
class DailyAggregator {
 public:
  explicit DailyAggregator(const TradingCalendar& cal) : cal_(&cal) {}

  void add(const GkgRecord& record);
  void merge(const DailyAggregator& other);
  // One entry per calendar trading day, zero-article days included.
  std::vector<DailyAggregate> finish() const;

 private:
  const TradingCalendar* cal_;
  std::map<Date, DailyAggregate> days_;
};

std::vector<DailyAggregate> aggregate_daily(std::span<const GkgRecord> records,
                                            const TradingCalendar& cal);

// daily_features.csv (trading_day, article_count, <keys...>) plus
// features_meta.json (key -> {category, dictionary}). Absent keys are left
// blank, which downstream reads as missing.
void write_daily_features(const std::filesystem::path& dir, std::span<const DailyAggregate> days);

// --- fetching ----------------------------------------------------------------

inline constexpr std::chrono::minutes kSlotLength{15};

// Slot start instants in [begin, end), aligned to the 15-minute grid.
std::vector<Instant> gkg_slots(Instant begin, Instant end);
std::string gkg_slot_filename(Instant slot);

struct FetchOptions {
  int max_attempts = 4;
  std::chrono::milliseconds initial_backoff{200};
  std::chrono::milliseconds max_backoff{5000};
  std::chrono::seconds timeout{30};
  int concurrency = 4;
};

struct FetchReport {
  std::vector<std::filesystem::path> paths;  // chronological, cached + new
  std::size_t downloaded = 0;
  std::vector<Instant> missing;  // network failures after retries
  std::vector<std::filesystem::path> corrupt;

  bool complete() const { return missing.empty(); }
};

// Downloads <base_url>/<YYYYMMDDHHMMSS>.gkg.csv.zip for every slot in
// [begin, end) into dest_dir, skipping valid cached archives.
FetchReport fetch_gkg_files(const std::string& base_url, Instant begin, Instant end,
                            const std::filesystem::path& dest_dir, const FetchOptions& options = {});

// Minimal single-entry zip writer (deflate), used for fixtures and tests.
void write_zip(const std::filesystem::path& path, std::string_view entry_name,
               std::string_view contents);

}  // namespace spreadcast::gkg
