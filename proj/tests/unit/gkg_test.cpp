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

#include <atomic>
#include <fstream>
#include <map>
#include <random>
#include <thread>

#include <gtest/gtest.h>
#include <httplib.h>
#include <json.hpp>

#include "spreadcast/csv.hpp"
#include "spreadcast/error.hpp"
#include "spreadcast/gkg.hpp"
#include "test_util.hpp"

namespace spreadcast::gkg {
namespace {

const std::string kData = SPREADCAST_TEST_DATA;

std::string line_with(const std::string& themes_v1, const std::string& themes_v2, const std::string& gcam,
                      const std::string& outlet = "ansa.it", const std::string& date = "20190416090000") {
  std::vector<std::string> cols(kGkgColumnCount);
  cols[kRecordId] = date + "-1";
  cols[kDate] = date;
  cols[kSourceCommonName] = outlet;
  cols[kV1Themes] = themes_v1;
  cols[kV2Themes] = themes_v2;
  cols[kV2Gcam] = gcam;
  std::string out;
  for (std::size_t i = 0; i < cols.size(); ++i) out += (i ? "\t" : "") + cols[i];
  return out;
}

GkgRecord article(int hits, std::int64_t words, const std::string& outlet = "ansa.it") {
  GkgRecord r;
  r.outlet = outlet;
  r.word_count = words;
  for (int i = 0; i < hits; ++i) r.theme_mentions.push_back({"WB_442_MACROECONOMIC_VULNERABILITY_AND_DEBT", 10 * i});
  return r;
}

Instant utc(const std::string& gkg) { return parse_gkg_timestamp(gkg); }

TradingCalendar fixture_calendar() { return read_calendar_file(kData + "/gkg_fixture_calendar.txt"); }

// --- parsing -------------------------------------------------------------------

TEST(GkgParse, GcamCountsAndWordCount) {
  const GkgRecord r = parse_gkg_record(line_with("", "", "wc:125,c2.168:3,c15.86:1"));
  EXPECT_EQ(r.word_count, 125);
  EXPECT_EQ(r.gcam_counts, (std::map<std::string, double>{{"c15.86", 1}, {"c2.168", 3}}));
  EXPECT_TRUE(r.wb_themes.empty());
  EXPECT_TRUE(r.gdelt_themes.empty());
  EXPECT_TRUE(r.warnings.empty());
}

TEST(GkgParse, ValueDimensionKeepsRealScore) {
  const GkgRecord r = parse_gkg_record(line_with("", "", "wc:200,v19.2:0.351"));
  EXPECT_EQ(r.word_count, 200);
  EXPECT_DOUBLE_EQ(r.gcam_counts.at("v19.2"), 0.351);
}

TEST(GkgParse, WrongColumnCountReportsColumns) {
  std::string line = line_with("", "", "wc:1");
  line += "\textra";
  try {
    parse_gkg_record(line);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kParse);
    EXPECT_EQ(e.column(), 28u);
  }
}

TEST(GkgParse, BadTimestampNamesDateColumn) {
  try {
    parse_gkg_record(line_with("", "", "wc:1", "ansa.it", "2019041609"));
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.column(), static_cast<std::size_t>(kDate));
  }
}

TEST(GkgParse, MalformedGcamPairIsSkippedWithWarning) {
  const GkgRecord r = parse_gkg_record(line_with("", "", "wc:300,c2.1,c2.2:x,c2.3:-1,c2.4:7,zz:1"));
  EXPECT_EQ(r.word_count, 300);
  EXPECT_EQ(r.warnings.size(), 3u);
  EXPECT_EQ(r.gcam_counts.at("c2.4"), 7);
  EXPECT_EQ(r.gcam_counts.count("c2.2"), 0u);
  EXPECT_EQ(r.gcam_counts.at("zz"), 1.0);  // unknown codes kept verbatim
}

TEST(GkgParse, ThemesSplitByFamily) {
  const GkgRecord r = parse_gkg_record(
      line_with("WB_442_MACROECONOMIC_VULNERABILITY_AND_DEBT;ECON_DEBT;",
                "WB_442_MACROECONOMIC_VULNERABILITY_AND_DEBT,17;ECON_DEBT,40;WB_442_MACROECONOMIC_VULNERABILITY_AND_DEBT,90;",
                "wc:150"));
  EXPECT_EQ(r.wb_themes, std::vector<std::string>{"WB_442_MACROECONOMIC_VULNERABILITY_AND_DEBT"});
  EXPECT_EQ(r.gdelt_themes, std::vector<std::string>{"ECON_DEBT"});
  ASSERT_EQ(r.theme_mentions.size(), 3u);
  EXPECT_EQ(r.theme_mentions[2].offset, 90);
}

TEST(GkgTimestamp, RoundTrip) {
  for (const char* s : {"20190416090000", "20201231235945", "20000229120000"}) {
    EXPECT_EQ(format_gkg_timestamp(parse_gkg_timestamp(s)), s);
  }
  EXPECT_THROW(parse_gkg_timestamp("20190230120000"), Error);
}

class GkgFixture : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    text_ = csv::read_file(kData + "/gkg_fixture.csv");
    std::ifstream in(kData + "/gkg_fixture_expected.json");
    expected_ = nlohmann::json::parse(in);
  }
  static std::string text_;
  static nlohmann::json expected_;
};
std::string GkgFixture::text_;
nlohmann::json GkgFixture::expected_;

TEST_F(GkgFixture, ParsesEveryLineWithoutErrors) {
  const ParseOutcome out = parse_gkg_text(text_);
  EXPECT_TRUE(out.errors.empty());
  EXPECT_EQ(out.records.size(), 200u);
}

TEST_F(GkgFixture, MatchesIndependentDecoder) {
  const ParseOutcome out = parse_gkg_text(text_);
  const auto& rows = expected_["records"];
  ASSERT_EQ(rows.size(), out.records.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const GkgRecord& r = out.records[i];
    const auto& e = rows[i];
    SCOPED_TRACE("line " + std::to_string(i + 1));
    EXPECT_EQ(format_gkg_timestamp(r.publish_instant), e["timestamp"].get<std::string>());
    EXPECT_EQ(r.outlet, e["outlet"].get<std::string>());
    EXPECT_EQ(r.word_count, e["word_count"].get<std::int64_t>());
    EXPECT_EQ(r.wb_themes, e["wb_themes"].get<std::vector<std::string>>());
    EXPECT_EQ(r.gdelt_themes, e["gdelt_themes"].get<std::vector<std::string>>());
    EXPECT_EQ(r.theme_mentions.size(), e["mentions"].get<std::size_t>());
    EXPECT_EQ(r.locations, e["locations"].get<std::vector<std::string>>());
    EXPECT_EQ(r.persons, e["persons"].get<std::vector<std::string>>());
    EXPECT_EQ(r.organizations, e["organizations"].get<std::vector<std::string>>());
    EXPECT_EQ(r.warnings.size(), e["warnings"].get<std::size_t>());
    EXPECT_EQ(count_theme_hits(r, ArticleFilterConfig{}.target_wb_themes), e["theme_hits"].get<int>());
    ASSERT_EQ(r.gcam_counts.size(), e["gcam"].size());
    for (const auto& [code, value] : e["gcam"].items()) {
      EXPECT_DOUBLE_EQ(r.gcam_counts.at(code), std::stod(value.get<std::string>())) << code;
    }
  }
}

TEST_F(GkgFixture, SerializeRoundTripsConsumedFields) {
  for (const auto& r : parse_gkg_text(text_).records) {
    const GkgRecord back = parse_gkg_record(serialize_gkg_record(r));
    EXPECT_TRUE(back.same_fields(r)) << r.record_id;
  }
}

TEST_F(GkgFixture, TradingDaysAndFilterMatchDecoder) {
  const TradingCalendar cal = fixture_calendar();
  ArticleFilterConfig cfg;
  cfg.allowed_outlets = {"ilsole24ore.com", "ansa.it",      "repubblica.it", "corriere.it",
                         "teleborsa.it",    "milanofinanza.it", "lastampa.it"};
  const ParseOutcome out = parse_gkg_text(text_);
  const auto& rows = expected_["records"];
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_EQ(format_date(assign_trading_day(out.records[i].publish_instant, cal)),
              rows[i]["trading_day"].get<std::string>());
    EXPECT_EQ(keep_article(out.records[i], cfg), rows[i]["kept"].get<bool>());
  }
  const auto kept = filter_articles(out.records, cfg);
  const auto days = aggregate_daily(kept, cal);
  std::int64_t total = 0;
  for (const auto& d : days) {
    total += d.article_count;
    const std::string key = format_date(d.trading_day);
    const auto& e = expected_["kept_by_day"];
    if (e.contains(key)) {
      EXPECT_EQ(d.article_count, e[key]["articles"].get<std::int64_t>()) << key;
      const auto it = d.category_counts.find("gcam:c2.168");
      EXPECT_EQ(it == d.category_counts.end() ? 0.0 : it->second, e[key]["c2.168"].get<double>()) << key;
    } else {
      EXPECT_EQ(d.article_count, 0) << key;
    }
  }
  EXPECT_EQ(total, static_cast<std::int64_t>(kept.size()));
  EXPECT_EQ(days.size(), cal.trading_days.size());
}

// --- filtering -------------------------------------------------------------------

TEST(GkgFilter, Thresholds) {
  ArticleFilterConfig cfg;
  cfg.allowed_outlets = {"ansa.it"};
  EXPECT_FALSE(keep_article(article(0, 500), cfg));
  EXPECT_TRUE(keep_article(article(4, 100), cfg));
  EXPECT_FALSE(keep_article(article(3, 100), cfg));
  EXPECT_FALSE(keep_article(article(5, 99), cfg));
  EXPECT_FALSE(keep_article(article(5, 500, "bbc.co.uk"), cfg));
}

TEST(GkgFilter, TargetThemeMatching) {
  const std::set<std::string> t = ArticleFilterConfig{}.target_wb_themes;
  EXPECT_TRUE(is_target_theme("WB_442_MACROECONOMIC_VULNERABILITY_AND_DEBT", t));
  EXPECT_TRUE(is_target_theme("MACROECONOMIC_AND_STRUCTURAL_POLICIES", t));
  EXPECT_FALSE(is_target_theme("WB_1104_MACROECONOMIC_VULNERABILITY", t));
  EXPECT_FALSE(is_target_theme("WB_X_MACROECONOMIC_VULNERABILITY_AND_DEBT", t));
  EXPECT_FALSE(is_target_theme("ECON_MACROECONOMIC_VULNERABILITY_AND_DEBT", t));
}

TEST(GkgFilter, RaisingWordThresholdNeverGrowsKeptSet) {
  const ParseOutcome out = parse_gkg_text(csv::read_file(kData + "/gkg_fixture.csv"));
  ArticleFilterConfig cfg;
  cfg.allowed_outlets = default_outlets();
  std::size_t previous = out.records.size();
  for (std::int64_t w : {0, 50, 100, 101, 250, 500, 1000, 5000}) {
    cfg.min_word_count = w;
    const std::size_t kept = filter_articles(out.records, cfg).size();
    EXPECT_LE(kept, previous);
    previous = kept;
  }
}

TEST(GkgFilter, InvalidConfigRejected) {
  ArticleFilterConfig cfg;
  EXPECT_THROW(filter_articles({}, cfg), Error);  // no outlets
  cfg.allowed_outlets = {"ansa.it"};
  cfg.min_theme_keywords = 0;
  EXPECT_THROW(filter_articles({}, cfg), Error);
}

// --- trading days ----------------------------------------------------------------

TEST(TradingDay, HandEnumeratedTable) {
  // UTC instants; local time is UTC+1. 2019-04-19 (Fri) and 04-22 (Mon) are closed.
  const TradingCalendar cal = fixture_calendar();
  const std::vector<std::pair<std::string, std::string>> table = {
      {"20190416090000", "2019-04-16"},  // Tue 10:00
      {"20190416163000", "2019-04-16"},  // Tue 17:30, close is inclusive
      {"20190416163100", "2019-04-17"},  // Tue 17:31
      {"20190416170000", "2019-04-17"},  // Tue 18:00
      {"20190417075900", "2019-04-17"},  // Wed 08:59, before the open
      {"20190416230000", "2019-04-17"},  // Wed 00:00 local
      {"20190418163100", "2019-04-23"},  // Thu after close, Fri and Mon closed
      {"20190419100000", "2019-04-23"},  // Good Friday, in session hours
      {"20190420110000", "2019-04-23"},  // Saturday noon
      {"20190421110000", "2019-04-23"},  // Sunday noon
      {"20190422100000", "2019-04-23"},  // Easter Monday
      {"20190426080000", "2019-04-26"},  // Fri 09:00
      {"20190426200000", "2019-04-29"},  // Fri 21:00
      {"20190427110000", "2019-04-29"},  // Saturday
  };
  for (const auto& [instant, day] : table) {
    EXPECT_EQ(format_date(assign_trading_day(utc(instant), cal)), day) << instant;
  }
}

TEST(TradingDay, WeekendOnPlainCalendarRollsToMonday) {
  const TradingCalendar cal = weekday_calendar(parse_date("2021-03-01"), parse_date("2021-03-31"));
  EXPECT_EQ(format_date(assign_trading_day(utc("20210302090000"), cal)), "2021-03-02");
  EXPECT_EQ(format_date(assign_trading_day(utc("20210302170000"), cal)), "2021-03-03");
  EXPECT_EQ(format_date(assign_trading_day(utc("20210306110000"), cal)), "2021-03-08");
}

TEST(TradingDay, BeyondCalendarIsOutOfCalendar) {
  const TradingCalendar cal = fixture_calendar();
  try {
    assign_trading_day(utc("20190530120000"), cal);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kOutOfCalendar);
  }
}

TEST(TradingDay, Monotone) {
  const TradingCalendar cal = fixture_calendar();
  Instant t = utc("20190414230000");
  Date last{};
  for (int i = 0; i < 1400; ++i, t += std::chrono::minutes(13)) {
    const Date d = assign_trading_day(t, cal);
    EXPECT_GE(d, last);
    last = d;
  }
}

TEST(TradingDay, CalendarFileRejectsWeekend) {
  testing::TempDir dir;
  csv::write_file(dir / "cal.txt", "2019-04-19\n2019-04-20\n");
  EXPECT_THROW(read_calendar_file(dir / "cal.txt"), Error);
}

// --- aggregation -----------------------------------------------------------------

TEST(Aggregate, AdditivityAndEmptyDays) {
  const TradingCalendar cal = weekday_calendar(parse_date("2019-04-15"), parse_date("2019-04-17"));
  GkgRecord a = article(4, 200), b = article(4, 200);
  a.publish_instant = utc("20190415090000");
  b.publish_instant = utc("20190415100000");
  a.gcam_counts["c2.168"] = 3;
  b.gcam_counts["c2.168"] = 2;
  const auto days = aggregate_daily(std::vector<GkgRecord>{a, b}, cal);
  ASSERT_EQ(days.size(), 3u);
  EXPECT_EQ(days[0].article_count, 2);
  EXPECT_EQ(days[0].category_counts.at("gcam:c2.168"), 5.0);
  EXPECT_EQ(days[0].category_counts.at("wb:WB_442_MACROECONOMIC_VULNERABILITY_AND_DEBT"), 8.0);
  EXPECT_EQ(days[1].article_count, 0);
  EXPECT_TRUE(days[1].category_counts.empty());
}

TEST(Aggregate, WeekendArticlesLandOnMonday) {
  const TradingCalendar cal = weekday_calendar(parse_date("2021-03-01"), parse_date("2021-03-12"));
  std::vector<GkgRecord> recs;
  // Fri 10:00, Fri 12:00, Fri 16:00 local, Sat 11:00, Sun 20:00 local.
  for (const char* t : {"20210305090000", "20210305110000", "20210305150000", "20210306100000",
                        "20210307190000"}) {
    recs.push_back(article(4, 200));
    recs.back().publish_instant = utc(t);
  }
  const auto days = aggregate_daily(recs, cal);
  std::map<std::string, std::int64_t> count;
  for (const auto& d : days) count[format_date(d.trading_day)] = d.article_count;
  EXPECT_EQ(count["2021-03-05"], 3);
  EXPECT_EQ(count["2021-03-08"], 2);
}

TEST(Aggregate, MergeOrderDoesNotMatter) {
  const TradingCalendar cal = fixture_calendar();
  const auto recs = parse_gkg_text(csv::read_file(kData + "/gkg_fixture.csv")).records;
  DailyAggregator whole(cal), left(cal), right(cal);
  for (std::size_t i = 0; i < recs.size(); ++i) {
    whole.add(recs[i]);
    (i % 3 ? left : right).add(recs[i]);
  }
  DailyAggregator lr(cal), rl(cal);
  lr.merge(left);
  lr.merge(right);
  rl.merge(right);
  rl.merge(left);
  const auto a = whole.finish(), b = lr.finish(), c = rl.finish();
  ASSERT_EQ(a.size(), b.size());
  // Integer counts merge exactly; real GCAM scores up to summation order.
  auto same = [](const DailyAggregate& x, const DailyAggregate& y) {
    if (x.article_count != y.article_count || x.category_counts.size() != y.category_counts.size()) return false;
    for (const auto& [k, v] : x.category_counts) {
      const auto it = y.category_counts.find(k);
      if (it == y.category_counts.end() || std::abs(it->second - v) > 1e-12 * (1 + std::abs(v))) return false;
    }
    return true;
  };
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_TRUE(same(a[i], b[i])) << format_date(a[i].trading_day);
    EXPECT_TRUE(same(c[i], b[i])) << format_date(a[i].trading_day);
  }
}

TEST(Aggregate, FeatureKeys) {
  EXPECT_EQ(feature_key(Category::kGcam, "c2.168"), "gcam:c2.168");
  EXPECT_EQ(key_category("loc:IT"), Category::kLocation);
  EXPECT_EQ(key_code("org:istat"), "istat");
  EXPECT_EQ(gcam_dictionary("gcam:c2.168"), "c2");
  EXPECT_EQ(gcam_dictionary("wb:WB_1"), "");
}

// --- archives and fetching ---------------------------------------------------------

TEST(Archive, ZipRoundTrip) {
  testing::TempDir dir;
  const std::string text = csv::read_file(kData + "/gkg_fixture.csv");
  write_zip(dir / "a.gkg.csv.zip", "a.gkg.csv", text);
  EXPECT_EQ(read_gkg_archive(dir / "a.gkg.csv.zip"), text);
  csv::write_file(dir / "b.gkg.csv.zip", "not a zip");
  EXPECT_THROW(read_gkg_archive(dir / "b.gkg.csv.zip"), Error);
}

TEST(Fetch, SlotEnumeration) {
  EXPECT_EQ(gkg_slots(utc("20190416090000"), utc("20190416091500")).size(), 1u);
  const auto hour = gkg_slots(utc("20190416090000"), utc("20190416100000"));
  ASSERT_EQ(hour.size(), 4u);
  EXPECT_EQ(gkg_slot_filename(hour[3]), "20190416094500.gkg.csv.zip");
  EXPECT_EQ(format_gkg_timestamp(gkg_slots(utc("20190416090100"), utc("20190416100000"))[0]),
            "20190416091500");
}

class LocalServer {
 public:
  explicit LocalServer(const httplib::Server::Handler& archive_handler) {
    server_.Get(R"(/gdeltv2/(\d{14})\.gkg\.csv\.zip)", archive_handler);
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~LocalServer() {
    server_.stop();
    thread_.join();
  }
  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/gdeltv2"; }

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

TEST(Fetch, DownloadsOnceThenUsesCache) {
  testing::TempDir dir;
  write_zip(dir / "src.zip", "x.gkg.csv", csv::read_file(kData + "/gkg_fixture.csv"));
  const std::string zip = csv::read_file(dir / "src.zip");
  std::atomic<int> hits{0};
  LocalServer srv([&](const httplib::Request&, httplib::Response& res) {
    ++hits;
    res.set_content(zip, "application/zip");
  });
  FetchOptions opt;
  opt.initial_backoff = std::chrono::milliseconds(1);
  const auto first = fetch_gkg_files(srv.url(), utc("20190416090000"), utc("20190416100000"), dir / "cache", opt);
  EXPECT_EQ(first.downloaded, 4u);
  ASSERT_EQ(first.paths.size(), 4u);
  EXPECT_TRUE(first.complete());
  EXPECT_EQ(first.paths[0].filename(), "20190416090000.gkg.csv.zip");
  EXPECT_EQ(first.paths[3].filename(), "20190416094500.gkg.csv.zip");
  const auto again = fetch_gkg_files(srv.url(), utc("20190416090000"), utc("20190416100000"), dir / "cache", opt);
  EXPECT_EQ(again.downloaded, 0u);
  EXPECT_EQ(again.paths, first.paths);
  EXPECT_EQ(hits.load(), 4);
}

TEST(Fetch, RetriesServerErrorsAndReportsMissingAndCorrupt) {
  testing::TempDir dir;
  write_zip(dir / "src.zip", "x.gkg.csv", "a\n");
  const std::string zip = csv::read_file(dir / "src.zip");
  std::atomic<int> flaky{0};
  LocalServer srv([&](const httplib::Request& req, httplib::Response& res) {
    const std::string slot = req.matches[1];
    if (slot == "20190416090000") {
      if (flaky++ < 2) {
        res.status = 503;
        return;
      }
      res.set_content(zip, "application/zip");
    } else if (slot == "20190416091500") {
      res.set_content("garbage", "application/zip");
    } else if (slot == "20190416093000") {
      res.status = 500;
    } else {
      res.set_content(zip, "application/zip");
    }
  });
  FetchOptions opt;
  opt.initial_backoff = std::chrono::milliseconds(1);
  opt.max_attempts = 3;
  const auto r = fetch_gkg_files(srv.url(), utc("20190416090000"), utc("20190416100000"), dir / "cache", opt);
  EXPECT_EQ(flaky.load(), 3);
  EXPECT_EQ(r.paths.size(), 2u);
  ASSERT_EQ(r.corrupt.size(), 1u);
  EXPECT_EQ(r.corrupt[0].filename(), "20190416091500.gkg.csv.zip");
  ASSERT_EQ(r.missing.size(), 1u);
  EXPECT_EQ(format_gkg_timestamp(r.missing[0]), "20190416093000");
  EXPECT_FALSE(r.complete());
}

TEST(Fetch, EmptyRangeRejected) {
  testing::TempDir dir;
  EXPECT_THROW(fetch_gkg_files("http://127.0.0.1:1", utc("20190416090100"), utc("20190416091000"), dir.path()),
               Error);
}

}  // namespace
}  // namespace spreadcast::gkg
