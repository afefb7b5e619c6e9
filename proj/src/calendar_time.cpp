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

#include "spreadcast/calendar_time.hpp"

#include <charconv>
#include <cstdio>

#include "spreadcast/error.hpp"

namespace spreadcast {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kParse: return "parse";
    case ErrorKind::kDomain: return "domain";
    case ErrorKind::kAlignment: return "alignment";
    case ErrorKind::kParameter: return "parameter";
    case ErrorKind::kSingularFit: return "singular-fit";
    case ErrorKind::kDegenerateScale: return "degenerate-scale";
    case ErrorKind::kDivergence: return "divergence";
    case ErrorKind::kOutOfCalendar: return "out-of-calendar";
    case ErrorKind::kUndefined: return "undefined";
    case ErrorKind::kIo: return "io";
    case ErrorKind::kNetwork: return "network";
    case ErrorKind::kSchema: return "schema";
  }
  return "unknown";
}

namespace {

int parse_digits(std::string_view text, std::size_t pos, std::size_t len) {
  int value = 0;
  const char* first = text.data() + pos;
  auto [ptr, ec] = std::from_chars(first, first + len, value);
  if (ec != std::errc() || ptr != first + len) {
    throw Error(ErrorKind::kParse, "bad digits in '" + std::string(text) + "'");
  }
  return value;
}

Date make_date(int y, int m, int d, std::string_view text) {
  using namespace std::chrono;
  const year_month_day ymd{year{y}, month{static_cast<unsigned>(m)},
                           day{static_cast<unsigned>(d)}};
  if (!ymd.ok()) {
    throw Error(ErrorKind::kParse, "invalid calendar date '" + std::string(text) + "'");
  }
  return sys_days{ymd};
}

}  // namespace

Date parse_date(std::string_view text) {
  if (text.size() != 10 || text[4] != '-' || text[7] != '-') {
    throw Error(ErrorKind::kParse, "expected YYYY-MM-DD, got '" + std::string(text) + "'");
  }
  return make_date(parse_digits(text, 0, 4), parse_digits(text, 5, 2),
                   parse_digits(text, 8, 2), text);
}

std::string format_date(Date d) {
  const std::chrono::year_month_day ymd{d};
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

Instant parse_gkg_timestamp(std::string_view text) {
  if (text.size() != 14) {
    throw Error(ErrorKind::kParse, "expected 14-digit timestamp, got '" + std::string(text) + "'");
  }
  const Date day = make_date(parse_digits(text, 0, 4), parse_digits(text, 4, 2),
                             parse_digits(text, 6, 2), text);
  const int hh = parse_digits(text, 8, 2);
  const int mm = parse_digits(text, 10, 2);
  const int ss = parse_digits(text, 12, 2);
  if (hh > 23 || mm > 59 || ss > 59) {
    throw Error(ErrorKind::kParse, "invalid time of day in '" + std::string(text) + "'");
  }
  using namespace std::chrono;
  return Instant{day} + hours{hh} + minutes{mm} + seconds{ss};
}

std::string format_gkg_timestamp(Instant t) {
  using namespace std::chrono;
  const Date day = floor<days>(t);
  const year_month_day ymd{day};
  const hh_mm_ss tod{t - Instant{day}};
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%04d%02u%02u%02ld%02ld%02ld", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<long>(tod.hours().count()), static_cast<long>(tod.minutes().count()),
                static_cast<long>(tod.seconds().count()));
  return buf;
}

bool is_weekend(Date d) {
  const std::chrono::weekday wd{d};
  return wd == std::chrono::Saturday || wd == std::chrono::Sunday;
}

}  // namespace spreadcast
