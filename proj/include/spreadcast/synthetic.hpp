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

// Synthetic stand-in for the proprietary inputs: Italian and German yield
// curves, a trading calendar and monthly GKG archives whose emotion counts
// lead the spread by one day.

#include <cstdint>
#include <filesystem>
#include <vector>

#include "spreadcast/calendar_time.hpp"

namespace spreadcast::synthetic {

struct DatasetConfig {
  Date first = parse_date("2019-01-02");
  std::size_t trading_days = 330;
  double articles_per_day = 24.0;
  std::uint64_t seed = 20190102;
};

struct DatasetFiles {
  std::filesystem::path yields;
  std::filesystem::path calendar;
  std::filesystem::path outlets;
  std::filesystem::path exclusions;
  std::filesystem::path gkg_dir;
  Date first{};
  Date last{};
};

// Easter-based and fixed Italian market holidays in [first, last].
std::vector<Date> market_holidays(Date first, Date last);

DatasetFiles write_dataset(const std::filesystem::path& dir, const DatasetConfig& cfg);

// A full run configuration over `files`, with paths relative to the config
// file's directory.
std::string desk_config_json(const DatasetFiles& files, const std::filesystem::path& config_dir);

}  // namespace spreadcast::synthetic
