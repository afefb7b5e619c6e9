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

// Twelve hand-built feature columns over 100 days. Each filter of the news
// funnel removes known columns, leaving exactly five survivors:
//
//   gcam:c2.14    survives (noise, sd ~ 12)
//   gcam:c3.1     excluded dictionary c3
//   gcam:c2.20    missing on all of the first 33 days
//   gcam:c2.21    present on 89 of 100 days
//   gcam:c2.22    survives, present on exactly 90 days
//   gcam:c2.23    alternates 0/10, population sd 5 (not > 5)
//   wb:WB_1_A     survives, alternates 0/12, sd 6
//   theme:ECON    constant
//   gcam:c2.24    copy of c2.14 with 2 extra missing days
//   wb:WB_2_B     copy of c2.22, same missing days, loses on category
//   loc:IT        survives (noise)
//   person:p x    survives (noise)

#include <cmath>
#include <limits>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "spreadcast/features.hpp"

namespace spreadcast::testing {

struct FunnelFixture {
  features::FeatureMatrix matrix;
  std::vector<double> articles;
  features::SelectionConfig config;
  std::vector<std::string> survivors;
  std::map<std::string, features::DropReason> reasons;
};

inline FunnelFixture make_funnel_fixture() {
  using features::DropReason;
  using gkg::Category;
  constexpr int n = 100;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::mt19937_64 rng(1212);
  std::normal_distribution<double> nd;

  const std::vector<std::pair<std::string, Category>> cols = {
      {"gcam:c2.14", Category::kGcam},  {"gcam:c3.1", Category::kGcam},     {"gcam:c2.20", Category::kGcam},
      {"gcam:c2.21", Category::kGcam},  {"gcam:c2.22", Category::kGcam},    {"gcam:c2.23", Category::kGcam},
      {"wb:WB_1_A", Category::kWbTheme}, {"theme:ECON", Category::kGdeltTheme}, {"gcam:c2.24", Category::kGcam},
      {"wb:WB_2_B", Category::kWbTheme}, {"loc:IT", Category::kLocation},  {"person:p x", Category::kPerson}};

  Eigen::MatrixXd v(n, static_cast<Eigen::Index>(cols.size()));
  FunnelFixture f;
  for (int i = 0; i < n; ++i) {
    f.articles.push_back(10.0 + (i % 3));
    v(i, 0) = 60 + 12 * nd(rng);
    v(i, 1) = 40 + 15 * nd(rng);
    v(i, 2) = i < 33 ? nan : 50 + 10 * nd(rng);
    v(i, 3) = (i >= 40 && i < 51) ? nan : 50 + 10 * nd(rng);
    v(i, 4) = (i >= 60 && i < 70) ? nan : 45 + 9 * nd(rng);
    v(i, 5) = i % 2 ? 10.0 : 0.0;
    v(i, 6) = i % 2 ? 12.0 : 0.0;
    v(i, 7) = 25.0;
    v(i, 8) = (i == 80 || i == 90) ? nan : v(i, 0);
    v(i, 9) = v(i, 4);
    v(i, 10) = 30 + 8 * nd(rng);
    v(i, 11) = 30 + 8 * nd(rng);
  }
  std::vector<Date> days;
  for (int i = 0; i < n; ++i) days.push_back(parse_date("2020-01-06") + std::chrono::days(i));
  std::vector<std::string> keys;
  std::vector<features::FeatureMeta> meta;
  for (const auto& [key, cat] : cols) {
    keys.push_back(key);
    meta.push_back({cat, cat == Category::kGcam ? gkg::gcam_dictionary(key) : std::string()});
  }
  f.matrix = features::make_matrix(days, keys, meta, v);
  f.config.drop_gcam_codes = {"c3"};
  f.config.rng_seed = 5;
  f.survivors = {"gcam:c2.14", "gcam:c2.22", "wb:WB_1_A", "loc:IT", "person:p x"};
  f.reasons = {{"gcam:c3.1", DropReason::kExcludedDictionary}, {"gcam:c2.20", DropReason::kAllMissingInitial},
               {"gcam:c2.21", DropReason::kLowAvailability},   {"gcam:c2.23", DropReason::kLowVariance},
               {"theme:ECON", DropReason::kLowVariance},       {"gcam:c2.24", DropReason::kCorrelatedOut},
               {"wb:WB_2_B", DropReason::kCorrelatedOut}};
  return f;
}

}  // namespace spreadcast::testing
