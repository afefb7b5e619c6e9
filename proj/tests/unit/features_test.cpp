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
#include <limits>

#include <gtest/gtest.h>

#include "funnel_fixture.hpp"
#include "spreadcast/error.hpp"
#include "spreadcast/features.hpp"
#include "test_util.hpp"

namespace spreadcast::features {
namespace {

const double kNan = std::numeric_limits<double>::quiet_NaN();

FeatureMatrix matrix_of(const Eigen::MatrixXd& v, std::vector<Category> cats = {}) {
  std::vector<Date> days;
  for (Eigen::Index i = 0; i < v.rows(); ++i) days.push_back(parse_date("2021-01-04") + std::chrono::days(i));
  std::vector<std::string> keys;
  std::vector<FeatureMeta> meta;
  for (Eigen::Index j = 0; j < v.cols(); ++j) {
    const Category c = cats.empty() ? Category::kGcam : cats[static_cast<std::size_t>(j)];
    keys.push_back(gkg::feature_key(c, c == Category::kGcam ? "c2." + std::to_string(j) : "k" + std::to_string(j)));
    meta.push_back({c, c == Category::kGcam ? "c2" : ""});
  }
  return make_matrix(days, keys, meta, v);
}

bool same(const FeatureMatrix& a, const FeatureMatrix& b) {
  return a.keys == b.keys && a.days == b.days && a.values == b.values && (a.missing == b.missing).all() &&
         a.normalized == b.normalized;
}

TEST(Funnel, CraftedFixtureKeepsExactlyFive) {
  const auto f = testing::make_funnel_fixture();
  const auto [out, report] = run_selection_pipeline(f.matrix, f.articles, f.config);
  EXPECT_EQ(report.kept, f.survivors);
  EXPECT_EQ(out.keys, f.survivors);
  EXPECT_EQ(report.dropped, f.reasons);
  EXPECT_EQ(report.kept.size() + report.dropped.size(), f.matrix.n_features());
}

TEST(Funnel, CorrelationDecisionsFollowTheRules) {
  const auto f = testing::make_funnel_fixture();
  const auto report = run_selection_pipeline(f.matrix, f.articles, f.config).second;
  ASSERT_EQ(report.decisions.size(), 2u);
  for (const auto& d : report.decisions) {
    EXPECT_NEAR(std::abs(d.rho), 1.0, 1e-12);
    if (d.dropped == "gcam:c2.24") {
      EXPECT_EQ(d.kept, "gcam:c2.14");
      EXPECT_EQ(d.rule, "fewer-missing");
    } else {
      EXPECT_EQ(d.dropped, "wb:WB_2_B");
      EXPECT_EQ(d.kept, "gcam:c2.22");
      EXPECT_EQ(d.rule, "category-priority");
    }
  }
}

TEST(Funnel, NoSurvivorPairAboveThreshold) {
  const auto f = testing::make_funnel_fixture();
  const auto out = run_selection_pipeline(f.matrix, f.articles, f.config).first;
  const Eigen::MatrixXd rho = pairwise_correlation(out, nullptr);
  for (Eigen::Index a = 0; a < rho.rows(); ++a)
    for (Eigen::Index b = a + 1; b < rho.cols(); ++b) EXPECT_LE(std::abs(rho(a, b)), f.config.corr_threshold);
}

TEST(Funnel, StagesRunInOrder) {
  const auto f = testing::make_funnel_fixture();
  const auto report = run_selection_pipeline(f.matrix, f.articles, f.config).second;
  EXPECT_EQ(report.stages, (std::vector<std::string>{"drop_excluded_gcams", "missing_value_filter", "variance_filter",
                                                     "normalize_by_article_count", "correlation_filter"}));
}

TEST(Funnel, DeterministicReport) {
  const auto f = testing::make_funnel_fixture();
  const auto a = report_to_json(run_selection_pipeline(f.matrix, f.articles, f.config).second);
  const auto b = report_to_json(run_selection_pipeline(f.matrix, f.articles, f.config).second);
  EXPECT_EQ(a, b);
}

TEST(Funnel, EmptyInputGivesEmptyReport) {
  const FeatureMatrix empty = matrix_of(Eigen::MatrixXd(5, 0));
  const auto [out, report] = run_selection_pipeline(empty, std::vector<double>(5, 1.0), SelectionConfig{});
  EXPECT_EQ(out.n_features(), 0u);
  EXPECT_TRUE(report.kept.empty());
  EXPECT_TRUE(report.dropped.empty());
}

TEST(Funnel, EachStageIsIdempotent) {
  const auto f = testing::make_funnel_fixture();
  const auto& c = f.config;
  const FeatureMatrix a = drop_excluded_gcams(f.matrix, c);
  EXPECT_TRUE(same(drop_excluded_gcams(a, c), a));
  const FeatureMatrix b = missing_value_filter(a, c);
  EXPECT_TRUE(same(missing_value_filter(b, c), b));
  const FeatureMatrix d = variance_filter(b, c);
  EXPECT_TRUE(same(variance_filter(d, c), d));
  const FeatureMatrix e = normalize_by_article_count(d, f.articles);
  EXPECT_TRUE(same(normalize_by_article_count(e, f.articles), e));
  const FeatureMatrix g = correlation_filter(e, c).first;
  EXPECT_TRUE(same(correlation_filter(g, c).first, g));
}

TEST(Exclusion, EmptySetIsIdentityAndFullSetKeepsNonGcam) {
  const FeatureMatrix m = matrix_of(Eigen::MatrixXd::Ones(4, 3), {Category::kGcam, Category::kWbTheme, Category::kGcam});
  EXPECT_TRUE(same(drop_excluded_gcams(m, SelectionConfig{}), m));
  SelectionConfig cfg;
  cfg.drop_gcam_codes = {"c2"};
  const FeatureMatrix out = drop_excluded_gcams(m, cfg);
  EXPECT_EQ(out.keys, std::vector<std::string>{"wb:k1"});
  cfg.drop_gcam_codes = {"c2.2"};
  EXPECT_EQ(drop_excluded_gcams(m, cfg).n_features(), 2u);
}

TEST(MissingFilter, AvailabilityBoundary) {
  Eigen::MatrixXd v = Eigen::MatrixXd::Constant(100, 3, 1.0);
  for (int i = 50; i < 61; ++i) v(i, 0) = kNan;  // 89 present
  for (int i = 50; i < 60; ++i) v(i, 1) = kNan;  // 90 present
  const FeatureMatrix out = missing_value_filter(matrix_of(v), SelectionConfig{});
  EXPECT_EQ(out.keys, (std::vector<std::string>{"gcam:c2.1", "gcam:c2.2"}));
}

TEST(MissingFilter, InitialWindowRuleWinsOverLaterAvailability) {
  Eigen::MatrixXd v = Eigen::MatrixXd::Constant(100, 2, 1.0);
  for (int i = 0; i < 33; ++i) v(i, 0) = kNan;  // ceil(0.33 * 100) = 33
  for (int i = 0; i < 32; ++i) v(i, 1) = kNan;
  SelectionConfig cfg;
  cfg.availability_fraction = 0.5;
  SelectionReport report;
  const FeatureMatrix out = missing_value_filter(matrix_of(v), cfg, &report);
  EXPECT_EQ(out.keys, std::vector<std::string>{"gcam:c2.1"});
  EXPECT_EQ(report.dropped.at("gcam:c2.0"), DropReason::kAllMissingInitial);
}

TEST(VarianceFilter, StrictFiveWordBoundary) {
  Eigen::MatrixXd v(40, 3);
  for (int i = 0; i < 40; ++i) {
    v(i, 0) = i % 2 ? 12 : 0;  // sd 6
    v(i, 1) = i % 2 ? 10 : 0;  // sd 5
    v(i, 2) = 7;
  }
  const FeatureMatrix out = variance_filter(matrix_of(v), SelectionConfig{});
  EXPECT_EQ(out.keys, std::vector<std::string>{"gcam:c2.0"});
  EXPECT_DOUBLE_EQ(population_sd(matrix_of(v), 0), 6.0);
}

TEST(VarianceFilter, MissingCellsAreSkipped) {
  Eigen::MatrixXd v(4, 1);
  v << 0, kNan, 12, kNan;
  EXPECT_DOUBLE_EQ(population_sd(matrix_of(v), 0), 6.0);
}

TEST(Normalize, DividesByArticlesAndMasksZeroDays) {
  Eigen::MatrixXd v(3, 1);
  v << 10, 4, 1;
  const FeatureMatrix out = normalize_by_article_count(matrix_of(v), std::vector<double>{5, 0, 1});
  EXPECT_DOUBLE_EQ(out.values(0, 0), 2.0);
  EXPECT_TRUE(out.missing(1, 0));
  EXPECT_DOUBLE_EQ(out.values(2, 0), 1.0);
  const FeatureMatrix ones = matrix_of(Eigen::MatrixXd::Ones(3, 2));
  EXPECT_EQ(normalize_by_article_count(ones, std::vector<double>{1, 1, 1}).values, ones.values);
  EXPECT_THROW(normalize_by_article_count(ones, std::vector<double>{1, 1}), Error);
}

TEST(Correlation, IndependentNoiseKept) {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> nd;
  Eigen::MatrixXd v(200, 2);
  for (Eigen::Index i = 0; i < v.size(); ++i) v.data()[i] = nd(rng);
  const auto [out, report] = correlation_filter(matrix_of(v), SelectionConfig{});
  EXPECT_EQ(out.n_features(), 2u);
  EXPECT_TRUE(report.decisions.empty());
}

TEST(Correlation, NegativeCorrelationCountsAsAbsolute) {
  Eigen::MatrixXd v(50, 2);
  for (int i = 0; i < 50; ++i) {
    v(i, 0) = std::sin(i * 0.7) + 0.01 * i;
    v(i, 1) = -v(i, 0);
  }
  const auto [out, report] = correlation_filter(matrix_of(v), SelectionConfig{});
  EXPECT_EQ(out.n_features(), 1u);
  ASSERT_EQ(report.decisions.size(), 1u);
  EXPECT_EQ(report.decisions[0].rule, "random");
  EXPECT_NEAR(report.decisions[0].rho, -1.0, 1e-12);
}

TEST(Correlation, RandomTieIsSeeded) {
  Eigen::MatrixXd v(30, 2);
  for (int i = 0; i < 30; ++i) v(i, 0) = v(i, 1) = i * i % 7;
  SelectionConfig cfg;
  std::set<std::string> winners;
  for (std::uint64_t seed = 0; seed < 16; ++seed) {
    cfg.rng_seed = seed;
    const auto a = correlation_filter(matrix_of(v), cfg).second.kept;
    const auto b = correlation_filter(matrix_of(v), cfg).second.kept;
    EXPECT_EQ(a, b);
    winners.insert(a.at(0));
  }
  EXPECT_EQ(winners.size(), 2u);  // both sides win for some seed
}

TEST(Correlation, ShortOverlapWarnsAndCountsZero) {
  Eigen::MatrixXd v(6, 2);
  v << 1, kNan, 2, kNan, 3, kNan, 4, 1, 5, 2, kNan, 3;
  std::vector<std::string> warnings;
  const Eigen::MatrixXd rho = pairwise_correlation(matrix_of(v), &warnings);
  EXPECT_EQ(rho(0, 1), 0.0);
  EXPECT_EQ(warnings.size(), 1u);
}

TEST(Correlation, MatchesDirectPearsonOnJointDays) {
  std::mt19937_64 rng(21);
  std::normal_distribution<double> nd;
  Eigen::MatrixXd v(80, 4);
  for (Eigen::Index i = 0; i < v.size(); ++i) v.data()[i] = nd(rng);
  v.col(1) += 0.8 * v.col(0);
  for (int i = 0; i < 80; i += 7) v(i, 0) = kNan;
  for (int i = 3; i < 80; i += 5) v(i, 1) = kNan;
  const FeatureMatrix m = matrix_of(v);
  const Eigen::MatrixXd rho = pairwise_correlation(m, nullptr);
  for (int a = 0; a < 4; ++a) {
    for (int b = a + 1; b < 4; ++b) {
      std::vector<double> x, y;
      for (int i = 0; i < 80; ++i) {
        if (!std::isnan(v(i, a)) && !std::isnan(v(i, b))) {
          x.push_back(v(i, a));
          y.push_back(v(i, b));
        }
      }
      double mx = 0, my = 0;
      for (std::size_t i = 0; i < x.size(); ++i) mx += x[i], my += y[i];
      mx /= static_cast<double>(x.size());
      my /= static_cast<double>(y.size());
      double sxy = 0, sxx = 0, syy = 0;
      for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
      }
      EXPECT_NEAR(rho(a, b), sxy / std::sqrt(sxx * syy), 1e-12) << a << "," << b;
    }
  }
}

TEST(SelectionConfig, RejectsOutOfRange) {
  SelectionConfig cfg;
  cfg.corr_threshold = 1.0;
  EXPECT_THROW(cfg.validate(), Error);
  cfg = SelectionConfig{};
  cfg.initial_fraction = 0.0;
  EXPECT_THROW(cfg.validate(), Error);
}

TEST(FeatureTable, RoundTripThroughFiles) {
  testing::TempDir dir;
  const auto f = testing::make_funnel_fixture();
  FeatureTable t{f.matrix, f.articles};
  write_feature_table(dir.path(), t);
  const FeatureTable back = read_feature_table(dir.path());
  EXPECT_EQ(back.matrix.keys, t.matrix.keys);
  EXPECT_EQ(back.article_counts, t.article_counts);
  EXPECT_TRUE((back.matrix.missing == t.matrix.missing).all());
  EXPECT_EQ(back.matrix.values, t.matrix.values);
  for (std::size_t j = 0; j < t.matrix.n_features(); ++j) {
    EXPECT_EQ(back.matrix.meta[j].category, t.matrix.meta[j].category);
  }
}

}  // namespace
}  // namespace spreadcast::features
