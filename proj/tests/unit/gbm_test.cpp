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

#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "spreadcast/error.hpp"
#include "spreadcast/gbm.hpp"

namespace spreadcast::gbm {
namespace {

double mse(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s / static_cast<double>(a.size());
}

struct Fixture {
  Eigen::MatrixXd X;
  std::vector<double> y;
};

Fixture smooth(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  Fixture f;
  f.X.resize(static_cast<Eigen::Index>(n), 3);
  for (std::size_t i = 0; i < n; ++i) {
    for (int j = 0; j < 3; ++j) f.X(static_cast<Eigen::Index>(i), j) = u(rng);
    f.y.push_back(std::sin(f.X(static_cast<Eigen::Index>(i), 0)) + 0.5 * f.X(static_cast<Eigen::Index>(i), 1));
  }
  return f;
}

TEST(Tree, DepthZeroIsMeanLeaf) {
  Eigen::MatrixXd X(3, 1);
  X << 1, 2, 3;
  const Tree t = fit_regression_tree(X, {1.0, 2.0, 6.0}, 0);
  ASSERT_EQ(t.nodes.size(), 1u);
  EXPECT_DOUBLE_EQ(t.nodes[0].value, 3.0);
}

TEST(Tree, BinaryFeatureSeparatesPerfectly) {
  Eigen::MatrixXd X(4, 2);
  X << 0, 5, 1, 5, 0, 5, 1, 5;
  const std::vector<double> r{-1, 1, -1, 1};
  const Tree t = fit_regression_tree(X, r, 4);
  EXPECT_EQ(t.depth(), 1);
  EXPECT_EQ(t.nodes[0].feature, 0);  // column 1 is constant and never split
  for (Eigen::Index i = 0; i < 4; ++i) EXPECT_DOUBLE_EQ(t.predict(X.data() + i, 4), r[static_cast<std::size_t>(i)]);
}

TEST(Tree, DeeperStepFitIsTighter) {
  Eigen::MatrixXd X(40, 1);
  std::vector<double> r;
  for (int i = 0; i < 40; ++i) {
    X(i, 0) = i;
    r.push_back(std::floor(i / 10.0));
  }
  auto fit_mse = [&](int depth) {
    const Tree t = fit_regression_tree(X, r, depth);
    std::vector<double> p;
    for (Eigen::Index i = 0; i < 40; ++i) p.push_back(t.predict(X.data() + i, 40));
    return mse(p, r);
  };
  EXPECT_LT(fit_mse(3), fit_mse(1));
  EXPECT_LT(fit_mse(3), 1e-20);
}

TEST(Tree, RespectsMaxDepth) {
  const Fixture f = smooth(200, 1);
  for (int d : {1, 3, 5}) EXPECT_LE(fit_regression_tree(f.X, f.y, d).depth(), d);
}

TEST(Boost, ZeroTreesIsMean) {
  const Fixture f = smooth(50, 2);
  const GbmModel m = gbm_fit(f.X, f.y, {3, 0.1, 0, Loss::kSquared, 0.5});
  double mean = 0.0;
  for (double v : f.y) mean += v / 50.0;
  for (double p : gbm_predict(m, f.X)) EXPECT_NEAR(p, mean, 1e-12);
}

TEST(Boost, InterpolatesSmoothTarget) {
  const Fixture f = smooth(60, 3);
  const GbmModel m = gbm_fit(f.X, f.y, {12, 1.0, 50, Loss::kSquared, 0.5});
  EXPECT_LT(mse(gbm_predict(m, f.X), f.y), 1e-6);
}

TEST(Boost, TrainingLossNonIncreasing) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const Fixture f = smooth(120, seed);
    for (int depth : {1, 3, 5}) {
      for (double lr : {0.01, 0.41, 0.99}) {
        std::vector<double> trace;
        gbm_fit(f.X, f.y, {depth, lr, 60, Loss::kSquared, 0.5}, &trace);
        ASSERT_EQ(trace.size(), 61u);
        for (std::size_t k = 1; k < trace.size(); ++k) EXPECT_LE(trace[k], trace[k - 1] + 1e-12);
      }
    }
  }
}

TEST(Boost, RowOrderInvariant) {
  const Fixture f = smooth(80, 4);
  Eigen::MatrixXd Xr = f.X.colwise().reverse();
  std::vector<double> yr(f.y.rbegin(), f.y.rend());
  const BoostParams p{3, 0.3, 20, Loss::kSquared, 0.5};
  const auto a = gbm_predict(gbm_fit(f.X, f.y, p), f.X);
  const auto b = gbm_predict(gbm_fit(Xr, yr, p), f.X);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-12);
}

TEST(Boost, PinballTracksQuantiles) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> nd;
  Eigen::MatrixXd X(2000, 1);
  std::vector<double> y;
  for (int i = 0; i < 2000; ++i) {
    X(i, 0) = i % 2;
    y.push_back(3.0 * X(i, 0) + nd(rng));
  }
  const GbmModel hi = gbm_fit(X, y, {1, 0.5, 40, Loss::kPinball, 0.9});
  const GbmModel lo = gbm_fit(X, y, {1, 0.5, 40, Loss::kPinball, 0.1});
  Eigen::MatrixXd probe(2, 1);
  probe << 0, 1;
  const auto ph = gbm_predict(hi, probe);
  const auto pl = gbm_predict(lo, probe);
  EXPECT_NEAR(ph[0], 1.2816, 0.15);
  EXPECT_NEAR(ph[1], 4.2816, 0.15);
  EXPECT_NEAR(pl[1], 3.0 - 1.2816, 0.15);
}

TEST(Grid, FullGridHasThirtyCells) {
  const Fixture f = smooth(100, 6);
  GridSearchConfig cfg;
  cfg.n_trees = 5;
  const GridSearchResult r = cv_grid_search(f.X, f.y, cfg);
  EXPECT_EQ(r.cells.size(), 30u);
  for (const auto& c : r.cells) EXPECT_EQ(c.fold_loss.size(), 10u);
}

TEST(Grid, SingleCellIsReturned) {
  const Fixture f = smooth(40, 7);
  GridSearchConfig cfg;
  cfg.depth_grid = {5};
  cfg.lr_grid = {0.41};
  cfg.n_trees = 5;
  const GridSearchResult r = cv_grid_search(f.X, f.y, cfg);
  EXPECT_EQ(r.best_depth, 5);
  EXPECT_EQ(r.best_learning_rate, 0.41);
}

TEST(Grid, StumpTargetPrefersShallowTrees) {
  int shallow = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    Eigen::MatrixXd X(1000, 5);
    std::vector<double> y;
    for (int i = 0; i < 1000; ++i) {
      for (int j = 0; j < 5; ++j) X(i, j) = nd(rng);
      y.push_back((X(i, 0) > 0.0 ? 1.0 : -1.0) + nd(rng));
    }
    GridSearchConfig cfg;
    cfg.depth_grid = {1, 3, 9};
    cfg.lr_grid = {0.21};
    cfg.n_trees = 30;
    const auto r = cv_grid_search(X, y, cfg);
    shallow += r.best_depth <= 3;
  }
  EXPECT_EQ(shallow, 5);
}

TEST(Grid, ConstantFoldIsHandled) {
  Eigen::MatrixXd X = Eigen::MatrixXd::Zero(20, 1);
  std::vector<double> y(20, 1.0);
  GridSearchConfig cfg;
  cfg.folds = 4;
  cfg.n_trees = 3;
  const auto r = cv_grid_search(X, y, cfg);
  for (const auto& c : r.cells) EXPECT_EQ(c.mean_loss, 0.0);
  EXPECT_EQ(r.best_depth, 1);
  EXPECT_EQ(r.best_learning_rate, 0.01);
}

TEST(Grid, TooFewSamplesThrows) {
  Eigen::MatrixXd X = Eigen::MatrixXd::Zero(5, 1);
  EXPECT_THROW(cv_grid_search(X, std::vector<double>(5, 0.0), GridSearchConfig{}), Error);
}

TEST(Serialization, RoundTripPredictsIdentically) {
  const Fixture f = smooth(50, 8);
  const GbmModel m = gbm_fit(f.X, f.y, {3, 0.2, 10, Loss::kPinball, 0.3});
  const GbmModel r = model_from_json(model_to_json(m));
  EXPECT_EQ(gbm_predict(m, f.X), gbm_predict(r, f.X));
}

}  // namespace
}  // namespace spreadcast::gbm
