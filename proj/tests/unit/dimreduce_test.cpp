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
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "spreadcast/dimreduce.hpp"
#include "spreadcast/error.hpp"

namespace spreadcast::dimreduce {
namespace {

// n points per blob around well-separated centres in `dim` dimensions.
Eigen::MatrixXd blobs(std::size_t n_blobs, int per_blob, int dim, double spread, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, spread);
  Eigen::MatrixXd pts(static_cast<Eigen::Index>(n_blobs) * per_blob, dim);
  for (std::size_t b = 0; b < n_blobs; ++b) {
    for (int i = 0; i < per_blob; ++i) {
      const auto r = static_cast<Eigen::Index>(b) * per_blob + i;
      for (int d = 0; d < dim; ++d) pts(r, d) = (d == static_cast<int>(b % dim) ? 10.0 * (1 + b / dim) : 0.0) + nd(rng);
    }
  }
  return pts;
}

std::vector<std::string> keys_for(Eigen::Index n) {
  std::vector<std::string> k;
  for (Eigen::Index i = 0; i < n; ++i) k.push_back("f" + std::to_string(100 + i));
  return k;
}

TEST(Cluster, TwoBlobsRecovered) {
  const Eigen::MatrixXd pts = blobs(2, 8, 3, 0.3, 1);
  const auto a = hierarchical_cluster(pts, 2);
  for (int i = 0; i < 8; ++i) EXPECT_EQ(a[static_cast<std::size_t>(i)], 0);
  for (int i = 8; i < 16; ++i) EXPECT_EQ(a[static_cast<std::size_t>(i)], 1);
}

TEST(Cluster, KEqualsNGivesSingletons) {
  const Eigen::MatrixXd pts = blobs(2, 3, 2, 1.0, 2);
  const auto a = hierarchical_cluster(pts, 6);
  EXPECT_EQ(std::set<int>(a.begin(), a.end()).size(), 6u);
}

TEST(Cluster, DuplicatesShareCluster) {
  Eigen::MatrixXd pts(4, 2);
  pts << 0, 0, 5, 1, 5, 1, -3, 7;
  for (Linkage l : {Linkage::kWard, Linkage::kSingle, Linkage::kComplete, Linkage::kAverage}) {
    const auto a = hierarchical_cluster(pts, 3, l);
    EXPECT_EQ(a[1], a[2]);
    EXPECT_EQ(std::set<int>(a.begin(), a.end()).size(), 3u);
  }
}

TEST(Cluster, KOutOfRangeThrows) {
  const Eigen::MatrixXd pts = blobs(2, 2, 2, 1.0, 3);
  EXPECT_THROW(hierarchical_cluster(pts, 1), Error);
  EXPECT_THROW(hierarchical_cluster(pts, 5), Error);
}

TEST(Cluster, WardHeightsNonDecreasing) {
  const Dendrogram d = agglomerate(blobs(4, 6, 3, 1.5, 4));
  for (std::size_t i = 1; i < d.merges().size(); ++i) {
    EXPECT_GE(d.merges()[i].height, d.merges()[i - 1].height - 1e-12);
  }
  EXPECT_EQ(d.merges().size(), 23u);
}

TEST(Silhouette, TwoTightFarClusters) {
  // Two pairs, intra-distance 0.1, inter-distance 10.
  Eigen::MatrixXd dist(4, 4);
  dist << 0, 0.1, 10, 10, 0.1, 0, 10, 10, 10, 10, 0, 0.1, 10, 10, 0.1, 0;
  const Silhouette s = silhouette_width(std::vector<int>{0, 0, 1, 1}, dist);
  EXPECT_NEAR(s.average, 0.99, 1e-12);
}

TEST(Silhouette, EquidistantPointIsZeroAndSingletonIsZero) {
  Eigen::MatrixXd pts(3, 1);
  pts << 0, 1, 2;
  const Eigen::MatrixXd dist = distance_matrix(pts);
  const Silhouette s = silhouette_width(std::vector<int>{0, 0, 1}, dist);
  EXPECT_NEAR(s.widths[1], 0.0, 1e-15);
  EXPECT_EQ(s.widths[2], 0.0);
}

TEST(Silhouette, SingleClusterUndefined) {
  try {
    silhouette_width(std::vector<int>{0, 0, 0}, Eigen::MatrixXd::Ones(3, 3));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kUndefined);
  }
}

TEST(Silhouette, RangeAndAverageOnRandomData) {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> nd;
  for (int rep = 0; rep < 20; ++rep) {
    Eigen::MatrixXd pts(25, 4);
    for (Eigen::Index i = 0; i < pts.size(); ++i) pts.data()[i] = nd(rng);
    std::vector<int> a(25);
    for (int i = 0; i < 25; ++i) a[static_cast<std::size_t>(i)] = static_cast<int>(rng() % 4);
    a[0] = 0, a[1] = 1;
    const Silhouette s = silhouette_width(a, distance_matrix(pts));
    double sum = 0;
    for (double w : s.widths) {
      EXPECT_GE(w, -1.0);
      EXPECT_LE(w, 1.0);
      sum += w;
    }
    EXPECT_NEAR(s.average, sum / 25.0, 1e-14);
  }
}

TEST(SelectK, ThreeBlobsGiveThree) {
  const Eigen::MatrixXd pts = blobs(3, 7, 3, 0.5, 7);
  const ClusterModel m = select_k(pts, keys_for(pts.rows()), 2, 10);
  EXPECT_EQ(m.k, 3u);
  EXPECT_EQ(m.retained.size(), 3u);
  EXPECT_EQ(m.silhouette_by_k.size(), 9u);
  EXPECT_GE(m.silhouette_avg, -1.0);
  EXPECT_LE(m.silhouette_avg, 1.0);
}

TEST(SelectK, SingletonRangeAndDeterminism) {
  const Eigen::MatrixXd pts = blobs(3, 5, 2, 2.0, 8);
  const auto keys = keys_for(pts.rows());
  EXPECT_EQ(select_k(pts, keys, 2, 2).k, 2u);
  const ClusterModel a = select_k(pts, keys, 2, 8);
  const ClusterModel b = select_k(pts, keys, 2, 8);
  EXPECT_EQ(a.assignments, b.assignments);
  EXPECT_EQ(a.retained, b.retained);
  EXPECT_EQ(cluster_model_to_json(a, keys), cluster_model_to_json(b, keys));
  EXPECT_THROW(select_k(pts, keys, 2, 40), Error);
}

TEST(Medoid, NearestToMeanNeverFarPoint) {
  Eigen::MatrixXd pts(4, 2);
  pts << 0, 0, 0.01, 0, 9, 9, 50, 50;
  const std::vector<std::string> keys = {"x", "x_eps", "far", "alone"};
  const auto kept = retain_medoid_features(std::vector<int>{0, 0, 0, 1}, 2, pts, keys);
  ASSERT_EQ(kept.size(), 2u);
  EXPECT_TRUE(kept[0] == "x" || kept[0] == "x_eps");
  EXPECT_EQ(kept[1], "alone");
}

TEST(Medoid, TiesGoToSmallestKey) {
  Eigen::MatrixXd pts(2, 1);
  pts << -1, 1;
  EXPECT_EQ(retain_medoid_features(std::vector<int>{0, 0}, 1, pts, std::vector<std::string>{"b", "a"})[0], "a");
}

TEST(Standardize, ZeroMeanUnitSd) {
  std::mt19937_64 rng(10);
  std::normal_distribution<double> nd(5.0, 3.0);
  Eigen::MatrixXd x(60, 3);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = nd(rng);
  x.col(2).setConstant(4.0);
  const Eigen::MatrixXd z = standardize_columns(x);
  for (int j = 0; j < 2; ++j) {
    EXPECT_NEAR(z.col(j).mean(), 0.0, 1e-12);
    EXPECT_NEAR(std::sqrt(z.col(j).squaredNorm() / 60.0), 1.0, 1e-12);
  }
  EXPECT_EQ(z.col(2).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Pca, LineDataHasOneComponent) {
  Eigen::MatrixXd x(10, 2);
  for (int i = 0; i < 10; ++i) x(i, 0) = x(i, 1) = i - 3.0;
  const PcaModel m = pca_fit(x, 1, false);
  EXPECT_NEAR(std::abs(m.components(0, 0)), 1.0 / std::sqrt(2.0), 1e-12);
  EXPECT_NEAR(m.components(0, 0), m.components(0, 1), 1e-12);
  EXPECT_NEAR(m.explained_variance(0) / m.total_variance, 1.0, 1e-12);
}

TEST(Pca, IsotropicSampleHasNearEqualVariances) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> nd;
  Eigen::MatrixXd x(20000, 2);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = nd(rng);
  const PcaModel m = pca_fit(x, 2, false);
  // Sampling error of each eigenvalue is about sqrt(2/n) ~ 0.01.
  EXPECT_NEAR(m.explained_variance(0) / m.explained_variance(1), 1.0, 0.06);
}

TEST(Pca, PropertiesOnCorrelatedData) {
  std::mt19937_64 rng(12);
  std::normal_distribution<double> nd;
  Eigen::MatrixXd x(300, 7);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = nd(rng);
  x.col(1) += 2 * x.col(0);
  x.col(4) = 0.5 * x.col(3) + 0.1 * x.col(4);
  const PcaModel m = pca_fit(x, 3, true);
  const Eigen::MatrixXd gram = m.components * m.components.transpose();
  EXPECT_LT((gram - Eigen::MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff(), 1e-8);
  for (Eigen::Index i = 1; i < m.explained_variance.size(); ++i) {
    EXPECT_LE(m.explained_variance(i), m.explained_variance(i - 1));
    EXPECT_GE(m.explained_variance(i), 0.0);
  }
  const Eigen::MatrixXd s = pca_transform(m, x);
  const Eigen::RowVectorXd mean = s.colwise().mean();
  EXPECT_LT(mean.cwiseAbs().maxCoeff(), 1e-10);
  const Eigen::MatrixXd cov = (s.rowwise() - mean).transpose() * (s.rowwise() - mean) / 300.0;
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b)
      if (a != b) EXPECT_LT(std::abs(cov(a, b)), 1e-8);
}

TEST(Pca, FullReconstruction) {
  std::mt19937_64 rng(13);
  std::normal_distribution<double> nd;
  Eigen::MatrixXd x(40, 4);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = 3 + 2 * nd(rng);
  const PcaModel m = pca_fit(x, 4, true);
  EXPECT_LT((pca_inverse_transform(m, pca_transform(m, x)) - x).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Pca, TooManyComponentsTruncatesWithWarning) {
  Eigen::MatrixXd x(10, 3);
  for (int i = 0; i < 10; ++i) x.row(i) << i, 2 * i, -i;
  const PcaModel m = pca_fit(x, 3, false);
  EXPECT_LT(m.n_components, 3u);
  EXPECT_FALSE(m.warnings.empty());
}

}  // namespace
}  // namespace spreadcast::dimreduce
