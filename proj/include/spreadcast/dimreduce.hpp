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

#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace spreadcast::dimreduce {

// Zero-mean, unit-variance columns (population sd). Constant columns are
// centred only.
Eigen::MatrixXd standardize_columns(const Eigen::MatrixXd& data);

// Euclidean distances between the rows of `points`.
Eigen::MatrixXd distance_matrix(const Eigen::MatrixXd& points);

enum class Linkage { kWard, kSingle, kComplete, kAverage };

Linkage parse_linkage(std::string_view name);

// Full agglomeration history; cut() yields a flat clustering at any k.
class Dendrogram {
 public:
  struct Merge {
    std::size_t left;   // cluster ids: < n are points, n + i is merge i
    std::size_t right;
    double height;
  };

  Dendrogram(std::size_t n_points, std::vector<Merge> merges)
      : n_points_(n_points), merges_(std::move(merges)) {}

  std::size_t n_points() const { return n_points_; }
  const std::vector<Merge>& merges() const { return merges_; }

  // Cluster ids are 0..k-1, numbered by the smallest point index they contain.
  std::vector<int> cut(std::size_t k) const;

 private:
  std::size_t n_points_;
  std::vector<Merge> merges_;
};

// Rows of `points` are the objects being clustered.
Dendrogram agglomerate(const Eigen::MatrixXd& points, Linkage linkage = Linkage::kWard);

std::vector<int> hierarchical_cluster(const Eigen::MatrixXd& points, std::size_t k,
                                      Linkage linkage = Linkage::kWard);

struct Silhouette {
  std::vector<double> widths;
  double average = 0.0;
};

Silhouette silhouette_width(std::span<const int> assignments, const Eigen::MatrixXd& distances);

struct ClusterModel {
  std::size_t k = 0;
  std::vector<int> assignments;
  double silhouette_avg = 0.0;
  std::vector<std::string> retained;
  std::vector<std::pair<std::size_t, double>> silhouette_by_k;
};

// Fits every k in [k_min, k_max] and keeps the highest average silhouette;
// ties go to the smaller k.
ClusterModel select_k(const Eigen::MatrixXd& points, std::span<const std::string> keys,
                      std::size_t k_min, std::size_t k_max, Linkage linkage = Linkage::kWard);

// Per cluster, the member closest to the cluster mean (ties: smallest key).
std::vector<std::string> retain_medoid_features(std::span<const int> assignments, std::size_t k,
                                                const Eigen::MatrixXd& points,
                                                std::span<const std::string> keys);

struct PcaModel {
  Eigen::VectorXd mean;
  Eigen::VectorXd scale;          // 1 when not standardizing
  Eigen::MatrixXd components;     // n_components x n_features, orthonormal rows
  Eigen::VectorXd explained_variance;
  std::size_t n_components = 3;
  double total_variance = 0.0;
  std::vector<std::string> warnings;
};

PcaModel pca_fit(const Eigen::MatrixXd& data, std::size_t n_components = 3, bool standardize = true);
Eigen::MatrixXd pca_transform(const PcaModel& model, const Eigen::MatrixXd& data);
Eigen::MatrixXd pca_inverse_transform(const PcaModel& model, const Eigen::MatrixXd& scores);

std::string cluster_model_to_json(const ClusterModel& model, std::span<const std::string> keys);
std::string pca_model_to_json(const PcaModel& model, std::span<const std::string> keys);

}  // namespace spreadcast::dimreduce
