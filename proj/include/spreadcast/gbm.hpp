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

// Gradient-boosted regression trees (CART least-squares splits) with a
// contiguous-fold cross-validated grid search over depth and learning rate.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace spreadcast::gbm {

// Split nodes send x[feature] <= threshold left. Leaves have feature == -1.
struct TreeNode {
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;

  bool is_leaf() const { return feature < 0; }
};

struct Tree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  double predict(const double* row, Eigen::Index stride = 1) const;
  int depth() const;
};

// Column orderings of X computed once per fit; reused by every tree.
struct SortedColumns {
  std::vector<std::vector<int>> order;

  explicit SortedColumns(const Eigen::MatrixXd& X);
};

// Greedy variance-reduction tree on `targets`. Leaves hold the mean target
// unless `leaf_values` re-estimates them afterwards.
Tree fit_regression_tree(const Eigen::MatrixXd& X, const std::vector<double>& targets, int max_depth);
Tree fit_regression_tree(const Eigen::MatrixXd& X, const SortedColumns& sorted,
                         const std::vector<double>& targets, int max_depth,
                         std::vector<int>* leaf_of_sample = nullptr);

enum class Loss { kSquared, kPinball };

struct BoostParams {
  int max_depth = 3;
  double learning_rate = 0.1;
  int n_trees = 100;
  Loss loss = Loss::kSquared;
  double quantile = 0.5;  // pinball only

  void validate() const;
};

struct GbmModel {
  double init_value = 0.0;
  std::vector<Tree> trees;
  double learning_rate = 0.1;
  int n_trees = 0;
  Loss loss = Loss::kSquared;
  double quantile = 0.5;

  double predict_row(const double* row, Eigen::Index stride = 1) const;
};

// `loss_trace[k]` is the training loss after k trees (k = 0 is the
// initial constant), so it has n_trees + 1 entries.
GbmModel gbm_fit(const Eigen::MatrixXd& X, const std::vector<double>& y, const BoostParams& params,
                 std::vector<double>* loss_trace = nullptr);
std::vector<double> gbm_predict(const GbmModel& model, const Eigen::MatrixXd& X);

double pinball(double y, double prediction, double q);

struct GridSearchConfig {
  std::vector<int> depth_grid{1, 3, 5, 7, 9};
  std::vector<double> lr_grid{0.01, 0.21, 0.41, 0.61, 0.81, 0.99};
  int folds = 10;
  int n_trees = 100;
  Loss loss = Loss::kSquared;
  double quantile = 0.5;
  std::size_t threads = 0;

  void validate() const;
};

struct GridCell {
  int depth = 0;
  double learning_rate = 0.0;
  double mean_loss = 0.0;
  std::vector<double> fold_loss;
};

struct GridSearchResult {
  int best_depth = 0;
  double best_learning_rate = 0.0;
  std::vector<GridCell> cells;  // depth-major, grid order
};

// Fold k validates on the k-th contiguous block of rows and trains on the
// rest. Ties on mean validation loss go to the smaller depth, then lr.
GridSearchResult cv_grid_search(const Eigen::MatrixXd& X, const std::vector<double>& y,
                                const GridSearchConfig& cfg);

std::string model_to_json(const GbmModel& model);
GbmModel model_from_json(const std::string& text);
void write_cv_table(const std::filesystem::path& path, const GridSearchResult& result);

}  // namespace spreadcast::gbm
