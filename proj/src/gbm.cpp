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

#include "spreadcast/gbm.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "spreadcast/csv.hpp"
#include "spreadcast/error.hpp"
#include "spreadcast/parallel.hpp"
#include "spreadcast/term_structure.hpp"

namespace spreadcast::gbm {
namespace {

struct NodeStats {
  double sum = 0.0;
  double sum_sq = 0.0;
  int count = 0;
};

struct SplitSearch {
  // Running left-side stats while scanning one feature.
  double left_sum = 0.0;
  int left_count = 0;
  double last_value = 0.0;
  // Best split found so far.
  double best_gain = 0.0;
  int best_feature = -1;
  double best_threshold = 0.0;
};

double split_threshold(double a, double b) {
  const double mid = a + (b - a) / 2.0;
  return mid < b ? mid : a;
}

double mean_loss(const std::vector<double>& y, const std::vector<double>& f, Loss loss, double q) {
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    s += loss == Loss::kSquared ? (y[i] - f[i]) * (y[i] - f[i]) : pinball(y[i], f[i], q);
  }
  return s / static_cast<double>(y.size());
}

double quantile_of(std::vector<double> v, double q) {
  return term_structure::quantile_linear(v, q);
}

}  // namespace

double Tree::predict(const double* row, Eigen::Index stride) const {
  int k = 0;
  while (!nodes[static_cast<std::size_t>(k)].is_leaf()) {
    const TreeNode& n = nodes[static_cast<std::size_t>(k)];
    k = row[n.feature * stride] <= n.threshold ? n.left : n.right;
  }
  return nodes[static_cast<std::size_t>(k)].value;
}

int Tree::depth() const {
  std::vector<int> d(nodes.size(), 0);
  int best = 0;
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    best = std::max(best, d[k]);
    if (!nodes[k].is_leaf()) {
      d[static_cast<std::size_t>(nodes[k].left)] = d[k] + 1;
      d[static_cast<std::size_t>(nodes[k].right)] = d[k] + 1;
    }
  }
  return best;
}

SortedColumns::SortedColumns(const Eigen::MatrixXd& X) {
  order.resize(static_cast<std::size_t>(X.cols()));
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    auto& o = order[static_cast<std::size_t>(j)];
    o.resize(static_cast<std::size_t>(X.rows()));
    std::iota(o.begin(), o.end(), 0);
    std::stable_sort(o.begin(), o.end(), [&](int a, int b) { return X(a, j) < X(b, j); });
  }
}

Tree fit_regression_tree(const Eigen::MatrixXd& X, const std::vector<double>& targets, int max_depth) {
  return fit_regression_tree(X, SortedColumns(X), targets, max_depth);
}

Tree fit_regression_tree(const Eigen::MatrixXd& X, const SortedColumns& sorted,
                         const std::vector<double>& targets, int max_depth,
                         std::vector<int>* leaf_of_sample) {
  const std::size_t n = targets.size();
  if (n == 0) throw Error(ErrorKind::kParameter, "regression tree needs at least one sample");
  if (static_cast<std::size_t>(X.rows()) != n) throw Error(ErrorKind::kAlignment, "X rows do not match targets");
  if (max_depth < 0) throw Error(ErrorKind::kParameter, "max_depth must be non-negative");

  Tree tree;
  tree.nodes.emplace_back();
  std::vector<int> node_of(n, 0);
  std::vector<int> frontier{0};
  for (int level = 0; level <= max_depth && !frontier.empty(); ++level) {
    std::vector<NodeStats> stats(tree.nodes.size());
    for (std::size_t i = 0; i < n; ++i) {
      NodeStats& s = stats[static_cast<std::size_t>(node_of[i])];
      s.sum += targets[i];
      s.sum_sq += targets[i] * targets[i];
      ++s.count;
    }
    for (int k : frontier) {
      const NodeStats& s = stats[static_cast<std::size_t>(k)];
      tree.nodes[static_cast<std::size_t>(k)].value = s.sum / s.count;
    }
    if (level == max_depth) break;

    std::vector<SplitSearch> search(tree.nodes.size());
    std::vector<char> open(tree.nodes.size(), 0);
    for (int k : frontier) {
      const NodeStats& s = stats[static_cast<std::size_t>(k)];
      const double sse = s.sum_sq - s.sum * s.sum / s.count;
      if (s.count >= 2 && sse > 1e-12 * (1.0 + s.sum_sq)) open[static_cast<std::size_t>(k)] = 1;
    }
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
      for (int k : frontier) {
        search[static_cast<std::size_t>(k)].left_sum = 0.0;
        search[static_cast<std::size_t>(k)].left_count = 0;
      }
      for (int i : sorted.order[static_cast<std::size_t>(j)]) {
        const int k = node_of[static_cast<std::size_t>(i)];
        if (!open[static_cast<std::size_t>(k)]) continue;
        SplitSearch& sp = search[static_cast<std::size_t>(k)];
        const double x = X(i, j);
        if (sp.left_count > 0 && x != sp.last_value) {
          const NodeStats& s = stats[static_cast<std::size_t>(k)];
          const double right_sum = s.sum - sp.left_sum;
          const int right_count = s.count - sp.left_count;
          const double gain = sp.left_sum * sp.left_sum / sp.left_count +
                              right_sum * right_sum / right_count - s.sum * s.sum / s.count;
          if (gain > sp.best_gain) {
            sp.best_gain = gain;
            sp.best_feature = static_cast<int>(j);
            sp.best_threshold = split_threshold(sp.last_value, x);
          }
        }
        sp.left_sum += targets[static_cast<std::size_t>(i)];
        ++sp.left_count;
        sp.last_value = x;
      }
    }

    std::vector<int> next;
    for (int k : frontier) {
      const SplitSearch& sp = search[static_cast<std::size_t>(k)];
      const NodeStats& s = stats[static_cast<std::size_t>(k)];
      if (sp.best_feature < 0 || sp.best_gain <= 1e-12 * (1.0 + s.sum_sq)) continue;
      const int left = static_cast<int>(tree.nodes.size());
      tree.nodes.emplace_back();
      tree.nodes.emplace_back();
      TreeNode& node = tree.nodes[static_cast<std::size_t>(k)];
      node.feature = sp.best_feature;
      node.threshold = sp.best_threshold;
      node.left = left;
      node.right = left + 1;
      next.push_back(left);
      next.push_back(left + 1);
    }
    for (std::size_t i = 0; i < n; ++i) {
      const TreeNode& node = tree.nodes[static_cast<std::size_t>(node_of[i])];
      if (!node.is_leaf()) {
        node_of[i] = X(static_cast<Eigen::Index>(i), node.feature) <= node.threshold ? node.left : node.right;
      }
    }
    frontier = std::move(next);
  }
  if (leaf_of_sample) *leaf_of_sample = std::move(node_of);
  return tree;
}

void BoostParams::validate() const {
  if (max_depth < 0) throw Error(ErrorKind::kParameter, "max_depth must be non-negative");
  if (!(learning_rate > 0.0)) throw Error(ErrorKind::kParameter, "learning_rate must be positive");
  if (n_trees < 0) throw Error(ErrorKind::kParameter, "n_trees must be non-negative");
  if (loss == Loss::kPinball && !(quantile > 0.0 && quantile < 1.0)) {
    throw Error(ErrorKind::kParameter, "quantile must lie in (0, 1)");
  }
}

double pinball(double y, double prediction, double q) {
  const double z = y - prediction;
  return (q - (z < 0.0 ? 1.0 : 0.0)) * z;
}

double GbmModel::predict_row(const double* row, Eigen::Index stride) const {
  double f = init_value;
  for (const Tree& t : trees) f += learning_rate * t.predict(row, stride);
  return f;
}

GbmModel gbm_fit(const Eigen::MatrixXd& X, const std::vector<double>& y, const BoostParams& params,
                 std::vector<double>* loss_trace) {
  params.validate();
  const std::size_t n = y.size();
  if (n == 0) throw Error(ErrorKind::kParameter, "gbm_fit needs at least one sample");
  if (static_cast<std::size_t>(X.rows()) != n) throw Error(ErrorKind::kAlignment, "X rows do not match y");
  if (!X.allFinite()) throw Error(ErrorKind::kDomain, "gbm features contain non-finite values");

  GbmModel model;
  model.learning_rate = params.learning_rate;
  model.n_trees = params.n_trees;
  model.loss = params.loss;
  model.quantile = params.quantile;
  model.init_value = params.loss == Loss::kSquared
                         ? std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n)
                         : quantile_of(y, params.quantile);

  const SortedColumns sorted(X);
  std::vector<double> f(n, model.init_value), residual(n);
  if (loss_trace) loss_trace->assign(1, mean_loss(y, f, params.loss, params.quantile));
  std::vector<int> leaf_of;
  for (int m = 0; m < params.n_trees; ++m) {
    for (std::size_t i = 0; i < n; ++i) {
      residual[i] = params.loss == Loss::kSquared ? y[i] - f[i] : (y[i] < f[i] ? params.quantile - 1.0 : params.quantile);
    }
    Tree tree = fit_regression_tree(X, sorted, residual, params.max_depth, &leaf_of);
    if (params.loss == Loss::kPinball) {
      // Leaves move to the quantile of the raw residuals they hold.
      std::vector<std::vector<double>> by_leaf(tree.nodes.size());
      for (std::size_t i = 0; i < n; ++i) by_leaf[static_cast<std::size_t>(leaf_of[i])].push_back(y[i] - f[i]);
      for (std::size_t k = 0; k < tree.nodes.size(); ++k) {
        if (tree.nodes[k].is_leaf() && !by_leaf[k].empty()) {
          tree.nodes[k].value = quantile_of(std::move(by_leaf[k]), params.quantile);
        }
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      f[i] += params.learning_rate * tree.nodes[static_cast<std::size_t>(leaf_of[i])].value;
    }
    model.trees.push_back(std::move(tree));
    if (loss_trace) loss_trace->push_back(mean_loss(y, f, params.loss, params.quantile));
  }
  return model;
}

std::vector<double> gbm_predict(const GbmModel& model, const Eigen::MatrixXd& X) {
  std::vector<double> out(static_cast<std::size_t>(X.rows()));
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    out[static_cast<std::size_t>(i)] = model.predict_row(X.data() + i, X.rows());
  }
  return out;
}

void GridSearchConfig::validate() const {
  if (depth_grid.empty() || lr_grid.empty()) throw Error(ErrorKind::kParameter, "grid must be non-empty");
  if (folds < 2) throw Error(ErrorKind::kParameter, "cross-validation needs at least 2 folds");
  if (n_trees < 0) throw Error(ErrorKind::kParameter, "n_trees must be non-negative");
}

GridSearchResult cv_grid_search(const Eigen::MatrixXd& X, const std::vector<double>& y,
                                const GridSearchConfig& cfg) {
  cfg.validate();
  const std::size_t n = y.size();
  const std::size_t folds = static_cast<std::size_t>(cfg.folds);
  if (n < folds) throw Error(ErrorKind::kParameter, "fewer samples than folds");
  if (static_cast<std::size_t>(X.rows()) != n) throw Error(ErrorKind::kAlignment, "X rows do not match y");

  // Fold k covers rows [bounds[k], bounds[k+1]).
  std::vector<std::size_t> bounds(folds + 1);
  for (std::size_t k = 0; k <= folds; ++k) bounds[k] = k * n / folds;

  struct FoldData {
    Eigen::MatrixXd X_train, X_valid;
    std::vector<double> y_train, y_valid;
  };
  std::vector<FoldData> data(folds);
  for (std::size_t k = 0; k < folds; ++k) {
    const auto b = static_cast<Eigen::Index>(bounds[k]);
    const auto e = static_cast<Eigen::Index>(bounds[k + 1]);
    FoldData& d = data[k];
    d.X_valid = X.middleRows(b, e - b);
    d.X_train.resize(static_cast<Eigen::Index>(n) - (e - b), X.cols());
    d.X_train << X.topRows(b), X.bottomRows(static_cast<Eigen::Index>(n) - e);
    d.y_valid.assign(y.begin() + b, y.begin() + e);
    d.y_train.assign(y.begin(), y.begin() + b);
    d.y_train.insert(d.y_train.end(), y.begin() + e, y.end());
  }

  GridSearchResult result;
  for (int depth : cfg.depth_grid) {
    for (double lr : cfg.lr_grid) {
      GridCell c;
      c.depth = depth;
      c.learning_rate = lr;
      c.fold_loss.assign(folds, 0.0);
      result.cells.push_back(c);
    }
  }
  const std::size_t jobs = result.cells.size() * folds;
  parallel_for(
      jobs,
      [&](std::size_t job) {
        GridCell& c = result.cells[job / folds];
        const FoldData& d = data[job % folds];
        BoostParams p{c.depth, c.learning_rate, cfg.n_trees, cfg.loss, cfg.quantile};
        const GbmModel m = gbm_fit(d.X_train, d.y_train, p);
        c.fold_loss[job % folds] = mean_loss(d.y_valid, gbm_predict(m, d.X_valid), cfg.loss, cfg.quantile);
      },
      cfg.threads == 0 ? default_threads() : cfg.threads);

  const GridCell* best = nullptr;
  for (GridCell& c : result.cells) {
    c.mean_loss = std::accumulate(c.fold_loss.begin(), c.fold_loss.end(), 0.0) / static_cast<double>(folds);
    if (!best || c.mean_loss < best->mean_loss ||
        (c.mean_loss == best->mean_loss &&
         (c.depth < best->depth || (c.depth == best->depth && c.learning_rate < best->learning_rate)))) {
      best = &c;
    }
  }
  result.best_depth = best->depth;
  result.best_learning_rate = best->learning_rate;
  return result;
}

std::string model_to_json(const GbmModel& model) {
  nlohmann::json j;
  j["format"] = "spreadcast-gbm-v1";
  j["init_value"] = model.init_value;
  j["learning_rate"] = model.learning_rate;
  j["n_trees"] = model.n_trees;
  j["loss"] = model.loss == Loss::kSquared ? "squared" : "pinball";
  j["quantile"] = model.quantile;
  nlohmann::json trees = nlohmann::json::array();
  for (const Tree& t : model.trees) {
    nlohmann::json nodes = nlohmann::json::array();
    for (const TreeNode& n : t.nodes) {
      if (n.is_leaf()) {
        nodes.push_back({{"value", n.value}});
      } else {
        nodes.push_back({{"feature", n.feature}, {"threshold", n.threshold}, {"left", n.left}, {"right", n.right}});
      }
    }
    trees.push_back(nodes);
  }
  j["trees"] = trees;
  return j.dump(1);
}

GbmModel model_from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    if (j.at("format") != "spreadcast-gbm-v1") throw Error(ErrorKind::kSchema, "unknown gbm model format");
    GbmModel m;
    m.init_value = j.at("init_value");
    m.learning_rate = j.at("learning_rate");
    m.n_trees = j.at("n_trees");
    m.loss = j.at("loss") == "squared" ? Loss::kSquared : Loss::kPinball;
    m.quantile = j.at("quantile");
    for (const auto& jt : j.at("trees")) {
      Tree t;
      for (const auto& jn : jt) {
        TreeNode n;
        if (jn.contains("value")) {
          n.value = jn.at("value");
        } else {
          n.feature = jn.at("feature");
          n.threshold = jn.at("threshold");
          n.left = jn.at("left");
          n.right = jn.at("right");
        }
        t.nodes.push_back(n);
      }
      const int size = static_cast<int>(t.nodes.size());
      for (const TreeNode& n : t.nodes) {
        if (!n.is_leaf() && (n.left <= 0 || n.right <= 0 || n.left >= size || n.right >= size)) {
          throw Error(ErrorKind::kSchema, "gbm tree child index out of range");
        }
      }
      m.trees.push_back(std::move(t));
    }
    if (static_cast<int>(m.trees.size()) != m.n_trees) throw Error(ErrorKind::kSchema, "gbm tree count mismatch");
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kSchema, std::string("malformed gbm model: ") + e.what());
  }
}

void write_cv_table(const std::filesystem::path& path, const GridSearchResult& result) {
  std::string text = "depth,learning_rate,mean_loss";
  const std::size_t folds = result.cells.empty() ? 0 : result.cells.front().fold_loss.size();
  for (std::size_t k = 0; k < folds; ++k) text += ",fold_" + std::to_string(k + 1);
  text += "\n";
  for (const GridCell& c : result.cells) {
    text += std::to_string(c.depth) + "," + csv::format_double(c.learning_rate) + "," + csv::format_double(c.mean_loss);
    for (double v : c.fold_loss) text += "," + csv::format_double(v);
    text += "\n";
  }
  csv::write_file(path, text);
}

}  // namespace spreadcast::gbm
