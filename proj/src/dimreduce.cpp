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

#include "spreadcast/dimreduce.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include <json.hpp>

#include "spreadcast/error.hpp"
#include "spreadcast/kernels.hpp"

namespace spreadcast::dimreduce {
namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Eigen::MatrixXd squared_distances(const Eigen::MatrixXd& points) {
  const RowMatrix rows = points;
  const auto n = rows.rows();
  const auto dim = static_cast<std::size_t>(rows.cols());
  const auto& k = kernels::active();
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double v = k.squared_distance(rows.row(i).data(), rows.row(j).data(), dim);
      d(i, j) = v;
      d(j, i) = v;
    }
  }
  return d;
}

std::vector<double> to_vector(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace

Eigen::MatrixXd standardize_columns(const Eigen::MatrixXd& data) {
  Eigen::MatrixXd out = data.rowwise() - data.colwise().mean();
  const auto n = static_cast<double>(data.rows());
  for (Eigen::Index j = 0; j < out.cols(); ++j) {
    const double sd = std::sqrt(out.col(j).squaredNorm() / n);
    if (sd > 0.0) out.col(j) /= sd;
  }
  return out;
}

Eigen::MatrixXd distance_matrix(const Eigen::MatrixXd& points) {
  return squared_distances(points).array().sqrt().matrix();
}

Linkage parse_linkage(std::string_view name) {
  if (name == "ward") return Linkage::kWard;
  if (name == "single") return Linkage::kSingle;
  if (name == "complete") return Linkage::kComplete;
  if (name == "average") return Linkage::kAverage;
  throw Error(ErrorKind::kParameter, "unknown linkage '" + std::string(name) + "'");
}

Dendrogram agglomerate(const Eigen::MatrixXd& points, Linkage linkage) {
  const auto n = static_cast<std::size_t>(points.rows());
  if (n == 0) return Dendrogram(0, {});
  // Ward's Lance-Williams recurrence is exact on squared distances.
  Eigen::MatrixXd d = squared_distances(points);
  if (linkage != Linkage::kWard) d = d.array().sqrt().matrix();

  std::vector<bool> active(n, true);
  std::vector<std::size_t> size(n, 1);
  std::vector<std::size_t> id(n);
  std::iota(id.begin(), id.end(), 0);
  std::vector<Dendrogram::Merge> merges;
  merges.reserve(n - 1);

  for (std::size_t step = 0; step + 1 < n; ++step) {
    std::size_t bi = 0, bj = 0;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
      if (!active[i]) continue;
      for (std::size_t j = i + 1; j < n; ++j) {
        if (!active[j]) continue;
        const double v = d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
        if (v < best) {
          best = v;
          bi = i;
          bj = j;
        }
      }
    }
    const double ni = static_cast<double>(size[bi]);
    const double nj = static_cast<double>(size[bj]);
    for (std::size_t k = 0; k < n; ++k) {
      if (!active[k] || k == bi || k == bj) continue;
      const auto K = static_cast<Eigen::Index>(k);
      const double dki = d(K, static_cast<Eigen::Index>(bi));
      const double dkj = d(K, static_cast<Eigen::Index>(bj));
      const double nk = static_cast<double>(size[k]);
      double v = 0.0;
      switch (linkage) {
        case Linkage::kWard:
          v = ((ni + nk) * dki + (nj + nk) * dkj - nk * best) / (ni + nj + nk);
          break;
        case Linkage::kSingle: v = std::min(dki, dkj); break;
        case Linkage::kComplete: v = std::max(dki, dkj); break;
        case Linkage::kAverage: v = (ni * dki + nj * dkj) / (ni + nj); break;
      }
      d(K, static_cast<Eigen::Index>(bi)) = v;
      d(static_cast<Eigen::Index>(bi), K) = v;
    }
    merges.push_back({id[bi], id[bj], linkage == Linkage::kWard ? std::sqrt(std::max(best, 0.0)) : best});
    active[bj] = false;
    size[bi] += size[bj];
    id[bi] = n + step;
  }
  return Dendrogram(n, std::move(merges));
}

std::vector<int> Dendrogram::cut(std::size_t k) const {
  if (k < 1 || k > n_points_) {
    throw Error(ErrorKind::kParameter, "cannot cut " + std::to_string(n_points_) + " points into " +
                                           std::to_string(k) + " clusters");
  }
  std::vector<std::size_t> parent(n_points_ + merges_.size());
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&parent](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  const std::size_t n_merges = n_points_ - k;
  for (std::size_t m = 0; m < n_merges; ++m) {
    parent[find(merges_[m].left)] = n_points_ + m;
    parent[find(merges_[m].right)] = n_points_ + m;
  }
  std::map<std::size_t, int> label;
  std::vector<int> out(n_points_);
  for (std::size_t i = 0; i < n_points_; ++i) {
    const std::size_t root = find(i);
    auto [it, inserted] = label.emplace(root, static_cast<int>(label.size()));
    out[i] = it->second;
  }
  return out;
}

std::vector<int> hierarchical_cluster(const Eigen::MatrixXd& points, std::size_t k, Linkage linkage) {
  const auto n = static_cast<std::size_t>(points.rows());
  if (k < 2 || k > n) {
    throw Error(ErrorKind::kParameter, "k must lie in [2, " + std::to_string(n) + "], got " + std::to_string(k));
  }
  return agglomerate(points, linkage).cut(k);
}

Silhouette silhouette_width(std::span<const int> assignments, const Eigen::MatrixXd& distances) {
  const std::size_t n = assignments.size();
  if (distances.rows() != static_cast<Eigen::Index>(n) || distances.cols() != static_cast<Eigen::Index>(n)) {
    throw Error(ErrorKind::kAlignment, "distance matrix does not match assignments");
  }
  int n_clusters = 0;
  for (int a : assignments) n_clusters = std::max(n_clusters, a + 1);
  std::vector<std::size_t> sizes(static_cast<std::size_t>(n_clusters), 0);
  for (int a : assignments) {
    if (a < 0) throw Error(ErrorKind::kParameter, "negative cluster id");
    ++sizes[static_cast<std::size_t>(a)];
  }
  const auto non_empty = std::count_if(sizes.begin(), sizes.end(), [](std::size_t s) { return s > 0; });
  if (non_empty < 2) throw Error(ErrorKind::kUndefined, "silhouette needs at least two clusters");

  Silhouette out;
  out.widths.resize(n, 0.0);
  std::vector<double> sum(static_cast<std::size_t>(n_clusters));
  for (std::size_t i = 0; i < n; ++i) {
    const auto own = static_cast<std::size_t>(assignments[i]);
    if (sizes[own] == 1) continue;
    std::fill(sum.begin(), sum.end(), 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) sum[static_cast<std::size_t>(assignments[j])] += distances(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    }
    const double a = sum[own] / static_cast<double>(sizes[own] - 1);
    double b = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < sizes.size(); ++c) {
      if (c != own && sizes[c] > 0) b = std::min(b, sum[c] / static_cast<double>(sizes[c]));
    }
    const double denom = std::max(a, b);
    out.widths[i] = denom > 0.0 ? (b - a) / denom : 0.0;
  }
  out.average = std::accumulate(out.widths.begin(), out.widths.end(), 0.0) / static_cast<double>(n);
  return out;
}

std::vector<std::string> retain_medoid_features(std::span<const int> assignments, std::size_t k,
                                                const Eigen::MatrixXd& points,
                                                std::span<const std::string> keys) {
  if (assignments.size() != static_cast<std::size_t>(points.rows()) || keys.size() != assignments.size()) {
    throw Error(ErrorKind::kAlignment, "assignments, points and keys must have equal length");
  }
  std::vector<std::string> out;
  for (std::size_t c = 0; c < k; ++c) {
    Eigen::RowVectorXd centroid = Eigen::RowVectorXd::Zero(points.cols());
    std::size_t count = 0;
    for (std::size_t i = 0; i < assignments.size(); ++i) {
      if (static_cast<std::size_t>(assignments[i]) == c) {
        centroid += points.row(static_cast<Eigen::Index>(i));
        ++count;
      }
    }
    if (count == 0) continue;
    centroid /= static_cast<double>(count);
    std::size_t best = assignments.size();
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < assignments.size(); ++i) {
      if (static_cast<std::size_t>(assignments[i]) != c) continue;
      const double d = (points.row(static_cast<Eigen::Index>(i)) - centroid).squaredNorm();
      if (d < best_d || (d == best_d && keys[i] < keys[best])) {
        best_d = d;
        best = i;
      }
    }
    out.push_back(keys[best]);
  }
  return out;
}

ClusterModel select_k(const Eigen::MatrixXd& points, std::span<const std::string> keys,
                      std::size_t k_min, std::size_t k_max, Linkage linkage) {
  const auto n = static_cast<std::size_t>(points.rows());
  if (k_min < 2 || k_max < k_min || k_max > n) {
    throw Error(ErrorKind::kParameter, "k range [" + std::to_string(k_min) + ", " + std::to_string(k_max) +
                                           "] invalid for " + std::to_string(n) + " features");
  }
  const Dendrogram tree = agglomerate(points, linkage);
  const Eigen::MatrixXd dist = distance_matrix(points);
  ClusterModel best;
  best.silhouette_avg = -std::numeric_limits<double>::infinity();
  std::vector<std::pair<std::size_t, double>> trace;
  for (std::size_t k = k_min; k <= k_max; ++k) {
    std::vector<int> assign = tree.cut(k);
    const double s = silhouette_width(assign, dist).average;
    trace.emplace_back(k, s);
    if (s > best.silhouette_avg) {
      best.k = k;
      best.silhouette_avg = s;
      best.assignments = std::move(assign);
    }
  }
  best.silhouette_by_k = std::move(trace);
  best.retained = retain_medoid_features(best.assignments, best.k, points, keys);
  return best;
}

PcaModel pca_fit(const Eigen::MatrixXd& data, std::size_t n_components, bool standardize) {
  if (data.rows() < 2) throw Error(ErrorKind::kParameter, "PCA needs at least 2 rows");
  if (n_components == 0) throw Error(ErrorKind::kParameter, "PCA needs at least one component");
  PcaModel model;
  model.mean = data.colwise().mean().transpose();
  Eigen::MatrixXd x = data.rowwise() - model.mean.transpose();
  model.scale = Eigen::VectorXd::Ones(data.cols());
  if (standardize) {
    const auto n = static_cast<double>(data.rows());
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      const double sd = std::sqrt(x.col(j).squaredNorm() / n);
      if (sd > 0.0) {
        model.scale(j) = sd;
        x.col(j) /= sd;
      }
    }
  }
  const Eigen::BDCSVD<Eigen::MatrixXd> svd(x, Eigen::ComputeThinV);
  const Eigen::VectorXd& s = svd.singularValues();
  const double tol = s.size() ? s(0) * static_cast<double>(std::max(x.rows(), x.cols())) *
                                    std::numeric_limits<double>::epsilon()
                              : 0.0;
  std::size_t rank = 0;
  while (rank < static_cast<std::size_t>(s.size()) && s(static_cast<Eigen::Index>(rank)) > tol) ++rank;
  std::size_t keep = n_components;
  if (keep > rank) {
    model.warnings.push_back("requested " + std::to_string(n_components) + " components but rank is " +
                             std::to_string(rank) + "; truncated");
    keep = std::max<std::size_t>(rank, 1);
  }
  model.n_components = keep;
  const double denom = static_cast<double>(data.rows() - 1);
  model.total_variance = s.squaredNorm() / denom;
  model.components = svd.matrixV().leftCols(static_cast<Eigen::Index>(keep)).transpose();
  model.explained_variance = s.head(static_cast<Eigen::Index>(keep)).array().square() / denom;
  for (Eigen::Index c = 0; c < model.components.rows(); ++c) {
    Eigen::Index arg = 0;
    model.components.row(c).cwiseAbs().maxCoeff(&arg);
    if (model.components(c, arg) < 0.0) model.components.row(c) *= -1.0;
  }
  return model;
}

Eigen::MatrixXd pca_transform(const PcaModel& model, const Eigen::MatrixXd& data) {
  if (data.cols() != model.mean.size()) throw Error(ErrorKind::kAlignment, "PCA input has wrong width");
  Eigen::MatrixXd x = data.rowwise() - model.mean.transpose();
  x = x.array().rowwise() / model.scale.transpose().array();
  return x * model.components.transpose();
}

Eigen::MatrixXd pca_inverse_transform(const PcaModel& model, const Eigen::MatrixXd& scores) {
  Eigen::MatrixXd x = scores * model.components;
  x = x.array().rowwise() * model.scale.transpose().array();
  return x.rowwise() + model.mean.transpose();
}

std::string cluster_model_to_json(const ClusterModel& model, std::span<const std::string> keys) {
  nlohmann::ordered_json j;
  j["method"] = "hierarchical";
  j["k"] = model.k;
  j["silhouette_avg"] = model.silhouette_avg;
  nlohmann::ordered_json assign = nlohmann::ordered_json::object();
  for (std::size_t i = 0; i < keys.size() && i < model.assignments.size(); ++i) {
    assign[keys[i]] = model.assignments[i];
  }
  j["assignments"] = assign;
  j["retained"] = model.retained;
  nlohmann::ordered_json trace = nlohmann::ordered_json::array();
  for (const auto& [k, s] : model.silhouette_by_k) trace.push_back({{"k", k}, {"silhouette", s}});
  j["silhouette_by_k"] = trace;
  return j.dump(2) + "\n";
}

std::string pca_model_to_json(const PcaModel& model, std::span<const std::string> keys) {
  nlohmann::ordered_json j;
  j["method"] = "pca";
  j["n_components"] = model.n_components;
  j["features"] = std::vector<std::string>(keys.begin(), keys.end());
  j["mean"] = to_vector(model.mean);
  j["scale"] = to_vector(model.scale);
  nlohmann::ordered_json comps = nlohmann::ordered_json::array();
  for (Eigen::Index c = 0; c < model.components.rows(); ++c) {
    comps.push_back(to_vector(model.components.row(c).transpose()));
  }
  j["components"] = comps;
  j["explained_variance"] = to_vector(model.explained_variance);
  j["total_variance"] = model.total_variance;
  j["warnings"] = model.warnings;
  return j.dump(2) + "\n";
}

}  // namespace spreadcast::dimreduce
