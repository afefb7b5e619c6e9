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
#include <numeric>
#include <random>

#include "spreadcast/error.hpp"
#include "spreadcast/evaluation.hpp"

namespace spreadcast::evaluation {
namespace {

double log_choose(std::size_t n, std::size_t k) {
  return std::lgamma(static_cast<double>(n) + 1.0) - std::lgamma(static_cast<double>(k) + 1.0) -
         std::lgamma(static_cast<double>(n - k) + 1.0);
}

double shapley_kernel(std::size_t M, std::size_t s) {
  return static_cast<double>(M - 1) /
         (std::exp(log_choose(M, s)) * static_cast<double>(s) * static_cast<double>(M - s));
}

}  // namespace

ShapResult kernel_shap(const BatchPredictor& predict, const Eigen::MatrixXd& background,
                       std::span<const double> x, const ShapConfig& cfg) {
  const std::size_t M = x.size();
  if (background.rows() < 1) throw Error(ErrorKind::kParameter, "kernel_shap needs at least one background row");
  if (static_cast<std::size_t>(background.cols()) != M) {
    throw Error(ErrorKind::kAlignment, "background width does not match the explained instance");
  }
  if (M > 0 && cfg.n_coalitions < M + 2) throw Error(ErrorKind::kParameter, "n_coalitions must be at least features + 2");

  ShapResult r;
  r.phi.assign(M, 0.0);
  const auto bg_pred = predict(background);
  if (bg_pred.size() != static_cast<std::size_t>(background.rows())) {
    throw Error(ErrorKind::kAlignment, "predictor returned the wrong number of outputs");
  }
  r.base_value = std::accumulate(bg_pred.begin(), bg_pred.end(), 0.0) / static_cast<double>(bg_pred.size());
  Eigen::MatrixXd xrow(1, static_cast<Eigen::Index>(M));
  for (std::size_t j = 0; j < M; ++j) xrow(0, static_cast<Eigen::Index>(j)) = x[j];
  r.prediction = predict(xrow).at(0);
  const double total = r.prediction - r.base_value;
  if (M == 0) return r;
  if (M == 1) {
    r.phi[0] = total;
    r.exact = true;
    return r;
  }

  // Coalition masks and their regression weights.
  std::vector<std::vector<char>> masks;
  std::vector<double> weights;
  const bool exact = M < 63 && ((std::uint64_t{1} << M) - 2) <= cfg.n_coalitions;
  if (exact) {
    for (std::uint64_t code = 1; code + 1 < (std::uint64_t{1} << M); ++code) {
      std::vector<char> z(M);
      std::size_t s = 0;
      for (std::size_t j = 0; j < M; ++j) {
        z[j] = static_cast<char>((code >> j) & 1u);
        s += static_cast<std::size_t>(z[j]);
      }
      masks.push_back(std::move(z));
      weights.push_back(shapley_kernel(M, s));
    }
  } else {
    // Total kernel mass of size s is proportional to 1 / (s (M - s)).
    std::vector<double> size_mass(M - 1);
    for (std::size_t s = 1; s < M; ++s) size_mass[s - 1] = 1.0 / (static_cast<double>(s) * static_cast<double>(M - s));
    std::mt19937_64 rng(cfg.seed);
    std::discrete_distribution<std::size_t> pick_size(size_mass.begin(), size_mass.end());
    std::vector<std::size_t> perm(M);
    for (std::size_t c = 0; c < cfg.n_coalitions; ++c) {
      const std::size_t s = pick_size(rng) + 1;
      std::iota(perm.begin(), perm.end(), 0);
      for (std::size_t k = 0; k < s; ++k) {
        std::uniform_int_distribution<std::size_t> u(k, M - 1);
        std::swap(perm[k], perm[u(rng)]);
      }
      std::vector<char> z(M, 0);
      for (std::size_t k = 0; k < s; ++k) z[perm[k]] = 1;
      masks.push_back(std::move(z));
      weights.push_back(1.0);
    }
  }
  r.exact = exact;
  r.coalitions = masks.size();

  const Eigen::RowVectorXd bg_mean = background.colwise().mean();
  Eigen::MatrixXd rows(static_cast<Eigen::Index>(masks.size()), static_cast<Eigen::Index>(M));
  for (std::size_t c = 0; c < masks.size(); ++c) {
    for (std::size_t j = 0; j < M; ++j) {
      rows(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(j)) =
          masks[c][j] ? x[j] : bg_mean(static_cast<Eigen::Index>(j));
    }
  }
  const auto fz = predict(rows);
  if (fz.size() != masks.size()) throw Error(ErrorKind::kAlignment, "predictor returned the wrong number of outputs");

  // Eliminate phi_M through the efficiency constraint, then solve weighted
  // least squares for the remaining M - 1 attributions.
  const std::size_t P = M - 1;
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(P), static_cast<Eigen::Index>(P));
  Eigen::VectorXd b = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(P));
  Eigen::VectorXd row(static_cast<Eigen::Index>(P));
  for (std::size_t c = 0; c < masks.size(); ++c) {
    const double zm = masks[c][M - 1];
    for (std::size_t j = 0; j < P; ++j) row(static_cast<Eigen::Index>(j)) = masks[c][j] - zm;
    const double target = fz[c] - r.base_value - zm * total;
    A.noalias() += weights[c] * row * row.transpose();
    b.noalias() += weights[c] * target * row;
  }
  Eigen::LDLT<Eigen::MatrixXd> ldlt(A);
  const double diag_max = A.diagonal().cwiseAbs().maxCoeff();
  const double diag_min = ldlt.vectorD().cwiseAbs().minCoeff();
  if (ldlt.info() != Eigen::Success || !(diag_min > 1e-12 * std::max(diag_max, 1e-300))) {
    r.ridge = true;
    A.diagonal().array() += 1e-8;
    ldlt.compute(A);
  }
  const Eigen::VectorXd phi = ldlt.solve(b);
  double partial = 0.0;
  for (std::size_t j = 0; j < P; ++j) {
    r.phi[j] = phi(static_cast<Eigen::Index>(j));
    partial += r.phi[j];
  }
  r.phi[M - 1] = total - partial;
  return r;
}

std::vector<FeatureImportance> mean_abs_importance(std::span<const ShapResult> results,
                                                   std::span<const std::string> keys) {
  std::vector<FeatureImportance> out;
  for (const auto& k : keys) out.push_back({k, 0.0});
  if (results.empty()) return out;
  for (const ShapResult& r : results) {
    if (r.phi.size() != keys.size()) throw Error(ErrorKind::kAlignment, "attribution width does not match keys");
    for (std::size_t j = 0; j < keys.size(); ++j) out[j].mean_abs_phi += std::abs(r.phi[j]);
  }
  for (auto& f : out) f.mean_abs_phi /= static_cast<double>(results.size());
  std::stable_sort(out.begin(), out.end(), [](const FeatureImportance& a, const FeatureImportance& b) {
    if (a.mean_abs_phi != b.mean_abs_phi) return a.mean_abs_phi > b.mean_abs_phi;
    return a.key < b.key;
  });
  return out;
}

}  // namespace spreadcast::evaluation
