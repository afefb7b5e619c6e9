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

#include "spreadcast/deepar.hpp"
#include "spreadcast/error.hpp"

namespace spreadcast::deepar {
namespace {

NetworkConfig small_config(Likelihood lik = Likelihood::kGaussian) {
  NetworkConfig cfg;
  cfg.num_layers = 2;
  cfg.hidden_size = 4;
  cfg.context_length = 5;
  cfg.likelihood = lik;
  cfg.epochs = 1;
  cfg.seed = 7;
  return cfg;
}

std::vector<TrainingSequence> random_batch(std::size_t input, std::size_t steps, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  TrainingSequence seq;
  for (std::size_t i = 0; i < steps * input; ++i) seq.inputs.push_back(nd(rng));
  for (std::size_t i = 0; i < steps; ++i) seq.targets.push_back(nd(rng));
  return {seq};
}

double max_gradient_error(Likelihood lik, double dropout = 0.0) {
  NetworkConfig cfg = small_config(lik);
  cfg.dropout = dropout;
  NetworkParams params = initialize_params(cfg, 3, 11);
  // Non-trivial biases so every gate sits away from its resting point.
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  for (auto t : params.tensors()) {
    for (double& v : t) v += u(rng);
  }
  const auto batch = random_batch(3, 5, 3);
  // Every evaluation replays the same dropout masks.
  auto loss = [&](NetworkParams* g) {
    std::mt19937_64 masks(99);
    return loss_and_gradient(params, cfg, batch, g, &masks);
  };
  NetworkParams grad = params.zeros_like();
  loss(&grad);

  double worst = 0.0;
  auto p = params.tensors();
  auto g = grad.tensors();
  const double h = 1e-6;
  for (std::size_t k = 0; k < p.size(); ++k) {
    if (lik == Likelihood::kGaussian && (k == p.size() - 2)) continue;  // nu head unused
    for (std::size_t i = 0; i < p[k].size(); ++i) {
      if (lik == Likelihood::kGaussian && k == p.size() - 1 && i == 2) continue;
      const double saved = p[k][i];
      p[k][i] = saved + h;
      const double up = loss(nullptr);
      p[k][i] = saved - h;
      const double down = loss(nullptr);
      p[k][i] = saved;
      const double numeric = (up - down) / (2 * h);
      const double err = std::abs(numeric - g[k][i]) / std::max(1e-6, std::abs(numeric) + std::abs(g[k][i]));
      worst = std::max(worst, err);
    }
  }
  return worst;
}

TEST(LstmCell, ZeroParametersGiveHalfGates) {
  LstmCellParams p(3, 4);
  GateActivations g;
  const std::vector<double> x{1.0, -2.0, 0.5};
  const LstmState s = lstm_cell_step(x, LstmState::zeros(4), p, &g);
  for (std::size_t k = 0; k < 4; ++k) {
    EXPECT_EQ(g.forget[k], 0.5);
    EXPECT_EQ(g.input[k], 0.5);
    EXPECT_EQ(g.output[k], 0.5);
    EXPECT_EQ(g.candidate[k], 0.0);
    EXPECT_EQ(s.cell[k], 0.0);
    EXPECT_EQ(s.output[k], 0.0);
  }
}

TEST(LstmCell, ZeroParametersHalveCell) {
  LstmCellParams p(2, 3);
  LstmState prev = LstmState::zeros(3);
  prev.cell = {1.0, -2.0, 4.0};
  const std::vector<double> x{0.3, 0.1};
  const LstmState s = lstm_cell_step(x, prev, p);
  for (std::size_t k = 0; k < 3; ++k) {
    EXPECT_NEAR(s.cell[k], 0.5 * prev.cell[k], 1e-15);
    EXPECT_NEAR(s.output[k], 0.5 * std::tanh(0.5 * prev.cell[k]), 1e-15);
  }
}

TEST(LstmCell, SaturatedForgetGateKeepsCell) {
  LstmCellParams p(1, 2);
  for (double& b : p.b(Gate::kForget)) b = 50.0;
  LstmState prev = LstmState::zeros(2);
  prev.cell = {0.7, -1.3};
  const std::vector<double> x{0.0};
  const LstmState s = lstm_cell_step(x, prev, p);
  for (std::size_t k = 0; k < 2; ++k) EXPECT_NEAR(s.cell[k], prev.cell[k], 1e-15);
}

TEST(LstmCell, ShapeMismatchThrows) {
  LstmCellParams p(2, 3);
  const std::vector<double> x{1.0};
  EXPECT_THROW(lstm_cell_step(x, LstmState::zeros(3), p), Error);
}

TEST(Forward, TwoLayersMatchChainedCells) {
  const NetworkConfig cfg = small_config();
  const NetworkParams params = initialize_params(cfg, 2, 3);
  const std::vector<double> inputs{0.1, 0.2, -0.3, 0.4, 0.5, -0.6};
  const auto d = forward_sequence(params, cfg, inputs, 3);
  LstmState s0 = LstmState::zeros(4), s1 = LstmState::zeros(4);
  for (std::size_t t = 0; t < 3; ++t) {
    s0 = lstm_cell_step(std::span<const double>(inputs.data() + 2 * t, 2), s0, params.layers[0]);
    s1 = lstm_cell_step(s1.output.size() ? std::span<const double>(s0.output) : std::span<const double>(), s1,
                        params.layers[1]);
    double mu = params.head.bias[0], pre_sigma = params.head.bias[1];
    for (std::size_t k = 0; k < 4; ++k) {
      mu += params.head.w_mu[k] * s1.output[k];
      pre_sigma += params.head.w_sigma[k] * s1.output[k];
    }
    EXPECT_NEAR(d[t].mu, mu, 1e-12);
    EXPECT_NEAR(d[t].sigma, softplus(pre_sigma) + kMinSigma, 1e-12);
  }
}

TEST(Forward, ZeroNetworkIsConstant) {
  const NetworkConfig cfg = small_config();
  NetworkParams params = initialize_params(cfg, 2, 3).zeros_like();
  const std::vector<double> inputs{5.0, 1.0, -3.0, 2.0};
  const auto d = forward_sequence(params, cfg, inputs, 2);
  EXPECT_EQ(d[0].mu, d[1].mu);
  EXPECT_EQ(d[0].sigma, d[1].sigma);
}

TEST(Nll, GaussianClosedForms) {
  const double base = nll_loss(1.5, {1.5, 1.0, 0.0}, Likelihood::kGaussian);
  EXPECT_NEAR(base, 0.918938533204672741, 1e-15);
  EXPECT_NEAR(nll_loss(2.5, {1.5, 1.0, 0.0}, Likelihood::kGaussian), base + 0.5, 1e-15);
  EXPECT_NEAR(nll_loss(1.5, {1.5, 2.0, 0.0}, Likelihood::kGaussian), base + std::log(2.0), 1e-15);
}

TEST(Nll, StudentTApproachesGaussian) {
  const double g = nll_loss(0.7, {0.0, 1.0, 0.0}, Likelihood::kGaussian);
  const double t = nll_loss(0.7, {0.0, 1.0, 1e7}, Likelihood::kStudentT);
  EXPECT_NEAR(t, g, 1e-6);
}

TEST(Nll, NonPositiveScaleThrows) {
  EXPECT_THROW(nll_loss(0.0, {0.0, 0.0, 0.0}, Likelihood::kGaussian), Error);
}

TEST(Gradient, GaussianMatchesFiniteDifferences) { EXPECT_LT(max_gradient_error(Likelihood::kGaussian), 1e-4); }

TEST(Gradient, StudentTMatchesFiniteDifferences) { EXPECT_LT(max_gradient_error(Likelihood::kStudentT), 1e-4); }

TEST(Gradient, FixedDropoutMasksMatchFiniteDifferences) {
  EXPECT_LT(max_gradient_error(Likelihood::kGaussian, 0.3), 1e-4);
}

TEST(Sampling, StandardNormalQuantiles) {
  const auto f = sample_distribution({0.0, 1.0, 0.0}, Likelihood::kGaussian, 100000, 42);
  EXPECT_NEAR(f.quantile(0.5), 0.0, 0.02);
  EXPECT_NEAR(f.quantile(0.9), 1.2815515655446004, 0.03);
  for (double q = 0.05; q < 1.0; q += 0.05) EXPECT_LE(f.quantile(q - 0.05), f.quantile(q));
}

TEST(Sampling, DegenerateScaleCollapses) {
  const auto f = sample_distribution({3.0, 1e-12, 0.0}, Likelihood::kGaussian, 50, 1);
  EXPECT_NEAR(f.quantile(0.1), 3.0, 1e-9);
  EXPECT_NEAR(f.quantile(0.9), 3.0, 1e-9);
}

TEST(Sampling, QuantileIgnoresOrderOfInput) {
  std::vector<double> a{1, 2, 3, 4, 5, 6};
  EXPECT_DOUBLE_EQ(sample_quantile(a, 0.3), 2.5);
}

SeriesDataset ar1(std::size_t n, double phi, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  SeriesDataset d;
  double y = 0.0;
  for (std::size_t t = 0; t < n; ++t) {
    y = phi * y + nd(rng);
    d.target.push_back(y);
  }
  d.covariates.resize(static_cast<Eigen::Index>(n), 0);
  return d;
}

TEST(Training, DeterministicGivenSeed) {
  NetworkConfig cfg = small_config();
  cfg.epochs = 20;
  const SeriesDataset d = ar1(60, 0.8, 1);
  const DeepArModel a = train(d, cfg);
  const DeepArModel b = train(d, cfg);
  auto ta = a.params.tensors();
  auto tb = b.params.tensors();
  for (std::size_t k = 0; k < ta.size(); ++k) {
    for (std::size_t i = 0; i < ta[k].size(); ++i) ASSERT_EQ(ta[k][i], tb[k][i]);
  }
}

TEST(Training, ShortWindowThrows) {
  NetworkConfig cfg = small_config();
  EXPECT_THROW(train(ar1(5, 0.5, 1), cfg), Error);
}

TEST(Training, Ar1HeldOutNllNearTruth) {
  NetworkConfig cfg;
  cfg.context_length = 20;
  cfg.epochs = 200;
  cfg.seed = 3;
  const SeriesDataset d = ar1(700, 0.8, 9);
  const DeepArModel model = train(d.slice(0, 400), cfg);
  double nll = 0.0, truth = 0.0;
  std::size_t count = 0;
  for (std::size_t t = 400; t < 700; ++t) {
    const auto p = predict_next(model, std::span<const double>(d.target.data() + t - 20, 20),
                                Eigen::MatrixXd(21, 0));
    nll += nll_loss(d.target[t], p, Likelihood::kGaussian);
    truth += nll_loss(d.target[t], {0.8 * d.target[t - 1], 1.0, 0.0}, Likelihood::kGaussian);
    ++count;
  }
  EXPECT_LT(nll, 1.10 * truth);
}

TEST(Checkpoint, RoundTripIsExact) {
  NetworkConfig cfg = small_config(Likelihood::kStudentT);
  cfg.epochs = 3;
  SeriesDataset d = ar1(40, 0.5, 2);
  d.covariates = Eigen::MatrixXd::Random(40, 2);
  const DeepArModel m = train(d, cfg);
  const DeepArModel r = model_from_json(model_to_json(m));
  EXPECT_EQ(model_to_json(r), model_to_json(m));
  const auto pm = predict_next(m, std::span<const double>(d.target.data(), 10), d.covariates.topRows(11));
  const auto pr = predict_next(r, std::span<const double>(d.target.data(), 10), d.covariates.topRows(11));
  EXPECT_EQ(pm.mu, pr.mu);
  EXPECT_EQ(pm.sigma, pr.sigma);
}

TEST(Rolling, StrideCoversEveryOutOfSampleDay) {
  NetworkConfig cfg = small_config();
  cfg.epochs = 2;
  const SeriesDataset d = ar1(50, 0.5, 4);
  RollingOptions opt;
  opt.window = 40;
  opt.retrain_stride = 4;
  opt.samples = 20;
  const RollingResult r = rolling_forecast(d, cfg, opt);
  ASSERT_EQ(r.indices.size(), 10u);
  EXPECT_EQ(r.training_starts.size(), 3u);
  for (std::size_t k = 0; k < 10; ++k) EXPECT_EQ(r.indices[k], 40 + k);
  opt.window = 49;
  EXPECT_EQ(rolling_forecast(d, cfg, opt).indices.size(), 1u);
}

}  // namespace
}  // namespace spreadcast::deepar
