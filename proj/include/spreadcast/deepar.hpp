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

// Autoregressive probabilistic forecaster: stacked LSTM layers feeding a
// parametric distribution head, trained by negative log-likelihood with
// backpropagation through time.

#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace spreadcast::deepar {

enum class Gate : std::size_t { kForget = 0, kInput = 1, kCandidate = 2, kOutput = 3 };

// One LSTM layer. The four gate matrices are stacked row-wise into a single
// (4*hidden) x (hidden + input) row-major block, gate g owning rows
// [g*hidden, (g+1)*hidden). Columns hold h_{t-1} first, then x_t.
struct LstmCellParams {
  std::size_t input_size = 0;
  std::size_t hidden_size = 0;
  std::vector<double> weights;
  std::vector<double> biases;

  LstmCellParams() = default;
  LstmCellParams(std::size_t input, std::size_t hidden);

  std::size_t concat_size() const { return hidden_size + input_size; }
  std::span<double> w(Gate g);
  std::span<const double> w(Gate g) const;
  std::span<double> b(Gate g);
  std::span<const double> b(Gate g) const;
};

struct LstmState {
  std::vector<double> cell;
  std::vector<double> output;

  static LstmState zeros(std::size_t hidden);
};

struct GateActivations {
  std::vector<double> forget;
  std::vector<double> input;
  std::vector<double> candidate;
  std::vector<double> output;
};

LstmState lstm_cell_step(std::span<const double> x, const LstmState& prev, const LstmCellParams& p,
                         GateActivations* gates = nullptr);

enum class Likelihood { kGaussian, kStudentT };

Likelihood parse_likelihood(std::string_view name);
std::string_view likelihood_name(Likelihood l);

struct NetworkConfig {
  std::size_t num_layers = 2;
  std::size_t hidden_size = 40;
  std::size_t context_length = 30;
  Likelihood likelihood = Likelihood::kGaussian;
  int epochs = 500;
  double learning_rate = 0.001;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  // Inverted dropout on every layer output during training; decoupled
  // weight decay per Adam step.
  double dropout = 0.1;
  double weight_decay = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
};

// Affine maps from the top hidden state to the distribution parameters:
// mu directly, sigma through softplus, nu (Student-t) as 2 + softplus.
struct HeadParams {
  std::vector<double> w_mu;
  std::vector<double> w_sigma;
  std::vector<double> w_nu;
  std::vector<double> bias;  // {mu, sigma, nu}
};

struct NetworkParams {
  std::vector<LstmCellParams> layers;
  HeadParams head;

  // Every parameter tensor in a fixed order; used by the optimizer, the
  // gradient check and checkpoints.
  std::vector<std::span<double>> tensors();
  std::vector<std::span<const double>> tensors() const;
  std::size_t parameter_count() const;
  NetworkParams zeros_like() const;
};

// Uniform(-1/sqrt(hidden), 1/sqrt(hidden)) weights, zero biases except the
// forget gate at +1.
NetworkParams initialize_params(const NetworkConfig& cfg, std::size_t input_size, std::uint64_t seed);

struct DistributionParams {
  double mu = 0.0;
  double sigma = 1.0;
  double nu = 0.0;  // Student-t only
};

inline constexpr double kMinSigma = 1e-6;

double softplus(double x);

// Negative log-likelihood of y; gradients w.r.t. (mu, sigma, nu) when asked.
double nll_loss(double y, const DistributionParams& d, Likelihood likelihood,
                DistributionParams* grad = nullptr);

// Row-major T x input_size inputs; row t is [y_{t-1}, z_t]. Starts from a
// zero state and returns one distribution per step.
std::vector<DistributionParams> forward_sequence(const NetworkParams& params, const NetworkConfig& cfg,
                                                 std::span<const double> inputs, std::size_t steps);

struct TrainingSequence {
  std::vector<double> inputs;   // steps x input_size, row-major
  std::vector<double> targets;  // steps
};

// Mean NLL over every step of every sequence. Accumulates d(loss)/d(params)
// into `grad` (same shapes as params) when non-null. Dropout masks are drawn
// from `dropout_rng` when it is given and cfg.dropout > 0.
double loss_and_gradient(const NetworkParams& params, const NetworkConfig& cfg,
                         std::span<const TrainingSequence> batch, NetworkParams* grad,
                         std::mt19937_64* dropout_rng = nullptr);

// Target plus covariates. covariates.row(t) is the covariate vector usable
// when predicting target[t]; zero columns means no covariates.
struct SeriesDataset {
  std::vector<double> target;
  Eigen::MatrixXd covariates;

  std::size_t size() const { return target.size(); }
  std::size_t n_covariates() const { return static_cast<std::size_t>(covariates.cols()); }
  SeriesDataset slice(std::size_t begin, std::size_t end) const;
};

struct InputScaling {
  double target_mean = 0.0;
  double target_scale = 1.0;
  std::vector<double> covariate_mean;
  std::vector<double> covariate_scale;
};

struct DeepArModel {
  NetworkConfig config;
  std::size_t n_covariates = 0;
  InputScaling scaling;
  NetworkParams params;
  std::vector<double> loss_trace;
};

// Consecutive chunks of at most context_length one-step predictions
// covering target[1..n), inputs scaled with `scaling`. The first chunk holds
// `offset` steps (none when 0); training rotates the offset every epoch so
// chunk boundaries do not sit at fixed positions.
std::vector<TrainingSequence> make_training_sequences(const SeriesDataset& data,
                                                      const InputScaling& scaling,
                                                      std::size_t context_length,
                                                      std::size_t offset = 0);

InputScaling fit_scaling(const SeriesDataset& data);

DeepArModel train(const SeriesDataset& window, const NetworkConfig& cfg);

struct ForecastDistribution {
  std::vector<double> samples;  // sorted ascending
  DistributionParams params;    // on the original target scale
  Likelihood likelihood = Likelihood::kGaussian;

  double quantile(double q) const;
};

// Linear interpolation between order statistics of `sorted`.
double sample_quantile(std::span<const double> sorted, double q);

// `history` holds the targets up to the forecast step; `covariates` has
// history.size() + 1 rows (the last is the forecast step) or no columns.
// Only the final context_length steps are read.
DistributionParams predict_next(const DeepArModel& model, std::span<const double> history,
                                const Eigen::MatrixXd& covariates);

ForecastDistribution forecast_one_step(const DeepArModel& model, std::span<const double> history,
                                       const Eigen::MatrixXd& covariates, std::size_t samples,
                                       std::uint64_t seed);

ForecastDistribution sample_distribution(const DistributionParams& params, Likelihood likelihood,
                                         std::size_t samples, std::uint64_t seed);

struct RollingOptions {
  std::size_t window = 586;       // T0
  std::size_t retrain_stride = 20;
  std::size_t samples = 200;
  std::uint64_t seed = 0;
  std::size_t threads = 0;        // 0: hardware concurrency
};

struct RollingResult {
  std::vector<std::size_t> indices;  // target index of each forecast
  std::vector<ForecastDistribution> forecasts;
  std::vector<std::size_t> training_starts;
  std::vector<double> final_losses;
};

// For every t in [window, n): a model trained on [t - window, t) (refreshed
// every retrain_stride days) forecasts target[t].
RollingResult rolling_forecast(const SeriesDataset& data, const NetworkConfig& cfg,
                               const RollingOptions& options);

std::string model_to_json(const DeepArModel& model);
DeepArModel model_from_json(const std::string& text);
void write_loss_trace(const std::filesystem::path& path, std::span<const double> trace);

}  // namespace spreadcast::deepar
