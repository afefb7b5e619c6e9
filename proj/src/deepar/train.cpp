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
#include <fstream>
#include <random>

#include "spreadcast/csv.hpp"
#include "spreadcast/deepar.hpp"
#include "spreadcast/error.hpp"
#include "spreadcast/parallel.hpp"

namespace spreadcast::deepar {
namespace {

double mean_of(const double* x, std::size_t n, std::size_t stride) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += x[i * stride];
  return s / static_cast<double>(n);
}

double scale_of(const double* x, std::size_t n, std::size_t stride, double mean) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = x[i * stride] - mean;
    s += d * d;
  }
  const double sd = std::sqrt(s / static_cast<double>(n));
  return sd > 1e-12 ? sd : 1.0;
}

// Inputs for one-step predictions of target[first .. first + steps).
void fill_inputs(std::span<const double> target, const Eigen::MatrixXd& covariates,
                 const InputScaling& scaling, std::size_t first, std::size_t steps, double* out) {
  const std::size_t n_cov = static_cast<std::size_t>(covariates.cols());
  const std::size_t width = 1 + n_cov;
  for (std::size_t s = 0; s < steps; ++s) {
    const std::size_t t = first + s;
    double* row = out + s * width;
    row[0] = (target[t - 1] - scaling.target_mean) / scaling.target_scale;
    for (std::size_t j = 0; j < n_cov; ++j) {
      row[1 + j] = (covariates(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(j)) -
                    scaling.covariate_mean[j]) /
                   scaling.covariate_scale[j];
    }
  }
}

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::seed_seq seq{static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                    static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32)};
  std::uint32_t words[2];
  seq.generate(words, words + 2);
  return (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
}

}  // namespace

SeriesDataset SeriesDataset::slice(std::size_t begin, std::size_t end) const {
  if (begin > end || end > target.size()) throw Error(ErrorKind::kParameter, "dataset slice out of range");
  SeriesDataset out;
  out.target.assign(target.begin() + static_cast<std::ptrdiff_t>(begin),
                    target.begin() + static_cast<std::ptrdiff_t>(end));
  out.covariates = covariates.middleRows(static_cast<Eigen::Index>(begin),
                                         static_cast<Eigen::Index>(end - begin));
  return out;
}

InputScaling fit_scaling(const SeriesDataset& data) {
  if (data.size() == 0) throw Error(ErrorKind::kParameter, "cannot scale an empty series");
  InputScaling s;
  const std::size_t n = data.size();
  s.target_mean = mean_of(data.target.data(), n, 1);
  s.target_scale = scale_of(data.target.data(), n, 1, s.target_mean);
  for (std::size_t j = 0; j < data.n_covariates(); ++j) {
    const double* col = data.covariates.col(static_cast<Eigen::Index>(j)).data();
    const double m = mean_of(col, n, 1);
    s.covariate_mean.push_back(m);
    s.covariate_scale.push_back(scale_of(col, n, 1, m));
  }
  return s;
}

std::vector<TrainingSequence> make_training_sequences(const SeriesDataset& data,
                                                      const InputScaling& scaling,
                                                      std::size_t context_length,
                                                      std::size_t offset) {
  if (context_length == 0) throw Error(ErrorKind::kParameter, "context_length must be positive");
  if (data.covariates.rows() != static_cast<Eigen::Index>(data.size()) && data.n_covariates() > 0) {
    throw Error(ErrorKind::kAlignment, "covariate rows do not match target length");
  }
  const std::size_t width = 1 + data.n_covariates();
  std::vector<TrainingSequence> out;
  offset %= context_length;
  for (std::size_t first = 1; first < data.size();) {
    const std::size_t want = (first == 1 && offset > 0) ? offset : context_length;
    const std::size_t steps = std::min(want, data.size() - first);
    TrainingSequence seq;
    seq.inputs.resize(steps * width);
    fill_inputs(data.target, data.covariates, scaling, first, steps, seq.inputs.data());
    for (std::size_t s = 0; s < steps; ++s) {
      seq.targets.push_back((data.target[first + s] - scaling.target_mean) / scaling.target_scale);
    }
    out.push_back(std::move(seq));
    first += steps;
  }
  return out;
}

DeepArModel train(const SeriesDataset& window, const NetworkConfig& cfg) {
  cfg.validate();
  if (window.size() < cfg.context_length + 1) {
    throw Error(ErrorKind::kParameter, "training window shorter than context_length + 1");
  }
  for (double y : window.target) {
    if (!std::isfinite(y)) throw Error(ErrorKind::kDomain, "training target contains non-finite values");
  }
  if (window.n_covariates() > 0 && !window.covariates.allFinite()) {
    throw Error(ErrorKind::kDomain, "training covariates contain non-finite values");
  }
  DeepArModel model;
  model.config = cfg;
  model.n_covariates = window.n_covariates();
  model.scaling = fit_scaling(window);
  model.params = initialize_params(cfg, 1 + model.n_covariates, cfg.seed);

  NetworkParams m1 = model.params.zeros_like();
  NetworkParams m2 = model.params.zeros_like();
  auto p_t = model.params.tensors();
  auto m_t = m1.tensors();
  auto v_t = m2.tensors();
  double b1_pow = 1.0, b2_pow = 1.0;
  std::mt19937_64 dropout_rng(mix_seed(cfg.seed, 0x64726f70ULL));
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto batch = make_training_sequences(window, model.scaling, cfg.context_length,
                                               static_cast<std::size_t>(epoch) % cfg.context_length);
    NetworkParams grad = model.params.zeros_like();
    const double loss = loss_and_gradient(model.params, cfg, batch, &grad, &dropout_rng);
    if (!std::isfinite(loss)) {
      throw Error(ErrorKind::kDivergence, "training loss is not finite at epoch " + std::to_string(epoch));
    }
    model.loss_trace.push_back(loss);
    b1_pow *= cfg.adam_beta1;
    b2_pow *= cfg.adam_beta2;
    const double lr = cfg.learning_rate * std::sqrt(1.0 - b2_pow) / (1.0 - b1_pow);
    auto g_t = grad.tensors();
    for (std::size_t k = 0; k < p_t.size(); ++k) {
      for (std::size_t i = 0; i < p_t[k].size(); ++i) {
        const double g = g_t[k][i];
        m_t[k][i] = cfg.adam_beta1 * m_t[k][i] + (1.0 - cfg.adam_beta1) * g;
        v_t[k][i] = cfg.adam_beta2 * v_t[k][i] + (1.0 - cfg.adam_beta2) * g * g;
        p_t[k][i] -= lr * m_t[k][i] / (std::sqrt(v_t[k][i]) + cfg.adam_epsilon) +
                    cfg.learning_rate * cfg.weight_decay * p_t[k][i];
      }
    }
  }
  return model;
}

double sample_quantile(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw Error(ErrorKind::kParameter, "no samples");
  if (!(q >= 0.0 && q <= 1.0)) throw Error(ErrorKind::kParameter, "quantile level outside [0, 1]");
  const double h = q * static_cast<double>(sorted.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

double ForecastDistribution::quantile(double q) const { return sample_quantile(samples, q); }

DistributionParams predict_next(const DeepArModel& model, std::span<const double> history,
                                const Eigen::MatrixXd& covariates) {
  const std::size_t L = model.config.context_length;
  const std::size_t n = history.size();
  if (n < L) throw Error(ErrorKind::kParameter, "history shorter than context_length");
  if (model.n_covariates > 0) {
    if (static_cast<std::size_t>(covariates.cols()) != model.n_covariates ||
        static_cast<std::size_t>(covariates.rows()) != n + 1) {
      throw Error(ErrorKind::kAlignment, "forecast covariates must have history + 1 rows");
    }
  }
  // Forecasting target index n from the last L one-step inputs.
  const std::size_t first = n + 1 - L;
  std::vector<double> full(history.begin(), history.end());
  full.push_back(0.0);
  std::vector<double> inputs(L * (1 + model.n_covariates));
  fill_inputs(full, model.n_covariates > 0 ? covariates : Eigen::MatrixXd(n + 1, 0), model.scaling,
              first, L, inputs.data());
  const auto dists = forward_sequence(model.params, model.config, inputs, L);
  DistributionParams d = dists.back();
  d.mu = d.mu * model.scaling.target_scale + model.scaling.target_mean;
  d.sigma *= model.scaling.target_scale;
  return d;
}

ForecastDistribution sample_distribution(const DistributionParams& params, Likelihood likelihood,
                                         std::size_t samples, std::uint64_t seed) {
  if (samples == 0) throw Error(ErrorKind::kParameter, "sample count must be positive");
  ForecastDistribution out;
  out.params = params;
  out.likelihood = likelihood;
  out.samples.resize(samples);
  std::mt19937_64 rng(seed);
  if (likelihood == Likelihood::kGaussian) {
    std::normal_distribution<double> nd(0.0, 1.0);
    for (double& s : out.samples) s = params.mu + params.sigma * nd(rng);
  } else {
    std::student_t_distribution<double> td(params.nu);
    for (double& s : out.samples) s = params.mu + params.sigma * td(rng);
  }
  std::sort(out.samples.begin(), out.samples.end());
  return out;
}

ForecastDistribution forecast_one_step(const DeepArModel& model, std::span<const double> history,
                                       const Eigen::MatrixXd& covariates, std::size_t samples,
                                       std::uint64_t seed) {
  return sample_distribution(predict_next(model, history, covariates), model.config.likelihood, samples,
                             seed);
}

RollingResult rolling_forecast(const SeriesDataset& data, const NetworkConfig& cfg,
                               const RollingOptions& options) {
  const std::size_t n = data.size();
  if (options.window == 0 || n <= options.window) {
    throw Error(ErrorKind::kParameter, "dataset must be longer than the rolling window");
  }
  if (options.retrain_stride == 0) throw Error(ErrorKind::kParameter, "retrain_stride must be positive");
  if (data.n_covariates() > 0 && data.covariates.rows() != static_cast<Eigen::Index>(n)) {
    throw Error(ErrorKind::kAlignment, "covariate rows do not match target length");
  }
  const std::size_t n_out = n - options.window;
  const std::size_t n_blocks = (n_out + options.retrain_stride - 1) / options.retrain_stride;
  RollingResult result;
  result.indices.resize(n_out);
  result.forecasts.resize(n_out);
  result.training_starts.resize(n_blocks);
  result.final_losses.resize(n_blocks);

  parallel_for(
      n_blocks,
      [&](std::size_t b) {
        const std::size_t t0 = options.window + b * options.retrain_stride;
        const std::size_t start = t0 - options.window;
        NetworkConfig block_cfg = cfg;
        block_cfg.seed = mix_seed(cfg.seed, b);
        DeepArModel model;
        try {
          model = train(data.slice(start, t0), block_cfg);
        } catch (const Error& e) {
          throw Error(e.kind(), "training window ending at index " + std::to_string(t0) + ": " + e.what());
        }
        result.training_starts[b] = start;
        result.final_losses[b] = model.loss_trace.empty() ? NAN : model.loss_trace.back();
        const std::size_t t_end = std::min(n, t0 + options.retrain_stride);
        for (std::size_t t = t0; t < t_end; ++t) {
          const std::size_t k = t - options.window;
          // Only the last context_length observations enter the forward pass.
          const std::size_t from = t - std::min(t, cfg.context_length);
          std::span<const double> history(data.target.data() + from, t - from);
          Eigen::MatrixXd cov = data.n_covariates() > 0
                                    ? Eigen::MatrixXd(data.covariates.middleRows(
                                          static_cast<Eigen::Index>(from), static_cast<Eigen::Index>(t - from + 1)))
                                    : Eigen::MatrixXd(0, 0);
          result.indices[k] = t;
          result.forecasts[k] = forecast_one_step(model, history, cov, options.samples, mix_seed(options.seed, t));
        }
      },
      options.threads == 0 ? default_threads() : options.threads);
  return result;
}

void write_loss_trace(const std::filesystem::path& path, std::span<const double> trace) {
  std::string text = "epoch,loss\n";
  for (std::size_t i = 0; i < trace.size(); ++i) {
    text += std::to_string(i + 1) + "," + csv::format_double(trace[i]) + "\n";
  }
  csv::write_file(path, text);
}

}  // namespace spreadcast::deepar
