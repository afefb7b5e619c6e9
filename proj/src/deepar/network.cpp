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

#include "spreadcast/deepar.hpp"
#include "spreadcast/error.hpp"
#include "spreadcast/kernels.hpp"

namespace spreadcast::deepar {
namespace {

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double digamma(double x) {
  double result = 0.0;
  while (x < 6.0) {
    result -= 1.0 / x;
    x += 1.0;
  }
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  result += std::log(x) - 0.5 * inv -
            inv2 * (1.0 / 12.0 - inv2 * (1.0 / 120.0 - inv2 * (1.0 / 252.0 - inv2 * (1.0 / 240.0))));
  return result;
}

// Forward caches of one layer over one sequence.
struct LayerTrace {
  std::vector<double> concat;  // T x (H + I)
  std::vector<double> gates;   // T x 4H, post-activation (f, i, c~, o)
  std::vector<double> cell;    // (T + 1) x H, row 0 is the initial state
  std::vector<double> tanh_cell;  // T x H
  std::vector<double> output;  // (T + 1) x H, row 0 is the initial state
  std::vector<double> mask;    // T x H inverted-dropout factors; empty when off
  std::vector<double> passed;  // T x H, output * mask as seen by the next stage
};

struct SequenceTrace {
  std::vector<LayerTrace> layers;
  std::vector<double> head_pre;  // T x 3 pre-activations
  std::vector<DistributionParams> dists;
};

void layer_step(const LstmCellParams& p, const double* x, std::size_t t, LayerTrace& tr) {
  const std::size_t H = p.hidden_size;
  const std::size_t Z = p.concat_size();
  double* z = tr.concat.data() + t * Z;
  const double* h_prev = tr.output.data() + t * H;
  std::copy(h_prev, h_prev + H, z);
  std::copy(x, x + p.input_size, z + H);

  double* g = tr.gates.data() + t * 4 * H;
  std::copy(p.biases.begin(), p.biases.end(), g);
  kernels::active().gemv({p.weights.data(), 4 * H, Z}, z, g);
  for (std::size_t k = 0; k < H; ++k) {
    g[k] = sigmoid(g[k]);
    g[H + k] = sigmoid(g[H + k]);
    g[2 * H + k] = std::tanh(g[2 * H + k]);
    g[3 * H + k] = sigmoid(g[3 * H + k]);
  }
  const double* c_prev = tr.cell.data() + t * H;
  double* c = tr.cell.data() + (t + 1) * H;
  double* tc = tr.tanh_cell.data() + t * H;
  double* h = tr.output.data() + (t + 1) * H;
  for (std::size_t k = 0; k < H; ++k) {
    c[k] = g[k] * c_prev[k] + g[H + k] * g[2 * H + k];
    tc[k] = std::tanh(c[k]);
    h[k] = g[3 * H + k] * tc[k];
  }
}

DistributionParams head_forward(const HeadParams& head, Likelihood likelihood, const double* h,
                                std::size_t H, double* pre) {
  const auto& k = kernels::active();
  pre[0] = head.bias[0] + k.dot(head.w_mu.data(), h, H);
  pre[1] = head.bias[1] + k.dot(head.w_sigma.data(), h, H);
  pre[2] = likelihood == Likelihood::kStudentT ? head.bias[2] + k.dot(head.w_nu.data(), h, H) : 0.0;
  DistributionParams d;
  d.mu = pre[0];
  d.sigma = softplus(pre[1]) + kMinSigma;
  d.nu = likelihood == Likelihood::kStudentT ? 2.0 + softplus(pre[2]) + 1e-6 : 0.0;
  return d;
}

void run_forward(const NetworkParams& params, const NetworkConfig& cfg, const double* inputs,
                 std::size_t steps, SequenceTrace& trace, std::mt19937_64* dropout_rng = nullptr) {
  const bool drop = dropout_rng != nullptr && cfg.dropout > 0.0;
  std::bernoulli_distribution keep(1.0 - cfg.dropout);
  const double inv_keep = drop ? 1.0 / (1.0 - cfg.dropout) : 1.0;
  const std::size_t n_layers = params.layers.size();
  trace.layers.resize(n_layers);
  for (std::size_t l = 0; l < n_layers; ++l) {
    const LstmCellParams& p = params.layers[l];
    LayerTrace& tr = trace.layers[l];
    const std::size_t H = p.hidden_size;
    tr.concat.assign(steps * p.concat_size(), 0.0);
    tr.gates.assign(steps * 4 * H, 0.0);
    tr.cell.assign((steps + 1) * H, 0.0);
    tr.tanh_cell.assign(steps * H, 0.0);
    tr.output.assign((steps + 1) * H, 0.0);
    tr.mask.assign(drop ? steps * H : 0, 0.0);
    tr.passed.assign(drop ? steps * H : 0, 0.0);
  }
  trace.head_pre.assign(steps * 3, 0.0);
  trace.dists.resize(steps);
  const std::size_t H_top = params.layers.back().hidden_size;
  for (std::size_t t = 0; t < steps; ++t) {
    const double* x = inputs + t * params.layers.front().input_size;
    for (std::size_t l = 0; l < n_layers; ++l) {
      layer_step(params.layers[l], x, t, trace.layers[l]);
      LayerTrace& tr = trace.layers[l];
      const std::size_t H = params.layers[l].hidden_size;
      x = tr.output.data() + (t + 1) * H;
      if (drop) {
        for (std::size_t k = 0; k < H; ++k) {
          tr.mask[t * H + k] = keep(*dropout_rng) ? inv_keep : 0.0;
          tr.passed[t * H + k] = x[k] * tr.mask[t * H + k];
        }
        x = tr.passed.data() + t * H;
      }
    }
    for (std::size_t k = 0; k < H_top; ++k) {
      if (!std::isfinite(x[k])) {
        throw Error(ErrorKind::kDivergence, "non-finite hidden state at step " + std::to_string(t));
      }
    }
    trace.dists[t] = head_forward(params.head, cfg.likelihood, x, H_top, trace.head_pre.data() + 3 * t);
  }
}

}  // namespace

// --- parameter containers ----------------------------------------------------

LstmCellParams::LstmCellParams(std::size_t input, std::size_t hidden)
    : input_size(input),
      hidden_size(hidden),
      weights(4 * hidden * (hidden + input), 0.0),
      biases(4 * hidden, 0.0) {}

std::span<double> LstmCellParams::w(Gate g) {
  const std::size_t block = hidden_size * concat_size();
  return {weights.data() + static_cast<std::size_t>(g) * block, block};
}
std::span<const double> LstmCellParams::w(Gate g) const {
  const std::size_t block = hidden_size * concat_size();
  return {weights.data() + static_cast<std::size_t>(g) * block, block};
}
std::span<double> LstmCellParams::b(Gate g) {
  return {biases.data() + static_cast<std::size_t>(g) * hidden_size, hidden_size};
}
std::span<const double> LstmCellParams::b(Gate g) const {
  return {biases.data() + static_cast<std::size_t>(g) * hidden_size, hidden_size};
}

LstmState LstmState::zeros(std::size_t hidden) {
  return {std::vector<double>(hidden, 0.0), std::vector<double>(hidden, 0.0)};
}

LstmState lstm_cell_step(std::span<const double> x, const LstmState& prev, const LstmCellParams& p,
                         GateActivations* gates) {
  if (x.size() != p.input_size || prev.cell.size() != p.hidden_size ||
      prev.output.size() != p.hidden_size || p.weights.size() != 4 * p.hidden_size * p.concat_size() ||
      p.biases.size() != 4 * p.hidden_size) {
    throw Error(ErrorKind::kAlignment, "LSTM cell shapes do not match");
  }
  const std::size_t H = p.hidden_size;
  LayerTrace tr;
  tr.concat.assign(p.concat_size(), 0.0);
  tr.gates.assign(4 * H, 0.0);
  tr.cell.assign(2 * H, 0.0);
  tr.tanh_cell.assign(H, 0.0);
  tr.output.assign(2 * H, 0.0);
  std::copy(prev.cell.begin(), prev.cell.end(), tr.cell.begin());
  std::copy(prev.output.begin(), prev.output.end(), tr.output.begin());
  layer_step(p, x.data(), 0, tr);

  if (gates) {
    gates->forget.assign(tr.gates.begin(), tr.gates.begin() + static_cast<std::ptrdiff_t>(H));
    gates->input.assign(tr.gates.begin() + static_cast<std::ptrdiff_t>(H), tr.gates.begin() + static_cast<std::ptrdiff_t>(2 * H));
    gates->candidate.assign(tr.gates.begin() + static_cast<std::ptrdiff_t>(2 * H), tr.gates.begin() + static_cast<std::ptrdiff_t>(3 * H));
    gates->output.assign(tr.gates.begin() + static_cast<std::ptrdiff_t>(3 * H), tr.gates.end());
  }
  LstmState next;
  next.cell.assign(tr.cell.begin() + static_cast<std::ptrdiff_t>(H), tr.cell.end());
  next.output.assign(tr.output.begin() + static_cast<std::ptrdiff_t>(H), tr.output.end());
  return next;
}

Likelihood parse_likelihood(std::string_view name) {
  if (name == "gaussian") return Likelihood::kGaussian;
  if (name == "student-t" || name == "studentt") return Likelihood::kStudentT;
  throw Error(ErrorKind::kParameter, "unknown likelihood '" + std::string(name) + "'");
}

std::string_view likelihood_name(Likelihood l) {
  return l == Likelihood::kStudentT ? "student-t" : "gaussian";
}

void NetworkConfig::validate() const {
  if (num_layers == 0 || hidden_size == 0 || context_length == 0 || epochs < 0 ||
      !(learning_rate > 0.0)) {
    throw Error(ErrorKind::kParameter, "network configuration values must be positive");
  }
  if (!(dropout >= 0.0 && dropout < 1.0)) throw Error(ErrorKind::kParameter, "dropout must lie in [0, 1)");
  if (!(weight_decay >= 0.0)) throw Error(ErrorKind::kParameter, "weight_decay must be non-negative");
}

std::vector<std::span<double>> NetworkParams::tensors() {
  std::vector<std::span<double>> out;
  for (auto& l : layers) {
    out.emplace_back(l.weights);
    out.emplace_back(l.biases);
  }
  out.emplace_back(head.w_mu);
  out.emplace_back(head.w_sigma);
  out.emplace_back(head.w_nu);
  out.emplace_back(head.bias);
  return out;
}

std::vector<std::span<const double>> NetworkParams::tensors() const {
  std::vector<std::span<const double>> out;
  for (const auto& l : layers) {
    out.emplace_back(l.weights);
    out.emplace_back(l.biases);
  }
  out.emplace_back(head.w_mu);
  out.emplace_back(head.w_sigma);
  out.emplace_back(head.w_nu);
  out.emplace_back(head.bias);
  return out;
}

std::size_t NetworkParams::parameter_count() const {
  std::size_t n = 0;
  for (auto t : tensors()) n += t.size();
  return n;
}

NetworkParams NetworkParams::zeros_like() const {
  NetworkParams z = *this;
  for (auto t : z.tensors()) std::fill(t.begin(), t.end(), 0.0);
  return z;
}

NetworkParams initialize_params(const NetworkConfig& cfg, std::size_t input_size, std::uint64_t seed) {
  cfg.validate();
  std::mt19937_64 rng(seed);
  const double bound = 1.0 / std::sqrt(static_cast<double>(cfg.hidden_size));
  std::uniform_real_distribution<double> uni(-bound, bound);
  NetworkParams p;
  for (std::size_t l = 0; l < cfg.num_layers; ++l) {
    LstmCellParams layer(l == 0 ? input_size : cfg.hidden_size, cfg.hidden_size);
    for (double& w : layer.weights) w = uni(rng);
    for (double& b : layer.b(Gate::kForget)) b = 1.0;
    p.layers.push_back(std::move(layer));
  }
  const std::size_t H = cfg.hidden_size;
  p.head.w_mu.resize(H);
  p.head.w_sigma.resize(H);
  p.head.w_nu.assign(H, 0.0);
  for (double& w : p.head.w_mu) w = uni(rng);
  for (double& w : p.head.w_sigma) w = uni(rng);
  if (cfg.likelihood == Likelihood::kStudentT) {
    for (double& w : p.head.w_nu) w = uni(rng);
  }
  p.head.bias = {0.0, 0.0, 0.0};
  return p;
}

double softplus(double x) {
  if (x > 30.0) return x;
  return std::log1p(std::exp(x));
}

double nll_loss(double y, const DistributionParams& d, Likelihood likelihood, DistributionParams* grad) {
  if (!(d.sigma > 0.0)) throw Error(ErrorKind::kDomain, "distribution scale must be positive");
  const double z = (y - d.mu) / d.sigma;
  if (likelihood == Likelihood::kGaussian) {
    if (grad) {
      grad->mu = -z / d.sigma;
      grad->sigma = (1.0 - z * z) / d.sigma;
      grad->nu = 0.0;
    }
    return 0.5 * std::log(2.0 * M_PI * d.sigma * d.sigma) + 0.5 * z * z;
  }
  const double nu = d.nu;
  if (!(nu > 2.0)) throw Error(ErrorKind::kDomain, "Student-t degrees of freedom must exceed 2");
  const double z2 = z * z;
  if (grad) {
    grad->mu = -(nu + 1.0) * z / (d.sigma * (nu + z2));
    grad->sigma = (1.0 - (nu + 1.0) * z2 / (nu + z2)) / d.sigma;
    grad->nu = -0.5 * digamma(0.5 * (nu + 1.0)) + 0.5 * digamma(0.5 * nu) + 0.5 / nu +
               0.5 * std::log1p(z2 / nu) - (nu + 1.0) * z2 / (2.0 * nu * (nu + z2));
  }
  return -std::lgamma(0.5 * (nu + 1.0)) + std::lgamma(0.5 * nu) + 0.5 * std::log(nu * M_PI) +
         std::log(d.sigma) + 0.5 * (nu + 1.0) * std::log1p(z2 / nu);
}

std::vector<DistributionParams> forward_sequence(const NetworkParams& params, const NetworkConfig& cfg,
                                                 std::span<const double> inputs, std::size_t steps) {
  if (params.layers.empty()) throw Error(ErrorKind::kParameter, "network has no layers");
  if (inputs.size() != steps * params.layers.front().input_size) {
    throw Error(ErrorKind::kAlignment, "input length does not match steps x input size");
  }
  SequenceTrace trace;
  run_forward(params, cfg, inputs.data(), steps, trace);
  return trace.dists;
}

double loss_and_gradient(const NetworkParams& params, const NetworkConfig& cfg,
                         std::span<const TrainingSequence> batch, NetworkParams* grad,
                         std::mt19937_64* dropout_rng) {
  std::size_t total_steps = 0;
  for (const auto& seq : batch) total_steps += seq.targets.size();
  if (total_steps == 0) throw Error(ErrorKind::kParameter, "empty training batch");
  const double inv_n = 1.0 / static_cast<double>(total_steps);
  const std::size_t n_layers = params.layers.size();
  const std::size_t H_top = params.layers.back().hidden_size;
  const auto& k = kernels::active();

  double loss = 0.0;
  SequenceTrace trace;
  std::vector<double> dh_above;  // T x H of the layer being processed
  std::vector<double> dx_below;
  for (const auto& seq : batch) {
    const std::size_t T = seq.targets.size();
    if (seq.inputs.size() != T * params.layers.front().input_size) {
      throw Error(ErrorKind::kAlignment, "training sequence inputs do not match targets");
    }
    run_forward(params, cfg, seq.inputs.data(), T, trace, dropout_rng);
    for (std::size_t t = 0; t < T; ++t) loss += nll_loss(seq.targets[t], trace.dists[t], cfg.likelihood);
    if (!grad) continue;

    // Head: gradients of the mean NLL w.r.t. the pre-activations.
    dh_above.assign(T * H_top, 0.0);
    const LayerTrace& top = trace.layers.back();
    const bool top_dropped = !top.mask.empty();
    for (std::size_t t = 0; t < T; ++t) {
      DistributionParams g;
      nll_loss(seq.targets[t], trace.dists[t], cfg.likelihood, &g);
      const double* pre = trace.head_pre.data() + 3 * t;
      const double d_mu = g.mu * inv_n;
      const double d_sig = g.sigma * inv_n * sigmoid(pre[1]);
      const double* h = top_dropped ? top.passed.data() + t * H_top : top.output.data() + (t + 1) * H_top;
      double* dh = dh_above.data() + t * H_top;
      k.axpy(d_mu, h, grad->head.w_mu.data(), H_top);
      k.axpy(d_sig, h, grad->head.w_sigma.data(), H_top);
      grad->head.bias[0] += d_mu;
      grad->head.bias[1] += d_sig;
      k.axpy(d_mu, params.head.w_mu.data(), dh, H_top);
      k.axpy(d_sig, params.head.w_sigma.data(), dh, H_top);
      if (cfg.likelihood == Likelihood::kStudentT) {
        const double d_nu = g.nu * inv_n * sigmoid(pre[2]);
        k.axpy(d_nu, h, grad->head.w_nu.data(), H_top);
        grad->head.bias[2] += d_nu;
        k.axpy(d_nu, params.head.w_nu.data(), dh, H_top);
      }
    }

    // Layers top-down; each layer's input gradient feeds the layer below.
    for (std::size_t l = n_layers; l-- > 0;) {
      const LstmCellParams& p = params.layers[l];
      LstmCellParams& gp = grad->layers[l];
      const LayerTrace& tr = trace.layers[l];
      const std::size_t H = p.hidden_size;
      const std::size_t Z = p.concat_size();
      if (!tr.mask.empty()) {
        for (std::size_t i = 0; i < T * H; ++i) dh_above[i] *= tr.mask[i];
      }
      std::vector<double> dh_next(H, 0.0), dc_next(H, 0.0), da(4 * H), dz(Z);
      dx_below.assign(T * p.input_size, 0.0);
      for (std::size_t t = T; t-- > 0;) {
        const double* g = tr.gates.data() + t * 4 * H;
        const double* c_prev = tr.cell.data() + t * H;
        const double* tc = tr.tanh_cell.data() + t * H;
        const double* dh_in = dh_above.data() + t * H;
        for (std::size_t j = 0; j < H; ++j) {
          const double f = g[j], i = g[H + j], cc = g[2 * H + j], o = g[3 * H + j];
          const double dh = dh_in[j] + dh_next[j];
          const double d_o = dh * tc[j];
          const double dc = dh * o * (1.0 - tc[j] * tc[j]) + dc_next[j];
          da[j] = dc * c_prev[j] * f * (1.0 - f);
          da[H + j] = dc * cc * i * (1.0 - i);
          da[2 * H + j] = dc * i * (1.0 - cc * cc);
          da[3 * H + j] = d_o * o * (1.0 - o);
          dc_next[j] = dc * f;
        }
        const double* z = tr.concat.data() + t * Z;
        k.ger({gp.weights.data(), 4 * H, Z}, da.data(), z);
        k.axpy(1.0, da.data(), gp.biases.data(), 4 * H);
        std::fill(dz.begin(), dz.end(), 0.0);
        k.gemv_t({p.weights.data(), 4 * H, Z}, da.data(), dz.data());
        std::copy(dz.begin(), dz.begin() + static_cast<std::ptrdiff_t>(H), dh_next.begin());
        std::copy(dz.begin() + static_cast<std::ptrdiff_t>(H), dz.end(),
                  dx_below.begin() + static_cast<std::ptrdiff_t>(t * p.input_size));
      }
      dh_above.swap(dx_below);
    }
  }
  return loss * inv_n;
}

}  // namespace spreadcast::deepar
