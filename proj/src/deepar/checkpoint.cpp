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

#include <bit>
#include <cstring>

#include <json.hpp>
#include <openssl/evp.h>

#include "spreadcast/deepar.hpp"
#include "spreadcast/error.hpp"

namespace spreadcast::deepar {
namespace {

using nlohmann::json;

static_assert(std::endian::native == std::endian::little, "checkpoints assume little-endian doubles");

std::string encode(std::span<const double> values) {
  const std::size_t bytes = values.size() * sizeof(double);
  std::string out(4 * ((bytes + 2) / 3), '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                reinterpret_cast<const unsigned char*>(values.data()), static_cast<int>(bytes));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

std::vector<double> decode(const std::string& text, std::size_t expected) {
  std::string raw(3 * text.size() / 4 + 3, '\0');
  const int n = EVP_DecodeBlock(reinterpret_cast<unsigned char*>(raw.data()),
                                reinterpret_cast<const unsigned char*>(text.data()), static_cast<int>(text.size()));
  if (n < 0) throw Error(ErrorKind::kSchema, "checkpoint tensor is not valid base64");
  // EVP_DecodeBlock keeps padding bytes; the expected length trims them.
  if (static_cast<std::size_t>(n) < expected * sizeof(double)) {
    throw Error(ErrorKind::kSchema, "checkpoint tensor is shorter than its declared shape");
  }
  std::vector<double> out(expected);
  std::memcpy(out.data(), raw.data(), expected * sizeof(double));
  return out;
}

}  // namespace

std::string model_to_json(const DeepArModel& model) {
  const NetworkConfig& c = model.config;
  json j;
  j["format"] = "spreadcast-deepar-v1";
  j["config"] = {{"num_layers", c.num_layers},       {"hidden_size", c.hidden_size},
                 {"context_length", c.context_length}, {"likelihood", std::string(likelihood_name(c.likelihood))},
                 {"epochs", c.epochs},               {"learning_rate", c.learning_rate},
                 {"adam_beta1", c.adam_beta1},       {"adam_beta2", c.adam_beta2},
                 {"adam_epsilon", c.adam_epsilon},   {"dropout", c.dropout},
                 {"weight_decay", c.weight_decay},   {"seed", c.seed}};
  j["n_covariates"] = model.n_covariates;
  j["scaling"] = {{"target_mean", model.scaling.target_mean},
                  {"target_scale", model.scaling.target_scale},
                  {"covariate_mean", model.scaling.covariate_mean},
                  {"covariate_scale", model.scaling.covariate_scale}};
  json tensors = json::array();
  for (auto t : model.params.tensors()) tensors.push_back({{"size", t.size()}, {"data", encode(t)}});
  j["tensors"] = tensors;
  j["loss_trace"] = model.loss_trace;
  return j.dump(1);
}

DeepArModel model_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kSchema, std::string("checkpoint is not valid JSON: ") + e.what());
  }
  try {
    if (j.at("format") != "spreadcast-deepar-v1") throw Error(ErrorKind::kSchema, "unknown checkpoint format");
    DeepArModel m;
    const json& c = j.at("config");
    m.config.num_layers = c.at("num_layers");
    m.config.hidden_size = c.at("hidden_size");
    m.config.context_length = c.at("context_length");
    m.config.likelihood = parse_likelihood(c.at("likelihood").get<std::string>());
    m.config.epochs = c.at("epochs");
    m.config.learning_rate = c.at("learning_rate");
    m.config.adam_beta1 = c.at("adam_beta1");
    m.config.adam_beta2 = c.at("adam_beta2");
    m.config.adam_epsilon = c.at("adam_epsilon");
    m.config.dropout = c.at("dropout");
    m.config.weight_decay = c.at("weight_decay");
    m.config.seed = c.at("seed");
    m.config.validate();
    m.n_covariates = j.at("n_covariates");
    const json& s = j.at("scaling");
    m.scaling.target_mean = s.at("target_mean");
    m.scaling.target_scale = s.at("target_scale");
    m.scaling.covariate_mean = s.at("covariate_mean").get<std::vector<double>>();
    m.scaling.covariate_scale = s.at("covariate_scale").get<std::vector<double>>();
    if (m.scaling.covariate_mean.size() != m.n_covariates || m.scaling.covariate_scale.size() != m.n_covariates) {
      throw Error(ErrorKind::kSchema, "checkpoint scaling does not match covariate count");
    }
    m.params = initialize_params(m.config, 1 + m.n_covariates, 0);
    auto tensors = m.params.tensors();
    const json& jt = j.at("tensors");
    if (jt.size() != tensors.size()) throw Error(ErrorKind::kSchema, "checkpoint tensor count mismatch");
    for (std::size_t k = 0; k < tensors.size(); ++k) {
      const std::size_t size = jt[k].at("size");
      if (size != tensors[k].size()) throw Error(ErrorKind::kSchema, "checkpoint tensor shape mismatch");
      const auto values = decode(jt[k].at("data").get<std::string>(), size);
      std::copy(values.begin(), values.end(), tensors[k].begin());
    }
    m.loss_trace = j.at("loss_trace").get<std::vector<double>>();
    return m;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kSchema, std::string("malformed checkpoint: ") + e.what());
  }
}

}  // namespace spreadcast::deepar
