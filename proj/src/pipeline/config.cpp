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
#include <set>

#include <json.hpp>

#include "spreadcast/csv.hpp"
#include "spreadcast/error.hpp"
#include "spreadcast/pipeline.hpp"

namespace spreadcast::pipeline {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

struct SetName {
  CovariateSet set;
  std::string_view cli;
  std::string_view display;
};

constexpr std::array<SetName, 8> kSetNames{{
    {CovariateSet::kNone, "none", "NoCov"},
    {CovariateSet::kFactors, "factors", "Factors"},
    {CovariateSet::kFactorsGdelt, "factors-gdelt", "Factors-GDELT"},
    {CovariateSet::kFactorsGdeltHierarc, "factors-gdelt-hierarc", "Factors-GDELT-hierarc"},
    {CovariateSet::kFactorsGdeltPca, "factors-gdelt-pca", "Factors-GDELT-PCA"},
    {CovariateSet::kGdelt, "gdelt", "GDELT"},
    {CovariateSet::kGdeltHierarc, "gdelt-hierarc", "GDELT-hierarc"},
    {CovariateSet::kGdeltPca, "gdelt-pca", "GDELT-PCA"},
}};

const SetName& lookup(CovariateSet s) {
  for (const auto& n : kSetNames) {
    if (n.set == s) return n;
  }
  throw Error(ErrorKind::kParameter, "unknown covariate set");
}

[[noreturn]] void schema_error(const std::string& where, const std::string& what) {
  throw Error(ErrorKind::kSchema, where + ": " + what);
}

void check_keys(const json& obj, const std::string& where, std::initializer_list<std::string_view> allowed) {
  if (!obj.is_object()) schema_error(where, "expected an object");
  for (const auto& [key, value] : obj.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      schema_error(where, "unknown key \"" + key + "\"");
    }
  }
}

template <class T>
void read(const json& obj, const std::string& where, const char* key, T& out) {
  const auto it = obj.find(key);
  if (it == obj.end()) return;
  try {
    if constexpr (std::is_same_v<T, bool>) {
      if (!it->is_boolean()) throw std::invalid_argument("expected a boolean");
    } else if constexpr (std::is_arithmetic_v<T>) {
      if (!it->is_number()) throw std::invalid_argument("expected a number");
      if constexpr (std::is_unsigned_v<T>) {
        if (!it->is_number_unsigned()) throw std::invalid_argument("expected a non-negative integer");
      } else if constexpr (std::is_integral_v<T>) {
        if (!it->is_number_integer()) throw std::invalid_argument("expected an integer");
      }
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!it->is_string()) throw std::invalid_argument("expected a string");
    }
    out = it->get<T>();
  } catch (const std::exception& e) {
    schema_error(where + "." + key, e.what());
  }
}

void read_path(const json& obj, const std::string& where, const char* key, const fs::path& base,
               fs::path& out) {
  std::string text;
  read(obj, where, key, text);
  if (text.empty()) return;
  const fs::path p(text);
  out = p.is_absolute() ? p : (base / p).lexically_normal();
}

void read_date(const json& obj, const std::string& where, const char* key, Date& out) {
  std::string text;
  read(obj, where, key, text);
  if (text.empty()) return;
  try {
    out = parse_date(text);
  } catch (const Error& e) {
    schema_error(where + "." + key, e.what());
  }
}

std::vector<CovariateSet> read_sets(const json& obj, const std::string& where, const char* key,
                                    bool allow_none) {
  std::vector<CovariateSet> out;
  const auto it = obj.find(key);
  if (it == obj.end()) return out;
  if (!it->is_array()) schema_error(where + "." + key, "expected an array of covariate sets");
  for (const auto& v : *it) {
    if (!v.is_string()) schema_error(where + "." + key, "expected strings");
    CovariateSet s{};
    try {
      s = parse_covariate_set(v.get<std::string>());
    } catch (const Error& e) {
      schema_error(where + "." + key, e.what());
    }
    if (!allow_none && s == CovariateSet::kNone) {
      schema_error(where + "." + key, "\"none\" has no covariates to boost on");
    }
    if (std::find(out.begin(), out.end(), s) != out.end()) {
      schema_error(where + "." + key, "duplicate covariate set " + v.get<std::string>());
    }
    out.push_back(s);
  }
  return out;
}

std::string linkage_name(dimreduce::Linkage l) {
  switch (l) {
    case dimreduce::Linkage::kWard: return "ward";
    case dimreduce::Linkage::kSingle: return "single";
    case dimreduce::Linkage::kComplete: return "complete";
    case dimreduce::Linkage::kAverage: return "average";
  }
  return "ward";
}

std::string path_text(const fs::path& p) { return p.empty() ? std::string() : p.string(); }

ordered_json sets_json(const std::vector<CovariateSet>& sets) {
  ordered_json a = ordered_json::array();
  for (auto s : sets) a.push_back(std::string(covariate_set_name(s)));
  return a;
}

void require_file(const fs::path& p, const std::string& what) {
  if (p.empty()) throw Error(ErrorKind::kSchema, what + " is required");
  if (!fs::exists(p)) throw Error(ErrorKind::kIo, what + " not found: " + p.string());
}

}  // namespace

const std::array<CovariateSet, 8>& all_covariate_sets() {
  static const std::array<CovariateSet, 8> sets = [] {
    std::array<CovariateSet, 8> a{};
    for (std::size_t i = 0; i < a.size(); ++i) a[i] = kSetNames[i].set;
    return a;
  }();
  return sets;
}

std::string_view covariate_set_name(CovariateSet s) { return lookup(s).cli; }

CovariateSet parse_covariate_set(std::string_view name) {
  for (const auto& n : kSetNames) {
    if (n.cli == name) return n.set;
  }
  throw Error(ErrorKind::kParameter, "unknown covariate set \"" + std::string(name) + "\"");
}

std::string deepar_model_name(CovariateSet s) { return "DeepAR-" + std::string(lookup(s).display); }
std::string gbm_model_name(CovariateSet s) { return "GB-" + std::string(lookup(s).display); }

RunConfig RunConfig::from_file(const fs::path& path) {
  const std::string text = csv::read_file(path);
  return from_json(text, fs::absolute(path).parent_path());
}

RunConfig RunConfig::from_json(std::string_view text, const fs::path& base) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::kSchema, std::string("config is not valid JSON: ") + e.what());
  }
  RunConfig cfg;
  check_keys(root, "config", {"run_id", "output_dir", "seed", "t0", "threads", "stages"});
  read(root, "config", "run_id", cfg.run_id);
  read_path(root, "config", "output_dir", base, cfg.output_dir);
  read(root, "config", "seed", cfg.seed);
  read(root, "config", "t0", cfg.t0);
  read(root, "config", "threads", cfg.threads);
  if (cfg.run_id.empty()) schema_error("config.run_id", "must not be empty");

  const json stages = root.value("stages", json::object());
  check_keys(stages, "stages", {"ingest", "select", "factors", "reduce", "models", "evaluate", "shap"});
  // A stage absent from the config does not run.
  cfg.ingest.enabled = stages.contains("ingest");
  cfg.select.enabled = stages.contains("select");
  cfg.factors.enabled = stages.contains("factors");
  cfg.reduce.enabled = stages.contains("reduce");
  cfg.models.enabled = stages.contains("models");
  cfg.evaluate.enabled = stages.contains("evaluate");
  cfg.shap.enabled = stages.contains("shap");

  if (cfg.ingest.enabled) {
    const json& s = stages["ingest"];
    const std::string w = "stages.ingest";
    check_keys(s, w, {"enabled", "from", "to", "gkg_dir", "base_url", "outlets", "calendar",
                      "min_theme_keywords", "min_word_count"});
    read(s, w, "enabled", cfg.ingest.enabled);
    read_date(s, w, "from", cfg.ingest.from);
    read_date(s, w, "to", cfg.ingest.to);
    read_path(s, w, "gkg_dir", base, cfg.ingest.gkg_dir);
    read(s, w, "base_url", cfg.ingest.base_url);
    read_path(s, w, "outlets", base, cfg.ingest.outlets);
    read_path(s, w, "calendar", base, cfg.ingest.calendar);
    read(s, w, "min_theme_keywords", cfg.ingest.min_theme_keywords);
    read(s, w, "min_word_count", cfg.ingest.min_word_count);
    if (!s.contains("from") || !s.contains("to")) schema_error(w, "\"from\" and \"to\" are required");
  }
  if (cfg.select.enabled) {
    const json& s = stages["select"];
    const std::string w = "stages.select";
    check_keys(s, w, {"enabled", "exclusions", "initial_fraction", "availability_fraction",
                      "min_std_words", "corr_threshold", "category_priority"});
    auto& sel = cfg.select.selection;
    read(s, w, "enabled", cfg.select.enabled);
    read_path(s, w, "exclusions", base, cfg.select.exclusions);
    read(s, w, "initial_fraction", sel.initial_fraction);
    read(s, w, "availability_fraction", sel.availability_fraction);
    read(s, w, "min_std_words", sel.min_std_words);
    read(s, w, "corr_threshold", sel.corr_threshold);
    if (s.contains("category_priority")) {
      std::vector<std::string> names;
      read(s, w, "category_priority", names);
      sel.category_priority.clear();
      for (const auto& n : names) {
        try {
          sel.category_priority.push_back(features::Category(gkg::parse_category(n)));
        } catch (const Error& e) {
          schema_error(w + ".category_priority", e.what());
        }
      }
    }
  }
  if (cfg.factors.enabled) {
    const json& s = stages["factors"];
    const std::string w = "stages.factors";
    check_keys(s, w, {"enabled", "yields", "lambda", "target_maturity"});
    read(s, w, "enabled", cfg.factors.enabled);
    read_path(s, w, "yields", base, cfg.factors.yields);
    read(s, w, "lambda", cfg.factors.lambda);
    read(s, w, "target_maturity", cfg.factors.target_maturity);
  }
  if (cfg.reduce.enabled) {
    const json& s = stages["reduce"];
    const std::string w = "stages.reduce";
    check_keys(s, w, {"enabled", "linkage", "k_min", "k_max", "joint_clustering", "pca_components",
                      "fit_in_sample"});
    read(s, w, "enabled", cfg.reduce.enabled);
    std::string linkage = linkage_name(cfg.reduce.linkage);
    read(s, w, "linkage", linkage);
    try {
      cfg.reduce.linkage = dimreduce::parse_linkage(linkage);
    } catch (const Error& e) {
      schema_error(w + ".linkage", e.what());
    }
    read(s, w, "k_min", cfg.reduce.k_min);
    read(s, w, "k_max", cfg.reduce.k_max);
    read(s, w, "joint_clustering", cfg.reduce.joint_clustering);
    read(s, w, "pca_components", cfg.reduce.pca_components);
    read(s, w, "fit_in_sample", cfg.reduce.fit_in_sample);
    if (cfg.reduce.k_min < 2 || cfg.reduce.k_max < cfg.reduce.k_min) {
      schema_error(w, "need 2 <= k_min <= k_max");
    }
    if (cfg.reduce.pca_components == 0) schema_error(w + ".pca_components", "must be positive");
  }
  if (cfg.models.enabled) {
    const json& s = stages["models"];
    const std::string w = "stages.models";
    check_keys(s, w, {"enabled", "deepar", "gbm", "network", "retrain_stride", "samples", "grid"});
    auto& m = cfg.models;
    read(s, w, "enabled", m.enabled);
    m.deepar = read_sets(s, w, "deepar", true);
    m.gbm = read_sets(s, w, "gbm", false);
    read(s, w, "retrain_stride", m.retrain_stride);
    read(s, w, "samples", m.samples);
    if (s.contains("network")) {
      const json& n = s["network"];
      const std::string wn = w + ".network";
      check_keys(n, wn, {"num_layers", "hidden_size", "context_length", "likelihood", "epochs",
                         "learning_rate", "dropout", "weight_decay"});
      auto& net = m.network;
      read(n, wn, "num_layers", net.num_layers);
      read(n, wn, "hidden_size", net.hidden_size);
      read(n, wn, "context_length", net.context_length);
      std::string lik(deepar::likelihood_name(net.likelihood));
      read(n, wn, "likelihood", lik);
      try {
        net.likelihood = deepar::parse_likelihood(lik);
      } catch (const Error& e) {
        schema_error(wn + ".likelihood", e.what());
      }
      read(n, wn, "epochs", net.epochs);
      read(n, wn, "learning_rate", net.learning_rate);
      read(n, wn, "dropout", net.dropout);
      read(n, wn, "weight_decay", net.weight_decay);
    }
    if (s.contains("grid")) {
      const json& g = s["grid"];
      const std::string wg = w + ".grid";
      if (g.is_string()) {
        if (g.get<std::string>() != "default") schema_error(wg, "only \"default\" is a named grid");
      } else {
        check_keys(g, wg, {"depth", "learning_rate", "folds", "n_trees"});
        read(g, wg, "depth", m.grid.depth_grid);
        read(g, wg, "learning_rate", m.grid.lr_grid);
        read(g, wg, "folds", m.grid.folds);
        read(g, wg, "n_trees", m.grid.n_trees);
      }
    }
    if (m.retrain_stride == 0) schema_error(w + ".retrain_stride", "must be positive");
    if (m.samples < 2) schema_error(w + ".samples", "need at least 2 samples");
    try {
      m.network.validate();
      m.grid.validate();
    } catch (const Error& e) {
      schema_error(w, e.what());
    }
  }
  if (cfg.evaluate.enabled) {
    const json& s = stages["evaluate"];
    const std::string w = "stages.evaluate";
    check_keys(s, w, {"enabled", "quantiles", "mu", "hac_lags", "size", "pairs"});
    auto& b = cfg.evaluate.backtest;
    read(s, w, "enabled", cfg.evaluate.enabled);
    read(s, w, "quantiles", b.quantiles);
    read(s, w, "mu", b.mu);
    read(s, w, "hac_lags", b.hac_lags);
    read(s, w, "size", b.size);
    if (s.contains("pairs")) {
      const json& p = s["pairs"];
      if (p.is_string()) {
        cfg.evaluate.pair_mode = p.get<std::string>();
        if (cfg.evaluate.pair_mode != "default" && cfg.evaluate.pair_mode != "all") {
          schema_error(w + ".pairs", "expected \"default\", \"all\" or a list of [a, b] pairs");
        }
      } else if (p.is_array()) {
        cfg.evaluate.pair_mode = "list";
        for (const auto& pair : p) {
          if (!pair.is_array() || pair.size() != 2 || !pair[0].is_string() || !pair[1].is_string()) {
            schema_error(w + ".pairs", "each pair must be [\"model_a\", \"model_b\"]");
          }
          cfg.evaluate.pairs.emplace_back(pair[0].get<std::string>(), pair[1].get<std::string>());
        }
      } else {
        schema_error(w + ".pairs", "expected a string or an array");
      }
    }
  }
  cfg.evaluate.backtest.t0 = cfg.t0;
  if (cfg.evaluate.enabled) {
    try {
      cfg.evaluate.backtest.validate();
    } catch (const Error& e) {
      schema_error("stages.evaluate", e.what());
    }
  }
  if (cfg.shap.enabled) {
    const json& s = stages["shap"];
    const std::string w = "stages.shap";
    check_keys(s, w, {"enabled", "covariates", "explain_days", "coalitions"});
    read(s, w, "enabled", cfg.shap.enabled);
    std::string set(covariate_set_name(cfg.shap.covariates));
    read(s, w, "covariates", set);
    try {
      cfg.shap.covariates = parse_covariate_set(set);
    } catch (const Error& e) {
      schema_error(w + ".covariates", e.what());
    }
    if (cfg.shap.covariates == CovariateSet::kNone) schema_error(w + ".covariates", "nothing to explain");
    read(s, w, "explain_days", cfg.shap.explain_days);
    read(s, w, "coalitions", cfg.shap.coalitions);
    if (cfg.shap.explain_days == 0) schema_error(w + ".explain_days", "must be positive");
  }
  if (cfg.output_dir.empty()) cfg.output_dir = base / "runs" / cfg.run_id;
  if (cfg.t0 < 2) schema_error("config.t0", "must be at least 2");
  return cfg;
}

void RunConfig::validate() const {
  if (ingest.enabled) {
    if (ingest.gkg_dir.empty()) throw Error(ErrorKind::kSchema, "stages.ingest.gkg_dir is required");
    if (ingest.base_url.empty() && !fs::is_directory(ingest.gkg_dir)) {
      throw Error(ErrorKind::kIo, "GKG directory not found: " + ingest.gkg_dir.string());
    }
    if (!ingest.outlets.empty()) require_file(ingest.outlets, "outlet list");
    if (!ingest.calendar.empty()) require_file(ingest.calendar, "trading calendar");
    if (ingest.to < ingest.from) throw Error(ErrorKind::kSchema, "stages.ingest: \"to\" precedes \"from\"");
  }
  if (select.enabled && !select.exclusions.empty()) require_file(select.exclusions, "GCAM exclusion list");
  if (factors.enabled) require_file(factors.yields, "yield curve file");
}

std::string RunConfig::to_json() const {
  ordered_json root;
  root["run_id"] = run_id;
  root["output_dir"] = path_text(output_dir);
  root["seed"] = seed;
  root["t0"] = t0;
  root["threads"] = threads;
  ordered_json stages = ordered_json::object();
  if (ingest.enabled) {
    stages["ingest"] = {{"from", format_date(ingest.from)},
                        {"to", format_date(ingest.to)},
                        {"gkg_dir", path_text(ingest.gkg_dir)},
                        {"base_url", ingest.base_url},
                        {"outlets", path_text(ingest.outlets)},
                        {"calendar", path_text(ingest.calendar)},
                        {"min_theme_keywords", ingest.min_theme_keywords},
                        {"min_word_count", ingest.min_word_count}};
  }
  if (select.enabled) {
    const auto& s = select.selection;
    ordered_json priority = ordered_json::array();
    for (auto c : s.category_priority) priority.push_back(std::string(gkg::category_name(c)));
    stages["select"] = {{"exclusions", path_text(select.exclusions)},
                        {"initial_fraction", s.initial_fraction},
                        {"availability_fraction", s.availability_fraction},
                        {"min_std_words", s.min_std_words},
                        {"corr_threshold", s.corr_threshold},
                        {"category_priority", priority}};
  }
  if (factors.enabled) {
    stages["factors"] = {{"yields", path_text(factors.yields)},
                         {"lambda", factors.lambda},
                         {"target_maturity", factors.target_maturity}};
  }
  if (reduce.enabled) {
    stages["reduce"] = {{"linkage", linkage_name(reduce.linkage)},
                        {"k_min", reduce.k_min},
                        {"k_max", reduce.k_max},
                        {"joint_clustering", reduce.joint_clustering},
                        {"pca_components", reduce.pca_components},
                        {"fit_in_sample", reduce.fit_in_sample}};
  }
  if (models.enabled) {
    const auto& n = models.network;
    stages["models"] = {
        {"deepar", sets_json(models.deepar)},
        {"gbm", sets_json(models.gbm)},
        {"network",
         {{"num_layers", n.num_layers},
          {"hidden_size", n.hidden_size},
          {"context_length", n.context_length},
          {"likelihood", std::string(deepar::likelihood_name(n.likelihood))},
          {"epochs", n.epochs},
          {"learning_rate", n.learning_rate},
          {"dropout", n.dropout},
          {"weight_decay", n.weight_decay}}},
        {"retrain_stride", models.retrain_stride},
        {"samples", models.samples},
        {"grid",
         {{"depth", models.grid.depth_grid},
          {"learning_rate", models.grid.lr_grid},
          {"folds", models.grid.folds},
          {"n_trees", models.grid.n_trees}}}};
  }
  if (evaluate.enabled) {
    const auto& b = evaluate.backtest;
    ordered_json e = {{"quantiles", b.quantiles}, {"mu", b.mu}, {"hac_lags", b.hac_lags}, {"size", b.size}};
    if (evaluate.pair_mode == "list") {
      ordered_json pairs = ordered_json::array();
      for (const auto& [a, c] : evaluate.pairs) pairs.push_back({a, c});
      e["pairs"] = pairs;
    } else {
      e["pairs"] = evaluate.pair_mode;
    }
    stages["evaluate"] = e;
  }
  if (shap.enabled) {
    stages["shap"] = {{"covariates", std::string(covariate_set_name(shap.covariates))},
                      {"explain_days", shap.explain_days},
                      {"coalitions", shap.coalitions}};
  }
  root["stages"] = stages;
  return root.dump(2) + "\n";
}

}  // namespace spreadcast::pipeline
