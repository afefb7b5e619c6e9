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

// spreadcast: command-line front end.
//
// Every subcommand maps onto one pipeline stage; `run` executes a whole
// configuration. Data goes to files, diagnostics to stderr.
//
// Exit codes: 0 ok, 1 user error (bad arguments, config, inputs), 2 internal
// error (numerical failure, unexpected exception).

#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "spreadcast/csv.hpp"
#include "spreadcast/deepar.hpp"
#include "spreadcast/error.hpp"
#include "spreadcast/log.hpp"
#include "spreadcast/pipeline.hpp"
#include "spreadcast/synthetic.hpp"

namespace {

namespace fs = std::filesystem;
using namespace spreadcast;
using pipeline::RunConfig;

constexpr int kOk = 0;
constexpr int kUserError = 1;
constexpr int kInternalError = 2;

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kParse:
    case ErrorKind::kDomain:
    case ErrorKind::kAlignment:
    case ErrorKind::kParameter:
    case ErrorKind::kOutOfCalendar:
    case ErrorKind::kIo:
    case ErrorKind::kSchema:
    case ErrorKind::kNetwork:
      return kUserError;
    case ErrorKind::kSingularFit:
    case ErrorKind::kDegenerateScale:
    case ErrorKind::kDivergence:
    case ErrorKind::kUndefined:
      return kInternalError;
  }
  return kInternalError;
}

struct Globals {
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string config;
  std::size_t threads = 0;
  bool verbose = false;
  bool quiet = false;
};

// The config file, when given, supplies model and evaluation settings to
// the single-stage subcommands; flags override it.
RunConfig base_config(const Globals& g) {
  RunConfig cfg;
  if (!g.config.empty()) cfg = RunConfig::from_file(g.config);
  if (g.seed) cfg.seed = *g.seed;
  if (g.threads) cfg.threads = g.threads;
  return cfg;
}

fs::path require_out(const Globals& g, const std::string& sub) {
  if (g.out.empty()) throw Error(ErrorKind::kParameter, sub + ": --out is required");
  return g.out;
}

std::vector<double> parse_quantiles(const std::string& text) {
  std::vector<double> q;
  for (auto part : csv::split(text, ',')) q.push_back(csv::parse_double(part));
  return q;
}

std::vector<std::string> parse_names(const std::string& text) {
  std::vector<std::string> out;
  for (auto part : csv::split(text, ',')) {
    if (!part.empty()) out.emplace_back(part);
  }
  return out;
}

void print_outputs(const pipeline::Outputs& outputs) {
  for (const auto& p : outputs) log::info("wrote " + p.string());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Probabilistic forecasting of the Italian-German 10-year spread"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--seed", g.seed, "Global random seed");
  app.add_option("--out", g.out, "Output directory");
  app.add_option("--config", g.config, "Run configuration (JSON)")->check(CLI::ExistingFile);
  app.add_option("--threads", g.threads, "Worker threads (0: all cores)");
  app.add_flag("-v,--verbose", g.verbose, "Debug logging");
  app.add_flag("-q,--quiet", g.quiet, "Warnings and errors only");

  // synth
  auto* synth = app.add_subcommand("synth", "Write the synthetic desk-scale dataset and a run config");
  synthetic::DatasetConfig synth_cfg;
  std::string synth_config_out;
  synth->add_option("--days", synth_cfg.trading_days, "Trading days")->capture_default_str();
  synth->add_option("--articles-per-day", synth_cfg.articles_per_day)->capture_default_str();
  synth->add_option("--write-config", synth_config_out, "Also write a run config here");

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Aggregate GKG archives into daily features");
  std::string from, to, outlets, calendar, gkg_dir, base_url;
  ingest->add_option("--from", from, "First day (YYYY-MM-DD)")->required();
  ingest->add_option("--to", to, "Last day, inclusive")->required();
  ingest->add_option("--outlets", outlets, "Outlet allow-list")->check(CLI::ExistingFile);
  ingest->add_option("--calendar", calendar, "Trading calendar")->check(CLI::ExistingFile);
  ingest->add_option("--gkg-dir", gkg_dir, "Archive directory (cache when fetching)")->required();
  ingest->add_option("--base-url", base_url, "Fetch missing 15-minute archives from here");

  // select
  auto* select = app.add_subcommand("select", "Run the feature-selection funnel");
  std::string select_in, select_report;
  select->add_option("--in", select_in, "Ingest output directory")->required()->check(CLI::ExistingDirectory);
  select->add_option("--report", select_report, "Selection report JSON");

  // factors
  auto* factors = app.add_subcommand("factors", "Fit Nelson-Siegel factors and build the target");
  std::string yields;
  double lambda = term_structure::kDefaultLambda;
  double target_maturity = 120.0;
  factors->add_option("--yields", yields, "Yield CSV")->required()->check(CLI::ExistingFile);
  factors->add_option("--lambda", lambda)->capture_default_str();
  factors->add_option("--target-maturity", target_maturity, "Months")->capture_default_str();

  // reduce
  auto* reduce = app.add_subcommand("reduce", "Cluster or project the selected features");
  std::string method, reduce_in;
  std::optional<std::size_t> reduce_t0;
  reduce->add_option("--method", method)->required()->check(CLI::IsMember({"hierarc", "pca"}));
  reduce->add_option("--in", reduce_in, "Selected feature directory")->required()->check(CLI::ExistingDirectory);
  reduce->add_option("--t0", reduce_t0, "Rows used for fitting");

  // train / forecast / gbm share the run-directory inputs.
  std::string run_dir, covariates, model_path;
  std::optional<std::size_t> t0_flag;
  const std::vector<std::string> set_names = {"none", "factors", "factors-gdelt", "factors-gdelt-hierarc",
                                              "factors-gdelt-pca", "gdelt", "gdelt-hierarc", "gdelt-pca"};
  auto add_model_inputs = [&](CLI::App* sub) {
    sub->add_option("--run", run_dir, "Run directory with factors/ and select/")
        ->required()
        ->check(CLI::ExistingDirectory);
    sub->add_option("--covariates", covariates)->required()->check(CLI::IsMember(set_names));
    sub->add_option("--t0", t0_flag, "Training window length");
  };
  auto* train = app.add_subcommand("train", "Train one DeepAR model on the first window");
  add_model_inputs(train);
  auto* forecast = app.add_subcommand("forecast", "Rolling DeepAR forecasts, or one-step forecasts from --model");
  add_model_inputs(forecast);
  forecast->add_option("--model", model_path, "Checkpoint from `train`")->check(CLI::ExistingFile);
  auto* gbm_cmd = app.add_subcommand("gbm", "Gradient-boosting comparator with grid search");
  add_model_inputs(gbm_cmd);
  std::string grid = "default";
  gbm_cmd->add_option("--grid", grid)->check(CLI::IsMember({"default"}))->capture_default_str();

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "Backtest scores and pairwise tests");
  std::string models_arg, quantiles_arg = "0.1,0.3,0.5,0.7,0.9", pairs_arg = "default", forecasts_dir;
  double mu = 0.30;
  evaluate->add_option("--run", run_dir, "Run directory")->required()->check(CLI::ExistingDirectory);
  evaluate->add_option("--models", models_arg, "Comma-separated model names")->required();
  evaluate->add_option("--quantiles", quantiles_arg)->capture_default_str();
  evaluate->add_option("--mu", mu)->capture_default_str();
  evaluate->add_option("--pairs", pairs_arg, "default | all")->check(CLI::IsMember({"default", "all"}));
  evaluate->add_option("--forecasts", forecasts_dir, "Forecast directory (default <run>/models)");
  evaluate->add_option("--t0", t0_flag, "First out-of-sample index");

  // run
  auto* run = app.add_subcommand("run", "Execute every configured stage");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUserError;
  }
  log::set_level(g.verbose ? log::Level::kDebug : g.quiet ? log::Level::kWarn : log::Level::kInfo);

  try {
    pipeline::Outputs outputs;
    if (synth->parsed()) {
      if (g.seed) synth_cfg.seed = *g.seed;
      const fs::path out = require_out(g, "synth");
      const auto files = synthetic::write_dataset(out, synth_cfg);
      if (!synth_config_out.empty()) {
        const fs::path cfg_path = fs::absolute(synth_config_out);
        fs::create_directories(cfg_path.parent_path());
        csv::write_file(cfg_path, synthetic::desk_config_json(files, cfg_path.parent_path()));
        log::info("wrote " + cfg_path.string());
      }
      log::info("synthetic dataset " + format_date(files.first) + " .. " + format_date(files.last) + " in " +
                out.string());
    } else if (ingest->parsed()) {
      pipeline::IngestConfig ic;
      ic.from = parse_date(from);
      ic.to = parse_date(to);
      ic.outlets = outlets;
      ic.calendar = calendar;
      ic.gkg_dir = gkg_dir;
      ic.base_url = base_url;
      if (!g.config.empty()) {
        const RunConfig rc = RunConfig::from_file(g.config);
        ic.min_theme_keywords = rc.ingest.min_theme_keywords;
        ic.min_word_count = rc.ingest.min_word_count;
      }
      pipeline::stage_ingest(ic, require_out(g, "ingest"), &outputs);
    } else if (select->parsed()) {
      const RunConfig rc = base_config(g);
      const fs::path out = require_out(g, "select");
      const fs::path report = select_report.empty() ? out / "selection_report.json" : fs::path(select_report);
      pipeline::stage_select(rc.select, select_in, out, report, &outputs);
    } else if (factors->parsed()) {
      pipeline::FactorsConfig fc;
      fc.yields = yields;
      fc.lambda = lambda;
      fc.target_maturity = target_maturity;
      pipeline::stage_factors(fc, require_out(g, "factors"), &outputs);
    } else if (reduce->parsed()) {
      const RunConfig rc = base_config(g);
      const std::size_t t0 = reduce_t0 ? *reduce_t0 : rc.t0;
      pipeline::reduce_feature_dir(rc.reduce, reduce_in, require_out(g, "reduce"), method == "hierarc",
                                   method == "pca", t0, &outputs);
    } else if (train->parsed() || forecast->parsed() || gbm_cmd->parsed()) {
      const RunConfig rc = base_config(g);
      const std::size_t t0 = t0_flag ? *t0_flag : rc.t0;
      const auto set = pipeline::parse_covariate_set(covariates);
      const auto inputs = pipeline::load_inputs(run_dir, t0);
      for (const auto& w : inputs.warnings) log::warn(w);
      const auto red = pipeline::reduce_inputs(inputs, rc.reduce, pipeline::fit_rows(rc.reduce, inputs, t0));
      const fs::path out = require_out(g, train->parsed() ? "train" : forecast->parsed() ? "forecast" : "gbm");
      const auto& quantiles = rc.evaluate.backtest.quantiles;
      if (train->parsed()) {
        const auto cov = pipeline::covariates_for(set, inputs, red);
        if (inputs.target.size() < t0) throw Error(ErrorKind::kParameter, "train: series shorter than t0");
        deepar::SeriesDataset data{inputs.target, cov.values};
        deepar::NetworkConfig net = rc.models.network;
        net.seed = rc.seed;
        const auto model = deepar::train(data.slice(0, t0), net);
        fs::create_directories(out);
        const std::string name = pipeline::deepar_model_name(set);
        csv::write_file(out / ("model_" + name + ".json"), deepar::model_to_json(model));
        deepar::write_loss_trace(out / ("loss_" + name + ".csv"), model.loss_trace);
        outputs = {out / ("model_" + name + ".json"), out / ("loss_" + name + ".csv")};
      } else if (forecast->parsed() && !model_path.empty()) {
        const auto model = deepar::model_from_json(csv::read_file(model_path));
        const auto cov = pipeline::covariates_for(set, inputs, red);
        if (model.n_covariates != static_cast<std::size_t>(cov.values.cols())) {
          throw Error(ErrorKind::kParameter, "checkpoint expects " + std::to_string(model.n_covariates) +
                                                 " covariates, the set has " + std::to_string(cov.values.cols()));
        }
        const std::size_t L = model.config.context_length;
        const std::size_t n = inputs.target.size();
        const std::size_t start = std::max(t0, L);
        pipeline::ForecastTable table;
        table.quantiles = quantiles;
        table.values.resize(static_cast<Eigen::Index>(n > start ? n - start : 0),
                            static_cast<Eigen::Index>(quantiles.size()));
        for (std::size_t t = start; t < n; ++t) {
          const std::span<const double> history(inputs.target.data() + (t - L), L);
          const Eigen::MatrixXd ctx = cov.values.middleRows(static_cast<Eigen::Index>(t - L),
                                                            static_cast<Eigen::Index>(L + 1));
          const auto dist = deepar::forecast_one_step(model, history, ctx, rc.models.samples, rc.seed + t);
          table.indices.push_back(t);
          table.dates.push_back(format_date(inputs.days[t]));
          for (std::size_t j = 0; j < quantiles.size(); ++j) {
            table.values(static_cast<Eigen::Index>(t - start), static_cast<Eigen::Index>(j)) =
                dist.quantile(quantiles[j]);
          }
        }
        fs::create_directories(out);
        const fs::path p = out / ("forecasts_" + pipeline::deepar_model_name(set) + ".csv");
        pipeline::write_forecast_table(p, table);
        outputs.push_back(p);
      } else if (forecast->parsed()) {
        pipeline::run_deepar(rc.models, set, inputs, red, t0, rc.seed, rc.threads, quantiles, out, &outputs);
      } else {
        pipeline::run_gbm(rc.models, set, inputs, red, t0, rc.threads, quantiles, out, &outputs);
      }
    } else if (evaluate->parsed()) {
      RunConfig rc = base_config(g);
      pipeline::EvaluateConfig ec = rc.evaluate;
      ec.backtest.t0 = t0_flag ? *t0_flag : rc.t0;
      ec.backtest.quantiles = parse_quantiles(quantiles_arg);
      ec.backtest.mu = mu;
      ec.pair_mode = pairs_arg;
      ec.backtest.validate();
      const fs::path rd(run_dir);
      const fs::path fdir = forecasts_dir.empty() ? rd / "models" : fs::path(forecasts_dir);
      const fs::path out = g.out.empty() ? rd / "evaluate" : fs::path(g.out);
      pipeline::stage_evaluate(ec, rd / "factors" / "target.csv", fdir, out, parse_names(models_arg), &outputs);
    } else if (run->parsed()) {
      if (g.config.empty()) throw Error(ErrorKind::kParameter, "run: --config is required");
      RunConfig rc = base_config(g);
      if (!g.out.empty()) rc.output_dir = fs::absolute(g.out);
      const auto manifest = pipeline::run_pipeline(rc, g.config);
      log::info("run " + manifest.run_id + " " + manifest.status + "; manifest at " +
                (rc.output_dir / "manifest.json").string());
    }
    print_outputs(outputs);
  } catch (const Error& e) {
    log::error(std::string(to_string(e.kind())) + ": " + e.what());
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    log::error(std::string("internal: ") + e.what());
    return kInternalError;
  }
  return kOk;
}
