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

#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>

#include <json.hpp>
#include <openssl/evp.h>

#include "spreadcast/csv.hpp"
#include "spreadcast/error.hpp"
#include "spreadcast/log.hpp"
#include "spreadcast/pipeline.hpp"

namespace spreadcast::pipeline {

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot read " + path.string());
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1) {
    EVP_MD_CTX_free(ctx);
    throw Error(ErrorKind::kIo, "sha256 unavailable");
  }
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (in.gcount() > 0) EVP_DigestUpdate(ctx, buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, digest, &len);
  EVP_MD_CTX_free(ctx);
  std::string hex;
  char byte[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(byte, sizeof byte, "%02x", digest[i]);
    hex += byte;
  }
  return hex;
}

std::string Manifest::to_json() const {
  nlohmann::ordered_json j;
  j["run_id"] = run_id;
  j["status"] = status;
  j["inputs"] = input_hashes;
  j["config"] = nlohmann::ordered_json::parse(config_snapshot.empty() ? "{}" : config_snapshot);
  nlohmann::ordered_json stages_json = nlohmann::ordered_json::array();
  for (const auto& s : stages) {
    nlohmann::ordered_json e;
    e["name"] = s.name;
    e["status"] = s.status;
    e["seconds"] = s.seconds;
    e["outputs"] = s.outputs;
    if (!s.error.empty()) e["error"] = s.error;
    stages_json.push_back(e);
  }
  j["stages"] = stages_json;
  j["outputs"] = output_hashes;
  return j.dump(2) + "\n";
}

namespace {

std::string relative_to(const fs::path& p, const fs::path& root) {
  const fs::path rel = fs::relative(p, root);
  return rel.empty() ? p.string() : rel.generic_string();
}

void hash_input(Manifest& m, const fs::path& p) {
  if (!p.empty() && fs::is_regular_file(p)) m.input_hashes[fs::absolute(p).generic_string()] = sha256_file(p);
}

}  // namespace

Manifest run_pipeline(const RunConfig& cfg, const fs::path& config_path) {
  cfg.validate();
  const fs::path run_dir = cfg.output_dir;
  fs::create_directories(run_dir);

  Manifest manifest;
  manifest.run_id = cfg.run_id;
  manifest.status = "partial";
  manifest.config_snapshot = cfg.to_json();
  hash_input(manifest, config_path);
  if (cfg.ingest.enabled) {
    hash_input(manifest, cfg.ingest.outlets);
    hash_input(manifest, cfg.ingest.calendar);
  }
  if (cfg.select.enabled) hash_input(manifest, cfg.select.exclusions);
  if (cfg.factors.enabled) hash_input(manifest, cfg.factors.yields);

  const auto write_manifest = [&] { csv::write_file(run_dir / "manifest.json", manifest.to_json()); };

  struct Stage {
    std::string name;
    bool enabled;
    std::function<void(Outputs*)> body;
  };
  const std::vector<std::string> models = configured_model_names(cfg.models);
  const std::vector<Stage> stages = {
      {"ingest", cfg.ingest.enabled,
       [&](Outputs* out) {
         const IngestSummary s = stage_ingest(cfg.ingest, run_dir / "ingest", out);
         for (const auto& a : s.archives) hash_input(manifest, a);
       }},
      {"select", cfg.select.enabled,
       [&](Outputs* out) {
         stage_select(cfg.select, run_dir / "ingest", run_dir / "select",
                      run_dir / "select" / "selection_report.json", out);
       }},
      {"factors", cfg.factors.enabled, [&](Outputs* out) { stage_factors(cfg.factors, run_dir / "factors", out); }},
      {"reduce", cfg.reduce.enabled, [&](Outputs* out) { stage_reduce(cfg.reduce, run_dir, cfg.t0, out); }},
      {"models", cfg.models.enabled, [&](Outputs* out) { stage_models(cfg, run_dir, out); }},
      {"evaluate", cfg.evaluate.enabled,
       [&](Outputs* out) { stage_evaluate(cfg.evaluate, run_dir / "factors" / "target.csv", run_dir / "models",
                        run_dir / "evaluate", models, out); }},
      {"shap", cfg.shap.enabled, [&](Outputs* out) { stage_shap(cfg, run_dir, out); }},
  };

  for (const auto& stage : stages) {
    StageRecord rec;
    rec.name = stage.name;
    if (!stage.enabled) {
      rec.status = "skipped";
      manifest.stages.push_back(rec);
      continue;
    }
    log::info("stage " + stage.name + " started");
    const auto t0 = std::chrono::steady_clock::now();
    Outputs outputs;
    try {
      stage.body(&outputs);
    } catch (const std::exception& e) {
      rec.status = "failed";
      rec.error = e.what();
      rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      manifest.stages.push_back(rec);
      write_manifest();
      log::error("stage " + stage.name + " failed: " + e.what());
      throw;
    }
    rec.status = "ok";
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    for (const auto& p : outputs) {
      const std::string rel = relative_to(p, run_dir);
      rec.outputs.push_back(rel);
      manifest.output_hashes[rel] = sha256_file(p);
    }
    manifest.stages.push_back(rec);
    write_manifest();
  }
  manifest.status = "complete";
  write_manifest();
  return manifest;
}

}  // namespace spreadcast::pipeline
