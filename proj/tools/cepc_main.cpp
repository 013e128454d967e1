// Copyright 2026 The cepc Authors
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

// cepc: command-line front end. Exit status 0 on success, 2 when the input,
// configuration or data is invalid, 1 for any other failure.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cepc/coordination.hpp"
#include "cepc/data.hpp"
#include "cepc/error.hpp"
#include "cepc/experiment.hpp"
#include "cepc/io_util.hpp"
#include "cepc/metrics.hpp"
#include "cepc/reliability.hpp"
#include "cepc/trainer.hpp"

namespace fs = std::filesystem;
using namespace cepc;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitValidation = 2;

eval::PipelineConfig load_config(const std::string& path,
                                 const std::optional<std::uint64_t>& seed) {
  auto cfg = path.empty() ? eval::pipeline_config_from_json(nlohmann::json::object())
                          : eval::load_pipeline_config(path);
  if (seed) cfg.train.seed = *seed;
  return cfg;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

int cmd_gen_synth(const std::string& spec_path, const std::string& out,
                  bool binary, const std::optional<std::uint64_t>& seed) {
  auto spec = data::synth_spec_from_json(read_json(spec_path));
  if (seed) spec.seed = *seed;
  const auto manifest = data::write_synthetic(spec, out, binary);
  std::cout << "wrote " << spec.domains.size() << " domains, manifest "
            << manifest.string() << "\n";
  return 0;
}

int cmd_coordinate(const std::string& manifest, const std::string& config,
                   const std::string& target_name, const std::string& out,
                   const std::optional<std::uint64_t>& seed) {
  const auto cfg = load_config(config, seed);
  const auto domains = eval::load_domains(manifest);
  const auto& target = domains.target(target_name);
  const auto result = eval::coordinate(domains.sources, target.dataset, cfg);
  coord::save_plan(result.plan, out);
  for (const auto& [name, lambda] : result.plan.lambda_star) {
    std::cout << name << "  lambda* = " << format_double(lambda) << "\n";
  }
  std::cout << result.plan.groups.size() << " encoder group(s), "
            << result.plan.training_calls << " single-source trainings\n";
  return 0;
}

int cmd_train(const std::string& manifest, const std::string& config,
              const std::string& target_name, const std::string& plan_path,
              const std::string& reliability_path, const std::string& out,
              const std::optional<std::uint64_t>& seed) {
  const auto cfg = load_config(config, seed);
  const auto domains = eval::load_domains(manifest);
  const auto& target = domains.target(target_name).dataset;
  ensure_dir(out);

  coord::CoordinationPlan plan;
  std::vector<coord::SingleSourceRun> runs;
  if (plan_path.empty()) {
    auto result = eval::coordinate(domains.sources, target, cfg);
    plan = std::move(result.plan);
    runs = std::move(result.runs);
    coord::save_plan(plan, fs::path(out) / "plan.json");
  } else {
    plan = coord::load_plan(plan_path);
  }

  reliability::ReliabilityTable table;
  if (reliability_path.empty()) {
    const auto source_only = eval::train_source_only(domains.sources, target, cfg);
    table = eval::build_reliability(domains.sources, target, plan, runs,
                                    source_only, cfg);
    reliability::save_table_csv(table, fs::path(out) / "reliability.csv");
  } else {
    table = reliability::load_table_csv(reliability_path);
  }

  const auto result = eval::run_stage("training", [&] {
    return train::train_cepc(domains.sources, target, plan, table, cfg.train);
  });
  train::save_checkpoint(result.model, fs::path(out) / "model.ckpt");
  train::save_loss_trace(result.trace, fs::path(out) / "loss_trace.csv");
  const auto& last = result.trace.back();
  std::cout << "trained " << result.trace.size() << " steps, final loss "
            << format_double(last.total) << "; wrote " << out << "/model.ckpt\n";
  return 0;
}

int cmd_predict(const std::string& model_path, const std::string& target_path,
                const std::string& out) {
  const auto model = train::load_checkpoint(model_path);
  const auto target = data::load_dataset(target_path);
  if (target.dim() != model.encoders.front().input_width()) {
    throw DataError("target has dim " + std::to_string(target.dim()) +
                    ", model expects " +
                    std::to_string(model.encoders.front().input_width()));
  }
  const auto prediction = train::predict_majority(model, target.features);
  eval::save_predictions(target.ids, prediction, model.source_names, out);
  std::size_t positives = 0;
  for (int y : prediction.labels) positives += y == 1;
  std::cout << "predicted " << prediction.labels.size() << " documents ("
            << positives << " positive); wrote " << out << "\n";
  return 0;
}

int cmd_eval(const std::string& gold_path, const std::string& pred_path) {
  std::vector<std::string> ids;
  std::vector<int> gold;
  if (fs::path(gold_path).extension() == ".csv") {
    const auto rows = read_csv(gold_path);
    for (std::size_t i = 1; i < rows.size(); ++i) {
      if (!rows[i].empty()) ids.push_back(rows[i][0]);
    }
    gold = data::load_gold(gold_path, ids);
  } else {
    const auto ds = data::load_dataset(gold_path);
    ids = ds.ids;
    gold = data::load_gold(gold_path, ids);
  }
  const auto pred = eval::load_predictions(pred_path, ids);
  const auto c = eval::confusion(gold, pred);
  const auto s = eval::f1_from_confusion(c);
  std::cout << "documents " << gold.size() << "  tp " << c.tp << "  fp " << c.fp
            << "  fn " << c.fn << "  tn " << c.tn << "\n"
            << "F1 " << format_double(s.f1) << "  precision "
            << format_double(s.precision) << "  recall " << format_double(s.recall)
            << "\n";
  return 0;
}

int cmd_bench(const std::string& manifest, const std::string& config,
              bool ablations, bool baselines, std::size_t seeds,
              const std::optional<std::uint64_t>& seed, const std::string& out,
              const std::string& text_out) {
  if (seeds == 0) throw ConfigError("--seeds must be >= 1");
  const auto cfg = load_config(config, seed);
  const auto domains = eval::load_domains(manifest);
  std::vector<std::uint64_t> seed_list;
  for (std::size_t k = 0; k < seeds; ++k) seed_list.push_back(cfg.seed() + k);
  eval::ExperimentOptions options;
  options.ablations = ablations;
  options.baselines = baselines;
  const auto report = eval::run_bench(domains, cfg, seed_list, options);
  const std::string text = eval::render_text(report);
  if (!out.empty()) write_json(out, eval::to_json(report));
  if (!text_out.empty()) write_text(text_out, text);
  std::cout << text;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cepc: multi-source domain adaptation with coordinated encoders "
               "and paired classifiers"};
  app.require_subcommand(1);

  std::optional<std::uint64_t> seed;
  std::string manifest, config, target_name, out, plan, reliability_csv;
  std::string spec, model, target_file, gold, pred, text_out;
  bool binary = false, ablations = false, baselines = false;
  std::size_t seeds = 1;

  auto* gen = app.add_subcommand("gen-synth", "Write a synthetic domain-shift corpus");
  gen->add_option("--spec", spec, "Synthetic spec JSON")->required()->check(CLI::ExistingFile);
  gen->add_option("--out", out, "Output directory")->required();
  gen->add_flag("--binary", binary, "Write binary datasets instead of JSONL");
  gen->add_option("--seed", seed, "Override the spec seed");

  auto* co = app.add_subcommand("coordinate", "Select per-source scale factors");
  co->add_option("--manifest", manifest, "Domain manifest JSON")->required()->check(CLI::ExistingFile);
  co->add_option("--config", config, "Pipeline config JSON")->check(CLI::ExistingFile);
  co->add_option("--target", target_name, "Target domain name when the manifest has several");
  co->add_option("--out", out, "Plan JSON to write")->required();
  co->add_option("--seed", seed, "Override the config seed");

  auto* tr = app.add_subcommand("train", "Train the multi-source model");
  tr->add_option("--manifest", manifest, "Domain manifest JSON")->required()->check(CLI::ExistingFile);
  tr->add_option("--config", config, "Pipeline config JSON")->check(CLI::ExistingFile);
  tr->add_option("--target", target_name, "Target domain name when the manifest has several");
  tr->add_option("--plan", plan, "Cached coordination plan")->check(CLI::ExistingFile);
  tr->add_option("--reliability", reliability_csv, "Cached reliability table CSV")
      ->check(CLI::ExistingFile);
  tr->add_option("--out", out, "Output directory")->required();
  tr->add_option("--seed", seed, "Override the config seed");

  auto* pr = app.add_subcommand("predict", "Majority-vote labels for a target file");
  pr->add_option("--model", model, "Checkpoint")->required()->check(CLI::ExistingFile);
  pr->add_option("--target", target_file, "Dataset file (JSONL or .bin)")
      ->required()->check(CLI::ExistingFile);
  pr->add_option("--out", out, "Predictions CSV")->required();

  auto* ev = app.add_subcommand("eval", "F1, precision and recall of a predictions CSV");
  ev->add_option("--gold", gold, "Gold CSV (doc_id,label) or labeled dataset")
      ->required()->check(CLI::ExistingFile);
  ev->add_option("--pred", pred, "Predictions CSV")->required()->check(CLI::ExistingFile);

  auto* be = app.add_subcommand("bench", "Seeded experiment with optional baselines and ablations");
  be->add_option("--manifest", manifest, "Domain manifest JSON")->required()->check(CLI::ExistingFile);
  be->add_option("--config", config, "Pipeline config JSON")->check(CLI::ExistingFile);
  be->add_flag("--ablations", ablations, "Add the ablation rows");
  be->add_flag("--baselines", baselines, "Add the baseline rows");
  be->add_option("--seeds", seeds, "Number of consecutive seeds")->check(CLI::PositiveNumber);
  be->add_option("--seed", seed, "First seed (overrides the config)");
  be->add_option("--out", out, "Report JSON to write");
  be->add_option("--text", text_out, "Text table to write");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitValidation;
  }

  try {
    if (gen->parsed()) return cmd_gen_synth(spec, out, binary, seed);
    if (co->parsed()) return cmd_coordinate(manifest, config, target_name, out, seed);
    if (tr->parsed()) {
      return cmd_train(manifest, config, target_name, plan, reliability_csv, out, seed);
    }
    if (pr->parsed()) return cmd_predict(model, target_file, out);
    if (ev->parsed()) return cmd_eval(gold, pred);
    if (be->parsed()) {
      return cmd_bench(manifest, config, ablations, baselines, seeds, seed, out, text_out);
    }
  } catch (const Error& e) {
    std::cerr << "cepc: " << to_string(e.kind()) << " error: " << e.what() << "\n";
    return is_validation(e.kind()) ? kExitValidation : kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "cepc: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitRuntime;
}
