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

#include "cepc/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>
#include <unordered_map>

#include "cepc/error.hpp"
#include "cepc/io_util.hpp"

namespace cepc::eval {

using coord::CoordinationPlan;
using coord::SingleSourceRun;
using data::DomainDataset;
using nlohmann::json;

PipelineConfig pipeline_config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  static const std::set<std::string> known{
      "seed", "train", "coordination", "discriminator",
      "score_mode", "oracle_fraction", "baselines"};
  for (const auto& [key, _] : j.items()) {
    if (!known.contains(key)) throw ConfigError("config: unknown key '" + key + "'");
  }
  PipelineConfig c;
  try {
    c.train = train::train_config_from_json(j.value("train", json::object()));
    if (j.contains("seed")) c.train.seed = j.at("seed").get<std::uint64_t>();
    c.coordination =
        coord::coordination_config_from_json(j.value("coordination", json::object()));
    const json d = j.value("discriminator", json::object());
    c.discriminator.epochs = d.value("epochs", c.discriminator.epochs);
    c.discriminator.lr = d.value("lr", c.discriminator.lr);
    c.discriminator.l2 = d.value("l2", c.discriminator.l2);
    c.score_mode = reliability::score_mode_from_string(
        j.value("score_mode", std::string("full")));
    c.oracle_fraction = j.value("oracle_fraction", c.oracle_fraction);
    const json b = j.value("baselines", json::object());
    c.fixed_lambda = b.value("fixed_lambda", c.fixed_lambda);
    c.meta_target = b.value("meta_target", c.meta_target);
    c.oracle = b.value("oracle", c.oracle);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  if (c.discriminator.epochs == 0 || !(c.discriminator.lr > 0.0) ||
      !(c.discriminator.l2 >= 0.0)) {
    throw ConfigError("config: discriminator needs epochs >= 1, lr > 0, l2 >= 0");
  }
  if (!(c.oracle_fraction > 0.0 && c.oracle_fraction < 1.0)) {
    throw ConfigError("config: oracle_fraction must lie in (0, 1)");
  }
  return c;
}

json to_json(const PipelineConfig& c) {
  return {{"seed", c.train.seed},
          {"train", train::to_json(c.train)},
          {"coordination", coord::to_json(c.coordination)},
          {"discriminator",
           {{"epochs", c.discriminator.epochs},
            {"lr", c.discriminator.lr},
            {"l2", c.discriminator.l2}}},
          {"score_mode", reliability::to_string(c.score_mode)},
          {"oracle_fraction", c.oracle_fraction},
          {"baselines",
           {{"fixed_lambda", c.fixed_lambda},
            {"meta_target", c.meta_target},
            {"oracle", c.oracle}}}};
}

PipelineConfig load_pipeline_config(const std::filesystem::path& path) {
  return pipeline_config_from_json(read_json(path));
}

std::string config_hash(const PipelineConfig& cfg) {
  return hash_hex(to_json(cfg).dump());
}

const TargetDomain& Domains::target(const std::string& name) const {
  if (name.empty()) {
    if (targets.size() != 1) {
      throw ConfigError("manifest has " + std::to_string(targets.size()) +
                        " targets; name one explicitly");
    }
    return targets.front();
  }
  for (const auto& t : targets) {
    if (t.dataset.name == name) return t;
  }
  throw ConfigError("manifest has no target named '" + name + "'");
}

Domains load_domains(const std::filesystem::path& manifest_path) {
  const auto manifest = data::load_manifest(manifest_path);
  Domains d;
  for (const auto* e : manifest.sources()) d.sources.push_back(data::load_domain(*e));
  for (const auto* e : manifest.targets()) {
    TargetDomain t;
    t.dataset = data::load_domain(*e);
    if (e->gold) t.gold = data::load_gold(*e->gold, t.dataset.ids);
    d.targets.push_back(std::move(t));
  }
  if (d.sources.size() < 2) {
    throw ConfigError("manifest needs at least 2 source domains, has " +
                      std::to_string(d.sources.size()));
  }
  if (d.targets.empty()) throw ConfigError("manifest has no target domain");
  return d;
}

std::uint64_t base_run_seed(const PipelineConfig& cfg) {
  return coord::repeat_seed(cfg.seed(), 0);
}

namespace {

train::TrainConfig base_run_config(const PipelineConfig& cfg) {
  train::TrainConfig t = cfg.train;
  t.seed = base_run_seed(cfg);
  return t;
}

std::vector<std::string> names_of(std::span<const DomainDataset> sources) {
  std::vector<std::string> names;
  for (const auto& s : sources) names.push_back(s.name);
  return names;
}

}  // namespace

coord::CoordinationResult coordinate(std::span<const DomainDataset> sources,
                                     const DomainDataset& target,
                                     const PipelineConfig& cfg) {
  return run_stage("coordination", [&] {
    return coord::run_coordination(sources, target, cfg.coordination, cfg.train);
  });
}

std::vector<SingleSourceRun> train_source_only(std::span<const DomainDataset> sources,
                                               const DomainDataset& target,
                                               const PipelineConfig& cfg) {
  return run_stage("source-only", [&] {
    std::vector<SingleSourceRun> runs;
    for (const auto& s : sources) {
      runs.push_back(coord::train_single_source(s, target, 0.0, base_run_config(cfg)));
    }
    return runs;
  });
}

reliability::ReliabilityTable build_reliability(
    std::span<const DomainDataset> sources, const DomainDataset& target,
    const CoordinationPlan& plan, std::span<const SingleSourceRun> coordination_runs,
    std::span<const SingleSourceRun> source_only, const PipelineConfig& cfg) {
  return run_stage("reliability", [&] {
    if (source_only.size() != sources.size()) {
      throw ConfigError("one source-only run per source required");
    }
    const auto lambdas = plan.lambdas();
    std::vector<reliability::SourceEncodings> enc(sources.size());
    for (std::size_t i = 0; i < sources.size(); ++i) {
      enc[i].cost_source = source_only[i].source_encodings;
      enc[i].cost_target = source_only[i].target_encodings;
      const SingleSourceRun* hit = nullptr;
      for (const auto& run : coordination_runs) {
        if (run.source == sources[i].name && run.lambda == lambdas[i] &&
            run.repeat == 0 && run.target_encodings.rows() > 0) {
          hit = &run;
          break;
        }
      }
      if (hit != nullptr) {
        enc[i].capacity_source = hit->source_encodings;
        enc[i].capacity_target = hit->target_encodings;
      } else {
        // Same seed as repeat 0 of coordination, so the encodings match.
        auto run = coord::train_single_source(sources[i], target, lambdas[i],
                                              base_run_config(cfg));
        enc[i].capacity_source = std::move(run.source_encodings);
        enc[i].capacity_target = std::move(run.target_encodings);
      }
    }
    const auto names = names_of(sources);
    return reliability::compute_table(target.ids, names, enc, cfg.seed(),
                                      cfg.score_mode, cfg.discriminator);
  });
}

PipelineArtifacts run_pipeline(std::span<const DomainDataset> sources,
                               const DomainDataset& target,
                               const PipelineConfig& cfg,
                               const CoordinationPlan* cached_plan) {
  PipelineArtifacts a;
  std::vector<SingleSourceRun> runs;
  if (cached_plan != nullptr) {
    if (cached_plan->sources != names_of(sources)) {
      throw ConfigError("coordination: cached plan names other sources");
    }
    a.plan = *cached_plan;
  } else {
    auto result = coordinate(sources, target, cfg);
    a.plan = std::move(result.plan);
    runs = std::move(result.runs);
  }
  a.source_only = train_source_only(sources, target, cfg);
  a.table = build_reliability(sources, target, a.plan, runs, a.source_only, cfg);
  a.cepc = run_stage("training", [&] {
    return train::train_cepc(sources, target, a.plan, a.table, cfg.train);
  });
  a.prediction = run_stage("prediction", [&] {
    return train::predict_majority(a.cepc.model, target.features);
  });
  return a;
}

namespace {

const std::vector<int>& require_gold(const TargetDomain& target) {
  if (!target.gold) {
    throw DataError("target '" + target.dataset.name +
                    "' has no gold labels to evaluate against");
  }
  return *target.gold;
}

MetricsRow make_row(std::string name, std::string kind, const std::vector<int>& gold,
                    const std::vector<int>& pred, json details = json::object()) {
  return {std::move(name), std::move(kind), f1_metrics(gold, pred), std::move(details)};
}

std::vector<int> cepc_predict(std::span<const DomainDataset> sources,
                              const DomainDataset& target, const CoordinationPlan& plan,
                              const reliability::ReliabilityTable& table,
                              const PipelineConfig& cfg, bool paired) {
  train::CepcOptions opt;
  opt.paired = paired;
  const auto result = train::train_cepc(sources, target, plan, table, cfg.train, opt);
  return train::predict_majority(result.model, target.features).labels;
}

CoordinationPlan plan_with(std::span<const DomainDataset> sources,
                           const std::vector<double>& lambdas) {
  CoordinationPlan plan;
  plan.sources = names_of(sources);
  for (std::size_t i = 0; i < sources.size(); ++i) {
    plan.lambda_star[sources[i].name] = lambdas[i];
  }
  plan.groups = coord::group_encoders(plan.sources, plan.lambda_star);
  return plan;
}

DomainDataset pool_sources(std::span<const DomainDataset> sources) {
  DomainDataset pooled;
  pooled.name = "combined";
  pooled.role = data::Role::kSource;
  std::size_t rows = 0;
  for (const auto& s : sources) rows += s.size();
  pooled.features = Matrix(rows, sources.front().dim());
  std::size_t r = 0;
  for (const auto& s : sources) {
    for (std::size_t i = 0; i < s.size(); ++i, ++r) {
      std::copy(s.features.row(i).begin(), s.features.row(i).end(),
                pooled.features.row(r).begin());
      pooled.labels.push_back(s.labels[i]);
      pooled.ids.push_back(s.name + "/" + s.ids[i]);
    }
  }
  return pooled;
}

std::string lambda_label(double v) { return format_double(v); }

}  // namespace

std::vector<MetricsRow> run_baselines(std::span<const DomainDataset> sources,
                                      const TargetDomain& target,
                                      const PipelineArtifacts& artifacts,
                                      const PipelineConfig& cfg) {
  return run_stage("baselines", [&] {
    const auto& gold = require_gold(target);
    const auto& tgt = target.dataset;
    std::vector<MetricsRow> rows;

    std::size_t best = 0;
    for (std::size_t i = 0; i < sources.size(); ++i) {
      rows.push_back(make_row("source-only " + sources[i].name, "baseline", gold,
                              artifacts.source_only[i].pseudo_labels));
      if (rows.back().scores.f1 > rows[best].scores.f1) best = i;
    }
    {
      MetricsRow row = rows[best];
      row.name = "source-best (oracle-selected)";
      row.details = {{"selected", sources[best].name}};
      rows.push_back(std::move(row));
    }

    const DomainDataset pooled = pool_sources(sources);
    const auto combined =
        coord::train_single_source(pooled, tgt, 0.0, base_run_config(cfg), false);
    rows.push_back(make_row("source-combined", "baseline", gold, combined.pseudo_labels));

    if (cfg.fixed_lambda) {
      for (double v : cfg.coordination.grid.values) {
        const auto plan = plan_with(sources, std::vector<double>(sources.size(), v));
        rows.push_back(make_row("fixed-lambda " + lambda_label(v), "baseline", gold,
                                cepc_predict(sources, tgt, plan, artifacts.table, cfg, true),
                                {{"lambda", v}}));
      }
    }

    if (cfg.meta_target) {
      // Each source in turn is an unlabeled pseudo-target; every other
      // source scores each λ by F1 against the held-out labels.
      const auto& grid = cfg.coordination.grid.values;
      const std::size_t m = sources.size();
      std::vector<std::vector<double>> score(m, std::vector<double>(grid.size(), 0.0));
      for (std::size_t h = 0; h < m; ++h) {
        DomainDataset pseudo = data::strip_labels(sources[h]);
        pseudo.name = "meta/" + sources[h].name;
        for (std::size_t i = 0; i < m; ++i) {
          if (i == h) continue;
          for (std::size_t a = 0; a < grid.size(); ++a) {
            const auto run = coord::train_single_source(sources[i], pseudo, grid[a],
                                                        base_run_config(cfg), false);
            score[i][a] += f1_metrics(sources[h].labels, run.pseudo_labels).f1;
          }
        }
      }
      std::vector<double> chosen(m);
      json details = json::object();
      for (std::size_t i = 0; i < m; ++i) {
        const auto it = std::max_element(score[i].begin(), score[i].end());
        chosen[i] = grid[static_cast<std::size_t>(it - score[i].begin())];
        details[sources[i].name] = chosen[i];
      }
      const auto plan = plan_with(sources, chosen);
      rows.push_back(make_row("meta-target", "baseline", gold,
                              cepc_predict(sources, tgt, plan, artifacts.table, cfg, true),
                              {{"lambda", details}}));
    }

    if (cfg.oracle) {
      DomainDataset labeled = tgt;
      labeled.role = data::Role::kSource;
      labeled.labels = gold;
      RngStream rng(cfg.seed(), "oracle");
      auto [train_split, test_split] = data::split_oracle(labeled, cfg.oracle_fraction, rng);
      const auto test_gold = test_split.labels;
      const DomainDataset test_target = data::strip_labels(test_split);
      const auto run = coord::train_single_source(train_split, test_target, 0.0,
                                                  base_run_config(cfg), false);
      rows.push_back(make_row("oracle (target labels)", "baseline", test_gold,
                              run.pseudo_labels,
                              {{"train_docs", train_split.size()},
                               {"test_docs", test_split.size()}}));
    }
    return rows;
  });
}

std::vector<MetricsRow> run_ablations(std::span<const DomainDataset> sources,
                                      const TargetDomain& target,
                                      const PipelineArtifacts& artifacts,
                                      const PipelineConfig& cfg) {
  return run_stage("ablations", [&] {
    const auto& gold = require_gold(target);
    const auto& tgt = target.dataset;
    std::vector<MetricsRow> rows;
    rows.push_back(make_row(
        "w/o paired classifier", "ablation", gold,
        cepc_predict(sources, tgt, artifacts.plan, artifacts.table, cfg, false)));
    const auto cost_only =
        reliability::rescore(artifacts.table, reliability::ScoreMode::kCostOnly);
    rows.push_back(make_row("w/o classifier capacity", "ablation", gold,
                            cepc_predict(sources, tgt, artifacts.plan, cost_only, cfg, true)));
    const auto capacity_only =
        reliability::rescore(artifacts.table, reliability::ScoreMode::kCapacityOnly);
    rows.push_back(make_row("w/o transformation cost", "ablation", gold,
                            cepc_predict(sources, tgt, artifacts.plan, capacity_only, cfg, true)));
    return rows;
  });
}

ExperimentResult run_experiment(std::span<const DomainDataset> sources,
                                const TargetDomain& target, const PipelineConfig& cfg,
                                const ExperimentOptions& options,
                                const CoordinationPlan* cached_plan) {
  ExperimentResult r;
  const auto& gold = require_gold(target);
  r.artifacts = run_pipeline(sources, target.dataset, cfg, cached_plan);
  json lambdas = json::object();
  for (const auto& [k, v] : r.artifacts.plan.lambda_star) lambdas[k] = v;
  r.rows.push_back(make_row("CEPC", "cepc", gold, r.artifacts.prediction.labels,
                            {{"lambda", lambdas},
                             {"groups", r.artifacts.plan.groups},
                             {"indicator_counts", r.artifacts.table.indicator_counts()}}));
  if (options.baselines) {
    auto rows = run_baselines(sources, target, r.artifacts, cfg);
    r.rows.insert(r.rows.end(), rows.begin(), rows.end());
  }
  if (options.ablations) {
    auto rows = run_ablations(sources, target, r.artifacts, cfg);
    r.rows.insert(r.rows.end(), rows.begin(), rows.end());
  }
  return r;
}

Summary summarize(std::vector<double> values) {
  Summary s;
  s.values = std::move(values);
  if (s.values.empty()) return s;
  double sum = 0.0;
  for (double v : s.values) sum += v;
  s.mean = sum / static_cast<double>(s.values.size());
  if (s.values.size() > 1) {
    double ss = 0.0;
    for (double v : s.values) ss += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(ss / static_cast<double>(s.values.size() - 1));
  }
  return s;
}

DomainReport summarize_domain(const std::string& target,
                              const std::vector<std::vector<MetricsRow>>& per_seed,
                              std::vector<json> plans) {
  DomainReport d;
  d.target = target;
  d.plans = std::move(plans);
  if (per_seed.empty()) return d;
  for (std::size_t k = 0; k < per_seed.front().size(); ++k) {
    RowSummary row;
    row.name = per_seed.front()[k].name;
    row.kind = per_seed.front()[k].kind;
    std::vector<double> f1, p, r;
    for (const auto& rows : per_seed) {
      if (rows.size() != per_seed.front().size() || rows[k].name != row.name) {
        throw InputError("report rows differ between seeds");
      }
      f1.push_back(rows[k].scores.f1);
      p.push_back(rows[k].scores.precision);
      r.push_back(rows[k].scores.recall);
      row.details.push_back(rows[k].details);
    }
    row.f1 = summarize(std::move(f1));
    row.precision = summarize(std::move(p));
    row.recall = summarize(std::move(r));
    d.rows.push_back(std::move(row));
  }
  return d;
}

std::vector<RowSummary> average_domains(std::span<const DomainReport> domains) {
  std::vector<RowSummary> out;
  if (domains.empty()) return out;
  for (const auto& first : domains.front().rows) {
    RowSummary avg;
    avg.name = first.name;
    avg.kind = first.kind;
    const std::size_t seeds = first.f1.values.size();
    std::vector<double> f1(seeds, 0.0), p(seeds, 0.0), r(seeds, 0.0);
    std::size_t count = 0;
    for (const auto& d : domains) {
      auto it = std::find_if(d.rows.begin(), d.rows.end(),
                             [&](const RowSummary& x) { return x.name == first.name; });
      if (it == d.rows.end() || it->f1.values.size() != seeds) continue;
      for (std::size_t s = 0; s < seeds; ++s) {
        f1[s] += it->f1.values[s];
        p[s] += it->precision.values[s];
        r[s] += it->recall.values[s];
      }
      ++count;
    }
    if (count != domains.size()) continue;
    for (std::size_t s = 0; s < seeds; ++s) {
      f1[s] /= static_cast<double>(count);
      p[s] /= static_cast<double>(count);
      r[s] /= static_cast<double>(count);
    }
    avg.f1 = summarize(std::move(f1));
    avg.precision = summarize(std::move(p));
    avg.recall = summarize(std::move(r));
    out.push_back(std::move(avg));
  }
  return out;
}

namespace {

json summary_json(const Summary& s) {
  return {{"mean", s.mean}, {"std", s.std}, {"values", s.values}};
}

Summary summary_from(const json& j) {
  Summary s;
  s.mean = j.at("mean").get<double>();
  s.std = j.at("std").get<double>();
  s.values = j.at("values").get<std::vector<double>>();
  return s;
}

json rows_json(const std::vector<RowSummary>& rows) {
  json out = json::array();
  for (const auto& r : rows) {
    json row = {{"name", r.name},
                {"kind", r.kind},
                {"f1", summary_json(r.f1)},
                {"precision", summary_json(r.precision)},
                {"recall", summary_json(r.recall)}};
    if (!r.details.empty()) row["details"] = r.details;
    out.push_back(std::move(row));
  }
  return out;
}

std::vector<RowSummary> rows_from(const json& j) {
  std::vector<RowSummary> rows;
  for (const auto& r : j) {
    RowSummary row;
    row.name = r.at("name").get<std::string>();
    row.kind = r.at("kind").get<std::string>();
    row.f1 = summary_from(r.at("f1"));
    row.precision = summary_from(r.at("precision"));
    row.recall = summary_from(r.at("recall"));
    if (r.contains("details")) {
      for (const auto& d : r.at("details")) row.details.push_back(d);
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

json to_json(const MetricsReport& report) {
  json domains = json::array();
  for (const auto& d : report.domains) {
    domains.push_back({{"target", d.target}, {"rows", rows_json(d.rows)}, {"plans", d.plans}});
  }
  return {{"config_hash", report.config_hash},
          {"config", report.config},
          {"seeds", report.seeds},
          {"domains", domains},
          {"average", rows_json(report.average)}};
}

MetricsReport report_from_json(const json& j) {
  MetricsReport r;
  try {
    r.config_hash = j.at("config_hash").get<std::string>();
    r.config = j.at("config");
    r.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    for (const auto& d : j.at("domains")) {
      DomainReport dom;
      dom.target = d.at("target").get<std::string>();
      dom.rows = rows_from(d.at("rows"));
      for (const auto& p : d.value("plans", json::array())) dom.plans.push_back(p);
      r.domains.push_back(std::move(dom));
    }
    r.average = rows_from(j.at("average"));
  } catch (const json::exception& e) {
    throw FormatError(std::string("report: ") + e.what());
  }
  return r;
}

namespace {

std::string pm(const Summary& s) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f ± %.4f", s.mean, s.std);
  return buf;
}

void render_rows(std::ostringstream& os, const std::string& title,
                 const std::vector<RowSummary>& rows) {
  std::size_t name_w = 4;
  std::size_t kind_w = 4;
  for (const auto& r : rows) {
    name_w = std::max(name_w, r.name.size());
    kind_w = std::max(kind_w, r.kind.size());
  }
  auto pad = [](const std::string& s, std::size_t w) {
    return s + std::string(w > s.size() ? w - s.size() : 0, ' ');
  };
  // Display width of pm(); "±" is two bytes but one column.
  constexpr std::size_t value_w = 15;
  os << title << "\n";
  os << pad("name", name_w) << "  " << pad("kind", kind_w) << "  "
     << pad("F1", value_w) << "  " << pad("precision", value_w) << "  recall\n";
  for (const auto& r : rows) {
    os << pad(r.name, name_w) << "  " << pad(r.kind, kind_w) << "  " << pm(r.f1)
       << "  " << pm(r.precision) << "  " << pm(r.recall) << "\n";
  }
}

}  // namespace

std::string render_text(const MetricsReport& report) {
  std::ostringstream os;
  os << "config " << report.config_hash << ", seeds";
  for (auto s : report.seeds) os << ' ' << s;
  os << "\n\n";
  for (const auto& d : report.domains) {
    render_rows(os, "target " + d.target, d.rows);
    os << "\n";
  }
  render_rows(os, "average over targets", report.average);
  return os.str();
}

MetricsReport run_bench(const Domains& domains, const PipelineConfig& cfg,
                        std::span<const std::uint64_t> seeds,
                        const ExperimentOptions& options) {
  if (seeds.empty()) throw ConfigError("bench needs at least one seed");
  MetricsReport report;
  report.config = to_json(cfg);
  report.config_hash = config_hash(cfg);
  report.seeds.assign(seeds.begin(), seeds.end());
  for (const auto& target : domains.targets) {
    std::vector<std::vector<MetricsRow>> per_seed;
    std::vector<json> plans;
    for (std::uint64_t seed : seeds) {
      PipelineConfig c = cfg;
      c.train.seed = seed;
      auto result = run_experiment(domains.sources, target, c, options);
      per_seed.push_back(std::move(result.rows));
      json plan = coord::to_json(result.artifacts.plan);
      plan["seed"] = seed;
      plans.push_back(std::move(plan));
    }
    report.domains.push_back(summarize_domain(target.dataset.name, per_seed, std::move(plans)));
  }
  report.average = average_domains(report.domains);
  return report;
}

void save_predictions(const std::vector<std::string>& doc_ids,
                      const train::Prediction& prediction,
                      std::span<const std::string> sources,
                      const std::filesystem::path& path) {
  if (doc_ids.size() != prediction.labels.size()) {
    throw ShapeError("save_predictions: ids and labels differ in length");
  }
  std::ostringstream os;
  os << "doc_id,label";
  for (std::size_t c = 0; c < prediction.mean_probs.cols(); ++c) os << ",prob_" << c;
  for (const auto& s : sources) os << ",vote_" << csv_field(s);
  os << "\n";
  for (std::size_t r = 0; r < doc_ids.size(); ++r) {
    os << csv_field(doc_ids[r]) << ',' << prediction.labels[r];
    for (std::size_t c = 0; c < prediction.mean_probs.cols(); ++c) {
      os << ',' << format_float(prediction.mean_probs(r, c));
    }
    for (int v : prediction.votes[r]) os << ',' << v;
    os << "\n";
  }
  write_text(path, os.str());
}

std::vector<int> load_predictions(const std::filesystem::path& path,
                                  const std::vector<std::string>& doc_ids) {
  const auto rows = read_csv(path);
  if (rows.empty()) throw FormatError(path.string() + ": empty predictions file");
  const auto& header = rows.front();
  const auto id_col = std::find(header.begin(), header.end(), "doc_id");
  const auto label_col = std::find(header.begin(), header.end(), "label");
  if (id_col == header.end() || label_col == header.end()) {
    throw FormatError(path.string() + ": header needs doc_id and label columns");
  }
  const auto ic = static_cast<std::size_t>(id_col - header.begin());
  const auto lc = static_cast<std::size_t>(label_col - header.begin());
  std::unordered_map<std::string, int> by_id;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& row = rows[i];
    if (row.size() <= std::max(ic, lc)) {
      throw FormatError(path.string() + ":" + std::to_string(i + 1) + ": short row");
    }
    if (row[lc] != "0" && row[lc] != "1") {
      throw FormatError(path.string() + ":" + std::to_string(i + 1) +
                        ": label must be 0 or 1, got '" + row[lc] + "'");
    }
    if (!by_id.emplace(row[ic], row[lc] == "1" ? 1 : 0).second) {
      throw FormatError(path.string() + ": duplicate doc_id '" + row[ic] + "'");
    }
  }
  std::vector<int> out;
  out.reserve(doc_ids.size());
  for (const auto& id : doc_ids) {
    auto it = by_id.find(id);
    if (it == by_id.end()) throw DataError(path.string() + ": no prediction for '" + id + "'");
    out.push_back(it->second);
  }
  return out;
}

}  // namespace cepc::eval
