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

#include "cepc/coordination.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "cepc/error.hpp"
#include "cepc/io_util.hpp"
#include "cepc/metrics.hpp"
#include "cepc/rng.hpp"

namespace cepc::coord {

using data::DomainDataset;
using nlohmann::json;

void LambdaGrid::validate() const {
  if (values.empty()) throw ConfigError("lambda grid is empty");
  std::set<double> seen;
  for (double v : values) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw ConfigError("lambda grid values must be finite and > 0");
    }
    if (!seen.insert(v).second) {
      throw ConfigError("lambda grid has duplicate value " + format_double(v));
    }
  }
}

std::size_t LambdaGrid::index_of(double lambda) const {
  auto it = std::find(values.begin(), values.end(), lambda);
  if (it == values.end()) {
    throw ConfigError("lambda " + format_double(lambda) + " is not on the grid");
  }
  return static_cast<std::size_t>(it - values.begin());
}

std::vector<double> label_distribution(std::span<const int> labels,
                                       std::size_t num_classes) {
  if (labels.empty()) throw DataError("label_distribution: no labels");
  std::vector<double> dist(num_classes, 0.0);
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= num_classes) {
      throw InputError("label_distribution: label " + std::to_string(y) +
                       " out of range");
    }
    dist[static_cast<std::size_t>(y)] += 1.0;
  }
  for (double& d : dist) d /= static_cast<double>(labels.size());
  return dist;
}

SingleSourceRun train_single_source(const DomainDataset& source,
                                    const DomainDataset& target, double lambda,
                                    const train::TrainConfig& cfg,
                                    bool keep_encodings) {
  if (source.size() == 0) throw DataError("source '" + source.name + "' is empty");
  if (target.size() == 0) throw DataError("target '" + target.name + "' is empty");
  const std::span<const DomainDataset> one(&source, 1);
  train::StepOptions options;
  options.use_divergence = false;
  options.use_medium = false;
  auto result = train::run_training(one, target, {0}, {lambda}, {}, options, cfg);
  const auto& model = result.model;

  SingleSourceRun run;
  run.source = source.name;
  run.lambda = lambda;
  run.seed = cfg.seed;
  const auto tgt_enc = nn::mlp_forward(model.encoders[0], target.features);
  const auto probs = nn::mlp_forward(model.classifiers[0], tgt_enc.outputs);
  run.pseudo_labels = nn::argmax_rows(probs.outputs);
  run.target_distribution = label_distribution(run.pseudo_labels, model.num_classes);
  run.source_distribution = label_distribution(source.labels, model.num_classes);
  run.js_to_source = js_distance(run.source_distribution, run.target_distribution);
  if (keep_encodings) {
    run.source_encodings = nn::mlp_forward(model.encoders[0], source.features).outputs;
    run.target_encodings = tgt_enc.outputs;
  }
  run.trace = std::move(result.trace);
  return run;
}

double pairwise_agreement(std::span<const std::vector<int>> label_sets) {
  if (label_sets.size() < 2) {
    throw InputError("pairwise_agreement needs at least 2 label sets");
  }
  double corr = 0.0;
  for (std::size_t i = 0; i < label_sets.size(); ++i) {
    for (std::size_t j = 0; j < label_sets.size(); ++j) {
      if (i == j) continue;
      corr += eval::f1_metrics(label_sets[i], label_sets[j]).f1;
    }
  }
  return corr;
}

namespace {

void check_distribution(std::span<const double> p, const char* which) {
  double sum = 0.0;
  for (double v : p) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw InputError(std::string("js_distance: ") + which +
                       " has a negative or non-finite entry");
    }
    sum += v;
  }
  if (std::abs(sum - 1.0) > 1e-6) {
    throw InputError(std::string("js_distance: ") + which + " sums to " +
                     format_double(sum));
  }
}

double kl_base2(std::span<const double> p, std::span<const double> m) {
  double kl = 0.0;
  for (std::size_t j = 0; j < p.size(); ++j) {
    if (p[j] > 0.0) kl += p[j] * std::log2(p[j] / m[j]);
  }
  return kl;
}

}  // namespace

double js_distance(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size() || p.empty()) {
    throw InputError("js_distance: distributions differ in length");
  }
  check_distribution(p, "p");
  check_distribution(q, "q");
  std::vector<double> m(p.size());
  for (std::size_t j = 0; j < p.size(); ++j) m[j] = 0.5 * (p[j] + q[j]);
  const double jsd = 0.5 * kl_base2(p, m) + 0.5 * kl_base2(q, m);
  return std::sqrt(std::clamp(jsd, 0.0, 1.0));
}

std::vector<std::size_t> CoordinationPlan::group_of() const {
  std::vector<std::size_t> out(sources.size(), groups.size());
  for (std::size_t g = 0; g < groups.size(); ++g) {
    for (const auto& name : groups[g]) {
      auto it = std::find(sources.begin(), sources.end(), name);
      if (it == sources.end()) {
        throw ConfigError("plan group names unknown source '" + name + "'");
      }
      out[static_cast<std::size_t>(it - sources.begin())] = g;
    }
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (out[i] == groups.size()) {
      throw ConfigError("plan leaves source '" + sources[i] + "' ungrouped");
    }
  }
  return out;
}

std::vector<double> CoordinationPlan::lambdas() const {
  std::vector<double> out;
  for (const auto& s : sources) {
    auto it = lambda_star.find(s);
    if (it == lambda_star.end()) {
      throw ConfigError("plan has no scale factor for '" + s + "'");
    }
    out.push_back(it->second);
  }
  return out;
}

std::vector<std::vector<std::string>> group_encoders(
    std::span<const std::string> sources,
    const std::map<std::string, double>& lambda_star) {
  std::vector<std::vector<std::string>> groups;
  std::vector<double> keys;
  for (const auto& s : sources) {
    auto it = lambda_star.find(s);
    if (it == lambda_star.end()) {
      throw ConfigError("no scale factor for source '" + s + "'");
    }
    auto k = std::find(keys.begin(), keys.end(), it->second);
    if (k == keys.end()) {
      keys.push_back(it->second);
      groups.push_back({s});
    } else {
      groups[static_cast<std::size_t>(k - keys.begin())].push_back(s);
    }
  }
  return groups;
}

CoordinationPlan select_lambdas(std::span<const SingleSourceRun> runs,
                                std::span<const std::string> sources,
                                const LambdaGrid& grid, std::size_t repeats,
                                const SelectOptions& options) {
  grid.validate();
  if (sources.empty()) throw ConfigError("select_lambdas: no sources");
  if (repeats == 0) throw ConfigError("select_lambdas: repeats must be >= 1");
  const std::size_t m = sources.size();
  const std::size_t g = grid.values.size();

  // cell[s][a][r] -> run
  std::vector<std::vector<std::vector<const SingleSourceRun*>>> cell(
      m, std::vector<std::vector<const SingleSourceRun*>>(
             g, std::vector<const SingleSourceRun*>(repeats, nullptr)));
  for (const auto& run : runs) {
    auto s = std::find(sources.begin(), sources.end(), run.source);
    if (s == sources.end() || run.repeat >= repeats) continue;
    auto a = std::find(grid.values.begin(), grid.values.end(), run.lambda);
    if (a == grid.values.end()) continue;
    cell[static_cast<std::size_t>(s - sources.begin())]
        [static_cast<std::size_t>(a - grid.values.begin())][run.repeat] = &run;
  }
  std::size_t n_t = 0;
  for (std::size_t s = 0; s < m; ++s) {
    for (std::size_t a = 0; a < g; ++a) {
      for (std::size_t r = 0; r < repeats; ++r) {
        const auto* run = cell[s][a][r];
        if (run == nullptr) {
          throw ConfigError("select_lambdas: missing cell (" + sources[s] +
                            ", " + format_double(grid.values[a]) +
                            ", repeat " + std::to_string(r) + ")");
        }
        if (n_t == 0) n_t = run->pseudo_labels.size();
        if (run->pseudo_labels.size() != n_t) {
          throw InputError("select_lambdas: pseudo-label lengths differ");
        }
      }
    }
  }

  CoordinationPlan plan;
  plan.sources.assign(sources.begin(), sources.end());
  plan.grid = grid.values;
  plan.repeats = repeats;
  for (std::size_t r = 0; r < repeats; ++r) plan.seeds.push_back(cell[0][0][r]->seed);

  // JS order per source, averaged over repeats; ties keep grid order.
  std::vector<std::vector<std::size_t>> order(m);
  for (std::size_t s = 0; s < m; ++s) {
    std::vector<double> js(g, 0.0);
    for (std::size_t a = 0; a < g; ++a) {
      CellStats stats;
      stats.source = sources[s];
      stats.lambda = grid.values[a];
      for (std::size_t r = 0; r < repeats; ++r) {
        stats.js_per_repeat.push_back(cell[s][a][r]->js_to_source);
        js[a] += cell[s][a][r]->js_to_source;
      }
      js[a] /= static_cast<double>(repeats);
      stats.js_mean = js[a];
      plan.cells.push_back(std::move(stats));
    }
    order[s].resize(g);
    std::iota(order[s].begin(), order[s].end(), std::size_t{0});
    std::stable_sort(order[s].begin(), order[s].end(),
                     [&](std::size_t x, std::size_t y) { return js[x] < js[y]; });
  }

  // f1[s][a][t][b]: repeat-averaged F1 of (s at a) as gold vs (t at b).
  std::vector<double> f1(m * g * m * g, 0.0);
  auto f1_at = [&](std::size_t s, std::size_t a, std::size_t t, std::size_t b) -> double& {
    return f1[((s * g + a) * m + t) * g + b];
  };
  for (std::size_t s = 0; s < m; ++s) {
    for (std::size_t t = 0; t < m; ++t) {
      if (s == t) continue;
      for (std::size_t a = 0; a < g; ++a) {
        for (std::size_t b = 0; b < g; ++b) {
          double sum = 0.0;
          for (std::size_t r = 0; r < repeats; ++r) {
            sum += eval::f1_metrics(cell[s][a][r]->pseudo_labels,
                                    cell[t][b][r]->pseudo_labels).f1;
          }
          f1_at(s, a, t, b) = sum / static_cast<double>(repeats);
        }
      }
    }
  }
  const double norm = m >= 2 ? static_cast<double>(m * (m - 1)) : 1.0;
  std::vector<std::size_t> pos(m, 0);
  auto corr = [&](const std::vector<std::size_t>& p) {
    double c = 0.0;
    for (std::size_t s = 0; s < m; ++s) {
      for (std::size_t t = 0; t < m; ++t) {
        if (s != t) c += f1_at(s, order[s][p[s]], t, order[t][p[t]]);
      }
    }
    return c / norm;
  };

  double current = corr(pos);
  plan.corr_initial = current;
  bool changed = m >= 2;
  while (changed) {
    changed = false;
    ++plan.passes;
    for (std::size_t s = 0; s < m; ++s) {
      while (pos[s] + 1 < g) {
        auto next = pos;
        ++next[s];
        const double candidate = corr(next);
        if (candidate > current + options.threshold) {
          pos = std::move(next);
          current = candidate;
          changed = true;
        } else {
          break;
        }
      }
    }
  }
  plan.corr_final = current;
  for (std::size_t s = 0; s < m; ++s) {
    plan.lambda_star[sources[s]] = grid.values[order[s][pos[s]]];
  }
  plan.groups = group_encoders(sources, plan.lambda_star);
  plan.training_calls = runs.size();
  return plan;
}

CoordinationConfig coordination_config_from_json(const json& j) {
  CoordinationConfig c;
  try {
    if (j.contains("grid")) c.grid.values = j.at("grid").get<std::vector<double>>();
    c.repeats = j.value("repeats", c.repeats);
    c.threshold = j.value("threshold", c.threshold);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("coordination config: ") + e.what());
  }
  c.grid.validate();
  if (c.repeats == 0) throw ConfigError("coordination repeats must be >= 1");
  if (!(c.threshold >= 0.0)) throw ConfigError("coordination threshold must be >= 0");
  return c;
}

json to_json(const CoordinationConfig& c) {
  return {{"grid", c.grid.values}, {"repeats", c.repeats}, {"threshold", c.threshold}};
}

std::uint64_t repeat_seed(std::uint64_t base_seed, std::size_t repeat) {
  return RngStream(base_seed, "coordination")
      .derive_seed("repeat/" + std::to_string(repeat));
}

CoordinationResult run_coordination(std::span<const DomainDataset> sources,
                                    const DomainDataset& target,
                                    const CoordinationConfig& coord_cfg,
                                    const train::TrainConfig& train_cfg) {
  coord_cfg.grid.validate();
  if (sources.empty()) throw ConfigError("coordination: no sources");
  CoordinationResult result;
  std::vector<std::string> names;
  for (const auto& s : sources) names.push_back(s.name);
  for (std::size_t r = 0; r < coord_cfg.repeats; ++r) {
    train::TrainConfig cfg = train_cfg;
    cfg.seed = repeat_seed(train_cfg.seed, r);
    for (const auto& src : sources) {
      for (double lambda : coord_cfg.grid.values) {
        auto run = train_single_source(src, target, lambda, cfg, r == 0);
        run.repeat = r;
        result.runs.push_back(std::move(run));
      }
    }
  }
  result.plan = select_lambdas(result.runs, names, coord_cfg.grid,
                               coord_cfg.repeats, {coord_cfg.threshold});
  return result;
}

json to_json(const CoordinationPlan& plan) {
  json lambda_star = json::object();
  for (const auto& [k, v] : plan.lambda_star) lambda_star[k] = v;
  json cells = json::array();
  for (const auto& c : plan.cells) {
    cells.push_back({{"source", c.source},
                     {"lambda", c.lambda},
                     {"js_mean", c.js_mean},
                     {"js_per_repeat", c.js_per_repeat}});
  }
  return {{"sources", plan.sources},
          {"grid", plan.grid},
          {"repeats", plan.repeats},
          {"seeds", plan.seeds},
          {"lambda_star", lambda_star},
          {"groups", plan.groups},
          {"corr_initial", plan.corr_initial},
          {"corr_final", plan.corr_final},
          {"passes", plan.passes},
          {"training_calls", plan.training_calls},
          {"cells", cells}};
}

CoordinationPlan plan_from_json(const json& j) {
  CoordinationPlan p;
  try {
    p.sources = j.at("sources").get<std::vector<std::string>>();
    p.grid = j.value("grid", std::vector<double>{});
    p.repeats = j.value("repeats", std::size_t{0});
    p.seeds = j.value("seeds", std::vector<std::uint64_t>{});
    p.lambda_star = j.at("lambda_star").get<std::map<std::string, double>>();
    p.groups = j.at("groups").get<std::vector<std::vector<std::string>>>();
    p.corr_initial = j.value("corr_initial", 0.0);
    p.corr_final = j.value("corr_final", 0.0);
    p.passes = j.value("passes", std::size_t{0});
    p.training_calls = j.value("training_calls", std::size_t{0});
    for (const auto& c : j.value("cells", json::array())) {
      CellStats s;
      s.source = c.at("source").get<std::string>();
      s.lambda = c.at("lambda").get<double>();
      s.js_mean = c.at("js_mean").get<double>();
      s.js_per_repeat = c.value("js_per_repeat", std::vector<double>{});
      p.cells.push_back(std::move(s));
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("plan: ") + e.what());
  }
  if (p.sources.empty()) throw ConfigError("plan: no sources");
  if (p.group_of().empty() ||
      p.groups != group_encoders(p.sources, p.lambda_star)) {
    throw ConfigError("plan: groups do not match equal scale factors");
  }
  return p;
}

void save_plan(const CoordinationPlan& plan, const std::filesystem::path& path) {
  write_json(path, to_json(plan));
}

CoordinationPlan load_plan(const std::filesystem::path& path) {
  return plan_from_json(read_json(path));
}

}  // namespace cepc::coord
