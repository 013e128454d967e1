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

#include "cepc/reliability.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

#include "cepc/error.hpp"
#include "cepc/io_util.hpp"

namespace cepc::reliability {

CovarianceStats source_covariance(const Matrix& encodings) {
  if (encodings.rows() < 2) {
    throw DegenerateError("source_covariance needs at least 2 rows, got " +
                          std::to_string(encodings.rows()));
  }
  CovarianceStats s;
  s.n = encodings.rows();
  s.mean = column_means(encodings);
  s.cov = sample_covariance(encodings);
  return s;
}

MatrixD pointwise_target_covariance(const Matrix& encodings, std::size_t r) {
  const std::size_t n = encodings.rows();
  if (n < 2) {
    throw DegenerateError("pointwise covariance needs at least 2 rows, got " +
                          std::to_string(n));
  }
  if (r >= n) throw InputError("pointwise covariance: row out of range");
  const auto mu = column_means(encodings);
  const std::size_t d = encodings.cols();
  std::vector<double> a(d);
  for (std::size_t j = 0; j < d; ++j) a[j] = encodings(r, j) - mu[j];
  const double nd = static_cast<double>(n);
  const double scale = (1.0 / nd) / (1.0 - 1.0 / nd);
  MatrixD c(d, d);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < d; ++j) c(i, j) = scale * a[i] * a[j];
  }
  return c;
}

double transformation_cost(const MatrixD& c_r_t, const MatrixD& c_s) {
  if (!c_r_t.same_shape(c_s)) {
    throw InputError("transformation_cost: shapes " + shape_str(c_r_t) +
                     " and " + shape_str(c_s) + " differ");
  }
  double sum = 0.0;
  const auto a = c_r_t.values();
  const auto b = c_s.values();
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double diff = a[k] - b[k];
    sum += diff * diff;
  }
  return sum;
}

std::vector<double> transformation_costs(const Matrix& source_encodings,
                                         const Matrix& target_encodings) {
  if (source_encodings.cols() != target_encodings.cols()) {
    throw InputError("transformation_costs: encoding widths differ");
  }
  const auto src = source_covariance(source_encodings);
  const std::size_t n = target_encodings.rows();
  if (n < 2) {
    throw DegenerateError("transformation_costs: target needs at least 2 rows");
  }
  const auto mu = column_means(target_encodings);
  const std::size_t d = target_encodings.cols();
  const double nd = static_cast<double>(n);
  const double scale = (1.0 / nd) / (1.0 - 1.0 / nd);
  std::vector<double> a(d);
  std::vector<double> out(n);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t j = 0; j < d; ++j) a[j] = target_encodings(r, j) - mu[j];
    double sum = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t j = 0; j < d; ++j) {
        const double diff = scale * a[i] * a[j] - src.cov(i, j);
        sum += diff * diff;
      }
    }
    out[r] = sum;
  }
  return out;
}

namespace {

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double clamp_prob(double p) {
  return std::clamp(p, kProbClamp, 1.0 - kProbClamp);
}

}  // namespace

double DomainDiscriminator::prob_source(std::span<const float> x) const {
  if (x.size() != weights.size()) {
    throw InputError("discriminator: input has " + std::to_string(x.size()) +
                     " features, expected " + std::to_string(weights.size()));
  }
  double z = bias;
  for (std::size_t j = 0; j < x.size(); ++j) z += weights[j] * x[j];
  return clamp_prob(sigmoid(z));
}

DomainDiscriminator train_discriminator(const Matrix& source_encodings,
                                        const Matrix& target_encodings,
                                        RngStream& rng,
                                        const DiscriminatorConfig& cfg) {
  if (source_encodings.cols() != target_encodings.cols()) {
    throw InputError("train_discriminator: source width " +
                     std::to_string(source_encodings.cols()) +
                     " != target width " +
                     std::to_string(target_encodings.cols()));
  }
  if (source_encodings.rows() < 2 || target_encodings.rows() < 2) {
    throw DegenerateError("train_discriminator: each side needs >= 2 rows");
  }
  const std::size_t d = source_encodings.cols();
  DomainDiscriminator disc;
  disc.weights.resize(d);
  for (double& w : disc.weights) w = rng.uniform(-1e-3, 1e-3);

  const std::size_t n_s = source_encodings.rows();
  const std::size_t n = n_s + target_encodings.rows();
  auto row = [&](std::size_t i) {
    return i < n_s ? source_encodings.row(i) : target_encodings.row(i - n_s);
  };
  std::vector<double> grad_w(d);
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::fill(grad_w.begin(), grad_w.end(), 0.0);
    double grad_b = 0.0;
    double loss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const auto x = row(i);
      const double y = i < n_s ? 1.0 : 0.0;
      double z = disc.bias;
      for (std::size_t j = 0; j < d; ++j) z += disc.weights[j] * x[j];
      const double p = sigmoid(z);
      const double pc = clamp_prob(p);
      loss -= y * std::log(pc) + (1.0 - y) * std::log(1.0 - pc);
      const double e = p - y;
      for (std::size_t j = 0; j < d; ++j) grad_w[j] += e * x[j];
      grad_b += e;
    }
    const double inv = 1.0 / static_cast<double>(n);
    double reg = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      reg += disc.weights[j] * disc.weights[j];
      disc.weights[j] -= cfg.lr * (grad_w[j] * inv + cfg.l2 * disc.weights[j]);
    }
    disc.bias -= cfg.lr * grad_b * inv;
    disc.final_loss = loss * inv + 0.5 * cfg.l2 * reg;
    disc.epochs = epoch + 1;
  }
  return disc;
}

double density_ratio(double prob_source, std::size_t n_s, std::size_t n_t) {
  if (n_s == 0 || n_t == 0) throw InputError("density_ratio: empty domain");
  const double p = clamp_prob(prob_source);
  const double total = static_cast<double>(n_s + n_t);
  const double p_s = static_cast<double>(n_s) / total;
  const double p_t = static_cast<double>(n_t) / total;
  return (p_t * p) / (p_s * (1.0 - p));
}

double density_ratio(const DomainDiscriminator& disc, std::span<const float> x,
                     std::size_t n_s, std::size_t n_t) {
  return density_ratio(disc.prob_source(x), n_s, n_t);
}

std::string to_string(ScoreMode mode) {
  switch (mode) {
    case ScoreMode::kFull: return "full";
    case ScoreMode::kCostOnly: return "cost_only";
    case ScoreMode::kCapacityOnly: return "capacity_only";
  }
  return "full";
}

ScoreMode score_mode_from_string(const std::string& s) {
  if (s == "full") return ScoreMode::kFull;
  if (s == "cost_only") return ScoreMode::kCostOnly;
  if (s == "capacity_only") return ScoreMode::kCapacityOnly;
  throw ConfigError("unknown score mode '" + s + "'");
}

double reliability_score(double q, double d, ScoreMode mode) {
  const double inv_d = 1.0 / std::max(d, kMinCost);
  switch (mode) {
    case ScoreMode::kFull: return std::log(q) + inv_d;
    case ScoreMode::kCostOnly: return inv_d;
    case ScoreMode::kCapacityOnly: return std::log(q);
  }
  return std::log(q) + inv_d;
}

std::vector<std::size_t> ReliabilityTable::indicator_counts() const {
  std::vector<std::size_t> counts(num_sources(), 0);
  for (std::size_t r = 0; r < num_docs(); ++r) {
    for (std::size_t s = 0; s < num_sources(); ++s) {
      counts[s] += indicator[cell(r, s)];
    }
  }
  return counts;
}

void build_indicator(ReliabilityTable& table) {
  const std::size_t m = table.num_sources();
  const std::size_t n = table.num_docs();
  if (m == 0 || n == 0) throw InputError("build_indicator: empty table");
  if (table.log_score.size() != n * m) {
    throw InputError("build_indicator: table has " +
                     std::to_string(table.log_score.size()) +
                     " scores, expected " + std::to_string(n * m));
  }
  table.indicator.assign(n * m, 0);
  for (std::size_t r = 0; r < n; ++r) {
    std::size_t best = 0;
    for (std::size_t s = 1; s < m; ++s) {
      if (table.log_score[table.cell(r, s)] > table.log_score[table.cell(r, best)]) {
        best = s;
      }
    }
    table.indicator[table.cell(r, best)] = 1;
  }
}

ReliabilityTable make_table(std::vector<std::string> doc_ids,
                            std::vector<std::string> sources,
                            const std::vector<std::vector<double>>& costs,
                            const std::vector<std::vector<double>>& qs,
                            ScoreMode mode) {
  const std::size_t m = sources.size();
  const std::size_t n = doc_ids.size();
  if (costs.size() != m || qs.size() != m) {
    throw InputError("make_table: one cost and q column per source required");
  }
  ReliabilityTable t;
  t.doc_ids = std::move(doc_ids);
  t.sources = std::move(sources);
  t.cost.resize(n * m);
  t.q.resize(n * m);
  for (std::size_t s = 0; s < m; ++s) {
    if (costs[s].size() != n || qs[s].size() != n) {
      throw InputError("make_table: column for '" + t.sources[s] +
                       "' does not cover every document");
    }
    for (std::size_t r = 0; r < n; ++r) {
      t.cost[t.cell(r, s)] = costs[s][r];
      t.q[t.cell(r, s)] = qs[s][r];
    }
  }
  return rescore(t, mode);
}

ReliabilityTable rescore(const ReliabilityTable& table, ScoreMode mode) {
  ReliabilityTable t = table;
  t.log_score.resize(t.cost.size());
  for (std::size_t k = 0; k < t.cost.size(); ++k) {
    t.log_score[k] = reliability_score(t.q[k], t.cost[k], mode);
  }
  build_indicator(t);
  return t;
}

ReliabilityTable compute_table(std::span<const std::string> doc_ids,
                               std::span<const std::string> sources,
                               std::span<const SourceEncodings> encodings,
                               std::uint64_t seed, ScoreMode mode,
                               const DiscriminatorConfig& disc_cfg) {
  if (encodings.size() != sources.size()) {
    throw InputError("compute_table: one encoding set per source required");
  }
  const RngStream root(seed, "reliability");
  std::vector<std::vector<double>> costs;
  std::vector<std::vector<double>> qs;
  for (std::size_t s = 0; s < sources.size(); ++s) {
    const auto& e = encodings[s];
    if (e.cost_target.rows() != doc_ids.size() ||
        e.capacity_target.rows() != doc_ids.size()) {
      throw InputError("compute_table: target encodings of '" + sources[s] +
                       "' do not match the document count");
    }
    costs.push_back(transformation_costs(e.cost_source, e.cost_target));
    RngStream rng = root.child("discriminator/" + sources[s]);
    const auto disc = train_discriminator(e.capacity_source, e.capacity_target,
                                          rng, disc_cfg);
    std::vector<double> q(doc_ids.size());
    for (std::size_t r = 0; r < doc_ids.size(); ++r) {
      q[r] = density_ratio(disc, e.capacity_target.row(r),
                           e.capacity_source.rows(), e.capacity_target.rows());
    }
    qs.push_back(std::move(q));
  }
  return make_table({doc_ids.begin(), doc_ids.end()},
                    {sources.begin(), sources.end()}, costs, qs, mode);
}

void save_table_csv(const ReliabilityTable& table,
                    const std::filesystem::path& path) {
  std::ostringstream os;
  os << "doc_id,source,cost,q,log_score,indicator\n";
  for (std::size_t r = 0; r < table.num_docs(); ++r) {
    for (std::size_t s = 0; s < table.num_sources(); ++s) {
      const std::size_t k = table.cell(r, s);
      os << csv_field(table.doc_ids[r]) << ',' << csv_field(table.sources[s])
         << ',' << format_double(table.cost[k]) << ','
         << format_double(table.q[k]) << ','
         << format_double(table.log_score[k]) << ','
         << static_cast<int>(table.indicator[k]) << '\n';
    }
  }
  write_text(path, os.str());
}

namespace {

double parse_double(const std::string& s, const std::filesystem::path& path,
                    std::size_t line) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw FormatError(path.string() + ":" + std::to_string(line) +
                      ": bad number '" + s + "'");
  }
  return v;
}

}  // namespace

ReliabilityTable load_table_csv(const std::filesystem::path& path) {
  const auto rows = read_csv(path);
  const std::vector<std::string> header{"doc_id", "source", "cost",
                                        "q", "log_score", "indicator"};
  if (rows.empty() || rows[0] != header) {
    throw FormatError(path.string() + ": missing reliability header");
  }
  ReliabilityTable t;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& row = rows[i];
    if (row.size() != 6) {
      throw FormatError(path.string() + ":" + std::to_string(i + 1) +
                        ": expected 6 fields, got " + std::to_string(row.size()));
    }
    if (t.doc_ids.empty() || t.doc_ids.back() != row[0]) {
      t.doc_ids.push_back(row[0]);
    }
    if (t.doc_ids.size() == 1) t.sources.push_back(row[1]);
    t.cost.push_back(parse_double(row[2], path, i + 1));
    t.q.push_back(parse_double(row[3], path, i + 1));
    t.log_score.push_back(parse_double(row[4], path, i + 1));
    if (row[5] != "0" && row[5] != "1") {
      throw FormatError(path.string() + ":" + std::to_string(i + 1) +
                        ": indicator must be 0 or 1");
    }
    t.indicator.push_back(row[5] == "1" ? 1 : 0);
  }
  const std::size_t m = t.sources.size();
  if (m == 0 || t.cost.size() != t.doc_ids.size() * m) {
    throw FormatError(path.string() + ": ragged reliability table");
  }
  for (std::size_t r = 0; r < t.num_docs(); ++r) {
    int sum = 0;
    for (std::size_t s = 0; s < m; ++s) {
      if (rows[1 + t.cell(r, s)][1] != t.sources[s]) {
        throw FormatError(path.string() + ": sources out of order for '" +
                          t.doc_ids[r] + "'");
      }
      sum += t.indicator[t.cell(r, s)];
    }
    if (sum != 1) {
      throw FormatError(path.string() + ": indicator row for '" +
                        t.doc_ids[r] + "' is not one-hot");
    }
  }
  return t;
}

void check_table_covers(const ReliabilityTable& table,
                        std::span<const std::string> doc_ids,
                        std::span<const std::string> sources) {
  if (!std::equal(table.sources.begin(), table.sources.end(), sources.begin(),
                  sources.end())) {
    throw FormatError("reliability table sources do not match the manifest");
  }
  if (!std::equal(table.doc_ids.begin(), table.doc_ids.end(), doc_ids.begin(),
                  doc_ids.end())) {
    throw FormatError("reliability table does not cover the target documents");
  }
}

}  // namespace cepc::reliability
