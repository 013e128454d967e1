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

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <unordered_set>

#include "cepc/data.hpp"
#include "cepc/io_util.hpp"

namespace cepc::data {

namespace fs = std::filesystem;
using nlohmann::json;

void SynthSpec::validate() const {
  if (dim < 2) throw SpecError("synthetic: dim must be >= 2");
  if (!(positive_rate > 0.0 && positive_rate < 1.0)) {
    throw SpecError("synthetic: positive_rate must lie in (0, 1)");
  }
  if (docs_per_domain < 2) throw SpecError("synthetic: docs_per_domain < 2");
  if (noise < 0.0) throw SpecError("synthetic: noise must be >= 0");
  if (domains.empty()) throw SpecError("synthetic: no domains");
  std::unordered_set<std::string> names;
  for (const auto& d : domains) {
    if (d.name.empty()) throw SpecError("synthetic: unnamed domain");
    if (!names.insert(d.name).second) {
      throw SpecError("synthetic: duplicate domain '" + d.name + "'");
    }
  }
}

SynthSpec synth_spec_from_json(const json& j) {
  SynthSpec s;
  try {
    s.seed = j.value("seed", s.seed);
    s.dim = j.value("dim", s.dim);
    s.docs_per_domain = j.value("docs_per_domain", s.docs_per_domain);
    s.positive_rate = j.value("positive_rate", s.positive_rate);
    s.mean_magnitude = j.value("mean_magnitude", s.mean_magnitude);
    s.noise = j.value("noise", s.noise);
    if (j.contains("domains")) {
      for (const auto& d : j.at("domains")) {
        SynthDomainSpec ds;
        ds.name = d.at("name").get<std::string>();
        ds.role = role_from_string(d.value("role", std::string("source")));
        ds.shift = d.value("shift", 0.0);
        ds.rotation = d.value("rotation", 0.0);
        ds.noise = d.value("noise", -1.0);
        ds.adversarial = d.value("adversarial", false);
        s.domains.push_back(std::move(ds));
      }
    } else {
      const std::size_t n = j.value("n_domains", std::size_t{4});
      const double shift = j.value("shift", 0.0);
      const double rotation = j.value("rotation", 0.0);
      const long adversarial = j.value("adversarial_source", -1L);
      for (std::size_t k = 0; k < n; ++k) {
        SynthDomainSpec ds;
        const bool target = k + 1 == n;
        char buf[32];
        std::snprintf(buf, sizeof buf, target ? "target" : "s%zu", k + 1);
        ds.name = buf;
        ds.role = target ? Role::kTarget : Role::kSource;
        ds.shift = shift * static_cast<double>(k);
        ds.rotation = rotation * static_cast<double>(k);
        ds.adversarial = static_cast<long>(k) == adversarial;
        s.domains.push_back(std::move(ds));
      }
    }
  } catch (const json::exception& e) {
    throw SpecError(std::string("synthetic spec: ") + e.what());
  }
  s.validate();
  return s;
}

json to_json(const SynthSpec& spec) {
  json domains = json::array();
  for (const auto& d : spec.domains) {
    json e = {{"name", d.name},
              {"role", to_string(d.role)},
              {"shift", d.shift},
              {"rotation", d.rotation},
              {"adversarial", d.adversarial}};
    if (d.noise >= 0.0) e["noise"] = d.noise;
    domains.push_back(std::move(e));
  }
  return {{"seed", spec.seed},
          {"dim", spec.dim},
          {"docs_per_domain", spec.docs_per_domain},
          {"positive_rate", spec.positive_rate},
          {"mean_magnitude", spec.mean_magnitude},
          {"noise", spec.noise},
          {"domains", domains}};
}

namespace {

std::vector<double> random_unit(RngStream& rng, std::size_t dim) {
  std::vector<double> v(dim);
  double norm = 0.0;
  for (double& x : v) {
    x = rng.normal();
    norm += x * x;
  }
  norm = std::sqrt(norm);
  for (double& x : v) x /= norm;
  return v;
}

// Givens rotation by `angle` on every coordinate pair (0,1), (2,3), ...
void rotate_pairs(std::vector<double>& x, double angle) {
  if (angle == 0.0) return;
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  for (std::size_t k = 0; k + 1 < x.size(); k += 2) {
    const double a = x[k];
    const double b = x[k + 1];
    x[k] = c * a - s * b;
    x[k + 1] = s * a + c * b;
  }
}

}  // namespace

std::vector<SyntheticDomain> gen_synthetic(const SynthSpec& spec) {
  spec.validate();
  const RngStream master(spec.seed, "synthetic");
  RngStream direction_rng = master.child("direction");
  const std::vector<double> direction = random_unit(direction_rng, spec.dim);

  const std::size_t n = spec.docs_per_domain;
  const auto positives = static_cast<std::size_t>(
      std::floor(static_cast<double>(n) * spec.positive_rate));

  std::vector<SyntheticDomain> out;
  for (const auto& dspec : spec.domains) {
    const RngStream domain_rng = master.child("domain/" + dspec.name);
    RngStream shift_rng = domain_rng.child("shift");
    RngStream label_rng = domain_rng.child("labels");
    RngStream noise_rng = domain_rng.child("noise");
    const std::vector<double> shift_dir = random_unit(shift_rng, spec.dim);
    const double noise = dspec.noise >= 0.0 ? dspec.noise : spec.noise;

    std::vector<int> labels(n, 0);
    std::fill(labels.begin(), labels.begin() + static_cast<std::ptrdiff_t>(positives), 1);
    for (std::size_t i = n; i > 1; --i) {
      std::swap(labels[i - 1], labels[label_rng.index(i)]);
    }

    Matrix features(n, spec.dim);
    std::vector<double> x(spec.dim);
    for (std::size_t r = 0; r < n; ++r) {
      double sign = labels[r] == 1 ? 1.0 : -1.0;
      if (dspec.adversarial) sign = -sign;
      for (std::size_t c = 0; c < spec.dim; ++c) {
        x[c] = sign * spec.mean_magnitude * direction[c] +
               noise * noise_rng.normal();
      }
      rotate_pairs(x, dspec.rotation);
      for (std::size_t c = 0; c < spec.dim; ++c) {
        features(r, c) = static_cast<float>(x[c] + dspec.shift * shift_dir[c]);
      }
    }

    SyntheticDomain dom;
    dom.dataset.name = dspec.name;
    dom.dataset.role = Role::kSource;
    dom.dataset.features = std::move(features);
    dom.dataset.labels = labels;
    dom.dataset.ids.reserve(n);
    for (std::size_t r = 0; r < n; ++r) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "-%06zu", r);
      dom.dataset.ids.push_back(dspec.name + buf);
    }
    dom.gold_labels = std::move(labels);
    if (dspec.role == Role::kTarget) dom.dataset = strip_labels(dom.dataset);
    dom.dataset.validate();
    out.push_back(std::move(dom));
  }
  return out;
}

fs::path write_synthetic(const SynthSpec& spec, const fs::path& out_dir,
                         bool binary) {
  fs::create_directories(out_dir);
  const auto domains = gen_synthetic(spec);
  Manifest manifest;
  for (const auto& d : domains) {
    ManifestEntry e;
    e.name = d.dataset.name;
    e.role = d.dataset.role;
    e.path = out_dir / (d.dataset.name + (binary ? ".bin" : ".jsonl"));
    e.dim = d.dataset.dim();
    save_dataset(d.dataset, e.path);
    if (d.dataset.role == Role::kTarget) {
      e.gold = out_dir / (d.dataset.name + ".gold.csv");
      save_gold_csv(d.dataset.ids, d.gold_labels, *e.gold);
    }
    manifest.domains.push_back(std::move(e));
  }
  const fs::path manifest_path = out_dir / "manifest.json";
  save_manifest(manifest, manifest_path);
  write_json(out_dir / "synth_spec.json", to_json(spec));
  return manifest_path;
}

std::pair<DomainDataset, DomainDataset> split_oracle(
    const DomainDataset& dataset, double fraction, RngStream& rng) {
  if (dataset.role != Role::kSource) {
    throw DataError("split_oracle: dataset '" + dataset.name +
                    "' is unlabeled");
  }
  if (!(fraction > 0.0 && fraction < 1.0)) {
    throw InputError("split_oracle: fraction must lie in (0, 1)");
  }
  int max_label = 0;
  for (int y : dataset.labels) max_label = std::max(max_label, y);
  std::vector<std::size_t> train_idx;
  std::vector<std::size_t> test_idx;
  for (int c = 0; c <= max_label; ++c) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
      if (dataset.labels[i] == c) members.push_back(i);
    }
    if (members.empty()) continue;
    const auto take = static_cast<std::size_t>(
        std::llround(static_cast<double>(members.size()) * fraction));
    if (members.size() < 2 || take == 0 || take >= members.size()) {
      throw DataError("split_oracle: class " + std::to_string(c) + " of '" +
                      dataset.name + "' has " +
                      std::to_string(members.size()) +
                      " documents, too few to stratify");
    }
    for (std::size_t i = members.size(); i > 1; --i) {
      std::swap(members[i - 1], members[rng.index(i)]);
    }
    train_idx.insert(train_idx.end(), members.begin(),
                     members.begin() + static_cast<std::ptrdiff_t>(take));
    test_idx.insert(test_idx.end(),
                    members.begin() + static_cast<std::ptrdiff_t>(take),
                    members.end());
  }
  std::sort(train_idx.begin(), train_idx.end());
  std::sort(test_idx.begin(), test_idx.end());

  auto subset = [&](const std::vector<std::size_t>& idx, const char* suffix) {
    DomainDataset out;
    out.name = dataset.name + suffix;
    out.role = dataset.role;
    out.features = select_rows(dataset.features, std::span<const std::size_t>(idx));
    for (std::size_t i : idx) {
      out.labels.push_back(dataset.labels[i]);
      out.ids.push_back(dataset.ids[i]);
    }
    return out;
  };
  return {subset(train_idx, "/train"), subset(test_idx, "/test")};
}

}  // namespace cepc::data
