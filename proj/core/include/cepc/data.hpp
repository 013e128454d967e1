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

#ifndef CEPC_DATA_HPP_
#define CEPC_DATA_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "cepc/matrix.hpp"
#include "cepc/rng.hpp"

namespace cepc::data {

enum class Role { kSource, kTarget };

inline constexpr int kUnlabeled = -1;

std::string to_string(Role role);
Role role_from_string(const std::string& s);

/// A labeled (source) or unlabeled (target) set of document feature
/// vectors. Rows of `features` line up with `labels` and `ids`.
struct DomainDataset {
  std::string name;
  Role role = Role::kSource;
  Matrix features;
  std::vector<int> labels;
  std::vector<std::string> ids;

  std::size_t size() const noexcept { return features.rows(); }
  std::size_t dim() const noexcept { return features.cols(); }

  /// Throws DataError when any invariant is broken: uniform dimension,
  /// labels all present (source) or all absent (target), unique ids,
  /// finite features.
  void validate() const;

  bool operator==(const DomainDataset&) const = default;
};

/// Copy of a labeled dataset with labels removed and role set to target.
DomainDataset strip_labels(const DomainDataset& labeled);

/// Number of classes implied by a set of labeled domains (at least 2).
std::size_t num_classes(std::span<const DomainDataset> sources);

// --- JSONL: {"id": str, "label": 0|1|null, "features": [numbers]} per line.

DomainDataset load_jsonl(const std::filesystem::path& path,
                         std::string name = {});
void save_jsonl(const DomainDataset& dataset,
                const std::filesystem::path& path);

// --- Binary: "CEPC", u16 version, u32 rows, u32 cols, f32 LE row-major
// features, i8 labels (-1 = unlabeled), then u32-length-prefixed UTF-8 ids.

inline constexpr std::uint16_t kBinaryVersion = 1;

std::vector<std::uint8_t> encode_binary(const DomainDataset& dataset);
DomainDataset decode_binary(const std::vector<std::uint8_t>& bytes,
                            std::string name);
void save_binary(const DomainDataset& dataset,
                 const std::filesystem::path& path);
DomainDataset load_binary(const std::filesystem::path& path,
                          std::string name = {});

/// Dispatches on extension: ".bin" is binary, anything else JSONL.
DomainDataset load_dataset(const std::filesystem::path& path,
                           std::string name = {});
void save_dataset(const DomainDataset& dataset,
                  const std::filesystem::path& path);

// --- Gold labels for unlabeled targets: CSV "doc_id,label".

void save_gold_csv(const std::vector<std::string>& ids,
                   const std::vector<int>& labels,
                   const std::filesystem::path& path);

/// Loads gold labels either from a "doc_id,label" CSV or from a labeled
/// dataset file, and returns them aligned to `ids`.
std::vector<int> load_gold(const std::filesystem::path& path,
                           const std::vector<std::string>& ids);

// --- Manifest: {"domains": [{name, role, path, dim, gold?}, ...]}

struct ManifestEntry {
  std::string name;
  Role role = Role::kSource;
  std::filesystem::path path;
  std::size_t dim = 0;
  std::optional<std::filesystem::path> gold;
};

struct Manifest {
  std::vector<ManifestEntry> domains;

  std::vector<const ManifestEntry*> sources() const;
  std::vector<const ManifestEntry*> targets() const;
};

/// Relative paths are resolved against the manifest's directory.
Manifest load_manifest(const std::filesystem::path& path);
void save_manifest(const Manifest& manifest,
                   const std::filesystem::path& path);

/// Loads and checks the file against the entry's name, role and dim.
DomainDataset load_domain(const ManifestEntry& entry);

// --- Synthetic domain-shift corpora.

struct SynthDomainSpec {
  std::string name;
  Role role = Role::kSource;
  double shift = 0.0;     // norm of the domain mean offset
  double rotation = 0.0;  // radians, applied to every coordinate pair
  double noise = -1.0;    // < 0 means use SynthSpec::noise
  bool adversarial = false;  // class-conditional means swapped
};

struct SynthSpec {
  std::uint64_t seed = 1;
  std::size_t dim = 32;
  std::size_t docs_per_domain = 2000;
  double positive_rate = 0.2;
  double mean_magnitude = 1.5;
  double noise = 1.0;
  std::vector<SynthDomainSpec> domains;

  /// Throws SpecError on an invalid spec.
  void validate() const;
};

/// Accepts either an explicit "domains" array or the compact form
/// {"n_domains", "shift", "rotation", "adversarial_source"} where domain j
/// gets j times the shift and rotation and the last domain is the target.
SynthSpec synth_spec_from_json(const nlohmann::json& j);
nlohmann::json to_json(const SynthSpec& spec);

struct SyntheticDomain {
  DomainDataset dataset;       // unlabeled when role is target
  std::vector<int> gold_labels;
};

std::vector<SyntheticDomain> gen_synthetic(const SynthSpec& spec);

/// Writes every domain (JSONL), gold CSVs for targets, and manifest.json.
/// Returns the manifest path.
std::filesystem::path write_synthetic(const SynthSpec& spec,
                                      const std::filesystem::path& out_dir,
                                      bool binary = false);

// --- Stratified split used by the in-domain ORACLE row.

std::pair<DomainDataset, DomainDataset> split_oracle(
    const DomainDataset& dataset, double fraction, RngStream& rng);

}  // namespace cepc::data

#endif  // CEPC_DATA_HPP_
