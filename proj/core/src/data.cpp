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

#include "cepc/data.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iterator>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "cepc/io_util.hpp"

namespace cepc::data {

namespace fs = std::filesystem;
using nlohmann::json;

std::string to_string(Role role) {
  return role == Role::kSource ? "source" : "target";
}

Role role_from_string(const std::string& s) {
  if (s == "source") return Role::kSource;
  if (s == "target") return Role::kTarget;
  throw InputError("unknown domain role '" + s + "'");
}

void DomainDataset::validate() const {
  const std::string where = "domain '" + name + "': ";
  if (labels.size() != features.rows() || ids.size() != features.rows()) {
    throw DataError(where + "features/labels/ids length mismatch");
  }
  if (!features.all_finite()) throw DataError(where + "non-finite feature");
  std::unordered_set<std::string> seen;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (!seen.insert(ids[i]).second) {
      throw DataError(where + "duplicate id '" + ids[i] + "'");
    }
    const int y = labels[i];
    if (role == Role::kSource && y < 0) {
      throw DataError(where + "source document '" + ids[i] + "' is unlabeled");
    }
    if (role == Role::kTarget && y != kUnlabeled) {
      throw DataError(where + "target document '" + ids[i] + "' has a label");
    }
  }
}

DomainDataset strip_labels(const DomainDataset& labeled) {
  DomainDataset out = labeled;
  out.role = Role::kTarget;
  std::fill(out.labels.begin(), out.labels.end(), kUnlabeled);
  return out;
}

std::size_t num_classes(std::span<const DomainDataset> sources) {
  int max_label = 1;
  for (const auto& s : sources) {
    for (int y : s.labels) max_label = std::max(max_label, y);
  }
  return static_cast<std::size_t>(max_label) + 1;
}

namespace {

std::string default_name(const fs::path& path, std::string name) {
  if (!name.empty()) return name;
  std::string stem = path.stem().string();
  // "foo.gold" style double extensions keep only the first component.
  if (auto dot = stem.find('.'); dot != std::string::npos) stem.resize(dot);
  return stem;
}

DomainDataset assemble(std::string name, std::size_t dim,
                       std::vector<float> feats, std::vector<int> labels,
                       std::vector<std::string> ids) {
  DomainDataset ds;
  ds.name = std::move(name);
  const std::size_t rows = ids.size();
  ds.features = Matrix(rows, dim, std::move(feats));
  ds.labels = std::move(labels);
  ds.ids = std::move(ids);
  const bool any_labeled =
      std::any_of(ds.labels.begin(), ds.labels.end(),
                  [](int y) { return y != kUnlabeled; });
  const bool any_unlabeled =
      std::any_of(ds.labels.begin(), ds.labels.end(),
                  [](int y) { return y == kUnlabeled; });
  if (any_labeled && any_unlabeled) {
    throw DataError("domain '" + ds.name +
                    "' mixes labeled and unlabeled documents");
  }
  ds.role = any_unlabeled ? Role::kTarget : Role::kSource;
  ds.validate();
  return ds;
}

}  // namespace

DomainDataset load_jsonl(const fs::path& path, std::string name) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  name = default_name(path, std::move(name));

  std::vector<float> feats;
  std::vector<int> labels;
  std::vector<std::string> ids;
  std::size_t dim = 0;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      throw DataError(where + ": malformed JSON (" + e.what() + ")");
    }
    if (!obj.is_object() || !obj.contains("id") || !obj.contains("features") ||
        !obj.contains("label")) {
      throw DataError(where + ": expected object with id, label, features");
    }
    if (!obj["id"].is_string()) throw DataError(where + ": id must be a string");
    const auto& lab = obj["label"];
    int y = kUnlabeled;
    if (lab.is_null()) {
      y = kUnlabeled;
    } else if (lab.is_number_integer() &&
               (lab.get<std::int64_t>() == 0 || lab.get<std::int64_t>() == 1)) {
      y = lab.get<int>();
    } else {
      throw DataError(where + ": label must be 0, 1 or null");
    }
    const auto& f = obj["features"];
    if (!f.is_array() || f.empty()) {
      throw DataError(where + ": features must be a non-empty array");
    }
    if (ids.empty()) {
      dim = f.size();
    } else if (f.size() != dim) {
      throw DataError(where + ": dim " + std::to_string(f.size()) +
                      " differs from " + std::to_string(dim) +
                      " established by earlier lines");
    }
    for (const auto& v : f) {
      if (!v.is_number()) throw DataError(where + ": non-numeric feature");
      const double d = v.get<double>();
      const float x = static_cast<float>(d);
      if (!std::isfinite(x)) throw DataError(where + ": non-finite feature");
      feats.push_back(x);
    }
    ids.push_back(obj["id"].get<std::string>());
    labels.push_back(y);
  }
  if (ids.empty()) throw DataError(path.string() + ": empty domain file");
  return assemble(std::move(name), dim, std::move(feats), std::move(labels),
                  std::move(ids));
}

void save_jsonl(const DomainDataset& dataset, const fs::path& path) {
  dataset.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  for (std::size_t r = 0; r < dataset.size(); ++r) {
    out << "{\"id\":" << json(dataset.ids[r]).dump() << ",\"label\":";
    if (dataset.labels[r] == kUnlabeled) {
      out << "null";
    } else {
      out << dataset.labels[r];
    }
    out << ",\"features\":[";
    const auto row = dataset.features.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) out << ',';
      out << format_float(row[c]);
    }
    out << "]}\n";
  }
  if (!out) throw IoError("write failed for " + path.string());
}

std::vector<std::uint8_t> encode_binary(const DomainDataset& dataset) {
  dataset.validate();
  ByteWriter w;
  w.bytes("CEPC");
  w.u16(kBinaryVersion);
  w.u32(checked_u32(dataset.size(), "rows"));
  w.u32(checked_u32(dataset.dim(), "cols"));
  for (float v : dataset.features.data()) w.f32(v);
  for (int y : dataset.labels) w.i8(static_cast<std::int8_t>(y));
  for (const auto& id : dataset.ids) {
    w.u32(checked_u32(id.size(), "id length"));
    w.bytes(id);
  }
  return std::move(w).take();
}

DomainDataset decode_binary(const std::vector<std::uint8_t>& bytes,
                            std::string name) {
  ByteReader r(bytes, "dataset");
  if (r.bytes(4) != "CEPC") throw FormatError("dataset: bad magic");
  const std::uint16_t version = r.u16();
  if (version != kBinaryVersion) {
    throw FormatError("dataset: unsupported version " +
                      std::to_string(version));
  }
  const std::uint32_t rows = r.u32();
  const std::uint32_t cols = r.u32();
  const std::uint64_t cells = static_cast<std::uint64_t>(rows) * cols;
  r.require(cells * 4 + rows, "feature block");
  std::vector<float> feats(static_cast<std::size_t>(cells));
  for (auto& v : feats) v = r.f32();
  std::vector<int> labels(rows);
  for (auto& y : labels) {
    y = r.i8();
    if (y < kUnlabeled) throw FormatError("dataset: invalid label byte");
  }
  std::vector<std::string> ids(rows);
  for (auto& id : ids) id = r.bytes(r.u32());
  if (!r.at_end()) throw FormatError("dataset: trailing bytes");
  if (rows == 0) throw FormatError("dataset: empty domain");
  try {
    return assemble(std::move(name), cols, std::move(feats), std::move(labels),
                    std::move(ids));
  } catch (const DataError& e) {
    throw FormatError(std::string("dataset: ") + e.what());
  }
}

void save_binary(const DomainDataset& dataset, const fs::path& path) {
  write_file(path, encode_binary(dataset));
}

DomainDataset load_binary(const fs::path& path, std::string name) {
  return decode_binary(read_file(path), default_name(path, std::move(name)));
}

DomainDataset load_dataset(const fs::path& path, std::string name) {
  if (path.extension() == ".bin") return load_binary(path, std::move(name));
  return load_jsonl(path, std::move(name));
}

void save_dataset(const DomainDataset& dataset, const fs::path& path) {
  if (path.extension() == ".bin") {
    save_binary(dataset, path);
  } else {
    save_jsonl(dataset, path);
  }
}

void save_gold_csv(const std::vector<std::string>& ids,
                   const std::vector<int>& labels, const fs::path& path) {
  if (ids.size() != labels.size()) {
    throw ShapeError("gold: ids and labels differ in length");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << "doc_id,label\n";
  for (std::size_t i = 0; i < ids.size(); ++i) {
    out << csv_field(ids[i]) << ',' << labels[i] << '\n';
  }
}

std::vector<int> load_gold(const fs::path& path,
                           const std::vector<std::string>& ids) {
  std::unordered_map<std::string, int> by_id;
  if (path.extension() == ".csv") {
    const auto rows = read_csv(path);
    if (rows.empty() || rows.front().size() < 2 || rows.front()[0] != "doc_id") {
      throw FormatError(path.string() + ": expected header doc_id,label");
    }
    for (std::size_t i = 1; i < rows.size(); ++i) {
      if (rows[i].size() < 2) {
        throw FormatError(path.string() + ": short row " + std::to_string(i + 1));
      }
      int y = 0;
      const auto& field = rows[i][1];
      auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), y);
      if (ec != std::errc() || ptr != field.data() + field.size() || y < 0) {
        throw FormatError(path.string() + ": bad label on row " +
                          std::to_string(i + 1));
      }
      if (!by_id.emplace(rows[i][0], y).second) {
        throw DataError(path.string() + ": duplicate id '" + rows[i][0] + "'");
      }
    }
  } else {
    const DomainDataset ds = load_dataset(path);
    if (ds.role != Role::kSource) {
      throw DataError(path.string() + ": gold file has no labels");
    }
    for (std::size_t i = 0; i < ds.size(); ++i) by_id.emplace(ds.ids[i], ds.labels[i]);
  }
  std::vector<int> out;
  out.reserve(ids.size());
  for (const auto& id : ids) {
    auto it = by_id.find(id);
    if (it == by_id.end()) {
      throw DataError(path.string() + ": no gold label for '" + id + "'");
    }
    out.push_back(it->second);
  }
  return out;
}

std::vector<const ManifestEntry*> Manifest::sources() const {
  std::vector<const ManifestEntry*> out;
  for (const auto& d : domains) {
    if (d.role == Role::kSource) out.push_back(&d);
  }
  return out;
}

std::vector<const ManifestEntry*> Manifest::targets() const {
  std::vector<const ManifestEntry*> out;
  for (const auto& d : domains) {
    if (d.role == Role::kTarget) out.push_back(&d);
  }
  return out;
}

Manifest load_manifest(const fs::path& path) {
  const json j = read_json(path);
  if (!j.is_object() || !j.contains("domains") || !j["domains"].is_array()) {
    throw ConfigError(path.string() + ": manifest needs a \"domains\" array");
  }
  const fs::path base = path.parent_path();
  Manifest m;
  std::unordered_set<std::string> names;
  for (const auto& d : j["domains"]) {
    try {
      ManifestEntry e;
      e.name = d.at("name").get<std::string>();
      e.role = role_from_string(d.at("role").get<std::string>());
      e.path = base / d.at("path").get<std::string>();
      e.dim = d.at("dim").get<std::size_t>();
      if (d.contains("gold") && !d["gold"].is_null()) {
        e.gold = base / d["gold"].get<std::string>();
      }
      if (!names.insert(e.name).second) {
        throw ConfigError("duplicate domain name '" + e.name + "'");
      }
      m.domains.push_back(std::move(e));
    } catch (const json::exception& ex) {
      throw ConfigError(path.string() + ": bad domain entry (" + ex.what() + ")");
    }
  }
  return m;
}

void save_manifest(const Manifest& manifest, const fs::path& path) {
  json arr = json::array();
  const fs::path base = path.parent_path();
  for (const auto& d : manifest.domains) {
    json e = {{"name", d.name},
              {"role", to_string(d.role)},
              {"path", fs::relative(d.path, base).generic_string()},
              {"dim", d.dim}};
    if (d.gold) e["gold"] = fs::relative(*d.gold, base).generic_string();
    arr.push_back(std::move(e));
  }
  write_json(path, json{{"domains", arr}});
}

DomainDataset load_domain(const ManifestEntry& entry) {
  DomainDataset ds = load_dataset(entry.path, entry.name);
  if (ds.role != entry.role) {
    throw DataError("domain '" + entry.name + "' declared " +
                    to_string(entry.role) + " but file is " +
                    to_string(ds.role));
  }
  if (ds.dim() != entry.dim) {
    throw DataError("domain '" + entry.name + "' declared dim " +
                    std::to_string(entry.dim) + " but file has " +
                    std::to_string(ds.dim()));
  }
  return ds;
}

}  // namespace cepc::data
