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

#include "cepc/trainer.hpp"

#include <algorithm>
#include <sstream>

#include "cepc/error.hpp"
#include "cepc/io_util.hpp"

namespace cepc::train {

using data::DomainDataset;
using nlohmann::json;

namespace {

constexpr std::uint16_t kCheckpointVersion = 1;
constexpr const char* kCheckpointFormat = "cepc-checkpoint";

}  // namespace

TrainResult train_cepc(std::span<const DomainDataset> sources,
                       const DomainDataset& target,
                       const coord::CoordinationPlan& plan,
                       const reliability::ReliabilityTable& table,
                       const TrainConfig& cfg, const CepcOptions& options) {
  if (sources.size() < 2) {
    throw ConfigError("train_cepc needs at least 2 sources, got " +
                      std::to_string(sources.size()));
  }
  std::vector<std::string> names;
  for (const auto& s : sources) names.push_back(s.name);
  if (plan.sources != names) {
    throw ConfigError("coordination plan does not match the source list");
  }
  reliability::check_table_covers(table, target.ids, names);

  StepOptions step;
  step.use_divergence = options.paired;
  step.use_medium = options.paired && cfg.use_medium;
  step.medium_weight = cfg.medium_weight;
  return run_training(sources, target, plan.group_of(), plan.lambdas(),
                      table.view(), step, cfg, options.observer);
}

std::vector<int> resolve_votes(const std::vector<std::vector<int>>& votes,
                               const Matrix& mean_probs) {
  if (votes.size() != mean_probs.rows()) {
    throw ShapeError("resolve_votes: " + std::to_string(votes.size()) +
                     " vote rows for " + std::to_string(mean_probs.rows()) +
                     " probability rows");
  }
  const std::size_t classes = mean_probs.cols();
  std::vector<int> out(votes.size());
  std::vector<std::size_t> counts(classes);
  for (std::size_t r = 0; r < votes.size(); ++r) {
    std::fill(counts.begin(), counts.end(), 0);
    for (int v : votes[r]) {
      if (v < 0 || static_cast<std::size_t>(v) >= classes) {
        throw InputError("resolve_votes: vote outside the class range");
      }
      ++counts[static_cast<std::size_t>(v)];
    }
    const std::size_t top = *std::max_element(counts.begin(), counts.end());
    std::size_t best = classes;
    for (std::size_t c = 0; c < classes; ++c) {
      if (counts[c] != top) continue;
      if (best == classes || mean_probs(r, c) > mean_probs(r, best)) best = c;
    }
    out[r] = static_cast<int>(best);
  }
  return out;
}

Prediction predict_majority(const CepcModel& model, const Matrix& features) {
  const std::size_t n = features.rows();
  const std::size_t m = model.num_sources();
  Prediction p;
  p.votes.assign(n, std::vector<int>(m));
  MatrixD sum(n, model.num_classes);
  for (std::size_t k = 0; k < m; ++k) {
    const Matrix probs = source_probabilities(model, k, features);
    const auto labels = nn::argmax_rows(probs);
    for (std::size_t r = 0; r < n; ++r) {
      p.votes[r][k] = labels[r];
      for (std::size_t c = 0; c < probs.cols(); ++c) sum(r, c) += probs(r, c);
    }
  }
  p.mean_probs = Matrix(n, model.num_classes);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < model.num_classes; ++c) {
      p.mean_probs(r, c) = static_cast<float>(sum(r, c) / static_cast<double>(m));
    }
  }
  p.labels = resolve_votes(p.votes, p.mean_probs);
  return p;
}

namespace {

json net_meta(const nn::Mlp& net) {
  const auto spec = net.spec();
  return {{"widths", spec.widths},
          {"output_activation",
           spec.output_activation == nn::Activation::kTanh ? "tanh" : "none"},
          {"head", spec.head == nn::OutputHead::kSoftmax ? "softmax" : "none"}};
}

void write_matrix(ByteWriter& w, const Matrix& m) {
  w.u32(checked_u32(m.rows(), "matrix rows"));
  w.u32(checked_u32(m.cols(), "matrix cols"));
  for (float v : m.values()) w.f32(v);
}

Matrix read_matrix(ByteReader& r, std::size_t rows, std::size_t cols,
                   const std::string& what) {
  const std::uint32_t got_rows = r.u32();
  const std::uint32_t got_cols = r.u32();
  if (got_rows != rows || got_cols != cols) {
    throw FormatError(what + ": parameter block is " +
                      shape_str(got_rows, got_cols) + ", metadata says " +
                      shape_str(rows, cols));
  }
  r.require(std::uint64_t{rows} * cols * 4, "parameter block");
  Matrix m(rows, cols);
  for (float& v : m.data()) v = r.f32();
  return m;
}

nn::Mlp read_net(ByteReader& r, const json& meta, const std::string& what) {
  nn::Mlp net;
  const auto widths = meta.at("widths").get<std::vector<std::size_t>>();
  if (widths.size() < 2) throw FormatError(what + ": network needs >= 2 widths");
  net.output_activation = meta.at("output_activation").get<std::string>() == "tanh"
                              ? nn::Activation::kTanh
                              : nn::Activation::kNone;
  net.head = meta.at("head").get<std::string>() == "softmax"
                 ? nn::OutputHead::kSoftmax
                 : nn::OutputHead::kNone;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    nn::Layer<float> layer;
    layer.weight = read_matrix(r, widths[l], widths[l + 1], what);
    layer.bias = read_matrix(r, 1, widths[l + 1], what);
    if (!layer.weight.all_finite() || !layer.bias.all_finite()) {
      throw FormatError(what + ": non-finite parameter");
    }
    net.layers.push_back(std::move(layer));
  }
  return net;
}

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const CepcModel& model) {
  json meta = {{"format", kCheckpointFormat},
               {"source_names", model.source_names},
               {"group_of", model.group_of},
               {"lambdas", model.lambdas},
               {"num_classes", model.num_classes}};
  for (const auto* part : {"encoders", "classifiers", "mediums"}) {
    meta[part] = json::array();
  }
  for (const auto& n : model.encoders) meta["encoders"].push_back(net_meta(n));
  for (const auto& n : model.classifiers) meta["classifiers"].push_back(net_meta(n));
  for (const auto& n : model.mediums) meta["mediums"].push_back(net_meta(n));
  const std::string meta_text = meta.dump();

  ByteWriter w;
  w.bytes("CEPC");
  w.u16(kCheckpointVersion);
  w.u32(checked_u32(meta_text.size(), "checkpoint metadata"));
  w.bytes(meta_text);
  for (const auto* nets : {&model.encoders, &model.classifiers, &model.mediums}) {
    for (const auto& net : *nets) {
      for (const auto& layer : net.layers) {
        write_matrix(w, layer.weight);
        write_matrix(w, layer.bias);
      }
    }
  }
  return std::move(w).take();
}

CepcModel decode_checkpoint(const std::vector<std::uint8_t>& bytes,
                            const std::string& what) {
  ByteReader r(bytes, what);
  if (r.bytes(4) != "CEPC") throw FormatError(what + ": bad magic");
  const std::uint16_t version = r.u16();
  if (version != kCheckpointVersion) {
    throw FormatError(what + ": unsupported checkpoint version " +
                      std::to_string(version));
  }
  const std::uint32_t meta_len = r.u32();
  json meta;
  try {
    meta = json::parse(r.bytes(meta_len));
  } catch (const json::parse_error& e) {
    throw FormatError(what + ": malformed metadata (" + e.what() + ")");
  }
  CepcModel model;
  try {
    if (meta.value("format", std::string()) != kCheckpointFormat) {
      throw FormatError(what + ": not a model checkpoint");
    }
    model.source_names = meta.at("source_names").get<std::vector<std::string>>();
    model.group_of = meta.at("group_of").get<std::vector<std::size_t>>();
    model.lambdas = meta.at("lambdas").get<std::vector<double>>();
    model.num_classes = meta.at("num_classes").get<std::size_t>();
    for (const auto& m : meta.at("encoders")) model.encoders.push_back(read_net(r, m, what));
    for (const auto& m : meta.at("classifiers")) model.classifiers.push_back(read_net(r, m, what));
    for (const auto& m : meta.at("mediums")) model.mediums.push_back(read_net(r, m, what));
  } catch (const json::exception& e) {
    throw FormatError(what + ": bad metadata (" + e.what() + ")");
  }
  if (!r.at_end()) throw FormatError(what + ": trailing bytes");
  if (model.source_names.size() != model.classifiers.size() ||
      model.group_of.size() != model.classifiers.size() ||
      model.lambdas.size() != model.classifiers.size() ||
      model.classifiers.empty()) {
    throw FormatError(what + ": inconsistent source metadata");
  }
  for (std::size_t g : model.group_of) {
    if (g >= model.encoders.size()) throw FormatError(what + ": bad encoder group");
  }
  for (std::size_t k = 0; k < model.num_sources(); ++k) {
    if (model.classifiers[k].input_width() != model.encoder_for(k).output_width() ||
        model.classifiers[k].output_width() != model.num_classes) {
      throw FormatError(what + ": classifier shapes do not chain");
    }
  }
  return model;
}

void save_checkpoint(const CepcModel& model, const std::filesystem::path& path) {
  write_file(path, encode_checkpoint(model));
}

CepcModel load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(read_file(path), path.string());
}

std::string loss_trace_csv(std::span<const LossRecord> trace) {
  std::ostringstream os;
  os << "step,nll,coral,l_div,l_med,alpha,total\n";
  for (const auto& r : trace) {
    os << r.step << ',' << format_double(r.nll) << ',' << format_double(r.coral)
       << ',' << format_double(r.l_div) << ',' << format_double(r.l_med) << ','
       << format_double(r.alpha) << ',' << format_double(r.total) << '\n';
  }
  return os.str();
}

void save_loss_trace(std::span<const LossRecord> trace,
                     const std::filesystem::path& path) {
  write_text(path, loss_trace_csv(trace));
}

}  // namespace cepc::train
