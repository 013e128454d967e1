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
#include <cstring>
#include <fstream>
#include <numeric>
#include <set>

#include <gtest/gtest.h>

#include "cepc/error.hpp"
#include "cepc/io_util.hpp"
#include "cepc/metrics.hpp"
#include "cepc/nn.hpp"
#include "test_util.hpp"

namespace cepc::data {
namespace {

using testing::TempDir;

DomainDataset tiny(std::size_t n, std::size_t dim, bool labeled, std::uint64_t seed = 1) {
  RngStream rng(seed);
  DomainDataset ds;
  ds.name = "tiny";
  ds.role = labeled ? Role::kSource : Role::kTarget;
  ds.features = testing::random_matrix<float>(n, dim, rng);
  for (std::size_t i = 0; i < n; ++i) {
    ds.ids.push_back("doc-" + std::to_string(i));
    ds.labels.push_back(labeled ? static_cast<int>(i % 2) : kUnlabeled);
  }
  return ds;
}

TEST(Jsonl, LoadsTwoLines) {
  TempDir dir;
  write_text(dir / "d.jsonl",
             "{\"id\":\"a\",\"label\":1,\"features\":[0.5,1]}\n"
             "{\"id\":\"b\",\"label\":0,\"features\":[2,-1]}\n");
  const auto ds = load_jsonl(dir / "d.jsonl");
  EXPECT_EQ(ds.size(), 2u);
  EXPECT_EQ(ds.dim(), 2u);
  EXPECT_EQ(ds.name, "d");
  EXPECT_EQ(ds.role, Role::kSource);
  EXPECT_EQ(ds.labels, (std::vector<int>{1, 0}));
  EXPECT_EQ(ds.features(1, 0), 2.0f);
}

TEST(Jsonl, DimensionErrorNamesTheLine) {
  TempDir dir;
  write_text(dir / "d.jsonl",
             "{\"id\":\"a\",\"label\":1,\"features\":[1,2,3,4]}\n"
             "{\"id\":\"b\",\"label\":0,\"features\":[1,2,3,4]}\n"
             "{\"id\":\"c\",\"label\":0,\"features\":[1,2,3]}\n");
  try {
    load_jsonl(dir / "d.jsonl");
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find(":3"), std::string::npos) << e.what();
  }
}

TEST(Jsonl, RejectsMalformedInput) {
  TempDir dir;
  const char* bad[] = {
      "{\"id\":\"a\",\"label\":1,\"features\":[1,2]}\n{broken\n",
      "{\"id\":\"a\",\"label\":2,\"features\":[1,2]}\n",
      "{\"id\":\"a\",\"label\":1,\"features\":[]}\n",
      "{\"id\":\"a\",\"label\":1,\"features\":[1,\"x\"]}\n",
      "{\"id\":\"a\",\"label\":1,\"features\":[1]}\n{\"id\":\"a\",\"label\":0,\"features\":[2]}\n",
      "{\"id\":\"a\",\"label\":1,\"features\":[1]}\n{\"id\":\"b\",\"label\":null,\"features\":[2]}\n",
      "",
  };
  for (const char* text : bad) {
    write_text(dir / "bad.jsonl", text);
    EXPECT_THROW(load_jsonl(dir / "bad.jsonl"), DataError) << text;
  }
}

TEST(Jsonl, RoundTrip) {
  TempDir dir;
  const auto ds = tiny(20, 5, true);
  save_jsonl(ds, dir / "tiny.jsonl");
  const auto back = load_jsonl(dir / "tiny.jsonl");
  EXPECT_EQ(back, ds);
  save_jsonl(back, dir / "again.jsonl");
  EXPECT_EQ(read_file(dir / "tiny.jsonl"), read_file(dir / "again.jsonl"));
}

TEST(Jsonl, UnlabeledTargetRoundTrip) {
  TempDir dir;
  const auto ds = tiny(6, 3, false);
  save_jsonl(ds, dir / "tiny.jsonl");
  const auto back = load_jsonl(dir / "tiny.jsonl");
  EXPECT_EQ(back.role, Role::kTarget);
  EXPECT_EQ(back, ds);
}

TEST(Binary, JsonlBinaryBitIdentical) {
  TempDir dir;
  auto ds = tiny(50, 7, true, 3);
  ds.features(0, 0) = 1e-40f;  // subnormal
  ds.features(1, 1) = -0.0f;
  save_jsonl(ds, dir / "tiny.jsonl");
  const auto from_jsonl = load_jsonl(dir / "tiny.jsonl");
  save_binary(from_jsonl, dir / "tiny.bin");
  const auto from_bin = load_binary(dir / "tiny.bin");
  ASSERT_EQ(from_bin.features.size(), ds.features.size());
  for (std::size_t i = 0; i < ds.features.size(); ++i) {
    EXPECT_EQ(std::bit_cast<std::uint32_t>(from_bin.features.data()[i]),
              std::bit_cast<std::uint32_t>(ds.features.data()[i]));
  }
  EXPECT_EQ(from_bin.labels, ds.labels);
  EXPECT_EQ(from_bin.ids, ds.ids);
}

TEST(Binary, TruncatedFileIsFormatError) {
  const auto bytes = encode_binary(tiny(10, 4, true));
  for (std::size_t cut : {std::size_t{3}, std::size_t{12}, bytes.size() / 2, bytes.size() - 1}) {
    std::vector<std::uint8_t> part(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(cut));
    EXPECT_THROW(decode_binary(part, "t"), FormatError) << cut;
  }
  auto extra = bytes;
  extra.push_back(0);
  EXPECT_THROW(decode_binary(extra, "t"), FormatError);
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_THROW(decode_binary(bad_magic, "t"), FormatError);
}

TEST(Binary, HeaderAtFixedOffsets) {
  DomainDataset ds;
  ds.name = "big";
  ds.features = Matrix(1000, 32);
  for (std::size_t i = 0; i < 1000; ++i) {
    ds.labels.push_back(0);
    ds.ids.push_back(std::to_string(i));
  }
  const auto bytes = encode_binary(ds);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "CEPC");
  auto u32_at = [&](std::size_t off) {
    return std::uint32_t{bytes[off]} | std::uint32_t{bytes[off + 1]} << 8 |
           std::uint32_t{bytes[off + 2]} << 16 | std::uint32_t{bytes[off + 3]} << 24;
  };
  EXPECT_EQ(bytes[4] | bytes[5] << 8, kBinaryVersion);
  EXPECT_EQ(u32_at(6), 1000u);
  EXPECT_EQ(u32_at(10), 32u);
}

TEST(Gold, CsvAlignedToIds) {
  TempDir dir;
  save_gold_csv({"a", "b", "c"}, {1, 0, 1}, dir / "g.csv");
  EXPECT_EQ(load_gold(dir / "g.csv", {"c", "a"}), (std::vector<int>{1, 1}));
  EXPECT_THROW(load_gold(dir / "g.csv", {"zzz"}), DataError);
  write_text(dir / "bad.csv", "id,y\na,1\n");
  EXPECT_THROW(load_gold(dir / "bad.csv", {"a"}), FormatError);
}

TEST(Manifest, RoundTripAndDomainChecks) {
  TempDir dir;
  save_jsonl(tiny(4, 3, true), dir / "s.jsonl");
  Manifest m;
  m.domains.push_back({"s", Role::kSource, dir / "s.jsonl", 3, std::nullopt});
  save_manifest(m, dir / "manifest.json");
  const auto back = load_manifest(dir / "manifest.json");
  ASSERT_EQ(back.domains.size(), 1u);
  EXPECT_EQ(back.sources().size(), 1u);
  EXPECT_TRUE(back.targets().empty());
  EXPECT_EQ(load_domain(back.domains[0]).name, "s");

  auto wrong_dim = back.domains[0];
  wrong_dim.dim = 4;
  EXPECT_THROW(load_domain(wrong_dim), DataError);
  auto wrong_role = back.domains[0];
  wrong_role.role = Role::kTarget;
  EXPECT_THROW(load_domain(wrong_role), DataError);
}

TEST(Manifest, RejectsDuplicatesAndMissingKeys) {
  TempDir dir;
  write_text(dir / "m.json",
             R"({"domains":[{"name":"a","role":"source","path":"a","dim":1},)"
             R"({"name":"a","role":"source","path":"b","dim":1}]})");
  EXPECT_THROW(load_manifest(dir / "m.json"), ConfigError);
  write_text(dir / "m.json", R"({"domains":[{"name":"a"}]})");
  EXPECT_THROW(load_manifest(dir / "m.json"), ConfigError);
  write_text(dir / "m.json", R"({"sources":[]})");
  EXPECT_THROW(load_manifest(dir / "m.json"), ConfigError);
}

SynthSpec two_domain_spec(double mean, std::size_t n) {
  SynthSpec spec;
  spec.docs_per_domain = n;
  spec.mean_magnitude = mean;
  spec.domains = {{"a", Role::kSource, 0.0, 0.0, -1.0, false},
                  {"b", Role::kSource, 0.0, 0.0, -1.0, false}};
  return spec;
}

TEST(GenSynthetic, DeterministicBytes) {
  TempDir dir;
  auto spec = two_domain_spec(1.5, 300);
  spec.domains.push_back({"t", Role::kTarget, 1.0, 0.2, -1.0, false});
  write_synthetic(spec, dir / "one", true);
  write_synthetic(spec, dir / "two", true);
  for (const char* f : {"a.bin", "b.bin", "t.bin", "t.gold.csv", "manifest.json"}) {
    EXPECT_EQ(read_file(dir / "one" / f), read_file(dir / "two" / f)) << f;
  }
}

TEST(GenSynthetic, ExactPositiveCount) {
  auto spec = two_domain_spec(1.5, 5000);
  spec.domains.resize(1);
  const auto out = gen_synthetic(spec);
  const auto& labels = out[0].dataset.labels;
  EXPECT_EQ(std::count(labels.begin(), labels.end(), 1), 1000);
}

TEST(GenSynthetic, TargetIsUnlabeledWithGold) {
  auto spec = two_domain_spec(1.5, 100);
  spec.domains[1].role = Role::kTarget;
  const auto out = gen_synthetic(spec);
  EXPECT_EQ(out[1].dataset.role, Role::kTarget);
  for (int y : out[1].dataset.labels) EXPECT_EQ(y, kUnlabeled);
  EXPECT_EQ(std::count(out[1].gold_labels.begin(), out[1].gold_labels.end(), 1), 20);
}

TEST(GenSynthetic, AdversarialSwapsClassMeans) {
  auto spec = two_domain_spec(2.0, 2000);
  spec.domains[1].adversarial = true;
  const auto out = gen_synthetic(spec);
  // The positive-class mean of the adversarial domain sits where the
  // negative-class mean of the normal domain is.
  auto class_mean = [](const DomainDataset& d, int y) {
    std::vector<double> m(d.dim(), 0.0);
    double n = 0;
    for (std::size_t r = 0; r < d.size(); ++r) {
      if (d.labels[r] != y) continue;
      for (std::size_t c = 0; c < d.dim(); ++c) m[c] += d.features(r, c);
      ++n;
    }
    for (double& v : m) v /= n;
    return m;
  };
  const auto pos_adv = class_mean(out[1].dataset, 1);
  const auto neg_norm = class_mean(out[0].dataset, 0);
  const auto pos_norm = class_mean(out[0].dataset, 1);
  double to_neg = 0, to_pos = 0;
  for (std::size_t c = 0; c < pos_adv.size(); ++c) {
    to_neg += (pos_adv[c] - neg_norm[c]) * (pos_adv[c] - neg_norm[c]);
    to_pos += (pos_adv[c] - pos_norm[c]) * (pos_adv[c] - pos_norm[c]);
  }
  EXPECT_LT(to_neg, 0.2);
  EXPECT_GT(to_pos, 10.0);
}

TEST(GenSynthetic, ZeroShiftDomainsTransferLinearly) {
  auto spec = two_domain_spec(3.0, 2000);
  const auto out = gen_synthetic(spec);
  const auto& train = out[0].dataset;
  const auto& test = out[1].dataset;
  RngStream rng(1);
  auto net = nn::init_params<float>({{spec.dim, 2}, nn::Activation::kNone, nn::OutputHead::kSoftmax}, rng);
  auto opt = nn::make_optimizer(net, {0.05});
  for (int step = 0; step < 200; ++step) {
    const auto trace = nn::mlp_forward(net, train.features);
    const auto nll = nn::softmax_nll(trace.logits, train.labels);
    const auto grads = nn::mlp_backward(net, trace, nll.grad, nn::GradWrt::kLogits);
    nn::adam_step(net, grads, opt);
  }
  const auto pred = nn::argmax_rows(nn::mlp_forward(net, test.features).outputs);
  EXPECT_GE(eval::f1_metrics(test.labels, pred).f1, 0.95);
}

TEST(GenSynthetic, SpecValidationAndCompactForm) {
  EXPECT_THROW(synth_spec_from_json({{"positive_rate", 1.5}}), SpecError);
  EXPECT_THROW(synth_spec_from_json({{"dim", 1}}), SpecError);
  EXPECT_THROW(synth_spec_from_json(nlohmann::json::parse(
                   R"({"domains":[{"name":"a"},{"name":"a"}]})")),
               SpecError);
  const auto spec = synth_spec_from_json(
      {{"n_domains", 3}, {"shift", 1.0}, {"adversarial_source", 1}});
  ASSERT_EQ(spec.domains.size(), 3u);
  EXPECT_EQ(spec.domains[2].role, Role::kTarget);
  EXPECT_EQ(spec.domains[2].shift, 2.0);
  EXPECT_TRUE(spec.domains[1].adversarial);
  EXPECT_EQ(synth_spec_from_json(to_json(spec)).domains.size(), 3u);
}

TEST(SplitOracle, StratifiedCounts) {
  DomainDataset ds = tiny(100, 2, true);
  for (std::size_t i = 0; i < 100; ++i) ds.labels[i] = i < 20 ? 1 : 0;
  RngStream rng(4);
  const auto [train, test] = split_oracle(ds, 0.8, rng);
  EXPECT_EQ(train.size(), 80u);
  EXPECT_EQ(test.size(), 20u);
  EXPECT_EQ(std::count(train.labels.begin(), train.labels.end(), 1), 16);
  EXPECT_EQ(std::count(test.labels.begin(), test.labels.end(), 1), 4);
}

TEST(SplitOracle, DeterministicDisjointCover) {
  const DomainDataset ds = tiny(57, 2, true);
  RngStream a(5), b(5);
  const auto s1 = split_oracle(ds, 0.8, a);
  const auto s2 = split_oracle(ds, 0.8, b);
  EXPECT_EQ(s1.first, s2.first);
  EXPECT_EQ(s1.second, s2.second);
  std::set<std::string> all(s1.first.ids.begin(), s1.first.ids.end());
  for (const auto& id : s1.second.ids) EXPECT_TRUE(all.insert(id).second) << id;
  EXPECT_EQ(all, std::set<std::string>(ds.ids.begin(), ds.ids.end()));
}

TEST(SplitOracle, RejectsUnlabeledAndBadFraction) {
  RngStream rng(6);
  EXPECT_THROW(split_oracle(tiny(10, 2, false), 0.8, rng), DataError);
  EXPECT_THROW(split_oracle(tiny(10, 2, true), 1.0, rng), InputError);
}

TEST(Dataset, NumClassesAtLeastTwo) {
  std::vector<DomainDataset> sources{tiny(4, 2, true)};
  EXPECT_EQ(num_classes(sources), 2u);
  sources[0].labels[0] = 2;
  EXPECT_EQ(num_classes(sources), 3u);
}

}  // namespace
}  // namespace cepc::data
