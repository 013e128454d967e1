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

#include "cepc/io_util.hpp"

#include <cmath>
#include <limits>
#include <string>

#include <gtest/gtest.h>

#include "cepc/error.hpp"
#include "cepc/rng.hpp"
#include "test_util.hpp"

namespace cepc {
namespace {

TEST(FormatNumbers, RoundTripExactly) {
  RngStream rng(1);
  for (int i = 0; i < 1000; ++i) {
    const double d = rng.normal() * std::pow(10.0, rng.uniform(-8, 8));
    EXPECT_EQ(std::stod(format_double(d)), d);
    const float f = static_cast<float>(d);
    EXPECT_EQ(std::stof(format_float(f)), f);
  }
  EXPECT_EQ(format_double(0.5), "0.5");
  EXPECT_EQ(format_double(1.0), "1");
}

TEST(Csv, QuotedFieldsRoundTrip) {
  testing::TempDir dir;
  const std::string text = "a,b\n" + csv_field("x,y") + "," +
                           csv_field("say \"hi\"") + "\nplain,2\n";
  write_text(dir / "t.csv", text);
  const auto rows = read_csv(dir / "t.csv");
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[1][0], "x,y");
  EXPECT_EQ(rows[1][1], "say \"hi\"");
  EXPECT_EQ(rows[2][1], "2");
}

TEST(Bytes, LittleEndianRoundTrip) {
  ByteWriter w;
  w.u16(0x0102);
  w.u32(0xA0B0C0D0u);
  w.u64(0x1122334455667788ull);
  w.f32(-1.5f);
  w.f64(std::numeric_limits<double>::denorm_min());
  w.bytes("ok");
  const auto buf = std::move(w).take();
  EXPECT_EQ(buf[0], 0x02);
  EXPECT_EQ(buf[1], 0x01);
  ByteReader r(buf, "buf");
  EXPECT_EQ(r.u16(), 0x0102);
  EXPECT_EQ(r.u32(), 0xA0B0C0D0u);
  EXPECT_EQ(r.u64(), 0x1122334455667788ull);
  EXPECT_EQ(r.f32(), -1.5f);
  EXPECT_EQ(r.f64(), std::numeric_limits<double>::denorm_min());
  EXPECT_EQ(r.bytes(2), "ok");
  EXPECT_TRUE(r.at_end());
  EXPECT_THROW(r.u8(), FormatError);
}

TEST(Files, MissingFileIsIoError) {
  EXPECT_THROW(read_file("/nonexistent/cepc/file"), IoError);
}

TEST(Json, MalformedIsConfigError) {
  testing::TempDir dir;
  write_text(dir / "bad.json", "{ not json");
  EXPECT_THROW(read_json(dir / "bad.json"), ConfigError);
}

TEST(Hash, StableHex) {
  EXPECT_EQ(hash_hex(""), "cbf29ce484222325");
  EXPECT_EQ(hash_hex("abc").size(), 16u);
}

}  // namespace
}  // namespace cepc
