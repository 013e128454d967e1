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

#ifndef CEPC_RNG_HPP_
#define CEPC_RNG_HPP_

#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <string_view>

namespace cepc {

/// 64-bit FNV-1a; used to fold labels into seeds.
std::uint64_t fnv1a64(std::string_view bytes) noexcept;

/// One round of the splitmix64 finalizer.
std::uint64_t splitmix64(std::uint64_t x) noexcept;

/// A named, seeded random stream. Identical (seed, label) pairs produce
/// identical draw sequences on every platform: the engine is mt19937_64
/// (fully specified by the standard) and every distribution is implemented
/// here instead of relying on the library's unspecified ones.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed, std::string label = "root");

  std::uint64_t seed() const noexcept { return seed_; }
  const std::string& label() const noexcept { return label_; }

  /// Independent substream, keyed by this stream's seed and the child label.
  RngStream child(std::string_view label) const;

  /// Seed that `child(label)` would use; handy for handing seeds to APIs.
  std::uint64_t derive_seed(std::string_view label) const noexcept;

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform01();
  double uniform(double lo, double hi);

  /// Uniform integer in [0, n); unbiased by rejection. n must be > 0.
  std::size_t index(std::size_t n);

  /// Standard normal via Box-Muller; caches the second variate.
  double normal();

 private:
  std::uint64_t seed_;
  std::string label_;
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace cepc

#endif  // CEPC_RNG_HPP_
