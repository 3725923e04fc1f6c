// Copyright 2026 The FSFG Authors. All Rights Reserved.
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

#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

namespace fsfg {

/// Counter-based generator: draw i of (seed, stream) is a keyed hash of i.
///
/// Identical (seed, stream) pairs replay identical sequences on every
/// platform, and `split` derives child streams without consuming draws from
/// the parent. Floating-point draws use only integer arithmetic up to the
/// final scaling, except `normal`, which goes through the platform libm.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }
  std::uint64_t counter() const { return counter_; }

  std::uint64_t next_u64();

  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  /// Uniform in [lo, hi) rounded to single precision.
  float uniform_float(float lo, float hi);
  /// Unbiased uniform integer in [0, bound). bound must be positive.
  std::uint64_t below(std::uint64_t bound);
  /// Standard normal via Box-Muller (one value per two uniforms).
  double normal();

  /// `count` distinct indices from [0, population), in draw order.
  std::vector<std::size_t> sample_without_replacement(std::size_t population,
                                                      std::size_t count);

  /// Child generator keyed by (this stream, id). Does not advance *this.
  Rng split(std::uint64_t id) const;
  /// Child generator keyed by a stable hash of `name`.
  Rng split(std::string_view name) const;

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

namespace streams {
inline constexpr std::string_view kInit = "init";
inline constexpr std::string_view kEpisodes = "episodes";
inline constexpr std::string_view kEval = "eval";
inline constexpr std::string_view kSynthetic = "synthetic";
inline constexpr std::string_view kGradCheck = "gradcheck";
inline constexpr std::string_view kExport = "export";
}  // namespace streams

}  // namespace fsfg
