// Copyright 2026 The felab Authors
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

// Counter-based random numbers (Philox4x32-10, Salmon et al. 2011).
// A draw is a pure function of (seed, counter), so any ensemble member and
// any step can be regenerated without replaying the stream.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace felab {

using Philox4x32Counter = std::array<std::uint32_t, 4>;
using Philox4x32Key = std::array<std::uint32_t, 2>;

inline Philox4x32Counter philox4x32(Philox4x32Counter ctr, Philox4x32Key key) {
  constexpr std::uint32_t kMul0 = 0xD2511F53u;
  constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
  constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;
  for (int round = 0; round < 10; ++round) {
    const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * ctr[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * ctr[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const auto lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
    const auto lo1 = static_cast<std::uint32_t>(p1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += kWeyl0;
    key[1] += kWeyl1;
  }
  return ctr;
}

/// Uniform on (0, 1) with 53 random bits.
inline double uniform_open(std::uint32_t hi, std::uint32_t lo) {
  const std::uint64_t bits = (static_cast<std::uint64_t>(hi) << 21) ^ (lo >> 11);
  return (static_cast<double>(bits & ((1ull << 53) - 1)) + 0.5) * 0x1.0p-53;
}

/// Identifies one reproducible stream: a seed plus a stream (trajectory) id.
struct StreamId {
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
};

/// Two independent standard normals for (stream, step, block).
inline std::array<double, 2> normal_pair(StreamId id, std::uint64_t step, std::uint32_t block) {
  const Philox4x32Key key = {static_cast<std::uint32_t>(id.seed),
                             static_cast<std::uint32_t>(id.seed >> 32)};
  const Philox4x32Counter ctr = {static_cast<std::uint32_t>(step),
                                 static_cast<std::uint32_t>(step >> 32),
                                 static_cast<std::uint32_t>(id.stream), block};
  const auto r = philox4x32(ctr, key);
  const double u1 = uniform_open(r[0], r[1]);
  const double u2 = uniform_open(r[2], r[3]);
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  return {radius * std::cos(angle), radius * std::sin(angle)};
}

/// Standard normal number `index` of (stream, step).
inline double standard_normal(StreamId id, std::uint64_t step, std::uint32_t index) {
  return normal_pair(id, step, index / 2)[index % 2];
}

/// Small counter-based engine satisfying UniformRandomBitGenerator, for
/// auxiliary sampling (initial conditions, bootstrap resamples).
class PhiloxEngine {
 public:
  using result_type = std::uint32_t;
  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return 0xFFFFFFFFu; }

  explicit PhiloxEngine(std::uint64_t seed, std::uint64_t stream = 0)
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
        stream_(stream) {}

  result_type operator()() {
    if (pos_ == 4) {
      buf_ = philox4x32({static_cast<std::uint32_t>(counter_),
                         static_cast<std::uint32_t>(counter_ >> 32),
                         static_cast<std::uint32_t>(stream_),
                         static_cast<std::uint32_t>(stream_ >> 32) ^ 0xA5A5A5A5u},
                        key_);
      ++counter_;
      pos_ = 0;
    }
    return buf_[pos_++];
  }

  double uniform() {
    const auto hi = (*this)();
    const auto lo = (*this)();
    return uniform_open(hi, lo);
  }

  double normal() {
    const double u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  Philox4x32Key key_;
  std::uint64_t stream_;
  std::uint64_t counter_ = 0;
  Philox4x32Counter buf_{};
  int pos_ = 4;
};

}  // namespace felab
