/*
   Copyright 2026 The tilted-sim Authors

   Licensed under the Apache License, Version 2.0 (the "License");
   you may not use this file except in compliance with the License.
   You may obtain a copy of the License at

        http://www.apache.org/licenses/LICENSE-2.0

   Unless required by applicable law or agreed to in writing, software
   distributed under the License is distributed on an "AS IS" BASIS,
   WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
   See the License for the specific language governing permissions and
   limitations under the License.
*/

#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace tilted_sim {

/// Random stream keyed by (master seed, stream id).
///
/// Each logical stream is seeded independently from the key, so the values
/// a stream produces never depend on how many workers consume the other
/// streams or in which order.
class RandomStream {
public:
    RandomStream(std::uint64_t seed, std::uint64_t stream_id = 0) : engine_(make_seq(seed, stream_id)) {}

    double normal() { return normal_(engine_); }
    double uniform(double lo, double hi) { return lo + (hi - lo) * unit_(engine_); }
    double uniform01() { return unit_(engine_); }
    bool coin() { return (engine_() >> 63) != 0; }

    void fill_normal(std::vector<double>& out) {
        for (auto& v : out) v = normal_(engine_);
    }

    std::mt19937_64& engine() noexcept { return engine_; }

private:
    static std::mt19937_64 make_seq(std::uint64_t seed, std::uint64_t stream_id) {
        std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                          static_cast<std::uint32_t>(stream_id), static_cast<std::uint32_t>(stream_id >> 32),
                          0x7417u};
        return std::mt19937_64(seq);
    }

    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    std::uniform_real_distribution<double> unit_{0.0, 1.0};
};

/// Stream ids used across the pipelines, so independent stages never share
/// randomness by accident.
namespace streams {
inline constexpr std::uint64_t samples = 1;
inline constexpr std::uint64_t init_directions = 2;
inline constexpr std::uint64_t init_readout = 3;
inline constexpr std::uint64_t biases = 4;
inline constexpr std::uint64_t theta = 5;
inline constexpr std::uint64_t ridge_samples = 6;
inline constexpr std::uint64_t optimizer_starts = 7;
inline constexpr std::uint64_t holdout = 8;
inline constexpr std::uint64_t monte_carlo = 1000;  // + shard index
inline constexpr std::uint64_t surrogate_monte_carlo = 1u << 20;  // + shard index
}  // namespace streams

}  // namespace tilted_sim
