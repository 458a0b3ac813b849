// Copyright 2026 The spr-annotate Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace spr {

/// One SplitMix64 step. Returns (value, next state).
///
/// The constants are fixed so that text orderings can be reproduced from any
/// language given the same seed.
constexpr std::pair<std::uint64_t, std::uint64_t> prng_next(std::uint64_t state) noexcept {
    state += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return {z ^ (z >> 31), state};
}

/// Stateful wrapper around prng_next, usable wherever a UniformRandomBitGenerator
/// is expected.
class SplitMix64 {
public:
    using result_type = std::uint64_t;

    explicit constexpr SplitMix64(std::uint64_t seed = 0) noexcept : state_(seed) {}

    constexpr result_type operator()() noexcept {
        auto [value, next] = prng_next(state_);
        state_ = next;
        return value;
    }

    /// Uniform double in [0, 1) using the top 53 bits.
    constexpr double uniform() noexcept {
        return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
    }

    /// Uniform integer in [lo, hi] (inclusive). Modulo bias is accepted.
    constexpr std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) noexcept {
        if (hi <= lo) return lo;
        const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
        return lo + static_cast<std::int64_t>((*this)() % span);
    }

    constexpr bool bernoulli(double p) noexcept { return uniform() < p; }

    constexpr std::uint64_t state() const noexcept { return state_; }

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return ~result_type{0}; }

private:
    std::uint64_t state_;
};

/// 64-bit FNV-1a over the UTF-8 bytes of `text`.
constexpr std::uint64_t fnv1a64(std::string_view text) noexcept {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    return h;
}

/// Seed used for one respondent: the experiment seed with the respondent id hash
/// XORed in, so orders differ per respondent but stay reproducible.
constexpr std::uint64_t respondent_seed(std::uint64_t experiment_seed,
                                        std::string_view respondent_id) noexcept {
    return experiment_seed ^ fnv1a64(respondent_id);
}

/// Fisher-Yates from the last index down to 1 with j = prng_next value mod (i + 1).
template <typename T>
void shuffle_in_place(std::uint64_t seed, std::span<T> items) {
    std::uint64_t state = seed;
    for (std::size_t i = items.size(); i-- > 1;) {
        auto [value, next] = prng_next(state);
        state = next;
        const auto j = static_cast<std::size_t>(value % (i + 1));
        using std::swap;
        swap(items[i], items[j]);
    }
}

std::vector<std::string> shuffle_order(std::uint64_t seed, std::vector<std::string> items);

}  // namespace spr
