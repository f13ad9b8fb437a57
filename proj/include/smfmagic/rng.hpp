// Copyright 2026 The smfmagic Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <array>
#include <cstdint>
#include <string_view>

namespace smfmagic {

/// SplitMix64 finalizer. Used to derive stream keys and seeds, never as a
/// generator on its own.
constexpr std::uint64_t mix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

constexpr std::uint64_t hash_combine(std::uint64_t seed, std::uint64_t value) {
    return mix64(seed ^ mix64(value + 0x632BE59BD9B4E019ull));
}

std::uint64_t hash_string(std::string_view text, std::uint64_t seed = 0);

/// Philox4x32-10 block function: maps (counter, key) to 128 random bits.
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key);

/// Counter-based random stream. The whole state is (key, block, lane), so a
/// stream can be checkpointed and restored exactly, and distinct keys give
/// independent streams without any draw-order coupling.
class RngStream {
  public:
    struct State {
        std::uint64_t key = 0;
        std::uint64_t block = 0;
        std::uint32_t lane = 2;
        friend bool operator==(const State&, const State&) = default;
    };

    RngStream() = default;
    explicit RngStream(std::uint64_t key) { state_.key = key; }
    static RngStream for_stream(std::uint64_t master_seed, std::uint64_t stream_id) {
        return RngStream(hash_combine(mix64(master_seed), stream_id));
    }

    std::uint64_t next_u64() {
        if (state_.lane >= 2) {
            refill();
        }
        return buffer_[state_.lane++];
    }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform integer in [0, bound) by multiply-shift.
    std::uint64_t below(std::uint64_t bound) {
        return static_cast<std::uint64_t>((static_cast<unsigned __int128>(next_u64()) * bound) >> 64);
    }

    double normal();

    const State& state() const { return state_; }
    void restore(const State& s) {
        state_ = s;
        if (state_.lane < 2) {
            fill_buffer(state_.block - 1);
        }
    }

  private:
    void refill() {
        fill_buffer(state_.block);
        ++state_.block;
        state_.lane = 0;
    }
    void fill_buffer(std::uint64_t block);

    State state_{};
    std::array<std::uint64_t, 2> buffer_{};
};

/// Stateless counter-based draws: value number `index` of the stream keyed by
/// `key`. Regenerating any single value never depends on any other draw.
double counter_uniform(std::uint64_t key, std::uint64_t index, int which = 0);
double counter_normal(std::uint64_t key, std::uint64_t index);

}  // namespace smfmagic
