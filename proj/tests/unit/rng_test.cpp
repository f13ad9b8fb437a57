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


#include <cmath>
#include <set>
#include <sstream>
#include <vector>

#include "doctest.h"
#include "smfmagic/binary_io.hpp"
#include "smfmagic/rng.hpp"

using namespace smfmagic;

TEST_CASE("philox4x32-10 reproduces the published known-answer vectors") {
    using A4 = std::array<std::uint32_t, 4>;
    CHECK(philox4x32({0, 0, 0, 0}, {0, 0}) == A4{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u});
    CHECK(philox4x32({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu}, {0xffffffffu, 0xffffffffu}) ==
          A4{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu});
    CHECK(philox4x32({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u}, {0xa4093822u, 0x299f31d0u}) ==
          A4{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u});
}

TEST_CASE("streams are deterministic and keyed") {
    RngStream a = RngStream::for_stream(7, 3);
    RngStream b = RngStream::for_stream(7, 3);
    RngStream c = RngStream::for_stream(7, 4);
    int differ = 0;
    for (int i = 0; i < 100; ++i) {
        auto x = a.next_u64();
        CHECK(x == b.next_u64());
        differ += x != c.next_u64();
    }
    CHECK(differ == 100);
}

TEST_CASE("state restore resumes mid-block") {
    RngStream a(42);
    for (int i = 0; i < 5; ++i) a.next_u64();
    RngStream b;
    b.restore(a.state());
    for (int i = 0; i < 10; ++i) CHECK(a.next_u64() == b.next_u64());

    std::stringstream io;
    BinaryWriter w(io);
    w.put(a.state());
    BinaryReader r(io);
    RngStream c;
    c.restore(r.get<RngStream::State>());
    CHECK(c.next_u64() == a.next_u64());
}

TEST_CASE("uniform and below have the right moments") {
    RngStream r(11);
    const int n = 200000;
    double s = 0, s2 = 0;
    std::vector<int> counts(6, 0);
    for (int i = 0; i < n; ++i) {
        double u = r.uniform();
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
        s += u;
        s2 += u * u;
        counts[r.below(6)]++;
    }
    CHECK(s / n == doctest::Approx(0.5).epsilon(0.01));
    CHECK(s2 / n - (s / n) * (s / n) == doctest::Approx(1.0 / 12).epsilon(0.02));
    for (int k : counts) CHECK(std::abs(k - n / 6.0) < 5 * std::sqrt(n / 6.0));
}

TEST_CASE("normal variates have zero mean and unit variance") {
    RngStream r(5);
    const int n = 200000;
    double s = 0, s2 = 0, sc = 0, sc2 = 0;
    for (int i = 0; i < n; ++i) {
        double z = r.normal();
        s += z;
        s2 += z * z;
        double y = counter_normal(99, static_cast<std::uint64_t>(i));
        sc += y;
        sc2 += y * y;
    }
    CHECK(std::abs(s / n) < 5.0 / std::sqrt(n));
    CHECK(s2 / n == doctest::Approx(1.0).epsilon(0.02));
    CHECK(std::abs(sc / n) < 5.0 / std::sqrt(n));
    CHECK(sc2 / n == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("counter draws do not depend on draw order") {
    double a = counter_uniform(3, 17);
    for (int i = 0; i < 50; ++i) counter_uniform(3, static_cast<std::uint64_t>(i));
    CHECK(counter_uniform(3, 17) == a);
    CHECK(counter_uniform(3, 17, 1) != a);
}

TEST_CASE("hashes separate nearby inputs") {
    std::set<std::uint64_t> seen;
    for (std::uint64_t i = 0; i < 1000; ++i) seen.insert(hash_combine(1, i));
    CHECK(seen.size() == 1000);
    CHECK(hash_string("abc") != hash_string("abd"));
    CHECK(hash_string("abc") == hash_string("abc"));
}
