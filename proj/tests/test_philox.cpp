#include <catch2/catch_amalgamated.hpp>

#include <set>

#include "iconsim/philox.hpp"

using iconsim::Philox4x32;

// Known-answer vectors published with Random123 (kat_vectors, philox4x32_10).
TEST_CASE("philox matches the Random123 known-answer vectors", "[philox]") {
    using C = Philox4x32::counter_type;
    using K = Philox4x32::key_type;
    CHECK(Philox4x32::generate(C{0, 0, 0, 0}, K{0, 0}) == C{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
    CHECK(Philox4x32::generate(C{0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, K{0xffffffff, 0xffffffff}) ==
          C{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
    CHECK(Philox4x32::generate(C{0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, K{0xa4093822, 0x299f31d0}) ==
          C{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("philox is usable at compile time", "[philox]") {
    constexpr auto r = Philox4x32::generate({0, 0, 0, 0}, {0, 0});
    STATIC_REQUIRE(r[0] == 0x6627e8d5u);
}

TEST_CASE("seed keys split the seed into two words", "[philox]") {
    CHECK(Philox4x32::key_from_seed(0x0123456789abcdefull) == Philox4x32::key_type{0x89abcdef, 0x01234567});
}

TEST_CASE("uniform01 stays in [0, 1)", "[philox]") {
    CHECK(iconsim::uniform01(0) == 0.0);
    CHECK(iconsim::uniform01(~0ull) < 1.0);
    CHECK(iconsim::uniform01(~0ull) == 1.0 - 0x1.0p-53);
    CHECK(iconsim::join64(0xdeadbeef, 0x01234567) == 0x01234567deadbeefull);
}

TEST_CASE("neighbouring counters give distinct, roughly uniform draws", "[philox]") {
    const auto key = Philox4x32::key_from_seed(42);
    std::set<std::uint64_t> seen;
    double sum = 0.0;
    const int n = 20000;
    for (std::uint32_t i = 0; i < n; ++i) {
        const auto r = Philox4x32::generate({i, 0, 0, 0}, key);
        const auto bits = iconsim::join64(r[0], r[1]);
        seen.insert(bits);
        sum += iconsim::uniform01(bits);
    }
    CHECK(seen.size() == n);
    CHECK(sum / n == Catch::Approx(0.5).margin(0.01));
}
