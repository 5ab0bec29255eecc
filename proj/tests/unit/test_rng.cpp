#include <cmath>
#include <set>

#include <gtest/gtest.h>

#include "peakinf/rng.hpp"

using namespace peakinf;

// Known-answer vectors of the reference Random123 implementation.
TEST(Philox, KnownAnswers) {
    using B = Philox4x32::Block;
    EXPECT_EQ(Philox4x32::bijection({0, 0, 0, 0}, {0, 0}), (B{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8}));
    EXPECT_EQ(Philox4x32::bijection({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, {0xffffffff, 0xffffffff}),
              (B{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd}));
    EXPECT_EQ(Philox4x32::bijection({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0}),
              (B{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1}));
}

TEST(Philox, StreamsAreReproducibleAndDistinct) {
    Philox4x32 a(42, 0, 7), b(42, 0, 7), c(42, 1, 7), d(42, 0, 8), e(43, 0, 7);
    std::set<std::uint32_t> firsts;
    for (int i = 0; i < 100; ++i) {
        const auto x = a();
        EXPECT_EQ(x, b());
        if (i == 0) {
            firsts = {x, c(), d(), e()};
        }
    }
    EXPECT_EQ(firsts.size(), 4u);
}

TEST(Philox, RoughlyUniform) {
    Philox4x32 g(1, 0, 0);
    const int n = 200000;
    std::array<int, 16> bins{};
    double sum = 0;
    for (int i = 0; i < n; ++i) {
        const auto x = g();
        ++bins[x >> 28];
        sum += x / 4294967296.0;
    }
    EXPECT_NEAR(sum / n, 0.5, 0.005);
    double chi2 = 0;
    for (int b : bins) chi2 += (b - n / 16.0) * (b - n / 16.0) / (n / 16.0);
    EXPECT_LT(chi2, 40.0);  // 15 dof, p ~ 5e-4
}
