#include <cmath>

#include <gtest/gtest.h>

#include "common.hpp"
#include "peakinf/detect.hpp"
#include "peakinf/errors.hpp"
#include "peakinf/special.hpp"

using namespace peakinf;
using namespace peakinf::test;

namespace {

Peak peak_at(double height, bool degenerate = false) {
    Peak p;
    p.location = vec({0, 0});
    p.height = height;
    p.neg_hessian = Mat::Identity(2, 2) * 100.0;
    p.gradient = Vec::Zero(2);
    p.degenerate = degenerate;
    return p;
}

}  // namespace

TEST(Detect, SurvivalSpotValue) {
    EXPECT_NEAR(tg_survival(3.5, 3.0, 1), 0.20128150998717023158, 1e-13);
    EXPECT_EQ(tg_survival(3.0, 3.0, 2), 1.0);
    EXPECT_THROW((void)tg_survival(2.0, 3.0, 1), Error);
    EXPECT_THROW((void)tg_survival(2.0, 0.0, 1), Error);
}

// Reference thresholds from high-precision bisection.
TEST(Detect, ThresholdMatchesBisection) {
    EXPECT_NEAR(tg_threshold(0.1, 3.0, 2), 3.7624306099445973074, 1e-10);
    EXPECT_NEAR(tg_threshold(0.05, 4.0, 1), 4.6937184724258850386, 1e-10);
    EXPECT_NEAR(tg_threshold(0.01, 2.0, 3), 4.2385674144270600609, 1e-10);
    EXPECT_EQ(tg_threshold(1.0, 3.0, 2), 3.0);
}

TEST(Detect, ThresholdRoundTrip) {
    for (int d : {1, 2, 3})
        for (double v : {0.5, 2.0, 3.0, 6.0})
            for (double a : {1e-6, 0.01, 0.1, 0.5, 0.9}) {
                const double u = tg_threshold(a, v, d);
                EXPECT_GE(u, v);
                EXPECT_NEAR(tg_survival(u, v, d), a, 1e-10 * std::max(a, 1e-2));
            }
}

TEST(Detect, ThresholdMonotone) {
    double prev = 0;
    for (double a = 0.9; a > 1e-8; a /= 2) {
        const double u = tg_threshold(a, 3.0, 2);
        EXPECT_GT(u, prev);
        prev = u;
    }
}

TEST(Detect, PrethresholdDropsDegenerateAndLow) {
    const std::vector<Peak> peaks{peak_at(5.0), peak_at(4.0, true), peak_at(3.0), peak_at(2.9)};
    const auto kept = prethreshold(peaks, 3.0);
    ASSERT_EQ(kept.size(), 1u);
    EXPECT_EQ(kept[0].height, 5.0);
}

TEST(Detect, TgTest) {
    DetectionConfig c;
    c.v = 3.0;
    c.alpha = 0.1;
    c.dimension = 2;
    const std::vector<Peak> pre{peak_at(5.0), peak_at(3.7), peak_at(3.8)};
    const auto r = tg_test(pre, c);
    EXPECT_NEAR(r.u_used, 3.7624306099445973074, 1e-10);
    ASSERT_EQ(r.discoveries.size(), 2u);
    EXPECT_EQ(r.prethresholded.size(), 3u);
    c.explicit_u = 4.0;
    EXPECT_EQ(tg_test(pre, c).discoveries.size(), 1u);
    c.explicit_u = 2.0;
    EXPECT_THROW(c.validate(), Error);
    c.explicit_u.reset();
    c.alpha = 0.0;
    EXPECT_THROW(c.validate(), Error);
}

// Scaling the threshold by s equals detecting on heights divided by s.
TEST(Detect, ScaledEquivalence) {
    DetectionConfig c;
    c.v = 3.0;
    c.alpha = 0.1;
    c.dimension = 2;
    const double s = std::sqrt(2.0);
    std::vector<Peak> raw, unit;
    for (double h = 2.0; h < 9.0; h += 0.173) {
        raw.push_back(peak_at(h));
        unit.push_back(peak_at(h / s));
    }
    raw.push_back(peak_at(8.0, true));
    unit.push_back(peak_at(8.0 / s, true));
    const auto a = detect_scaled(raw, c, s);
    const auto b = tg_test(prethreshold(unit, c.v), c);
    EXPECT_NEAR(a.u_used, s * b.u_used, 1e-12);
    ASSERT_EQ(a.discoveries.size(), b.discoveries.size());
    ASSERT_EQ(a.prethresholded.size(), b.prethresholded.size());
    for (std::size_t i = 0; i < a.discoveries.size(); ++i)
        EXPECT_NEAR(a.discoveries[i].height / s, b.discoveries[i].height, 1e-12);
    EXPECT_THROW((void)detect_scaled(raw, c, 0.0), Error);
}
