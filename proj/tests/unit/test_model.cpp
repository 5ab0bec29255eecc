#include <cmath>

#include <gtest/gtest.h>

#include "common.hpp"
#include "peakinf/errors.hpp"
#include "peakinf/model.hpp"
#include "peakinf/rng.hpp"

using namespace peakinf;
using namespace peakinf::test;

TEST(Kernel, Values) {
    const auto k = se_kernel();
    EXPECT_DOUBLE_EQ(kernel_eval(k, vec({0, 0}), vec({0, 0})), 1.0);
    EXPECT_NEAR(kernel_eval(k, vec({0, 0}), vec({0.15, 0})), std::exp(-0.5), 1e-15);
    EXPECT_NEAR(kernel_eval(k, vec({0.1, 0.2}), vec({0.1, -0.1})), std::exp(-2.0), 1e-15);
    EXPECT_DOUBLE_EQ(kernel_eval(k, vec({0.3, -0.2}), vec({0.1, 0.4})), kernel_eval(k, vec({0.1, 0.4}), vec({0.3, -0.2})));
}

TEST(Kernel, RejectsBadSpec) {
    EXPECT_THROW(se_kernel(0.0).validate(), Error);
    EXPECT_THROW(se_kernel(-1.0).validate(), Error);
    EXPECT_THROW(se_kernel(0.1, 0).validate(), Error);
}

TEST(Kernel, BundleIsotropic) {
    const auto b = derivative_bundle(se_kernel());
    EXPECT_NEAR(b.lambda(0, 0), 44.444444444444, 1e-9);
    EXPECT_NEAR(b.lambda(1, 1), 44.444444444444, 1e-9);
    EXPECT_DOUBLE_EQ(b.lambda(0, 1), 0.0);
    EXPECT_NEAR(b.sigma1_sq, 44.444444444444, 1e-9);
    // SE kernels have vanishing odd derivatives at the origin.
    EXPECT_EQ(b.k21.max_abs(), 0.0);
    EXPECT_EQ(b.gamma.max_abs(), 0.0);
}

// Lambda equals -Hess_s k(s, 0) at s = 0, checked by finite differences.
TEST(Kernel, BundleMatchesFiniteDifferences) {
    for (double l : {0.1, 0.15, 0.4}) {
        const auto k = se_kernel(l, 2);
        const auto b = derivative_bundle(k);
        const double h = 1e-4 * l;
        const Vec o = Vec::Zero(2);
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j) {
                Vec pp = o, pm = o, mp = o, mm = o;
                pp(i) += h; pp(j) += h;
                pm(i) += h; pm(j) -= h;
                mp(i) -= h; mp(j) += h;
                mm(i) -= h; mm(j) -= h;
                const double d2 = (kernel_eval(k, pp, o) - kernel_eval(k, pm, o) - kernel_eval(k, mp, o) +
                                   kernel_eval(k, mm, o)) / (4 * h * h);
                EXPECT_NEAR(-d2, b.lambda(i, j), 1e-5 * b.lambda(0, 0)) << l << ' ' << i << j;
            }
    }
}

TEST(Signal, PeakValues) {
    const auto s = single_bump(5.0);
    EXPECT_DOUBLE_EQ(signal_eval(*s, vec({0, 0})), 5.0);
    EXPECT_NEAR(signal_eval(*s, vec({0.15, 0})), 5.0 * std::exp(-0.5), 1e-14);
    const Mat H = signal_hess(*s, vec({0, 0}));
    EXPECT_NEAR(H(0, 0), -222.2222222222, 1e-8);
    EXPECT_NEAR(H(1, 1), -222.2222222222, 1e-8);
    EXPECT_NEAR(H(0, 1), 0.0, 1e-12);
    EXPECT_NEAR(signal_grad(*s, vec({0, 0})).norm(), 0.0, 1e-14);
}

TEST(Signal, OutsideDomainThrows) {
    const auto s = single_bump(5.0);
    EXPECT_THROW((void)signal_eval(*s, vec({1.5, 0})), Error);
}

// Analytic derivatives agree with central differences at random points,
// tapered and untapered.
TEST(Signal, DerivativesMatchFiniteDifferences) {
    for (int taper : {0, 4}) {
        SignalSpec s;
        s.domain = square(-1, 1);
        s.bumps = {{vec({-0.3, 0.1}), 4.0, 0.12}, {vec({0.35, -0.2}), 6.0, 0.1}};
        s.taper_order = taper;
        s.taper_radius = 3.0;
        Philox4x32 g(5, 0, static_cast<std::uint32_t>(taper));
        for (int rep = 0; rep < 100; ++rep) {
            Vec t(2);
            t(0) = -0.7 + 1.4 * (g() / 4294967296.0);
            t(1) = -0.7 + 1.4 * (g() / 4294967296.0);
            const double h = 1e-5;
            const Vec grad = signal_grad(s, t);
            const Mat hess = signal_hess(s, t);
            const Tensor3 third = signal_third(s, t);
            for (int i = 0; i < 2; ++i) {
                Vec tp = t, tm = t;
                tp(i) += h;
                tm(i) -= h;
                const double scale = 1.0 + std::abs(grad(i));
                EXPECT_NEAR((signal_eval(s, tp) - signal_eval(s, tm)) / (2 * h), grad(i), 1e-5 * scale);
                const Vec dg = (signal_grad(s, tp) - signal_grad(s, tm)) / (2 * h);
                const Mat dh = (signal_hess(s, tp) - signal_hess(s, tm)) / (2 * h);
                for (int j = 0; j < 2; ++j) {
                    EXPECT_NEAR(dg(j), hess(j, i), 1e-5 * (1.0 + hess.cwiseAbs().maxCoeff()));
                    for (int k = 0; k < 2; ++k)
                        EXPECT_NEAR(dh(j, k), third(j, k, i), 1e-5 * (1.0 + third.max_abs()));
                }
            }
        }
    }
}

TEST(Signal, TaperGivesCompactSupport) {
    SignalSpec s;
    s.domain = square(-1, 1);
    s.bumps = {{vec({0, 0}), 5.0, 0.1}};
    s.taper_order = 4;
    s.taper_radius = 3.0;
    EXPECT_NEAR(s.support_radius(s.bumps[0]), 0.3, 1e-15);
    EXPECT_EQ(signal_eval(s, vec({0.31, 0})), 0.0);
    EXPECT_GT(signal_eval(s, vec({0.29, 0})), 0.0);
    EXPECT_TRUE(std::isinf(single_bump(5.0)->support_radius(single_bump(5.0)->bumps[0])));
}

TEST(Signal, ValidationRejectsBadLayouts) {
    SignalSpec s;
    s.domain = square(-1, 1);
    s.bumps = {{vec({0.9, 0}), 5.0, 0.15}};  // too close to the boundary
    EXPECT_THROW(s.validate(), Error);
    s.bumps = {{vec({0, 0}), 5.0, 0.15}, {vec({0.05, 0}), 5.0, 0.15}};  // overlapping
    EXPECT_THROW(s.validate(), Error);
    s.bumps = {{vec({0, 0}), -1.0, 0.15}};
    EXPECT_THROW(s.validate(), Error);
    s.bumps = {{vec({0, 0}), 5.0, 0.15}};
    EXPECT_NO_THROW(s.validate());
}

TEST(TruePeaks, SingleBump) {
    const auto peaks = true_peaks(*single_bump(5.0));
    ASSERT_EQ(peaks.size(), 1u);
    EXPECT_NEAR(peaks[0].location.norm(), 0.0, 1e-10);
    EXPECT_NEAR(peaks[0].height, 5.0, 1e-12);
    EXPECT_NEAR(peaks[0].neg_hessian(0, 0), 222.2222222222, 1e-6);
    EXPECT_NEAR(peaks[0].delta, 0.0045, 1e-12);
}

TEST(TruePeaks, SeparatedBumpsGiveOnePeakEach) {
    SignalSpec s;
    s.domain = square(-1, 1);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) s.bumps.push_back({vec({-0.6 + 0.6 * j, -0.6 + 0.6 * i}), 3.0 + i + j, 0.1});
    s.taper_order = 4;
    const auto peaks = true_peaks(s);
    ASSERT_EQ(peaks.size(), 9u);
    for (std::size_t k = 0; k < 9; ++k) {
        EXPECT_NEAR((peaks[k].location - s.bumps[k].center).norm(), 0.0, 1e-8);
        EXPECT_NEAR(peaks[k].height, s.bumps[k].amplitude, 1e-10);
    }
}

TEST(Scales, WorkedExample) {
    const auto b = derivative_bundle(se_kernel());
    const auto peaks = true_peaks(*single_bump(5.0));
    const auto c = curvature_scales(peaks, b);
    EXPECT_NEAR(c.delta_n, 0.0045, 1e-12);
    EXPECT_NEAR(c.lambda_n, 222.2222222, 1e-6);
    EXPECT_NEAR(c.Delta_n, std::sqrt(6 * std::log(222.2222222222)), 1e-9);
    EXPECT_NEAR(c.Delta_n, 5.694, 1e-3);
    EXPECT_NEAR(c.eps_n, 0.171, 1e-3);
}

TEST(Scales, LambdaEqualsE) {
    // A curvature with lambda_n = e gives log(lambda_n) = 1 and Delta_n = sqrt(C).
    const auto b = derivative_bundle(se_kernel());
    TruePeak p;
    p.location = vec({0, 0});
    p.height = 1.0;
    p.neg_hessian = Mat::Identity(2, 2) * std::exp(1.0);
    p.delta = std::exp(-1.0);
    const auto c = curvature_scales({p}, b, 6.0);
    EXPECT_NEAR(c.Delta_n, std::sqrt(6.0), 1e-12);
    EXPECT_NEAR(c.eps_n, std::exp(-1.0) * std::sqrt(6.0 * 44.4444444444444), 1e-10);
}

TEST(Scales, Errors) {
    const auto b = derivative_bundle(se_kernel());
    const auto peaks = true_peaks(*single_bump(5.0));
    EXPECT_THROW((void)curvature_scales(peaks, b, 4.0), Error);
    EXPECT_THROW((void)curvature_scales({}, b), Error);
    TruePeak flat = peaks[0];
    flat.delta = 2.0;
    try {
        (void)curvature_scales({flat}, b);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::curvature_too_low);
    }
}

TEST(Scales, ScaledFieldMatchesDividedSignal) {
    const auto b = derivative_bundle(se_kernel());
    const auto full = true_peaks(*single_bump(8.0));
    const auto half = true_peaks(*single_bump(4.0));
    const auto a = curvature_scales_scaled(full, b, 2.0);
    const auto c = curvature_scales(half, b);
    EXPECT_NEAR(a.eps_n, c.eps_n, 1e-14);
    EXPECT_NEAR(a.Delta_n, c.Delta_n, 1e-14);
}
